#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace swing {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidKernel : public Error {
 public:
  using Error::Error;
};

// Raised when a truncated power series has not converged at its last term.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double tail)
      : Error(what), tail_(tail) {}
  double tail() const noexcept { return tail_; }

 private:
  double tail_;
};

class DegenerateTransition : public Error {
 public:
  DegenerateTransition(const std::string& what, double denominator)
      : Error(what), denominator_(denominator) {}
  double denominator() const noexcept { return denominator_; }

 private:
  double denominator_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace swing
