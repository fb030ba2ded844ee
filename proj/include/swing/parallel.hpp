#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace swing {

// Per-thread override of the worker count; 0 means none.
inline unsigned& thread_count_override() {
  thread_local unsigned count = 0;
  return count;
}

// Pins parallel_for calls made from this thread to `count` workers.
class ScopedThreadCount {
 public:
  explicit ScopedThreadCount(unsigned count) : saved_(thread_count_override()) {
    thread_count_override() = count;
  }
  ~ScopedThreadCount() { thread_count_override() = saved_; }
  ScopedThreadCount(const ScopedThreadCount&) = delete;
  ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
  unsigned saved_;
};

// Worker count: the scoped override, else SWING_NUM_THREADS, else hardware
// concurrency.
inline unsigned thread_count() {
  if (thread_count_override() > 0) return thread_count_override();
  if (const char* env = std::getenv("SWING_NUM_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write results into per-index slots so output never depends on scheduling.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace swing
