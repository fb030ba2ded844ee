#include "swing/igraph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "swing/error.hpp"

namespace swing {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidInput(std::string(what) + " must be a positive finite number");
  }
}

}  // namespace

PointCloud::PointCloud(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw InvalidInput("point cloud must contain at least one point");
  if (points_.cols() < 1) throw InvalidInput("point cloud dimension must be at least 1");
  if (!points_.allFinite()) throw InvalidInput("point cloud coordinates must be finite");
}

PointCloud PointCloud::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidInput("point cloud must contain at least one point");
  const std::size_t d = rows.front().size();
  Matrix points(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) {
      throw InvalidInput("point " + std::to_string(i) + " has dimension " +
                         std::to_string(rows[i].size()) + ", expected " + std::to_string(d));
    }
    for (std::size_t k = 0; k < d; ++k) points(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  }
  return PointCloud(std::move(points));
}

PointCloud read_point_cloud(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError("not a number: '" + token + "'", line_no);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("expected " + std::to_string(rows.front().size()) + " coordinates, got " +
                           std::to_string(row.size()),
                       line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no points found", line_no == 0 ? 1 : line_no);
  return PointCloud::from_rows(rows);
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return read_point_cloud(in);
}

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
  const auto precision = out.precision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    for (Index k = 0; k < cloud.dim(); ++k) {
      if (k) out << ' ';
      out << cloud.points()(i, k);
    }
    out << '\n';
  }
  out.precision(precision);
}

WeightFunction::WeightFunction(Variant v) : v_(v) {
  std::visit(overloaded{
                 [](const GaussianRBF& g) { require_positive(g.bandwidth, "Gaussian bandwidth"); },
                 [](const StepL1& s) { require_positive(s.epsilon, "step epsilon"); },
                 [](const StepL2& s) { require_positive(s.epsilon, "step epsilon"); },
             },
             v_);
}

double WeightFunction::operator()(const Eigen::Ref<const Vector>& z) const {
  return std::visit(
      overloaded{
          [&](const GaussianRBF& g) {
            return std::exp(-z.squaredNorm() / (2.0 * g.bandwidth * g.bandwidth));
          },
          [&](const StepL1& s) { return z.lpNorm<1>() <= s.epsilon ? 1.0 : 0.0; },
          [&](const StepL2& s) { return z.squaredNorm() <= s.epsilon * s.epsilon ? 1.0 : 0.0; },
      },
      v_);
}

double WeightFunction::log_value(const Eigen::Ref<const Vector>& z) const {
  if (const auto* g = std::get_if<GaussianRBF>(&v_)) {
    return -z.squaredNorm() / (2.0 * g->bandwidth * g->bandwidth);
  }
  const double value = (*this)(z);
  return value > 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
}

std::optional<double> WeightFunction::gaussian_bandwidth() const {
  if (const auto* g = std::get_if<GaussianRBF>(&v_)) return g->bandwidth;
  return std::nullopt;
}

WeightFunction WeightFunction::tempered(double temperature) const {
  require_positive(temperature, "temperature");
  if (const auto* g = std::get_if<GaussianRBF>(&v_)) {
    return WeightFunction(GaussianRBF{g->bandwidth * std::sqrt(temperature)});
  }
  return *this;
}

std::string WeightFunction::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const GaussianRBF& g) { os << "gaussian(bandwidth=" << g.bandwidth << ")"; },
                 [&](const StepL1& s) { os << "step_l1(eps=" << s.epsilon << ")"; },
                 [&](const StepL2& s) { os << "step_l2(eps=" << s.epsilon << ")"; },
             },
             v_);
  return os.str();
}

KernelSpec::KernelSpec(Family family, int truncation) : family_(family), truncation_(truncation) {
  if (truncation_ < 0) throw InvalidInput("kernel truncation must be nonnegative");
  std::visit(overloaded{
                 [](const Diffusion& k) {
                   if (!std::isfinite(k.lambda) || k.lambda <= 0) {
                     throw InvalidKernel("diffusion lambda must be positive");
                   }
                 },
                 [](const PStepRandomWalk& k) {
                   if (k.steps < 1) throw InvalidKernel("p-step kernel needs p >= 1");
                   if (!std::isfinite(k.shift)) throw InvalidKernel("p-step shift must be finite");
                 },
                 [](const RegularizedLaplacian& k) {
                   if (!std::isfinite(k.gamma) || k.gamma <= 0) {
                     throw InvalidKernel("regularized Laplacian gamma must be positive");
                   }
                 },
             },
             family_);
}

std::vector<double> KernelSpec::coefficients(int n) const {
  std::vector<double> alpha(static_cast<std::size_t>(std::max(n, 0)), 0.0);
  if (alpha.empty()) return alpha;
  std::visit(overloaded{
                 [&](const Diffusion& k) {
                   alpha[0] = 1.0;
                   for (std::size_t i = 1; i < alpha.size(); ++i) {
                     alpha[i] = alpha[i - 1] * k.lambda / static_cast<double>(i);
                   }
                 },
                 [&](const PStepRandomWalk& k) {
                   double binom = 1.0;
                   for (int i = 0; i < n && i <= k.steps; ++i) {
                     if (i > 0) binom = binom * (k.steps - i + 1) / i;
                     alpha[static_cast<std::size_t>(i)] = binom * std::pow(k.shift, k.steps - i);
                   }
                 },
                 [&](const RegularizedLaplacian& k) {
                   alpha[0] = 1.0;
                   for (std::size_t i = 1; i < alpha.size(); ++i) alpha[i] = alpha[i - 1] * k.gamma;
                 },
             },
             family_);
  return alpha;
}

double KernelSpec::coefficient(int k) const {
  if (k < 0) return 0.0;
  return coefficients(k + 1).back();
}

std::string KernelSpec::name() const {
  return std::visit(overloaded{
                        [](const Diffusion&) { return std::string("diffusion"); },
                        [](const PStepRandomWalk&) { return std::string("pstep"); },
                        [](const RegularizedLaplacian&) { return std::string("dreg"); },
                    },
                    family_);
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const Diffusion& k) { os << "diffusion:" << k.lambda; },
                 [&](const PStepRandomWalk& k) { os << "pstep:" << k.steps << ':' << k.shift; },
                 [&](const RegularizedLaplacian& k) { os << "dreg:" << k.gamma; },
             },
             family_);
  return os.str();
}

KernelSpec parse_kernel_spec(const std::string& text, int truncation) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty()) throw InvalidInput("empty kernel specification");
  auto number = [&](std::size_t i, double fallback) {
    if (i >= parts.size()) return fallback;
    try {
      return std::stod(parts[i]);
    } catch (const std::exception&) {
      throw InvalidInput("bad kernel parameter '" + parts[i] + "' in '" + text + "'");
    }
  };
  const std::string& family = parts[0];
  if (family == "diffusion") return KernelSpec(Diffusion{number(1, 0.5)}, truncation);
  if (family == "pstep") {
    return KernelSpec(PStepRandomWalk{static_cast<int>(number(1, 2)), number(2, 1.0)}, truncation);
  }
  if (family == "dreg") return KernelSpec(RegularizedLaplacian{number(1, 0.05)}, truncation);
  throw InvalidInput("unknown kernel family '" + family + "' (expected diffusion, pstep or dreg)");
}

Modulation deconvolve_modulation(std::span<const double> alpha) {
  if (alpha.empty()) return Modulation{};
  if (!(alpha[0] > 0.0)) {
    throw InvalidKernel("alpha_0 must be positive to deconvolve a real modulation, got " +
                        std::to_string(alpha[0]));
  }
  std::vector<double> rho(alpha.size(), 0.0);
  rho[0] = std::sqrt(alpha[0]);
  for (std::size_t k = 1; k < alpha.size(); ++k) {
    double cross = 0.0;
    for (std::size_t p = 1; p < k; ++p) cross += rho[p] * rho[k - p];
    rho[k] = (alpha[k] - cross) / (2.0 * rho[0]);
  }
  return Modulation(std::move(rho));
}

Modulation deconvolve_modulation(const KernelSpec& spec, int max_length) {
  if (max_length < 0) throw InvalidInput("modulation length must be nonnegative");
  const auto alpha = spec.coefficients(max_length + 1);
  return deconvolve_modulation(alpha);
}

std::vector<double> self_convolve(const Modulation& rho, int n) {
  std::vector<double> out(static_cast<std::size_t>(std::max(n, 0)), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double sum = 0.0;
    for (std::size_t p = 0; p <= k; ++p) sum += rho(k - p) * rho(p);
    out[k] = sum;
  }
  return out;
}

Matrix materialize_weights(const PointCloud& cloud, const WeightFunction& f,
                           const WeightOptions& options) {
  const Index n = cloud.size();
  if (n > options.oracle_cap) {
    throw InvalidInput("materialize_weights: N = " + std::to_string(n) + " exceeds oracle cap " +
                       std::to_string(options.oracle_cap));
  }
  const Matrix& p = cloud.points();
  Matrix W(n, n);
  const double self = options.self_loops ? f(Vector::Zero(cloud.dim())) : 0.0;
  const auto bandwidth = f.gaussian_bandwidth();
  for (Index j = 0; j < n; ++j) {
    W(j, j) = self;
    for (Index i = j + 1; i < n; ++i) {
      double w;
      if (bandwidth) {
        const double sq = (p.row(i) - p.row(j)).squaredNorm();
        w = std::exp(-sq / (2.0 * *bandwidth * *bandwidth));
      } else {
        w = f((p.row(i) - p.row(j)).transpose());
      }
      W(i, j) = w;
      W(j, i) = w;
    }
  }
  if (options.degree_normalize) {
    Vector deg = weighted_degrees(W);
    Vector scale = deg.unaryExpr([](double d) { return d > 0 ? 1.0 / std::sqrt(d) : 0.0; });
    W = scale.asDiagonal() * W * scale.asDiagonal();
    W = 0.5 * (W + W.transpose()).eval();
  }
  return W;
}

Vector weighted_degrees(const Matrix& W) { return W.rowwise().sum(); }

Matrix exact_kernel(const Matrix& W, const KernelSpec& spec, const SeriesOptions& options) {
  if (W.rows() != W.cols()) throw InvalidInput("exact_kernel: W must be square");
  const Index n = W.rows();
  const int K = spec.truncation();
  const auto alpha = spec.coefficients();

  const double asym = (W - W.transpose()).lpNorm<Eigen::Infinity>();
  if (asym <= 1e-14 * std::max(1.0, W.lpNorm<Eigen::Infinity>())) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(W);
    const Vector& lambda = eig.eigenvalues();
    Vector series(n);
    for (Index i = 0; i < n; ++i) {
      double acc = alpha[static_cast<std::size_t>(K)];
      for (int k = K - 1; k >= 0; --k) acc = acc * lambda(i) + alpha[static_cast<std::size_t>(k)];
      series(i) = acc;
    }
    const double radius = lambda.cwiseAbs().maxCoeff();
    const double scale = series.cwiseAbs().maxCoeff();
    const double tail = std::abs(alpha.back()) * std::pow(radius, K);
    const double relative = scale > 0 ? tail / scale : tail;
    if (K > 0 && !(relative <= options.tail_tolerance)) {
      throw ConvergenceError("kernel series not converged at K_max = " + std::to_string(K) +
                                 ": relative tail " + std::to_string(relative),
                             relative);
    }
    const Matrix& V = eig.eigenvectors();
    Matrix Kmat = V * series.asDiagonal() * V.transpose();
    return 0.5 * (Kmat + Kmat.transpose());
  }

  Matrix power = Matrix::Identity(n, n);
  Matrix Kmat = alpha[0] * power;
  double last = alpha[0] * power.norm();
  for (int k = 1; k <= K; ++k) {
    power = (power * W).eval();
    Kmat.noalias() += alpha[static_cast<std::size_t>(k)] * power;
    last = std::abs(alpha[static_cast<std::size_t>(k)]) * power.norm();
  }
  const double scale = Kmat.norm();
  const double relative = scale > 0 ? last / scale : last;
  if (K > 0 && !(relative <= options.tail_tolerance)) {
    throw ConvergenceError("kernel series not converged at K_max = " + std::to_string(K) +
                               ": relative tail " + std::to_string(relative),
                           relative);
  }
  return Kmat;
}

double fne(const Matrix& K, const Matrix& K_hat) {
  if (K.rows() != K_hat.rows() || K.cols() != K_hat.cols()) {
    throw InvalidInput("fne: shape mismatch");
  }
  const double denom = K.norm();
  if (denom == 0.0) throw InvalidInput("fne: reference kernel has zero Frobenius norm");
  return (K - K_hat).norm() / denom;
}

}  // namespace swing
