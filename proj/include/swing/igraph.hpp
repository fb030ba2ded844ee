#pragma once

// Implicit graphs: a point cloud plus an edge-weight generator f, together
// with the dense oracles (materialized weights, truncated kernel series) used
// to validate the walk-based estimators.

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace swing {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Ordered node embeddings p_1..p_N in R^d, stored one point per row.
class PointCloud {
 public:
  explicit PointCloud(Matrix points);
  static PointCloud from_rows(const std::vector<std::vector<double>>& rows);

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  Vector point(Index i) const { return points_.row(i).transpose(); }

 private:
  Matrix points_;
};

/// Reads whitespace-separated coordinates, one point per line. Blank lines and
/// lines starting with '#' are skipped.
PointCloud read_point_cloud(std::istream& in);
PointCloud load_point_cloud(const std::filesystem::path& path);
void write_point_cloud(std::ostream& out, const PointCloud& cloud);

struct GaussianRBF {
  double bandwidth = 1.0;  // f(z) = exp(-|z|^2 / (2 bandwidth^2))
};
struct StepL1 {
  double epsilon = 1.0;  // f(z) = 1[|z|_1 <= epsilon]
};
struct StepL2 {
  double epsilon = 1.0;  // f(z) = 1[|z|_2 <= epsilon]
};

/// Edge-weight generator: w_ij = f(p_i - p_j). Every variant is even in z.
class WeightFunction {
 public:
  using Variant = std::variant<GaussianRBF, StepL1, StepL2>;

  WeightFunction(Variant v);  // NOLINT(google-explicit-constructor)

  static WeightFunction gaussian(double bandwidth) { return WeightFunction(GaussianRBF{bandwidth}); }
  static WeightFunction step_l1(double epsilon) { return WeightFunction(StepL1{epsilon}); }
  static WeightFunction step_l2(double epsilon) { return WeightFunction(StepL2{epsilon}); }

  double operator()(const Eigen::Ref<const Vector>& z) const;
  // log f(z); -infinity outside the support of a step function.
  double log_value(const Eigen::Ref<const Vector>& z) const;

  const Variant& variant() const { return v_; }
  std::optional<double> gaussian_bandwidth() const;

  /// f^{1/temperature}. Gaussians widen by sqrt(temperature); indicators are
  /// unchanged.
  WeightFunction tempered(double temperature) const;

  std::string describe() const;

 private:
  Variant v_;
};

struct Diffusion {
  double lambda = 1.0;  // alpha_k = lambda^k / k!
};
struct PStepRandomWalk {
  int steps = 2;       // p
  double shift = 1.0;  // a, alpha_k = C(p, k) a^(p - k)
};
struct RegularizedLaplacian {
  double gamma = 0.1;  // alpha_k = gamma^k
};

/// Coefficient sequence alpha of K = sum_k alpha_k W^k, truncated at K_max.
class KernelSpec {
 public:
  using Family = std::variant<Diffusion, PStepRandomWalk, RegularizedLaplacian>;

  explicit KernelSpec(Family family, int truncation = 30);

  const Family& family() const { return family_; }
  int truncation() const { return truncation_; }

  /// Closed-form alpha_k for any k >= 0 (ignores the truncation).
  double coefficient(int k) const;
  /// alpha_0 .. alpha_{n-1}.
  std::vector<double> coefficients(int n) const;
  /// alpha_0 .. alpha_{K_max}.
  std::vector<double> coefficients() const { return coefficients(truncation_ + 1); }

  std::string name() const;
  std::string describe() const;

 private:
  Family family_;
  int truncation_;
};

/// Parses "diffusion[:lambda]", "pstep[:p[:a]]" or "dreg[:gamma]".
KernelSpec parse_kernel_spec(const std::string& text, int truncation = 30);

/// rho with rho * rho = alpha (discrete self-convolution). Zero past the end.
class Modulation {
 public:
  Modulation() = default;
  explicit Modulation(std::vector<double> values) : values_(std::move(values)) {}

  double operator()(std::size_t t) const { return t < values_.size() ? values_[t] : 0.0; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// rho(0) = sqrt(alpha_0), rho(k) = (alpha_k - sum_{p=1}^{k-1} rho(p) rho(k-p)) / (2 rho(0)).
/// Throws InvalidKernel when alpha_0 <= 0.
Modulation deconvolve_modulation(std::span<const double> alpha);
/// Deconvolves the closed-form coefficients alpha_0..alpha_{max_length}.
Modulation deconvolve_modulation(const KernelSpec& spec, int max_length);
/// sum_{p=0}^{k} rho(k-p) rho(p) for k < n.
std::vector<double> self_convolve(const Modulation& rho, int n);

struct WeightOptions {
  bool self_loops = false;        // keep w_ii = f(0) on the diagonal
  bool degree_normalize = false;  // D^{-1/2} W D^{-1/2}, oracle path only
  Index oracle_cap = 20000;
};

/// Dense W[i,j] = f(p_i - p_j). Exactly symmetric.
Matrix materialize_weights(const PointCloud& cloud, const WeightFunction& f,
                           const WeightOptions& options = {});

/// deg(v) = sum_z W(v, z).
Vector weighted_degrees(const Matrix& W);

struct SeriesOptions {
  // Largest accepted |alpha_K| ||W||^K relative to ||K||.
  double tail_tolerance = 1e-12;
};

/// K = sum_{k=0}^{K_max} alpha_k W^k. Symmetric inputs are evaluated through
/// an eigendecomposition, anything else by accumulating powers. Throws
/// ConvergenceError when the last term is not negligible.
Matrix exact_kernel(const Matrix& W, const KernelSpec& spec, const SeriesOptions& options = {});

/// Relative Frobenius error |K - K_hat|_F / |K|_F.
double fne(const Matrix& K, const Matrix& K_hat);

}  // namespace swing
