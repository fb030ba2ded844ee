#pragma once

// Random feature maps eta_1, eta_2 with h(x - y) ~= eta_1(x)^T eta_2(y):
// complex Fourier features drawn from the (normalized) inverse Fourier
// transform of h, and strictly positive features for the Gaussian kernel with
// optional orthogonal ensembles and an isotropic importance proposal.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <variant>

#include "swing/igraph.hpp"

namespace swing {

/// Rows are frequencies. Blocks of min(d, remaining) rows are mutually
/// orthogonal; each row is a Haar-random direction scaled by an independent
/// chi(d) norm, so every row is marginally N(0, I_d).
Matrix orthogonal_ensemble(Index d, Index r, std::uint64_t seed);

/// Positive features for h(z) = exp(-|z|^2 / (2 sigma^2)):
///   eta(u)_j = sqrt(iota_j / r) exp(-|u|^2 / sigma^2) exp(omega_j^T u / sigma)
/// where iota_j is the density ratio N(0, I)(omega_j) / q(omega_j) of the
/// proposal that produced omega_j (iota = 1 for the standard proposal).
class PositiveFeatureMap {
 public:
  PositiveFeatureMap(Matrix frequencies, double bandwidth, Vector log_importance, bool orthogonal);

  Index features() const { return frequencies_.rows(); }
  Index input_dim() const { return frequencies_.cols(); }
  double bandwidth() const { return bandwidth_; }
  bool orthogonal() const { return orthogonal_; }
  const Matrix& frequencies() const { return frequencies_; }
  const Vector& log_importance() const { return log_importance_; }

  /// Entrywise logarithm of the features; never overflows.
  Vector log_features(const Eigen::Ref<const Vector>& u) const;
  Vector operator()(const Eigen::Ref<const Vector>& u) const;
  void evaluate_into(const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> out) const;
  /// One feature row per point.
  Matrix rows(const Matrix& points) const;
  Matrix log_rows(const Matrix& points) const;

  /// eta(x)^T eta(y), paired in log space.
  double estimate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const;

 private:
  Matrix frequencies_;
  double bandwidth_;
  Vector log_importance_;
  double log_offset_;  // -log(r) / 2
  bool orthogonal_;
};

PositiveFeatureMap gaussian_positive_map(double bandwidth, Index d, Index r, std::uint64_t seed,
                                         bool orthogonal = false);

Vector positive_features(const PositiveFeatureMap& map, const Eigen::Ref<const Vector>& u);

/// Positive map whose frequencies come from an isotropic proposal: uniform
/// direction, radius ~ N(alpha_is * mu, 1) truncated to positive values, with
/// mu the median of |p_i| / sigma over the cloud. Each frequency carries its
/// exact importance weight, so the estimator stays unbiased.
PositiveFeatureMap importance_proposal(const PointCloud& cloud, double bandwidth, double alpha_is,
                                       Index r, std::uint64_t seed, bool orthogonal = false);

/// Median of |p_i| / bandwidth.
double median_scaled_norm(const PointCloud& cloud, double bandwidth);

/// Complex Fourier features
///   eta_1(v)_j = sqrt(C / r) s_j exp(-2 pi i omega_j^T v)
///   eta_2(v)_j = sqrt(C / r)     exp(+2 pi i omega_j^T v)
/// with omega_j ~ |tau| / C and s_j = sign(tau(omega_j)) (all +1 for a
/// nonnegative transform). The real embeddings interleave (cos, sin) so that
/// left(x) . right(y) = Re(eta_1(x)^T eta_2(y)).
class FourierFeatureMap {
 public:
  FourierFeatureMap(Matrix frequencies, double normalizer, Vector signs);

  Index features() const { return frequencies_.rows(); }
  Index input_dim() const { return frequencies_.cols(); }
  double normalizer() const { return normalizer_; }
  const Matrix& frequencies() const { return frequencies_; }
  const Vector& signs() const { return signs_; }

  Eigen::VectorXcd eta1(const Eigen::Ref<const Vector>& v) const;
  Eigen::VectorXcd eta2(const Eigen::Ref<const Vector>& v) const;

  Vector left(const Eigen::Ref<const Vector>& v) const;
  Vector right(const Eigen::Ref<const Vector>& v) const;
  void right_into(const Eigen::Ref<const Vector>& v, Eigen::Ref<Vector> out) const;
  Matrix left_rows(const Matrix& points) const;
  Matrix right_rows(const Matrix& points) const;

  double estimate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const;

 private:
  Matrix frequencies_;
  double normalizer_;
  Vector signs_;
};

/// Fourier features for exp(-|z|^2 / (2 sigma^2)): omega ~ N(0, I / (2 pi sigma)^2), C = 1.
FourierFeatureMap sample_gaussian_fourier(double bandwidth, Index d, Index r, std::uint64_t seed,
                                          bool orthogonal = false);

/// prod_i sin(2 eps v_i) / v_i, with the removable singularity at v_i = 0
/// evaluated as 2 eps.
double step_l1_transform(double epsilon, const Eigen::Ref<const Vector>& v);

/// Signed Fourier features for the coordinate box 1[|z|_inf <= eps], whose
/// transform is prod_i sin(2 pi eps w_i) / (pi w_i). The transform is not
/// absolutely integrable, so frequencies are drawn from |tau| restricted to
/// |w_i| <= band_limit; the resulting map reproduces the band-limited box.
FourierFeatureMap sample_step_fourier(double epsilon, Index d, Index r, double band_limit,
                                      std::uint64_t seed);

enum class FeatureKind { positive, fourier };

struct FeatureMapSpec {
  FeatureKind kind = FeatureKind::positive;
  Index features = 128;
  bool orthogonal = true;
  // alpha_is of the shifted radial proposal (positive maps only); the
  // standard normal proposal is used when empty.
  std::optional<double> importance_scale;
};

/// Either kind of map behind one interface. left() is applied to cloud
/// points, right() to query locations.
class FeatureMap {
 public:
  FeatureMap(PositiveFeatureMap map) : map_(std::move(map)) {}  // NOLINT
  FeatureMap(FourierFeatureMap map) : map_(std::move(map)) {}   // NOLINT

  Index input_dim() const;
  Index output_dim() const;
  bool positive() const { return std::holds_alternative<PositiveFeatureMap>(map_); }

  Vector left(const Eigen::Ref<const Vector>& u) const;
  Vector right(const Eigen::Ref<const Vector>& u) const;
  void right_into(const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> out) const;
  Matrix left_rows(const Matrix& points) const;
  Matrix right_rows(const Matrix& points) const;
  /// right_rows with each row multiplied by some positive factor of its own.
  /// Positive maps shift every row's logarithms to a maximum of 0 and flush
  /// entries below exp(-700), so nothing overflows or turns subnormal.
  Matrix right_rows_up_to_scale(const Matrix& points) const;
  double estimate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const;

  const std::variant<PositiveFeatureMap, FourierFeatureMap>& variant() const { return map_; }

 private:
  std::variant<PositiveFeatureMap, FourierFeatureMap> map_;
};

/// Map linearizing h^{1/temperature}. Only Gaussian h is supported.
FeatureMap build_feature_map(const WeightFunction& h, double temperature,
                             const FeatureMapSpec& spec, const PointCloud& cloud,
                             std::uint64_t seed);

}  // namespace swing
