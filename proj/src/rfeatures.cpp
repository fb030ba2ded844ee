#include "swing/rfeatures.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "swing/error.hpp"
#include "swing/rng.hpp"

namespace swing {

namespace {

constexpr double kPi = std::numbers::pi;

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidInput(std::string(what) + " must be positive and finite");
  }
}

void require_count(Index value, const char* what) {
  if (value < 1) throw InvalidInput(std::string(what) + " must be at least 1");
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  return g;
}

// Haar-distributed d x d orthogonal matrix (QR with the sign of diag(R) fixed).
Matrix haar_orthogonal(Index d, Rng& rng) {
  const Matrix g = gaussian_matrix(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix& r = qr.matrixQR();
  for (Index k = 0; k < d; ++k) {
    if (r(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  return q;
}

// Rows are unit directions; blocks of up to d rows are mutually orthogonal
// when `orthogonal` is set, independent otherwise.
Matrix unit_directions(Index d, Index r, bool orthogonal, Rng& rng) {
  Matrix out(r, d);
  if (orthogonal) {
    for (Index start = 0; start < r; start += d) {
      const Index block = std::min(d, r - start);
      out.middleRows(start, block) = haar_orthogonal(d, rng).topRows(block);
    }
    return out;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < r; ++j) {
    double norm = 0.0;
    do {
      for (Index k = 0; k < d; ++k) out(j, k) = normal(rng);
      norm = out.row(j).norm();
    } while (norm == 0.0);
    out.row(j) /= norm;
  }
  return out;
}

double log_sphere_area(Index d) {
  // Surface area of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
  const double half = 0.5 * static_cast<double>(d);
  return std::log(2.0) + half * std::log(kPi) - std::lgamma(half);
}

double log_normal_cdf(double x) { return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2)); }

double log_sum_exp(const Vector& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

// (2/pi) * integral_0^T |sin t| / t dt: the per-coordinate mass of the
// band-limited box transform.
double band_limited_mass(double t_max) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [](double t) { return t == 0.0 ? 1.0 : std::abs(std::sin(t)) / t; };
  double total = 0.0;
  for (double lo = 0.0; lo < t_max; lo += kPi) {
    const double hi = std::min(lo + kPi, t_max);
    total += gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 0, 0.0);
  }
  return 2.0 / kPi * total;
}

// |t| with density proportional to |sin t| / t on [0, t_max], by rejection
// under the envelope min(1, 1/t).
double sample_sinc_magnitude(double t_max, Rng& rng) {
  const double flat = std::min(t_max, 1.0);
  const double tail = t_max > 1.0 ? std::log(t_max) : 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (true) {
    double t = 0.0;
    double envelope = 1.0;
    if (unif(rng) * (flat + tail) < flat) {
      t = unif(rng) * flat;
    } else {
      t = std::exp(unif(rng) * tail);
      envelope = 1.0 / t;
    }
    const double target = t == 0.0 ? 1.0 : std::abs(std::sin(t)) / t;
    if (unif(rng) * envelope < target) return t;
  }
}

}  // namespace

Matrix orthogonal_ensemble(Index d, Index r, std::uint64_t seed) {
  require_count(d, "dimension");
  require_count(r, "feature count");
  Rng rng = make_rng(seed, {tags::features, 0x4f5254});
  std::chi_squared_distribution<double> chi2(static_cast<double>(d));
  Matrix out = unit_directions(d, r, true, rng);
  for (Index j = 0; j < r; ++j) out.row(j) *= std::sqrt(chi2(rng));
  return out;
}

PositiveFeatureMap::PositiveFeatureMap(Matrix frequencies, double bandwidth, Vector log_importance,
                                       bool orthogonal)
    : frequencies_(std::move(frequencies)),
      bandwidth_(bandwidth),
      log_importance_(std::move(log_importance)),
      log_offset_(0.0),
      orthogonal_(orthogonal) {
  require_positive(bandwidth_, "bandwidth");
  require_count(frequencies_.rows(), "feature count");
  require_count(frequencies_.cols(), "dimension");
  if (log_importance_.size() != frequencies_.rows()) {
    throw InvalidInput("positive features: one importance weight per frequency required");
  }
  if (!frequencies_.allFinite() || !log_importance_.allFinite()) {
    throw InvalidInput("positive features: frequencies and weights must be finite");
  }
  log_offset_ = -0.5 * std::log(static_cast<double>(frequencies_.rows()));
}

Vector PositiveFeatureMap::log_features(const Eigen::Ref<const Vector>& u) const {
  if (u.size() != input_dim()) throw InvalidInput("positive features: dimension mismatch");
  Vector out = frequencies_ * u / bandwidth_;
  const double shift = log_offset_ - u.squaredNorm() / (bandwidth_ * bandwidth_);
  out.array() += 0.5 * log_importance_.array() + shift;
  return out;
}

Vector PositiveFeatureMap::operator()(const Eigen::Ref<const Vector>& u) const {
  return log_features(u).array().exp();
}

void PositiveFeatureMap::evaluate_into(const Eigen::Ref<const Vector>& u,
                                       Eigen::Ref<Vector> out) const {
  out.noalias() = frequencies_ * u;
  const double inv = 1.0 / bandwidth_;
  const double shift = log_offset_ - u.squaredNorm() * inv * inv;
  out = (out.array() * inv + 0.5 * log_importance_.array() + shift).exp();
}

Matrix PositiveFeatureMap::log_rows(const Matrix& points) const {
  if (points.cols() != input_dim()) throw InvalidInput("positive features: dimension mismatch");
  const double inv = 1.0 / bandwidth_;
  Matrix logs = points * frequencies_.transpose() * inv;
  const Vector shift = (-points.rowwise().squaredNorm() * (inv * inv)).array() + log_offset_;
  logs.colwise() += shift;
  logs.rowwise() += 0.5 * log_importance_.transpose();
  return logs;
}

Matrix PositiveFeatureMap::rows(const Matrix& points) const { return log_rows(points).array().exp(); }

double PositiveFeatureMap::estimate(const Eigen::Ref<const Vector>& x,
                                    const Eigen::Ref<const Vector>& y) const {
  return std::exp(log_sum_exp(log_features(x) + log_features(y)));
}

PositiveFeatureMap gaussian_positive_map(double bandwidth, Index d, Index r, std::uint64_t seed,
                                         bool orthogonal) {
  require_positive(bandwidth, "bandwidth");
  require_count(d, "dimension");
  require_count(r, "feature count");
  Matrix omega;
  if (orthogonal) {
    omega = orthogonal_ensemble(d, r, seed);
  } else {
    Rng rng = make_rng(seed, {tags::features, 0x504f53});
    omega = gaussian_matrix(r, d, rng);
  }
  return PositiveFeatureMap(std::move(omega), bandwidth, Vector::Zero(r), orthogonal);
}

Vector positive_features(const PositiveFeatureMap& map, const Eigen::Ref<const Vector>& u) {
  return map(u);
}

double median_scaled_norm(const PointCloud& cloud, double bandwidth) {
  require_positive(bandwidth, "bandwidth");
  std::vector<double> norms(static_cast<std::size_t>(cloud.size()));
  for (Index i = 0; i < cloud.size(); ++i) {
    norms[static_cast<std::size_t>(i)] = cloud.points().row(i).norm() / bandwidth;
  }
  const auto mid = norms.begin() + static_cast<std::ptrdiff_t>(norms.size() / 2);
  std::nth_element(norms.begin(), mid, norms.end());
  if (norms.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(norms.begin(), mid);
  return 0.5 * (lower + upper);
}

PositiveFeatureMap importance_proposal(const PointCloud& cloud, double bandwidth, double alpha_is,
                                       Index r, std::uint64_t seed, bool orthogonal) {
  require_positive(alpha_is, "importance scale");
  require_count(r, "feature count");
  const Index d = cloud.dim();
  const double center = alpha_is * median_scaled_norm(cloud, bandwidth);

  Rng rng = make_rng(seed, {tags::features, 0x495350});
  Matrix omega = unit_directions(d, r, orthogonal, rng);
  std::normal_distribution<double> radial(center, 1.0);

  const double dd = static_cast<double>(d);
  const double log_norm_const = -0.5 * dd * std::log(2.0 * kPi);
  const double log_q_const =
      -0.5 * std::log(2.0 * kPi) - log_normal_cdf(center) - log_sphere_area(d);
  Vector log_iota(r);
  for (Index j = 0; j < r; ++j) {
    double radius = 0.0;
    do {
      radius = radial(rng);
    } while (!(radius > 0.0));
    omega.row(j) *= radius;
    const double log_p = log_norm_const - 0.5 * radius * radius;
    const double log_q = log_q_const - 0.5 * (radius - center) * (radius - center) -
                         (dd - 1.0) * std::log(radius);
    log_iota(j) = log_p - log_q;
  }
  return PositiveFeatureMap(std::move(omega), bandwidth, std::move(log_iota), orthogonal);
}

FourierFeatureMap::FourierFeatureMap(Matrix frequencies, double normalizer, Vector signs)
    : frequencies_(std::move(frequencies)), normalizer_(normalizer), signs_(std::move(signs)) {
  require_count(frequencies_.rows(), "feature count");
  require_count(frequencies_.cols(), "dimension");
  require_positive(normalizer_, "normalizer");
  if (signs_.size() != frequencies_.rows()) {
    throw InvalidInput("Fourier features: one sign per frequency required");
  }
  if (!frequencies_.allFinite()) throw InvalidInput("Fourier features: frequencies must be finite");
}

Eigen::VectorXcd FourierFeatureMap::eta1(const Eigen::Ref<const Vector>& v) const {
  if (v.size() != input_dim()) throw InvalidInput("Fourier features: dimension mismatch");
  const double scale = std::sqrt(normalizer_ / static_cast<double>(features()));
  const Vector phase = 2.0 * kPi * (frequencies_ * v);
  Eigen::VectorXcd out(features());
  for (Index j = 0; j < features(); ++j) out(j) = scale * signs_(j) * std::polar(1.0, -phase(j));
  return out;
}

Eigen::VectorXcd FourierFeatureMap::eta2(const Eigen::Ref<const Vector>& v) const {
  if (v.size() != input_dim()) throw InvalidInput("Fourier features: dimension mismatch");
  const double scale = std::sqrt(normalizer_ / static_cast<double>(features()));
  const Vector phase = 2.0 * kPi * (frequencies_ * v);
  Eigen::VectorXcd out(features());
  for (Index j = 0; j < features(); ++j) out(j) = scale * std::polar(1.0, phase(j));
  return out;
}

Vector FourierFeatureMap::left(const Eigen::Ref<const Vector>& v) const {
  Vector out = right(v);
  for (Index j = 0; j < features(); ++j) out.segment<2>(2 * j) *= signs_(j);
  return out;
}

Vector FourierFeatureMap::right(const Eigen::Ref<const Vector>& v) const {
  if (v.size() != input_dim()) throw InvalidInput("Fourier features: dimension mismatch");
  Vector out(2 * features());
  right_into(v, out);
  return out;
}

void FourierFeatureMap::right_into(const Eigen::Ref<const Vector>& v,
                                   Eigen::Ref<Vector> out) const {
  const double scale = std::sqrt(normalizer_ / static_cast<double>(features()));
  for (Index j = 0; j < features(); ++j) {
    const double phase = 2.0 * kPi * frequencies_.row(j).dot(v);
    out(2 * j) = scale * std::cos(phase);
    out(2 * j + 1) = scale * std::sin(phase);
  }
}

Matrix FourierFeatureMap::left_rows(const Matrix& points) const {
  Matrix out = right_rows(points);
  for (Index j = 0; j < features(); ++j) out.middleCols<2>(2 * j) *= signs_(j);
  return out;
}

Matrix FourierFeatureMap::right_rows(const Matrix& points) const {
  if (points.cols() != input_dim()) throw InvalidInput("Fourier features: dimension mismatch");
  const double scale = std::sqrt(normalizer_ / static_cast<double>(features()));
  const Matrix phase = 2.0 * kPi * points * frequencies_.transpose();
  Matrix out(points.rows(), 2 * features());
  for (Index j = 0; j < features(); ++j) {
    out.col(2 * j) = scale * phase.col(j).array().cos();
    out.col(2 * j + 1) = scale * phase.col(j).array().sin();
  }
  return out;
}

double FourierFeatureMap::estimate(const Eigen::Ref<const Vector>& x,
                                   const Eigen::Ref<const Vector>& y) const {
  return left(x).dot(right(y));
}

FourierFeatureMap sample_gaussian_fourier(double bandwidth, Index d, Index r, std::uint64_t seed,
                                          bool orthogonal) {
  require_positive(bandwidth, "bandwidth");
  require_count(d, "dimension");
  require_count(r, "feature count");
  Matrix omega;
  if (orthogonal) {
    omega = orthogonal_ensemble(d, r, seed);
  } else {
    Rng rng = make_rng(seed, {tags::features, 0x464f55});
    omega = gaussian_matrix(r, d, rng);
  }
  omega /= 2.0 * kPi * bandwidth;
  return FourierFeatureMap(std::move(omega), 1.0, Vector::Ones(r));
}

double step_l1_transform(double epsilon, const Eigen::Ref<const Vector>& v) {
  double out = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    out *= v(i) == 0.0 ? 2.0 * epsilon : std::sin(2.0 * epsilon * v(i)) / v(i);
  }
  return out;
}

FourierFeatureMap sample_step_fourier(double epsilon, Index d, Index r, double band_limit,
                                      std::uint64_t seed) {
  require_positive(epsilon, "epsilon");
  require_positive(band_limit, "band limit");
  require_count(d, "dimension");
  require_count(r, "feature count");
  // In t = 2 pi eps w the coordinate transform is proportional to sin(t) / t.
  const double t_max = 2.0 * kPi * epsilon * band_limit;
  const double mass = band_limited_mass(t_max);

  Rng rng = make_rng(seed, {tags::features, 0x535445});
  std::bernoulli_distribution coin(0.5);
  Matrix omega(r, d);
  Vector signs(r);
  for (Index j = 0; j < r; ++j) {
    double sign = 1.0;
    for (Index i = 0; i < d; ++i) {
      const double t = sample_sinc_magnitude(t_max, rng);
      if (std::sin(t) < 0.0) sign = -sign;
      omega(j, i) = (coin(rng) ? t : -t) / (2.0 * kPi * epsilon);
    }
    signs(j) = sign;
  }
  return FourierFeatureMap(std::move(omega), std::pow(mass, static_cast<double>(d)),
                           std::move(signs));
}

Index FeatureMap::input_dim() const {
  return std::visit([](const auto& m) { return m.input_dim(); }, map_);
}

Index FeatureMap::output_dim() const {
  if (const auto* p = std::get_if<PositiveFeatureMap>(&map_)) return p->features();
  return 2 * std::get<FourierFeatureMap>(map_).features();
}

Vector FeatureMap::left(const Eigen::Ref<const Vector>& u) const {
  if (const auto* p = std::get_if<PositiveFeatureMap>(&map_)) return (*p)(u);
  return std::get<FourierFeatureMap>(map_).left(u);
}

Vector FeatureMap::right(const Eigen::Ref<const Vector>& u) const {
  if (const auto* p = std::get_if<PositiveFeatureMap>(&map_)) return (*p)(u);
  return std::get<FourierFeatureMap>(map_).right(u);
}

void FeatureMap::right_into(const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> out) const {
  if (const auto* p = std::get_if<PositiveFeatureMap>(&map_)) {
    p->evaluate_into(u, out);
  } else {
    std::get<FourierFeatureMap>(map_).right_into(u, out);
  }
}

Matrix FeatureMap::left_rows(const Matrix& points) const {
  if (const auto* p = std::get_if<PositiveFeatureMap>(&map_)) return p->rows(points);
  return std::get<FourierFeatureMap>(map_).left_rows(points);
}

Matrix FeatureMap::right_rows(const Matrix& points) const {
  if (const auto* p = std::get_if<PositiveFeatureMap>(&map_)) return p->rows(points);
  return std::get<FourierFeatureMap>(map_).right_rows(points);
}

Matrix FeatureMap::right_rows_up_to_scale(const Matrix& points) const {
  const auto* p = std::get_if<PositiveFeatureMap>(&map_);
  if (!p) return std::get<FourierFeatureMap>(map_).right_rows(points);
  constexpr double kFlush = -700.0;
  Matrix logs = p->log_rows(points);
  const Vector peak = logs.rowwise().maxCoeff();
  logs.colwise() -= peak;
  return (logs.array() < kFlush).select(0.0, logs.array().exp());
}

double FeatureMap::estimate(const Eigen::Ref<const Vector>& x,
                            const Eigen::Ref<const Vector>& y) const {
  return std::visit([&](const auto& m) { return m.estimate(x, y); }, map_);
}

FeatureMap build_feature_map(const WeightFunction& h, double temperature,
                             const FeatureMapSpec& spec, const PointCloud& cloud,
                             std::uint64_t seed) {
  require_positive(temperature, "temperature");
  require_count(spec.features, "feature count");
  const auto bandwidth = h.tempered(temperature).gaussian_bandwidth();
  if (!bandwidth) {
    throw InvalidInput("feature maps for walk transitions require a Gaussian weight function, got " +
                       h.describe());
  }
  const Index d = cloud.dim();
  if (spec.kind == FeatureKind::fourier) {
    return sample_gaussian_fourier(*bandwidth, d, spec.features, seed, spec.orthogonal);
  }
  if (spec.importance_scale) {
    return importance_proposal(cloud, *bandwidth, *spec.importance_scale, spec.features, seed,
                               spec.orthogonal);
  }
  return gaussian_positive_map(*bandwidth, d, spec.features, seed, spec.orthogonal);
}

}  // namespace swing
