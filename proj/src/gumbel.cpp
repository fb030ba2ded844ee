#include "swing/gumbel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "swing/error.hpp"

namespace swing {

namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidInput("temperature must be positive");
  }
}

RelaxedTransition softmax_combination(const PointCloud& cloud, const std::vector<double>& logits) {
  const Index n = cloud.size();
  double top = -std::numeric_limits<double>::infinity();
  for (double l : logits) top = std::max(top, l);
  if (!std::isfinite(top)) {
    throw InvalidInput("relaxed transition: weight function vanishes at every point");
  }
  RelaxedTransition out;
  out.coefficients.resize(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double c = std::exp(logits[static_cast<std::size_t>(i)] - top);
    out.coefficients(i) = c;
    total += c;
  }
  out.coefficients /= total;
  out.location = cloud.points().transpose() * out.coefficients;
  return out;
}

}  // namespace

double sample_gumbel(Rng& rng) { return -std::log(-std::log(uniform_open(rng))); }

double sample_frechet(double shape, Rng& rng) {
  check_temperature(shape);
  return std::exp(sample_gumbel(rng) / shape);
}

double sample_pa(double temperature, Rng& rng) {
  check_temperature(temperature);
  return std::pow(2.0, -0.5 / temperature) * std::sqrt(sample_frechet(temperature, rng));
}

double sample_pb(double temperature, Rng& rng) {
  check_temperature(temperature);
  double z = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  do {
    z = std::abs(normal(rng));
  } while (z == 0.0);
  return std::pow(z, -1.0 / temperature);
}

double density_pa(double y, double temperature) {
  check_temperature(temperature);
  if (!(y > 0.0)) return 0.0;
  const double s = temperature;
  // Log space: near 0 the power overflows while the exponential underflows.
  const double log_y = std::log(y);
  return s * std::exp((-1.0 - 2.0 * s) * log_y - 0.5 * std::exp(-2.0 * s * log_y));
}

double density_pb(double y, double temperature) {
  check_temperature(temperature);
  if (!(y > 0.0)) return 0.0;
  const double s = temperature;
  const double log_y = std::log(y);
  return std::sqrt(2.0 / std::numbers::pi) * s *
         std::exp((-1.0 - s) * log_y - 0.5 * std::exp(-2.0 * s * log_y));
}

Index gumbel_max_select(std::span<const double> weights, std::span<const double> noise) {
  if (weights.size() != noise.size()) throw InvalidInput("gumbel_max_select: size mismatch");
  Index best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw InvalidInput("gumbel_max_select: negative weight");
    if (weights[i] == 0.0) continue;
    const double score = std::log(weights[i]) + noise[i];
    if (best < 0 || score > best_score) {
      best = static_cast<Index>(i);
      best_score = score;
    }
  }
  if (best < 0) throw InvalidInput("gumbel_max_select: all weights are zero");
  return best;
}

RelaxedTransition relaxed_transition_exact(const PointCloud& cloud, const WeightFunction& f,
                                           const Vector& x, double temperature,
                                           std::span<const double> noise) {
  check_temperature(temperature);
  if (static_cast<Index>(noise.size()) != cloud.size()) {
    throw InvalidInput("relaxed transition: one noise value per point required");
  }
  if (x.size() != cloud.dim()) throw InvalidInput("relaxed transition: dimension mismatch");
  std::vector<double> logits(noise.size());
  for (Index i = 0; i < cloud.size(); ++i) {
    const double lf = f.log_value(cloud.points().row(i).transpose() - x);
    logits[static_cast<std::size_t>(i)] = (lf + noise[static_cast<std::size_t>(i)]) / temperature;
  }
  return softmax_combination(cloud, logits);
}

RelaxedTransition relaxed_transition_with_multipliers(const PointCloud& cloud,
                                                      const WeightFunction& f, const Vector& x,
                                                      double temperature,
                                                      std::span<const double> multipliers) {
  check_temperature(temperature);
  if (static_cast<Index>(multipliers.size()) != cloud.size()) {
    throw InvalidInput("relaxed transition: one multiplier per point required");
  }
  if (x.size() != cloud.dim()) throw InvalidInput("relaxed transition: dimension mismatch");
  std::vector<double> logits(multipliers.size());
  for (Index i = 0; i < cloud.size(); ++i) {
    const double m = multipliers[static_cast<std::size_t>(i)];
    if (!(m > 0.0)) throw InvalidInput("relaxed transition: multipliers must be positive");
    const double lf = f.log_value(cloud.points().row(i).transpose() - x);
    logits[static_cast<std::size_t>(i)] = lf / temperature + std::log(m);
  }
  return softmax_combination(cloud, logits);
}

}  // namespace swing
