#include "swing/swing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "swing/error.hpp"
#include "swing/gumbel.hpp"
#include "swing/parallel.hpp"
#include "swing/rng.hpp"

namespace swing {

namespace {

constexpr double kTinyDenominator = 1e-300;

std::uint64_t tag(Ensemble e) { return static_cast<std::uint64_t>(e); }

// Transitions per walk, capped at max_steps. Returns the length and whether
// the cap was hit.
std::pair<int, bool> geometric_length(const WalkConfig& walk, Rng& rng) {
  std::geometric_distribution<long long> geo(walk.p_halt);
  const long long t = geo(rng);
  if (t > walk.max_steps) return {walk.max_steps, true};
  return {static_cast<int>(t), false};
}

struct NodeWalks {
  std::vector<std::size_t> lengths;  // entries per walk
  std::vector<double> locations;
  std::vector<double> loads;
  std::vector<double> deposits;
  std::size_t negative_degrees = 0;
};

}  // namespace

void SwingConfig::validate() const {
  walk.validate();
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidInput("temperature must be positive");
  }
  if (phi.features < 1 || psi.features < 1) throw InvalidInput("feature counts must be at least 1");
}

StepPrecomputes build_step_precomputes(const PointCloud& cloud, const FeatureMap& phi, int steps,
                                       double temperature, std::uint64_t seed) {
  if (steps < 0) throw InvalidInput("step count must be nonnegative");
  if (phi.input_dim() != cloud.dim()) throw InvalidInput("feature map dimension mismatch");
  const Matrix features = phi.left_rows(cloud.points());
  StepPrecomputes out;
  out.load.C = features.colwise().sum().transpose();
  out.steps.resize(static_cast<std::size_t>(steps));
  const Index n = cloud.size();
  for (int t = 0; t < steps; ++t) {
    Rng rng = make_rng(seed, {tags::precompute, static_cast<std::uint64_t>(t)});
    Vector a(n);
    for (Index j = 0; j < n; ++j) a(j) = sample_pa(temperature, rng);
    StepPrecompute& pre = out.steps[static_cast<std::size_t>(t)];
    pre.step = t;
    const Matrix weighted = features.array().colwise() * a.array();
    pre.A = cloud.points().transpose() * weighted;
    pre.B = weighted.colwise().sum().transpose();
  }
  return out;
}

Vector linearized_transition(const StepPrecompute& pre, const Eigen::Ref<const Vector>& phi_x,
                             double b) {
  if (!(b > 0.0) || !std::isfinite(b)) throw InvalidInput("walker factor must be positive");
  if (phi_x.size() != pre.B.size()) throw InvalidInput("feature vector size mismatch");
  const double den = pre.B.dot(phi_x);
  if (!(std::abs(den * b) >= kTinyDenominator)) {
    throw DegenerateTransition("linearized transition at step " + std::to_string(pre.step) +
                                   ": denominator " + std::to_string(den * b),
                               den * b);
  }
  return pre.A * phi_x / den;
}

double relaxed_load_update(double load, const LoadPrecompute& pre,
                           const Eigen::Ref<const Vector>& phi_x, double p_halt) {
  if (!std::isfinite(load)) throw InvalidInput("load must be finite");
  if (!(p_halt > 0.0 && p_halt < 1.0)) throw InvalidInput("p_halt must lie in (0, 1)");
  if (load == 0.0) return 0.0;
  return load * pre.C.dot(phi_x) / (1.0 - p_halt);
}

Trajectories run_swing_walks(const PointCloud& cloud, const WeightFunction& f,
                             const Modulation& rho, const SwingConfig& cfg, Ensemble ensemble) {
  cfg.validate();
  const Index n = cloud.size();
  const Index d = cloud.dim();
  const int m = cfg.walk.walks_per_node;
  const std::uint64_t seed = cfg.walk.seed;
  const std::size_t walks = static_cast<std::size_t>(n) * static_cast<std::size_t>(m);

  Trajectories out;
  out.nodes = n;
  out.walks_per_node = m;
  out.ensemble = ensemble;

  std::vector<int> lengths(walks, 0);
  if (cfg.length_mode == WalkLengthMode::fixed) {
    Rng rng = make_rng(seed, {tags::length, tag(ensemble)});
    const auto [t, cut] = geometric_length(cfg.walk, rng);
    std::fill(lengths.begin(), lengths.end(), t);
    if (cut) out.truncated_walks = walks;
  } else {
    // One stream per start node, consumed in walk order.
    for (Index i = 0; i < n; ++i) {
      Rng rng = make_rng(seed, {tags::length, tag(ensemble), static_cast<std::uint64_t>(i)});
      for (int w = 0; w < m; ++w) {
        const auto [t, cut] = geometric_length(cfg.walk, rng);
        lengths[out.walk_index(i, w)] = t;
        if (cut) ++out.truncated_walks;
      }
    }
  }
  const int longest = *std::max_element(lengths.begin(), lengths.end());

  const FeatureMap phi =
      build_feature_map(f, cfg.temperature, cfg.phi, cloud, stream_seed(seed, {tags::features, tag(ensemble)}));
  const StepPrecomputes pre = build_step_precomputes(
      cloud, phi, longest, cfg.temperature, stream_seed(seed, {tags::precompute, tag(ensemble)}));
  const double p_halt = cfg.walk.p_halt;

  std::vector<NodeWalks> per_node(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t node) {
    const Index i = static_cast<Index>(node);
    NodeWalks& slot = per_node[node];
    Vector phi_x(phi.output_dim());
    Vector x(d);
    std::size_t entries = 0;
    for (int w = 0; w < m; ++w) entries += static_cast<std::size_t>(lengths[out.walk_index(i, w)]) + 1;
    slot.locations.reserve(entries * static_cast<std::size_t>(d));
    slot.loads.reserve(entries);
    slot.deposits.reserve(entries);
    for (int w = 0; w < m; ++w) {
      Rng rng = make_rng(seed, {tags::walk, tag(ensemble), node, static_cast<std::uint64_t>(w)});
      const int length = lengths[out.walk_index(i, w)];
      x = cloud.points().row(i).transpose();
      double load = 1.0;
      for (int t = 0;; ++t) {
        slot.locations.insert(slot.locations.end(), x.data(), x.data() + d);
        slot.loads.push_back(load);
        slot.deposits.push_back(load * rho(static_cast<std::size_t>(t)));
        if (t == length) break;
        phi.right_into(x, phi_x);
        const double b = sample_pb(cfg.temperature, rng);
        const StepPrecompute& step = pre.steps[static_cast<std::size_t>(t)];
        const double den = step.B.dot(phi_x);
        if (!(std::abs(den * b) >= kTinyDenominator)) {
          throw DegenerateTransition("linearized transition at step " + std::to_string(t) +
                                         ": denominator " + std::to_string(den * b),
                                     den * b);
        }
        const double degree = pre.load.C.dot(phi_x);
        if (degree < 0.0) ++slot.negative_degrees;
        x.noalias() = step.A * phi_x;
        x /= den;
        if (load != 0.0) load *= degree / (1.0 - p_halt);
      }
      slot.lengths.push_back(static_cast<std::size_t>(length) + 1);
    }
  });

  out.offsets.assign(walks + 1, 0);
  std::size_t total = 0;
  for (std::size_t node = 0; node < per_node.size(); ++node) {
    for (int w = 0; w < m; ++w) {
      total += per_node[node].lengths[static_cast<std::size_t>(w)];
      out.offsets[node * static_cast<std::size_t>(m) + static_cast<std::size_t>(w) + 1] = total;
    }
  }
  out.locations.resize(d, static_cast<Index>(total));
  out.loads.resize(static_cast<Index>(total));
  out.deposits.resize(static_cast<Index>(total));
  Index cursor = 0;
  for (NodeWalks& slot : per_node) {
    const Index count = static_cast<Index>(slot.loads.size());
    out.locations.middleCols(cursor, count) =
        Eigen::Map<const Matrix>(slot.locations.data(), d, count);
    out.loads.segment(cursor, count) = Eigen::Map<const Vector>(slot.loads.data(), count);
    out.deposits.segment(cursor, count) = Eigen::Map<const Vector>(slot.deposits.data(), count);
    out.negative_degrees += slot.negative_degrees;
    cursor += count;
    slot = NodeWalks{};
  }
  return out;
}

DepositMap make_deposit_map(const PointCloud& cloud, const WeightFunction& f,
                            const SwingConfig& cfg) {
  cfg.validate();
  const WeightFunction& g = cfg.deposit_weight ? *cfg.deposit_weight : f;
  FeatureMap psi = build_feature_map(g, cfg.temperature, cfg.psi, cloud,
                                     stream_seed(cfg.walk.seed, {tags::deposit}));
  Matrix L = psi.left_rows(cloud.points());
  Vector C = L.colwise().sum().transpose();
  return DepositMap{std::move(psi), std::move(L), std::move(C)};
}

SwingFactor build_swing_factor(const Trajectories& traj, const DepositMap& deposit) {
  const Index n = traj.nodes;
  const Index r = deposit.L.cols();
  if (deposit.L.rows() != n) throw InvalidInput("deposit map and trajectories disagree on N");
  SwingFactor out;
  out.Q = Matrix::Zero(n, r);
  std::vector<std::size_t> skipped(static_cast<std::size_t>(n), 0);
  const double inv_m = 1.0 / static_cast<double>(traj.walks_per_node);
  // Features of all steps from one start node are evaluated as a block so the
  // exponentials and products vectorize. psi_R(x) / (psi_R(x) . C) ignores the
  // scale of psi_R(x), so rows are rescaled freely.
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t node) {
    const Index begin = static_cast<Index>(traj.offsets[traj.walk_index(static_cast<Index>(node), 0)]);
    const Index end = static_cast<Index>(
        traj.offsets[traj.walk_index(static_cast<Index>(node), 0) + traj.walks_per_node]);
    const Index count = end - begin;
    if (count == 0) return;
    Matrix psi_rows = deposit.psi.right_rows_up_to_scale(traj.locations.middleCols(begin, count).transpose());
    const Vector norms = psi_rows * deposit.C;
    Vector weights(count);
    for (Index s = 0; s < count; ++s) {
      const double u = traj.deposits(begin + s);
      const double norm = norms(s);
      if (!std::isfinite(norm)) psi_rows.row(s).setZero();
      if (u == 0.0) {
        weights(s) = 0.0;
      } else if (norm == 0.0 || !std::isfinite(norm)) {
        weights(s) = 0.0;
        ++skipped[node];
      } else {
        weights(s) = u / norm;
      }
    }
    out.Q.row(static_cast<Index>(node)).noalias() = inv_m * (weights.transpose() * psi_rows);
  });
  for (std::size_t s : skipped) out.skipped_steps += s;
  return out;
}

Vector matvec_K1(const SwingFactor& factor, const DepositMap& deposit, const Vector& w) {
  if (w.size() != deposit.L.rows()) throw InvalidInput("matvec: vector size mismatch");
  const Vector projected = deposit.L.transpose() * w;
  return factor.Q * projected;
}

Vector matvec_K2T(const SwingFactor& factor, const DepositMap& deposit, const Vector& v) {
  if (v.size() != factor.Q.rows()) throw InvalidInput("matvec: vector size mismatch");
  const Vector projected = factor.Q.transpose() * v;
  return deposit.L * projected;
}

Vector swing_matvec(const SwingFactor& first, const SwingFactor& second,
                    const DepositMap& deposit, const Vector& v) {
  return matvec_K1(first, deposit, matvec_K2T(second, deposit, v));
}

Matrix swing_dense_kernel(const SwingFactor& first, const SwingFactor& second,
                          const DepositMap& deposit) {
  const Matrix gram = deposit.L.transpose() * deposit.L;
  return first.Q * gram * second.Q.transpose();
}

Matrix dense_deposition_oracle(const Trajectories& traj, const DepositMap& deposit) {
  const Index n = traj.nodes;
  Matrix xi = Matrix::Zero(n, n);
  const double inv_m = 1.0 / static_cast<double>(traj.walks_per_node);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto* log_psi = std::get_if<PositiveFeatureMap>(&deposit.psi.variant());
  const Matrix log_L = log_psi ? Matrix(deposit.L.array().log()) : Matrix();
  for (Index i = 0; i < n; ++i) {
    const std::size_t begin = traj.offsets[traj.walk_index(i, 0)];
    const std::size_t end = traj.offsets[traj.walk_index(i, 0) + traj.walks_per_node];
    for (std::size_t s = begin; s < end; ++s) {
      const double u = traj.deposits(static_cast<Index>(s));
      if (u == 0.0) continue;
      const Vector x = traj.locations.col(static_cast<Index>(s));
      Vector weights(n);
      if (log_psi) {
        // psi_R(x) underflows far from the cloud; pair in log space instead.
        const Vector log_x = log_psi->log_features(x);
        for (Index k = 0; k < n; ++k) {
          const Eigen::ArrayXd terms = log_L.row(k).transpose().array() + log_x.array();
          const double peak = terms.maxCoeff();
          weights(k) = peak == -kInf ? -kInf : peak + std::log((terms - peak).exp().sum());
        }
        const double peak = weights.maxCoeff();
        weights = (weights.array() - peak).exp();
      } else {
        const Vector psi_x = deposit.psi.right(x);
        for (Index k = 0; k < n; ++k) weights(k) = deposit.L.row(k).dot(psi_x);
      }
      const double total = weights.sum();
      if (total == 0.0 || !std::isfinite(total)) continue;
      xi.row(i) += (inv_m * u / total) * weights.transpose();
    }
  }
  return xi;
}

SwingFactorization swing_factorize(const PointCloud& cloud, const WeightFunction& f,
                                   const Modulation& rho, const SwingConfig& cfg) {
  DepositMap deposit = make_deposit_map(cloud, f, cfg);
  Trajectories first_walks = run_swing_walks(cloud, f, rho, cfg, Ensemble::first);
  Trajectories second_walks = run_swing_walks(cloud, f, rho, cfg, Ensemble::second);
  SwingFactor first = build_swing_factor(first_walks, deposit);
  SwingFactor second = build_swing_factor(second_walks, deposit);
  return SwingFactorization{std::move(deposit), std::move(first_walks), std::move(second_walks),
                            std::move(first), std::move(second)};
}

}  // namespace swing
