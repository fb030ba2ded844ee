#pragma once

// Walks through R^d instead of over an explicit graph. Each transition is a
// Gumbel-softmax convex combination of cloud points, linearized with random
// features so that a step costs O(d r) instead of O(N); loads use a random
// feature estimate of the weighted degree, and deposits are spread over the
// cloud by a second kernel g. The kernel action K v costs O(N T m r).

#include <cstdint>
#include <optional>
#include <vector>

#include "swing/grf.hpp"
#include "swing/igraph.hpp"
#include "swing/rfeatures.hpp"

namespace swing {

enum class WalkLengthMode {
  fixed,     // one geometric length T shared by every walk of an ensemble
  per_walk,  // an independent geometric length per walk, as in GRF
};

struct SwingConfig {
  WalkConfig walk;
  double temperature = 1.0;  // sigma^2
  FeatureMapSpec phi;        // linearizes f^{1/sigma^2}
  FeatureMapSpec psi;        // linearizes g^{1/sigma^2}
  std::optional<WeightFunction> deposit_weight;  // g; f when empty
  WalkLengthMode length_mode = WalkLengthMode::fixed;

  void validate() const;
};

/// Step t of the linearized transition, for one ensemble.
struct StepPrecompute {
  Matrix A;  // d x r_phi: sum_j p_j a_j phi(p_j)^T
  Vector B;  // r_phi: sum_j a_j phi(p_j)
  int step = 0;
};

struct LoadPrecompute {
  Vector C;  // r_phi: sum_i phi(p_i)
};

struct StepPrecomputes {
  std::vector<StepPrecompute> steps;
  LoadPrecompute load;
};

/// `steps` transitions with fresh a_j ~ P_a per step (shared by all walkers
/// at that step) and the degree vector C.
StepPrecomputes build_step_precomputes(const PointCloud& cloud, const FeatureMap& phi, int steps,
                                       double temperature, std::uint64_t seed);

/// (A phi(x) b) / (B . phi(x) b). b cancels exactly and is only validated.
/// Throws DegenerateTransition when |B . phi(x) b| < 1e-300.
Vector linearized_transition(const StepPrecompute& pre, const Eigen::Ref<const Vector>& phi_x,
                             double b);

/// l (C . phi(x)) / (1 - p_halt).
double relaxed_load_update(double load, const LoadPrecompute& pre,
                           const Eigen::Ref<const Vector>& phi_x, double p_halt);

/// All walks of one ensemble. Walk (i, w) occupies entries
/// offsets[i m + w] .. offsets[i m + w + 1] - 1, one per visited step t.
struct Trajectories {
  Index nodes = 0;
  int walks_per_node = 0;
  Ensemble ensemble = Ensemble::first;
  std::vector<std::size_t> offsets;
  Matrix locations;  // d x total, column per step
  Vector loads;      // l^t
  Vector deposits;   // u^t = l^t rho(t)
  std::size_t negative_degrees = 0;
  std::size_t truncated_walks = 0;

  std::size_t walk_index(Index node, int walk) const {
    return static_cast<std::size_t>(node) * static_cast<std::size_t>(walks_per_node) +
           static_cast<std::size_t>(walk);
  }
  std::size_t total_steps() const { return offsets.empty() ? 0 : offsets.back(); }
};

/// Walks from every cloud point. The phi map and the P_a draws are private to
/// the ensemble, so two ensembles are independent.
Trajectories run_swing_walks(const PointCloud& cloud, const WeightFunction& f,
                             const Modulation& rho, const SwingConfig& cfg,
                             Ensemble ensemble = Ensemble::first);

/// Deposit kernel g(p_k - x) ~= psi_L(p_k) . psi_R(x), shared by both ensembles.
struct DepositMap {
  FeatureMap psi;
  Matrix L;  // N x r_psi, row k = psi_L(p_k)
  Vector C;  // sum_k psi_L(p_k)
};

DepositMap make_deposit_map(const PointCloud& cloud, const WeightFunction& f,
                            const SwingConfig& cfg);

/// K_i = L q_i with q_i = (1/m) sum_w sum_t u^t psi_R(x^t) / (psi_R(x^t) . C),
/// so the factor is K = Q L^T.
struct SwingFactor {
  Matrix Q;  // N x r_psi
  std::size_t skipped_steps = 0;  // zero deposit normalization
};

SwingFactor build_swing_factor(const Trajectories& traj, const DepositMap& deposit);

/// Entry i = sum_k xi(i)[k] w_k.
Vector matvec_K1(const SwingFactor& factor, const DepositMap& deposit, const Vector& w);
/// Entry j = sum_i xi'(i)[j] v_i.
Vector matvec_K2T(const SwingFactor& factor, const DepositMap& deposit, const Vector& v);
/// K_1 (K_2^T v).
Vector swing_matvec(const SwingFactor& first, const SwingFactor& second,
                    const DepositMap& deposit, const Vector& v);
/// Dense K_1 K_2^T = Q (L^T L) Q'^T for oracle comparisons.
Matrix swing_dense_kernel(const SwingFactor& first, const SwingFactor& second,
                          const DepositMap& deposit);

/// Explicit signature vectors xi(i) built pair by pair (O(N^2 T m)).
Matrix dense_deposition_oracle(const Trajectories& traj, const DepositMap& deposit);

/// Both ensembles plus the shared deposit map.
struct SwingFactorization {
  DepositMap deposit;
  Trajectories first_walks;
  Trajectories second_walks;
  SwingFactor first;
  SwingFactor second;

  Vector matvec(const Vector& v) const { return swing_matvec(first, second, deposit, v); }
  Matrix dense() const { return swing_dense_kernel(first, second, deposit); }
};

SwingFactorization swing_factorize(const PointCloud& cloud, const WeightFunction& f,
                                   const Modulation& rho, const SwingConfig& cfg);

}  // namespace swing
