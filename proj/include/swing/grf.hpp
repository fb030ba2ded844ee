#pragma once

// Graph Random Features on an explicitly materialized weight matrix: each
// node launches m terminating random walks that deposit modulated loads, and
// the stacked signature vectors give K_alpha(W) = E[K_1 K_2^T].

#include <Eigen/SparseCore>

#include <cstdint>
#include <utility>

#include "swing/igraph.hpp"
#include "swing/rng.hpp"

namespace swing {

struct WalkConfig {
  double p_halt = 0.5;     // termination probability after every transition
  int walks_per_node = 16;  // m
  int max_steps = 10000;   // hard cap on transitions per walk
  std::uint64_t seed = 0;

  void validate() const;
};

/// Which independent walk ensemble a factor belongs to. Each tag selects a
/// disjoint family of RNG streams.
enum class Ensemble : std::uint64_t { first = 1, second = 2 };

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SignatureMatrix {
  SparseRows rows;  // row i is xi_rho(i); a walk touches few nodes
  Ensemble ensemble = Ensemble::first;
  std::size_t truncated_walks = 0;  // walks stopped by max_steps

  Matrix dense() const { return Matrix(rows); }
};

struct WalkOutcome {
  int length = 0;  // number of deposits minus one
  bool truncated = false;
};

/// One walk of the signature construction, adding its (unnormalized)
/// deposits into `accum`. Nodes with zero out-weight end the walk right after
/// their deposit.
WalkOutcome sample_walk(const Matrix& W, const Vector& deg, const Modulation& rho,
                        const WalkConfig& cfg, Index start, Rng& rng, Eigen::Ref<Vector> accum);

/// xi_rho(i), averaged over cfg.walks_per_node walks.
Vector sample_signature_vector(const Matrix& W, const Vector& deg, const Modulation& rho,
                               const WalkConfig& cfg, Index i,
                               Ensemble ensemble = Ensemble::first,
                               std::size_t* truncated_walks = nullptr);

SignatureMatrix grf_signatures(const Matrix& W, const Vector& deg, const Modulation& rho,
                               const WalkConfig& cfg, Ensemble ensemble);

/// Two factors from independent ensembles.
std::pair<SignatureMatrix, SignatureMatrix> grf_factorize(const Matrix& W, const Vector& deg,
                                                          const Modulation& rho,
                                                          const WalkConfig& cfg);

/// Dense K_1 K_2^T for oracle comparisons.
Matrix grf_dense_kernel(const SignatureMatrix& K1, const SignatureMatrix& K2);

/// K_1 (K_2^T v), never forming K_1 K_2^T.
Vector grf_matvec(const SignatureMatrix& K1, const SignatureMatrix& K2, const Vector& v);

}  // namespace swing
