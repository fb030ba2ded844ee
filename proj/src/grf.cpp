#include "swing/grf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "swing/error.hpp"
#include "swing/parallel.hpp"

namespace swing {

namespace {

using Entries = std::vector<std::pair<Index, double>>;

bool is_symmetric(const Matrix& W) {
  const Index n = W.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      if (W(i, j) != W(j, i)) return false;
    }
  }
  return true;
}

// Draws the next node from row `current` by inverse CDF. Returns -1 when
// the row has no positive weight.
Index next_node(const double* row, Index n, double total, Rng& rng) {
  if (!(total > 0.0)) return -1;
  const double target = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  double cumulative = 0.0;
  Index last_positive = -1;
  for (Index j = 0; j < n; ++j) {
    const double w = row[j];
    if (w <= 0.0) continue;
    last_positive = j;
    cumulative += w;
    if (target < cumulative) return j;
  }
  return last_positive;
}

template <typename Deposit>
WalkOutcome walk_rows(const double* data, Index n, const Vector& deg, const Modulation& rho,
                      const WalkConfig& cfg, Index start, Rng& rng, Deposit&& deposit) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double load = 1.0;
  Index current = start;
  int length = 0;
  while (true) {
    deposit(current, load * rho(static_cast<std::size_t>(length)));
    if (length >= cfg.max_steps) return {length, true};
    const double d = deg(current);
    const Index next = next_node(data + current * n, n, d, rng);
    if (next < 0) return {length, false};
    load *= d / (1.0 - cfg.p_halt);
    current = next;
    if (unif(rng) < cfg.p_halt) return {length, false};
    ++length;
  }
}

// Row-contiguous view of W: a symmetric column-major matrix already stores
// row v as column v.
struct RowStorage {
  const Matrix* source = nullptr;
  Matrix transposed;
  const double* data() const { return source ? source->data() : transposed.data(); }
};

RowStorage row_storage(const Matrix& W) {
  RowStorage s;
  if (is_symmetric(W)) {
    s.source = &W;
  } else {
    s.transposed = W.transpose();
  }
  return s;
}

void check_inputs(const Matrix& W, const Vector& deg, const WalkConfig& cfg) {
  cfg.validate();
  if (W.rows() != W.cols()) throw InvalidInput("GRF: W must be square");
  if (deg.size() != W.rows()) throw InvalidInput("GRF: degree vector size mismatch");
}

// Deposits of all walks from node i, merged by node and divided by m.
Entries signature_entries(const double* data, Index n, const Vector& deg, const Modulation& rho,
                          const WalkConfig& cfg, Index i, Ensemble ensemble,
                          std::size_t& truncated) {
  Entries raw;
  truncated = 0;
  for (int w = 0; w < cfg.walks_per_node; ++w) {
    Rng rng = make_rng(cfg.seed, {tags::walk, static_cast<std::uint64_t>(ensemble),
                                  static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(w)});
    const WalkOutcome outcome = walk_rows(data, n, deg, rho, cfg, i, rng, [&](Index v, double x) {
      if (x != 0.0) raw.emplace_back(v, x);
    });
    if (outcome.truncated) ++truncated;
  }
  // Stable sort keeps the summation order of each node's deposits fixed.
  std::stable_sort(raw.begin(), raw.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  Entries merged;
  const double inv_m = 1.0 / static_cast<double>(cfg.walks_per_node);
  for (const auto& [v, x] : raw) {
    if (!merged.empty() && merged.back().first == v) {
      merged.back().second += x;
    } else {
      merged.emplace_back(v, x);
    }
  }
  for (auto& e : merged) e.second *= inv_m;
  return merged;
}

}  // namespace

void WalkConfig::validate() const {
  if (!(p_halt > 0.0 && p_halt < 1.0)) throw InvalidInput("p_halt must lie in (0, 1)");
  if (walks_per_node < 1) throw InvalidInput("walks per node must be at least 1");
  if (max_steps < 1) throw InvalidInput("max_steps must be at least 1");
}

WalkOutcome sample_walk(const Matrix& W, const Vector& deg, const Modulation& rho,
                        const WalkConfig& cfg, Index start, Rng& rng, Eigen::Ref<Vector> accum) {
  check_inputs(W, deg, cfg);
  if (start < 0 || start >= W.rows()) throw InvalidInput("GRF: start node out of range");
  if (accum.size() != W.rows()) throw InvalidInput("GRF: accumulator size mismatch");
  const RowStorage rows = row_storage(W);
  return walk_rows(rows.data(), W.rows(), deg, rho, cfg, start, rng,
                   [&](Index v, double x) { accum(v) += x; });
}

Vector sample_signature_vector(const Matrix& W, const Vector& deg, const Modulation& rho,
                               const WalkConfig& cfg, Index i, Ensemble ensemble,
                               std::size_t* truncated_walks) {
  check_inputs(W, deg, cfg);
  if (i < 0 || i >= W.rows()) throw InvalidInput("GRF: node index out of range");
  const RowStorage rows = row_storage(W);
  std::size_t cut = 0;
  const Entries entries = signature_entries(rows.data(), W.rows(), deg, rho, cfg, i, ensemble, cut);
  Vector xi = Vector::Zero(W.rows());
  for (const auto& [v, x] : entries) xi(v) = x;
  if (truncated_walks) *truncated_walks = cut;
  return xi;
}

SignatureMatrix grf_signatures(const Matrix& W, const Vector& deg, const Modulation& rho,
                               const WalkConfig& cfg, Ensemble ensemble) {
  check_inputs(W, deg, cfg);
  const Index n = W.rows();
  const RowStorage rows = row_storage(W);
  std::vector<Entries> per_node(static_cast<std::size_t>(n));
  std::vector<std::size_t> truncated(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    per_node[i] = signature_entries(rows.data(), n, deg, rho, cfg, static_cast<Index>(i),
                                    ensemble, truncated[i]);
  });

  SignatureMatrix out;
  out.ensemble = ensemble;
  out.rows.resize(n, n);
  Eigen::VectorXi counts(n);
  for (Index i = 0; i < n; ++i) counts(i) = static_cast<int>(per_node[static_cast<std::size_t>(i)].size());
  out.rows.reserve(counts);
  for (Index i = 0; i < n; ++i) {
    for (const auto& [v, x] : per_node[static_cast<std::size_t>(i)]) out.rows.insert(i, v) = x;
  }
  out.rows.makeCompressed();
  for (std::size_t t : truncated) out.truncated_walks += t;
  return out;
}

std::pair<SignatureMatrix, SignatureMatrix> grf_factorize(const Matrix& W, const Vector& deg,
                                                          const Modulation& rho,
                                                          const WalkConfig& cfg) {
  return {grf_signatures(W, deg, rho, cfg, Ensemble::first),
          grf_signatures(W, deg, rho, cfg, Ensemble::second)};
}

Matrix grf_dense_kernel(const SignatureMatrix& K1, const SignatureMatrix& K2) {
  if (K1.rows.cols() != K2.rows.cols()) throw InvalidInput("grf_dense_kernel: shape mismatch");
  return K1.dense() * K2.rows.transpose();
}

Vector grf_matvec(const SignatureMatrix& K1, const SignatureMatrix& K2, const Vector& v) {
  if (K2.rows.rows() != v.size() || K1.rows.cols() != K2.rows.cols()) {
    throw InvalidInput("grf_matvec: shape mismatch");
  }
  const Vector projected = K2.rows.transpose() * v;
  return K1.rows * projected;
}

}  // namespace swing
