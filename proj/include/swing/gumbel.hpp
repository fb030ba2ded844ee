#pragma once

// Gumbel-max sampling, the exact Gumbel-softmax relaxed transition (the
// O(N) per-walker oracle for the linearized walk), and the factorization of
// Frechet noise exp(tau / sigma^2) into a per-point factor a ~ P_a and a
// per-walker factor b ~ P_b.

#include <span>

#include "swing/igraph.hpp"
#include "swing/rng.hpp"

namespace swing {

/// Standard Gumbel(0, 1) via -log(-log U), U clamped inside (0, 1).
double sample_gumbel(Rng& rng);

/// exp(G / shape) with G standard Gumbel: Frechet with the given shape, scale 1.
double sample_frechet(double shape, Rng& rng);

/// Per-point factor: 2^{-1/(2 s)} sqrt(F), F ~ Frechet(s), s = temperature.
/// Density s y^{-1-2s} exp(-1 / (2 y^{2s})).
double sample_pa(double temperature, Rng& rng);

/// Per-walker factor: |Z|^{-1/s}, Z standard normal, s = temperature.
/// Density sqrt(2/pi) s y^{-1-s} exp(-1 / (2 y^{2s})).
double sample_pb(double temperature, Rng& rng);

double density_pa(double y, double temperature);
double density_pb(double y, double temperature);

/// argmax_i [log w_i + noise_i] over entries with w_i > 0.
/// Throws InvalidInput if every weight is zero.
Index gumbel_max_select(std::span<const double> weights, std::span<const double> noise);

struct RelaxedTransition {
  Vector location;      // sum_i c_i p_i
  Vector coefficients;  // softmax coefficients c_i, nonnegative, sum to 1
};

/// Gumbel-softmax step at temperature sigma^2:
///   c_i proportional to exp((log f(p_i - x) + tau_i) / sigma^2).
/// Throws InvalidInput when f vanishes at every point (empty support).
RelaxedTransition relaxed_transition_exact(const PointCloud& cloud, const WeightFunction& f,
                                           const Vector& x, double temperature,
                                           std::span<const double> noise);

/// Same step with the exponentiated noise exp(tau_i / sigma^2) supplied
/// directly, e.g. as products a_i * b of the Frechet factors.
RelaxedTransition relaxed_transition_with_multipliers(const PointCloud& cloud,
                                                      const WeightFunction& f, const Vector& x,
                                                      double temperature,
                                                      std::span<const double> multipliers);

}  // namespace swing
