#include <doctest.h>

#include <cmath>

#include "stats.hpp"
#include "swing/error.hpp"
#include "swing/swing.hpp"

using namespace swing;

namespace {

SwingConfig small_config(std::uint64_t seed, int walks = 4, double p_halt = 0.5) {
  SwingConfig cfg;
  cfg.walk.p_halt = p_halt;
  cfg.walk.walks_per_node = walks;
  cfg.walk.seed = seed;
  cfg.phi.features = 64;
  cfg.psi.features = 64;
  cfg.length_mode = WalkLengthMode::per_walk;
  return cfg;
}

Modulation diffusion_rho(double lambda) {
  return deconvolve_modulation(KernelSpec(Diffusion{lambda}), 30);
}

// Signature rows rebuilt step by step from the trajectories, without the
// factor matrices.
Matrix signature_oracle(const Trajectories& traj, const DepositMap& dep, const PointCloud& cloud) {
  const Index n = cloud.size();
  Matrix xi = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (int w = 0; w < traj.walks_per_node; ++w) {
      const std::size_t idx = traj.walk_index(i, w);
      for (std::size_t s = traj.offsets[idx]; s < traj.offsets[idx + 1]; ++s) {
        const Vector x = traj.locations.col(static_cast<Index>(s));
        Vector g(n);
        if (const auto* pos = std::get_if<PositiveFeatureMap>(&dep.psi.variant())) {
          // Log-space pairing: the features underflow far from the cloud.
          const Eigen::ArrayXd lx = pos->log_features(x).array();
          for (Index k = 0; k < n; ++k) {
            const Eigen::ArrayXd terms = pos->log_features(cloud.point(k)).array() + lx;
            g(k) = terms.maxCoeff() + std::log((terms - terms.maxCoeff()).exp().sum());
          }
          g = (g.array() - g.maxCoeff()).exp();
        } else {
          for (Index k = 0; k < n; ++k) g(k) = dep.psi.estimate(cloud.point(k), x);
        }
        xi.row(i) += traj.deposits(static_cast<Index>(s)) / g.sum() / traj.walks_per_node * g.transpose();
      }
    }
  }
  return xi;
}

}  // namespace

TEST_CASE("precompute for a single point") {
  Matrix pts(1, 2);
  pts << 0.5, -0.25;
  const PointCloud cloud(pts);
  const FeatureMap phi = gaussian_positive_map(1.0, 2, 16, 1);
  const StepPrecomputes pre = build_step_precomputes(cloud, phi, 3, 1.0, 7);
  REQUIRE(pre.steps.size() == 3);
  const Vector phi_p = phi.left(cloud.point(0));
  CHECK((pre.load.C - phi_p).norm() < 1e-15);
  for (const StepPrecompute& s : pre.steps) {
    CHECK(s.A.rows() == 2);
    CHECK(s.A.cols() == 16);
    CHECK(s.B.size() == 16);
    const double a = s.B(0) / phi_p(0);
    CHECK(a > 0.0);
    CHECK((s.B - a * phi_p).norm() <= 1e-14 * s.B.norm());
    CHECK((s.A - cloud.point(0) * s.B.transpose()).norm() <= 1e-14 * s.A.norm());
    CHECK((linearized_transition(s, phi.right(Vector::Zero(2)), 1.0) - cloud.point(0)).norm() < 1e-14);
  }
}

TEST_CASE("degree vector for a cloud at the origin") {
  const PointCloud cloud(Matrix::Zero(9, 3));
  const Index r = 25;
  const FeatureMap phi = gaussian_positive_map(0.7, 3, r, 2);
  const StepPrecomputes pre = build_step_precomputes(cloud, phi, 0, 1.0, 0);
  CHECK(pre.steps.empty());
  CHECK((pre.load.C.array() - 9.0 / std::sqrt(double(r))).abs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(build_step_precomputes(cloud, phi, -1, 1.0, 0), InvalidInput);
  CHECK_THROWS_AS(build_step_precomputes(PointCloud(Matrix::Zero(3, 2)), phi, 1, 1.0, 0), InvalidInput);
}

TEST_CASE("linearized transition ignores the walker factor") {
  Rng rng(3);
  const PointCloud cloud(testing::gaussian_points(20, 2, rng));
  const FeatureMap phi = gaussian_positive_map(1.0, 2, 32, 3);
  const StepPrecomputes pre = build_step_precomputes(cloud, phi, 1, 0.8, 3);
  const Vector phi_x = phi.right(cloud.point(4));
  const Vector a = linearized_transition(pre.steps[0], phi_x, 0.5);
  const Vector b = linearized_transition(pre.steps[0], phi_x, 7.0);
  CHECK((a - b).norm() <= 1e-15 * a.norm());
  CHECK_THROWS_AS(linearized_transition(pre.steps[0], phi_x, 0.0), InvalidInput);
  CHECK_THROWS_AS(linearized_transition(pre.steps[0], phi_x, -1.0), InvalidInput);
  CHECK_THROWS_AS(linearized_transition(pre.steps[0], Vector::Ones(3), 1.0), InvalidInput);
}

TEST_CASE("a vanishing denominator is reported") {
  StepPrecompute pre;
  pre.A = Matrix::Ones(2, 4);
  pre.B = Vector::Zero(4);
  pre.step = 3;
  try {
    linearized_transition(pre, Vector::Ones(4), 1.0);
    FAIL("expected DegenerateTransition");
  } catch (const DegenerateTransition& e) {
    CHECK(e.denominator() == 0.0);
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
}

TEST_CASE("load update") {
  LoadPrecompute pre;
  pre.C = Vector::Constant(4, 0.5);
  const Vector phi_x = Vector::Constant(4, 0.5);
  CHECK(relaxed_load_update(2.0, pre, phi_x, 0.5) == doctest::Approx(4.0));
  CHECK(relaxed_load_update(0.0, pre, phi_x, 0.5) == 0.0);
  CHECK_THROWS_AS(relaxed_load_update(1.0, pre, phi_x, 1.0), InvalidInput);
  CHECK_THROWS_AS(relaxed_load_update(std::nan(""), pre, phi_x, 0.5), InvalidInput);

  // One point: the multiplier is h(0) / (1 - p) up to the feature estimate.
  Matrix one(1, 2);
  one << 0.0, 0.0;
  const FeatureMap phi = gaussian_positive_map(1.0, 2, 16, 4);
  const StepPrecomputes single = build_step_precomputes(PointCloud(one), phi, 0, 1.0, 0);
  CHECK(relaxed_load_update(1.0, single.load, phi.right(Vector::Zero(2)), 0.25) ==
        doctest::Approx(1.0 / 0.75));
}

TEST_CASE("feature degree estimate matches the weighted degree") {
  Rng rng(5);
  const PointCloud cloud(testing::gaussian_points(100, 2, rng, 0.35));
  const WeightFunction f = WeightFunction::gaussian(1.0);
  const FeatureMap phi = gaussian_positive_map(1.0, 2, 4096, 5, true);
  const StepPrecomputes pre = build_step_precomputes(cloud, phi, 0, 1.0, 0);
  for (Index q = 0; q < 5; ++q) {
    const Vector x = cloud.point(q * 7);
    double degree = 0.0;
    for (Index i = 0; i < cloud.size(); ++i) degree += f(cloud.point(i) - x);
    const double estimate = relaxed_load_update(1.0, pre.load, phi.right(x), 0.5) * 0.5;
    CHECK(std::abs(estimate - degree) < 0.05 * degree);
  }
}

TEST_CASE("walks start at their node with unit load") {
  Rng rng(6);
  const PointCloud cloud(testing::gaussian_points(12, 3, rng));
  const Modulation rho = diffusion_rho(0.5);
  const Trajectories traj = run_swing_walks(cloud, WeightFunction::gaussian(1.0), rho, small_config(6));
  CHECK(traj.nodes == 12);
  CHECK(traj.offsets.size() == 12 * 4 + 1);
  for (Index i = 0; i < 12; ++i) {
    for (int w = 0; w < 4; ++w) {
      const std::size_t s = traj.offsets[traj.walk_index(i, w)];
      CHECK((traj.locations.col(static_cast<Index>(s)) - cloud.point(i)).norm() == 0.0);
      CHECK(traj.loads(static_cast<Index>(s)) == 1.0);
      CHECK(traj.deposits(static_cast<Index>(s)) == rho(0));
    }
  }
  CHECK(traj.total_steps() == static_cast<std::size_t>(traj.loads.size()));
}

TEST_CASE("zero modulation deposits nothing") {
  Rng rng(7);
  const PointCloud cloud(testing::gaussian_points(10, 2, rng));
  const Modulation zero(std::vector<double>(8, 0.0));
  const SwingFactorization fz = swing_factorize(cloud, WeightFunction::gaussian(1.0), zero, small_config(7));
  CHECK(fz.first.Q.isZero(0.0));
  CHECK(fz.dense().isZero(0.0));
  CHECK(fz.matvec(Vector::Ones(10)).isZero(0.0));
}

TEST_CASE("a single point walks in place") {
  Matrix one(1, 2);
  one << 1.5, -0.5;
  const PointCloud cloud(one);
  SwingConfig cfg = small_config(8, 20, 0.2);
  const Trajectories traj = run_swing_walks(cloud, WeightFunction::gaussian(1.0), diffusion_rho(0.5), cfg);
  for (Index s = 0; s < traj.locations.cols(); ++s) {
    CHECK((traj.locations.col(s) - cloud.point(0)).norm() < 1e-12);
  }
}

TEST_CASE("walks are deterministic in the seed") {
  Rng rng(9);
  const PointCloud cloud(testing::gaussian_points(15, 2, rng));
  const WeightFunction f = WeightFunction::gaussian(1.0);
  const Modulation rho = diffusion_rho(0.5);
  const SwingFactorization a = swing_factorize(cloud, f, rho, small_config(11));
  const SwingFactorization b = swing_factorize(cloud, f, rho, small_config(11));
  const SwingFactorization c = swing_factorize(cloud, f, rho, small_config(12));
  CHECK(a.first_walks.locations == b.first_walks.locations);
  CHECK(a.dense() == b.dense());
  CHECK(a.dense() != c.dense());
  CHECK(a.first_walks.locations != a.second_walks.locations);
}

TEST_CASE("positive transition features keep walkers in the convex hull") {
  Rng rng(10);
  const PointCloud cloud(testing::gaussian_points(25, 2, rng));
  SwingConfig cfg = small_config(10, 8, 0.2);
  cfg.phi.kind = FeatureKind::positive;
  const Trajectories traj = run_swing_walks(cloud, WeightFunction::gaussian(1.0), diffusion_rho(0.5), cfg);
  CHECK(traj.negative_degrees == 0);
  for (int k = 0; k < 64; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / 64.0;
    Vector u(2);
    u << std::cos(angle), std::sin(angle);
    const double support = (cloud.points() * u).maxCoeff();
    CHECK((traj.locations.transpose() * u).maxCoeff() <= support + 1e-12);
  }
}

TEST_CASE("Fourier transition features can produce negative degrees") {
  Rng rng(11);
  const PointCloud cloud(testing::gaussian_points(30, 2, rng, 3.0));
  SwingConfig cfg = small_config(11, 8, 0.2);
  cfg.phi.kind = FeatureKind::fourier;
  cfg.phi.features = 4;
  const Trajectories traj = run_swing_walks(cloud, WeightFunction::gaussian(0.5), diffusion_rho(0.5), cfg);
  CHECK(traj.negative_degrees > 0);
}

TEST_CASE("fixed and per-walk length modes") {
  Rng rng(12);
  const PointCloud cloud(testing::gaussian_points(10, 2, rng));
  SwingConfig cfg = small_config(12, 6, 0.3);
  auto lengths = [&](const Trajectories& t) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k + 1 < t.offsets.size(); ++k) out.push_back(t.offsets[k + 1] - t.offsets[k]);
    return out;
  };
  cfg.length_mode = WalkLengthMode::fixed;
  const auto fixed = lengths(run_swing_walks(cloud, WeightFunction::gaussian(1.0), diffusion_rho(0.5), cfg));
  CHECK(std::all_of(fixed.begin(), fixed.end(), [&](std::size_t v) { return v == fixed[0]; }));
  cfg.length_mode = WalkLengthMode::per_walk;
  const auto varied = lengths(run_swing_walks(cloud, WeightFunction::gaussian(1.0), diffusion_rho(0.5), cfg));
  CHECK(std::any_of(varied.begin(), varied.end(), [&](std::size_t v) { return v != varied[0]; }));
}

TEST_CASE("matvec is linear and matches the dense product") {
  Rng rng(13);
  const PointCloud cloud(testing::gaussian_points(40, 3, rng));
  const SwingFactorization fz =
      swing_factorize(cloud, WeightFunction::gaussian(1.0), diffusion_rho(0.5), small_config(13));
  const Vector u = testing::gaussian_points(40, 1, rng);
  const Vector v = testing::gaussian_points(40, 1, rng);
  CHECK(fz.matvec(Vector::Zero(40)).isZero(0.0));
  const Vector lhs = fz.matvec(2.0 * u - 3.0 * v);
  const Vector rhs = 2.0 * fz.matvec(u) - 3.0 * fz.matvec(v);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
  const Matrix dense = fz.dense();
  CHECK((fz.matvec(u) - dense * u).norm() <= 1e-12 * (dense * u).norm());
  for (Index j = 0; j < 40; j += 13) {
    CHECK((fz.matvec(Vector::Unit(40, j)) - dense.col(j)).norm() <= 1e-12 * dense.col(j).norm());
  }
  CHECK_THROWS_AS(fz.matvec(Vector::Zero(3)), InvalidInput);
}

TEST_CASE("factorized kernel matches explicit signature vectors") {
  Rng rng(14);
  const PointCloud cloud(testing::gaussian_points(100, 3, rng));
  SwingConfig cfg = small_config(14, 3, 0.4);
  cfg.walk.max_steps = 10;
  // The last setting moves walkers far outside the cloud, where positive
  // deposit features underflow.
  for (int setting = 0; setting < 3; ++setting) {
    cfg.psi.kind = setting == 1 ? FeatureKind::fourier : FeatureKind::positive;
    if (setting == 2) {
      cfg.phi.kind = FeatureKind::fourier;
      cfg.psi.importance_scale = 2.0;
    }
    const SwingFactorization fz =
        swing_factorize(cloud, WeightFunction::gaussian(1.0), diffusion_rho(0.5), cfg);
    const Matrix xi1 = signature_oracle(fz.first_walks, fz.deposit, cloud);
    const Matrix xi2 = signature_oracle(fz.second_walks, fz.deposit, cloud);
    const Matrix expect = xi1 * xi2.transpose();
    CHECK(fne(expect, fz.dense()) < 1e-8);
    CHECK(fne(dense_deposition_oracle(fz.first_walks, fz.deposit), xi1) < 1e-8);
  }
}

TEST_CASE("sharp deposits concentrate on the walker's node") {
  // Walks of length zero deposit rho(0) at their start; with a narrow g the
  // signature is nearly rho(0) e_i.
  Matrix pts(20, 1);
  for (Index i = 0; i < 20; ++i) pts(i, 0) = static_cast<double>(i);
  const PointCloud cloud(pts);
  SwingConfig cfg = small_config(15, 1, 1.0 - 1e-9);
  cfg.psi.kind = FeatureKind::fourier;
  cfg.psi.features = 2048;
  cfg.deposit_weight = WeightFunction::gaussian(0.05);
  const Modulation rho = diffusion_rho(0.5);
  const Trajectories traj = run_swing_walks(cloud, WeightFunction::gaussian(1.0), rho, cfg);
  const Matrix xi = dense_deposition_oracle(traj, make_deposit_map(cloud, WeightFunction::gaussian(1.0), cfg));
  for (Index i = 0; i < 20; ++i) {
    Vector off = xi.row(i).transpose();
    off(i) = 0.0;
    CHECK(xi(i, i) > 5.0 * off.cwiseAbs().maxCoeff());
    CHECK(std::abs(xi(i, i) - rho(0)) < 0.3 * rho(0));
  }
}

TEST_CASE("independent repetitions average at the Monte-Carlo rate") {
  // Exact agreement is limited by the relaxation bias, so the rate is measured
  // between two independent averages of the same estimator. Fourier transition
  // features bound the degree estimate; positive ones give loads with very
  // heavy tails far from the origin.
  Rng rng(16);
  const PointCloud cloud(testing::gaussian_points(30, 2, rng, 2.0));
  const WeightFunction f = WeightFunction::gaussian(0.5);
  auto config = [](std::uint64_t seed) {
    SwingConfig cfg = small_config(seed, 1);
    cfg.phi.kind = FeatureKind::fourier;
    return cfg;
  };
  const Modulation rho = diffusion_rho(0.3);
  const std::vector<int> checkpoints = {8, 32, 128, 512};
  const int chains = 4;
  std::vector<double> mse(checkpoints.size(), 0.0);
  for (int c = 0; c < chains; ++c) {
    Matrix left = Matrix::Zero(30, 30);
    Matrix right = Matrix::Zero(30, 30);
    std::size_t next = 0;
    for (int k = 1; k <= checkpoints.back(); ++k) {
      const std::uint64_t base = static_cast<std::uint64_t>(c) * 100003 + 2 * k;
      left += swing_factorize(cloud, f, rho, config(base)).dense();
      right += swing_factorize(cloud, f, rho, config(base + 1)).dense();
      if (k == checkpoints[next]) {
        const double e = fne(left / k, right / k);
        mse[next++] += e * e / chains;
      }
    }
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    x.push_back(checkpoints[i]);
    y.push_back(std::sqrt(mse[i]));
  }
  CHECK(std::abs(testing::log_log_slope(x, y) + 0.5) <= 0.15);
}

TEST_CASE("configuration errors") {
  const PointCloud cloud(Matrix::Zero(3, 2));
  SwingConfig cfg = small_config(0);
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = small_config(0);
  cfg.psi.features = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK_THROWS_AS(run_swing_walks(cloud, WeightFunction::step_l2(1.0), diffusion_rho(0.5), small_config(0)),
                  InvalidInput);
}
