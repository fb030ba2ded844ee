#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "stats.hpp"
#include "swing/error.hpp"
#include "swing/rfeatures.hpp"

using namespace swing;

namespace {

constexpr double kPi = std::numbers::pi;

double gaussian(const Vector& x, const Vector& y, double sigma) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Si(x) = integral_0^x sin(t) / t dt, by quadrature over half periods.
double sine_integral(double x) {
  using boost::math::quadrature::gauss_kronrod;
  const double sign = x < 0.0 ? -1.0 : 1.0;
  x = std::abs(x);
  auto f = [](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; };
  double total = 0.0;
  for (double lo = 0.0; lo < x; lo += kPi) {
    total += gauss_kronrod<double, 31>::integrate(f, lo, std::min(lo + kPi, x), 0, 0.0);
  }
  return sign * total;
}

// Inverse transform of the box restricted to |w| <= B, one coordinate.
double band_limited_box(double z, double eps, double band) {
  return (sine_integral(2.0 * kPi * band * (eps + z)) + sine_integral(2.0 * kPi * band * (eps - z))) /
         kPi;
}

}  // namespace

TEST_CASE("Fourier features reproduce h(0) exactly") {
  const FourierFeatureMap map = sample_gaussian_fourier(0.7, 3, 64, 1);
  const Vector x = vec({0.3, -1.2, 2.0});
  const std::complex<double> dot = (map.eta1(x).array() * map.eta2(x).array()).sum();
  CHECK(std::abs(dot.real() - 1.0) < 1e-12);
  CHECK(std::abs(dot.imag()) < 1e-12);
  CHECK(std::abs(map.estimate(x, x) - 1.0) < 1e-12);
}

TEST_CASE("Fourier features of distant points stay within the Monte-Carlo band") {
  const Index r = 1024;
  const FourierFeatureMap map = sample_gaussian_fourier(0.5, 2, r, 2);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Vector x = testing::gaussian_points(1, 2, rng, 10.0).transpose();
    const Vector y = testing::gaussian_points(1, 2, rng, 10.0).transpose();
    CHECK(std::abs(map.estimate(x, y) - gaussian(x, y, 0.5)) < 3.0 / std::sqrt(double(r)));
  }
}

TEST_CASE("zero frequencies give a constant map") {
  const FourierFeatureMap map(Matrix::Zero(5, 2), 1.0, Vector::Ones(5));
  const Vector x = vec({4.0, -7.0});
  const Vector y = vec({-1.0, 0.5});
  CHECK(std::abs(map.estimate(x, y) - 1.0) < 1e-14);
  CHECK((map.eta2(x).array() - 1.0 / std::sqrt(5.0)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("the two Fourier embeddings are conjugate up to signs") {
  const FourierFeatureMap map = sample_step_fourier(0.4, 2, 32, 5.0, 3);
  const Vector v = vec({0.1, -0.6});
  const Eigen::VectorXcd a = map.eta1(v);
  const Eigen::VectorXcd b = map.eta2(v);
  for (Index j = 0; j < map.features(); ++j) {
    CHECK(std::abs(a(j) - map.signs()(j) * std::conj(b(j))) < 1e-14);
  }
}

TEST_CASE("real embeddings equal the real part of the complex product") {
  const FourierFeatureMap map = sample_step_fourier(0.3, 3, 40, 4.0, 4);
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Vector x = testing::gaussian_points(1, 3, rng).transpose();
    const Vector y = testing::gaussian_points(1, 3, rng).transpose();
    const std::complex<double> dot = (map.eta1(x).array() * map.eta2(y).array()).sum();
    CHECK(std::abs(map.left(x).dot(map.right(y)) - dot.real()) < 1e-12);
    CHECK(std::abs(map.estimate(x, y) - dot.real()) < 1e-12);
  }
  const Matrix pts = testing::gaussian_points(6, 3, rng);
  const Matrix R = map.right_rows(pts);
  const Matrix L = map.left_rows(pts);
  for (Index i = 0; i < 6; ++i) {
    CHECK((R.row(i).transpose() - map.right(pts.row(i).transpose())).norm() < 1e-14);
    CHECK((L.row(i).transpose() - map.left(pts.row(i).transpose())).norm() < 1e-14);
  }
}

TEST_CASE("positive features at the origin are flat") {
  const Index r = 50;
  const PositiveFeatureMap map = gaussian_positive_map(1.3, 4, r, 5);
  const Vector phi = map(Vector::Zero(4));
  CHECK((phi.array() - 1.0 / std::sqrt(double(r))).abs().maxCoeff() < 1e-15);
  CHECK(std::abs(map.estimate(Vector::Zero(4), Vector::Zero(4)) - 1.0) < 1e-14);
}

TEST_CASE("positive features converge for many features") {
  const PositiveFeatureMap map = gaussian_positive_map(1.0, 3, 100000, 6);
  const Vector x = vec({0.2, -0.4, 0.1});
  const Vector y = vec({-0.3, 0.1, 0.5});
  CHECK(std::abs(map.estimate(x, y) - gaussian(x, y, 1.0)) < 5e-3);
}

TEST_CASE("positive features are positive and never overflow") {
  const PositiveFeatureMap map = gaussian_positive_map(0.5, 2, 64, 7);
  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    const Vector u = testing::gaussian_points(1, 2, rng).transpose();
    CHECK(map(u).minCoeff() > 0.0);
  }
  const Vector huge = vec({300.0, -250.0});
  CHECK(map.log_features(huge).allFinite());
  const Vector phi = map(huge);
  CHECK(phi.allFinite());
  CHECK(phi.minCoeff() >= 0.0);
  // Every paired log-feature is far below the double range, so the estimate
  // underflows to 0 rather than overflowing.
  CHECK(map.estimate(huge, huge) == 0.0);
}

TEST_CASE("row evaluation agrees with pointwise evaluation") {
  const PositiveFeatureMap map = gaussian_positive_map(0.8, 3, 20, 8, true);
  Rng rng(8);
  const Matrix pts = testing::gaussian_points(7, 3, rng);
  const Matrix rows = map.rows(pts);
  const Matrix logs = map.log_rows(pts);
  for (Index i = 0; i < 7; ++i) {
    const Vector u = pts.row(i).transpose();
    CHECK((rows.row(i).transpose() - map(u)).norm() <= 1e-13 * map(u).norm());
    CHECK((logs.row(i).transpose() - map.log_features(u)).norm() < 1e-12);
  }
}

TEST_CASE("scale-free rows are positive multiples of the exact rows") {
  Rng rng(9);
  const FeatureMap map = gaussian_positive_map(0.6, 2, 30, 9);
  const Matrix pts = testing::gaussian_points(10, 2, rng);
  const Matrix exact = map.right_rows(pts);
  const Matrix scaled = map.right_rows_up_to_scale(pts);
  for (Index i = 0; i < 10; ++i) {
    CHECK(scaled.row(i).maxCoeff() == doctest::Approx(1.0));
    const Eigen::ArrayXd ratio = exact.row(i).array() / scaled.row(i).array();
    CHECK((ratio - ratio(0)).abs().maxCoeff() <= 1e-12 * ratio(0));
  }
  const FeatureMap fourier = sample_gaussian_fourier(0.6, 2, 30, 9);
  CHECK(fourier.right_rows_up_to_scale(pts) == fourier.right_rows(pts));
}

TEST_CASE("orthogonal ensembles") {
  const Matrix small = orthogonal_ensemble(3, 3, 10);
  for (Index a = 0; a < 3; ++a) {
    for (Index b = a + 1; b < 3; ++b) {
      CHECK(std::abs(small.row(a).dot(small.row(b))) < 1e-12 * small.row(a).norm() * small.row(b).norm());
    }
  }
  const Matrix big = orthogonal_ensemble(5, 20000, 11);
  CHECK(std::abs(big.rowwise().squaredNorm().mean() - 5.0) < 0.1);
  // Blocks of d rows are orthogonal; the last partial block too.
  const Matrix partial = orthogonal_ensemble(4, 6, 12);
  CHECK(std::abs(partial.row(4).dot(partial.row(5))) < 1e-12 * partial.row(4).norm() * partial.row(5).norm());
}

TEST_CASE("orthogonal frequencies reduce the estimator variance") {
  const Index d = 16;
  Rng rng(13);
  const Vector x = testing::gaussian_points(1, d, rng, 0.15).transpose();
  const Vector y = testing::gaussian_points(1, d, rng, 0.15).transpose();
  std::vector<double> iid(2000), ort(2000);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    iid[s] = gaussian_positive_map(1.0, d, d, s, false).estimate(x, y);
    ort[s] = gaussian_positive_map(1.0, d, d, s, true).estimate(x, y);
  }
  CHECK(testing::variance(ort) < testing::variance(iid));
  const double target = gaussian(x, y, 1.0);
  CHECK(std::abs(testing::mean(ort) - target) < 3.0 * testing::standard_error(ort));
}

TEST_CASE("importance proposal validates its inputs") {
  Matrix pts(2, 1);
  pts << 1.0, 2.0;
  const PointCloud cloud(pts);
  CHECK_THROWS_AS(importance_proposal(cloud, 1.0, 0.0, 8, 0), InvalidInput);
  CHECK_THROWS_AS(importance_proposal(cloud, 1.0, -1.0, 8, 0), InvalidInput);
  CHECK_THROWS_AS(importance_proposal(cloud, 0.0, 1.0, 8, 0), InvalidInput);
  CHECK_THROWS_AS(importance_proposal(cloud, 1.0, 1.0, 0, 0), InvalidInput);
  CHECK_THROWS_AS(gaussian_positive_map(1.0, 0, 8, 0), InvalidInput);
  CHECK_THROWS_AS(PositiveFeatureMap(Matrix::Zero(3, 2), 1.0, Vector::Zero(2), false), InvalidInput);
}

TEST_CASE("importance proposal centred at zero is the standard proposal") {
  // In one dimension a half-normal radius with a random sign is exactly N(0, 1).
  Matrix pts(3, 1);
  pts << 0.0, 0.0, 0.0;
  const PositiveFeatureMap map = importance_proposal(PointCloud(pts), 1.0, 1.0, 200, 14);
  CHECK(map.log_importance().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("importance proposal is unbiased") {
  Rng rng(15);
  const PointCloud cloud(testing::gaussian_points(20, 2, rng, 2.0));
  const Vector x = cloud.point(0);
  const Vector y = cloud.point(1);
  std::vector<double> est(4000);
  for (std::uint64_t s = 0; s < est.size(); ++s) {
    est[s] = importance_proposal(cloud, 1.0, 1.0, 16, s).estimate(x, y);
  }
  CHECK(std::abs(testing::mean(est) - gaussian(x, y, 1.0)) < 3.0 * testing::standard_error(est));
}

TEST_CASE("importance proposal concentrates on the relevant frequencies") {
  Matrix pts(1, 1);
  pts << 3.0;
  const PointCloud cloud(pts);
  const Vector x = cloud.point(0);
  std::vector<double> plain(10000), shifted(10000);
  for (std::uint64_t s = 0; s < plain.size(); ++s) {
    plain[s] = std::abs(std::log(gaussian_positive_map(1.0, 1, 8, s).estimate(x, x)));
    shifted[s] = std::abs(std::log(importance_proposal(cloud, 1.0, 1.0, 8, s).estimate(x, x)));
  }
  CHECK(testing::median(shifted) < testing::median(plain));
}

TEST_CASE("box transform closed form") {
  CHECK(step_l1_transform(0.5, vec({0.0})) == doctest::Approx(1.0));
  CHECK(step_l1_transform(0.25, vec({0.0, 0.0})) == doctest::Approx(0.25));
  CHECK(step_l1_transform(1.0, vec({kPi / 2.0})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(step_l1_transform(1.0, vec({1.0, 2.0})) ==
        doctest::Approx(std::sin(2.0) * std::sin(4.0) / 2.0));
}

TEST_CASE("box Fourier features reproduce the band-limited box") {
  const double eps = 0.5;
  const double band = 3.0;
  const Vector x = vec({0.1});
  for (double z : {0.0, 0.3, 0.45, 0.8}) {
    const Vector y = vec({0.1 - z});
    std::vector<double> est(3000);
    for (std::uint64_t s = 0; s < est.size(); ++s) {
      est[s] = sample_step_fourier(eps, 1, 64, band, s).estimate(x, y);
    }
    CHECK(std::abs(testing::mean(est) - band_limited_box(z, eps, band)) <
          3.5 * testing::standard_error(est));
  }
  CHECK_THROWS_AS(sample_step_fourier(0.0, 1, 4, 1.0, 0), InvalidInput);
  CHECK_THROWS_AS(sample_step_fourier(1.0, 1, 4, 0.0, 0), InvalidInput);
}

TEST_CASE("feature maps for walk transitions") {
  Rng rng(16);
  const PointCloud cloud(testing::gaussian_points(10, 2, rng));
  FeatureMapSpec spec;
  spec.features = 12;
  const FeatureMap positive = build_feature_map(WeightFunction::gaussian(1.0), 0.5, spec, cloud, 1);
  CHECK(positive.positive());
  CHECK(positive.output_dim() == 12);
  spec.kind = FeatureKind::fourier;
  const FeatureMap fourier = build_feature_map(WeightFunction::gaussian(1.0), 0.5, spec, cloud, 1);
  CHECK(!fourier.positive());
  CHECK(fourier.output_dim() == 24);
  CHECK(fourier.input_dim() == 2);
  CHECK_THROWS_AS(build_feature_map(WeightFunction::step_l2(1.0), 1.0, spec, cloud, 1), InvalidInput);
}
