#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "metaul/metrics.hpp"
#include "metaul/regression.hpp"
#include "test_util.hpp"

using namespace metaul;

namespace {

// Largest eigenvalue of a PSD matrix by power iteration.
double power_max(const Eigen::MatrixXd& s) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(s.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd w = s * v;
    const double next = v.dot(w);
    v = w.normalized();
    if (std::abs(next - lambda) <= 1e-15 * std::max(1.0, std::abs(next)) && it > 50) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace

TEST_CASE("least squares examples") {
  const std::vector<std::vector<double>> x{{0}, {1}, {2}};
  const std::vector<double> y{0, 1, 2};
  const auto m = fit_least_squares(x, y);
  CHECK(m.weights.size() == 1);
  CHECK(std::abs(m.weights[0] - 1.0) <= 1e-9);
  CHECK(std::abs(m.intercept) <= 1e-9);

  const std::vector<double> three{3, 3, 3};
  const auto c = fit_least_squares(x, three);
  CHECK(std::abs(c.weights[0]) <= 1e-9);
  CHECK(std::abs(c.intercept - 3.0) <= 1e-9);

  CHECK_THROWS_AS(fit_least_squares(std::vector<std::vector<double>>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("least squares normal-equation optimality") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50, p = 5;
    std::vector<std::vector<double>> x(n, std::vector<double>(p));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = rng.normal(0.0, 1.0 + 10.0 * static_cast<double>(trial % 3));
      y[i] = rng.normal(0.0, 5.0);
    }
    const auto m = fit_least_squares(x, y);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p) + 1);
    double ynorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = predict(m, x[i]) - y[i];
      for (std::size_t j = 0; j < p; ++j) grad(static_cast<Eigen::Index>(j)) += x[i][j] * r;
      grad(static_cast<Eigen::Index>(p)) += r;
      ynorm += y[i] * y[i];
    }
    CHECK(grad.norm() <= 1e-6 * std::sqrt(ynorm));
  }
}

TEST_CASE("least squares on rank deficient designs stays finite") {
  const std::vector<std::vector<double>> x{{1, 2}, {2, 4}, {3, 6}, {4, 8}};
  const std::vector<double> y{1, 2, 3, 4};
  const auto m = fit_least_squares(x, y);
  for (double w : m.weights) CHECK(std::isfinite(w));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(predict(m, x[i]) - y[i]) <= 1e-6);

  const std::vector<std::vector<double>> constant{{5, 1}, {5, 2}, {5, 3}};
  const std::vector<double> t{2, 4, 6};
  const auto c = fit_least_squares(constant, t);
  CHECK(std::abs(predict(c, std::vector<double>{5, 4}) - 8.0) <= 1e-6);
}

TEST_CASE("predict") {
  LinearModel m{{1}, 0};
  CHECK(predict(m, std::vector<double>{7}) == 7.0);
  LinearModel m2{{2, -1}, 0.5};
  CHECK(predict(m2, std::vector<double>{1, 1}) == 1.5);
  const std::vector<double> a{0.3, -2.0}, b{1.7, 4.0}, ab{2.0, 2.0};
  CHECK(predict(m2, a) + predict(m2, b) - m2.intercept == doctest::Approx(predict(m2, ab)).epsilon(1e-14));
  CHECK_THROWS_AS(predict(m2, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("linear model json round trip") {
  LinearModel m{{0.1, -3e-17, 12345.678901234567}, -0.3};
  const auto back = linear_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.weights == m.weights);
  CHECK(back.intercept == m.intercept);
}

TEST_CASE("symmetric eigen extrema") {
  Eigen::MatrixXd d(2, 2);
  d << 3, 0, 0, 1;
  CHECK(symmetric_eigen_extrema(d) == std::pair<double, double>{1.0, 3.0});
  Eigen::MatrixXd s(2, 2);
  s << 2, 1, 1, 2;
  const auto [lo, hi] = symmetric_eigen_extrema(s);
  CHECK(lo == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hi == doctest::Approx(3.0).epsilon(1e-12));
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(symmetric_eigen_extrema(asym), std::invalid_argument);
}

TEST_CASE("eigen extrema against power iteration and Rayleigh bounds") {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.below(8));
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.normal();
    }
    const Eigen::MatrixXd s = a * a.transpose();
    const auto [lo, hi] = symmetric_eigen_extrema(s);
    const double scale = std::max(1.0, hi);
    CHECK(std::abs(hi - power_max(s)) <= 1e-8 * scale);
    // Smallest eigenvalue via the largest of hi*I - S.
    const Eigen::MatrixXd shifted = hi * Eigen::MatrixXd::Identity(d, d) - s;
    CHECK(std::abs(lo - (hi - power_max(shifted))) <= 1e-8 * scale);
    for (int r = 0; r < 100; ++r) {
      Eigen::VectorXd x(d);
      for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.normal();
      const double q = x.dot(s * x) / x.dot(x);
      CHECK(q >= lo - 1e-9 * scale);
      CHECK(q <= hi + 1e-9 * scale);
    }
    const auto all = symmetric_eigenvalues(s);
    CHECK(all.size() == static_cast<std::size_t>(d));
    CHECK(std::abs(std::accumulate(all.begin(), all.end(), 0.0) - s.trace()) <= 1e-9 * scale * static_cast<double>(d));
  }
}

TEST_CASE("phi features") {
  // Columns with population variances 1 and 4 and no cross covariance.
  Dataset ds;
  ds.points.resize(4, 2);
  ds.points << 1, 2, -1, 2, 1, -2, -1, -2;
  const Partition c(4, {{0, 1}, {2, 3}});
  const auto phi = phi_features(ds, c);
  CHECK(phi.d == 2);
  CHECK(phi.m == 4);
  CHECK(phi.sigma_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(phi.sigma_max == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(phi.sil == silhouette_score(ds.points, c));

  Rng rng(3);
  Dataset iso;
  iso.points = metaul::testing::random_points(4000, 3, rng);
  const auto p = phi_features(iso, metaul::testing::random_partition(4000, 2, rng));
  CHECK(p.sigma_min <= p.sigma_max);
  CHECK(p.sigma_max / p.sigma_min < 1.2);

  // Row permutation leaves Phi unchanged.
  Dataset small;
  small.points = metaul::testing::random_points(30, 3, rng);
  const auto labels = metaul::testing::random_labels(30, 3, rng);
  const auto base = phi_features(small, Partition::from_assignment(labels));
  Dataset permuted = small;
  std::vector<int> perm_labels(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    permuted.points.row(i) = small.points.row(29 - i);
    perm_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(29 - i)];
  }
  const auto moved = phi_features(permuted, Partition::from_assignment(perm_labels));
  CHECK(moved.sigma_min == doctest::Approx(base.sigma_min).epsilon(1e-10));
  CHECK(moved.sigma_max == doctest::Approx(base.sigma_max).epsilon(1e-10));
  CHECK(moved.sil == doctest::Approx(base.sil).epsilon(1e-12));
}

TEST_CASE("covariance uses the population convention") {
  const PointMatrix x = metaul::testing::points_1d({1, 3});
  CHECK(covariance(x)(0, 0) == 1.0);
}
