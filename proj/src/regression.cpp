#include "metaul/regression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "metaul/metrics.hpp"

namespace metaul {

namespace {

// Cholesky solve of an SPD system in place; returns false if a pivot is not
// safely positive.
bool cholesky_solve(Eigen::MatrixXd a, Eigen::VectorXd& b) {
  const Eigen::Index p = a.rows();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) scale = std::max(scale, std::abs(a(i, i)));
  const double tiny = 1e-12 * std::max(scale, 1.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    double diag = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
    if (!(diag > tiny)) return false;
    a(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < p; ++i) {
      double v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / a(j, j);
    }
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    double v = b(i);
    for (Eigen::Index k = 0; k < i; ++k) v -= a(i, k) * b(k);
    b(i) = v / a(i, i);
  }
  for (Eigen::Index i = p; i-- > 0;) {
    double v = b(i);
    for (Eigen::Index k = i + 1; k < p; ++k) v -= a(k, i) * b(k);
    b(i) = v / a(i, i);
  }
  return true;
}

}  // namespace

LinearModel fit_least_squares(std::span<const std::vector<double>> features, std::span<const double> targets) {
  if (features.empty()) throw std::invalid_argument("least squares needs at least one sample");
  if (features.size() != targets.size()) throw std::invalid_argument("feature and target counts differ");
  const std::size_t n = features.size();
  const std::size_t p = features.front().size();
  for (const auto& f : features) {
    if (f.size() != p) throw std::invalid_argument("ragged feature rows");
  }

  // Center, and scale every column to unit RMS so that the jitter is relative.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) mean(static_cast<Eigen::Index>(j)) += features[i][j];
    y_mean += targets[i];
  }
  mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j] - mean(static_cast<Eigen::Index>(j));
    }
    y(static_cast<Eigen::Index>(i)) = targets[i] - y_mean;
  }
  Eigen::VectorXd col_scale(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double rms = x.col(j).norm() / std::sqrt(static_cast<double>(n));
    col_scale(j) = rms > 0.0 ? rms : 1.0;
    x.col(j) /= col_scale(j);
  }

  const Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::VectorXd rhs = x.transpose() * y;
  Eigen::VectorXd w = rhs;
  if (p > 0 && !cholesky_solve(gram, w)) {
    w = rhs;
    Eigen::MatrixXd jittered = gram;
    jittered.diagonal().array() += kRidgeJitter * static_cast<double>(n);
    if (!cholesky_solve(jittered, w)) throw std::runtime_error("least squares system is not solvable");
  }

  LinearModel model;
  model.weights.resize(p);
  double intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    model.weights[j] = w(static_cast<Eigen::Index>(j)) / col_scale(static_cast<Eigen::Index>(j));
    intercept -= model.weights[j] * mean(static_cast<Eigen::Index>(j));
  }
  model.intercept = intercept;
  return model;
}

double predict(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) throw std::invalid_argument("feature dimension does not match model");
  double value = model.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) value += model.weights[j] * x[j];
  return value;
}

nlohmann::json to_json(const LinearModel& model) {
  return {{"weights", model.weights}, {"intercept", model.intercept}};
}

LinearModel linear_model_from_json(const nlohmann::json& doc) {
  LinearModel model;
  model.weights = doc.at("weights").get<std::vector<double>>();
  model.intercept = doc.at("intercept").get<double>();
  for (double w : model.weights) {
    if (!std::isfinite(w)) throw DataError("linear model has a non-finite weight");
  }
  if (!std::isfinite(model.intercept)) throw DataError("linear model has a non-finite intercept");
  return model;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd covariance(const PointMatrix& points) {
  const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(points.rows());
}

std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& s) {
  const Eigen::Index d = s.rows();
  if (s.cols() != d) throw std::invalid_argument("eigen decomposition needs a square matrix");
  const double norm = s.norm();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, norm)) {
    throw std::invalid_argument("matrix is not symmetric");
  }
  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  const auto off_mass = [&] {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        if (i != j) sum += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(sum);
  };

  for (int sweep = 0; sweep < 100 && off_mass() > 1e-12 * norm; ++sweep) {
    for (Eigen::Index p = 0; p < d - 1; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }
  std::vector<double> values(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) values[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(values.begin(), values.end());
  return values;
}

std::pair<double, double> symmetric_eigen_extrema(const Eigen::MatrixXd& s) {
  const auto values = symmetric_eigenvalues(s);
  if (values.empty()) throw std::invalid_argument("empty matrix");
  return {values.front(), values.back()};
}

SpectrumSummary spectrum_summary(const PointMatrix& points) {
  SpectrumSummary out;
  out.d = static_cast<std::size_t>(points.cols());
  out.m = static_cast<std::size_t>(points.rows());
  const auto [lo, hi] = symmetric_eigen_extrema(covariance(points));
  if (lo < -1e-9 * std::max(1.0, std::abs(hi))) throw std::runtime_error("covariance is not positive semidefinite");
  out.sigma_min = lo;
  out.sigma_max = hi;
  return out;
}

PhiFeatures phi_features(const SpectrumSummary& spectrum, double silhouette) {
  return {static_cast<double>(spectrum.d), static_cast<double>(spectrum.m), spectrum.sigma_min, spectrum.sigma_max,
          silhouette};
}

PhiFeatures phi_features(const Dataset& dataset, const Partition& clustering) {
  return phi_features(spectrum_summary(dataset.points), silhouette_score(dataset.points, clustering));
}

}  // namespace metaul
