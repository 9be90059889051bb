#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaul/data_model.hpp"

namespace metaul {

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
};

// Ridge jitter added to the normal equations when they are rank deficient.
constexpr double kRidgeJitter = 1e-8;

// Ordinary least squares with intercept. Deterministic; rank-deficient designs
// get kRidgeJitter on the (internally rescaled) normal equations.
LinearModel fit_least_squares(std::span<const std::vector<double>> features, std::span<const double> targets);

double predict(const LinearModel& model, std::span<const double> x);

nlohmann::json to_json(const LinearModel& model);
LinearModel linear_model_from_json(const nlohmann::json& doc);

// Population covariance of the columns.
Eigen::MatrixXd covariance(const PointMatrix& points);

// Cyclic Jacobi rotations until the off-diagonal Frobenius mass is at most
// 1e-12 * ||S||_F. Returns all eigenvalues in ascending order.
std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& s);
std::pair<double, double> symmetric_eigen_extrema(const Eigen::MatrixXd& s);

struct PhiFeatures {
  double d = 0;
  double m = 0;
  double sigma_min = 0;
  double sigma_max = 0;
  double sil = 0;

  std::vector<double> to_vector() const { return {d, m, sigma_min, sigma_max, sil}; }
};

// Covariance spectrum of a dataset, shared across candidate clusterings.
struct SpectrumSummary {
  std::size_t d = 0;
  std::size_t m = 0;
  double sigma_min = 0;
  double sigma_max = 0;
};

SpectrumSummary spectrum_summary(const PointMatrix& points);
PhiFeatures phi_features(const SpectrumSummary& spectrum, double silhouette);
PhiFeatures phi_features(const Dataset& dataset, const Partition& clustering);

}  // namespace metaul
