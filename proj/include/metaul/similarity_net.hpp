#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "metaul/data_model.hpp"

namespace metaul {

constexpr std::size_t kPairMaxDims = 10;
constexpr std::size_t kPairCovFeatures = kPairMaxDims * (kPairMaxDims + 1) / 2;  // 55
constexpr std::size_t kPairFeatureDim = 2 * kPairMaxDims + kPairCovFeatures;      // 75

struct PairExample {
  std::vector<double> features;  // [pad(x_i), pad(x_j), upper triangle of embedded covariance]
  int label = 0;                 // 1 iff same class
  std::string dataset_id;
  std::size_t i = 0;
  std::size_t j = 0;
};

// Upper triangle (row-major, diagonal included) of the dataset covariance
// embedded in a 10x10 zero matrix.
std::vector<double> covariance_block(const PointMatrix& points);

// Expects normalized, labeled data with d <= 10 and i != j.
PairExample build_pair_features(const Dataset& dataset, std::size_t i, std::size_t j);
PairExample build_pair_features(const Dataset& dataset, const std::vector<double>& cov_block, std::size_t i,
                                std::size_t j);

// Exchanges the two point blocks; the covariance block is unchanged.
std::vector<double> swap_pair_features(const std::vector<double>& features);

struct PairSamplingConfig {
  std::size_t pair_cap = 2500;
  std::size_t max_points = 1000;
  std::size_t max_dims = kPairMaxDims;
  std::size_t max_category_retries = 64;
};

struct SplitTriple {
  std::vector<PairExample> meta_train;  // raw samples followed by their swapped copies
  std::vector<PairExample> meta_it;
  std::vector<PairExample> meta_et;
  std::vector<std::string> training_ids;  // category 1
  std::vector<std::string> external_ids;  // category 2
};

bool qualifies_for_pairs(const Dataset& dataset, const PairSamplingConfig& config = {});

// Normalizes and samples the qualifying labeled datasets. Throws DataError if
// fewer than two qualify or a category stays empty after the retries.
SplitTriple sample_pair_splits(const std::vector<Dataset>& repo, std::uint64_t seed,
                               const PairSamplingConfig& config = {});

struct AdadeltaParams {
  double rho = 0.9;
  double eps = 1e-6;
  double lr = 1.0;
};

// One Adadelta update of a single parameter; the reference the batched
// optimizer reproduces element by element.
void adadelta_scalar_step(double& x, double& sq_grad, double& sq_update, double grad, const AdadeltaParams& p);

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
  // Optimizer running averages of squared gradients and squared updates.
  Eigen::MatrixXd w_sq_grad, w_sq_update;
  Eigen::VectorXd b_sq_grad, b_sq_update;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

// Fully connected network: ReLU after every hidden layer, log-softmax output.
class Mlp {
public:
  static const std::vector<std::size_t>& default_dims();

  Mlp() = default;
  // Glorot-uniform weights, zero biases and optimizer state.
  Mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Columns are samples. Returns log-probabilities, classes x samples.
  Eigen::MatrixXd log_probs(const Eigen::MatrixXd& inputs) const;
  // Mean negative log-likelihood.
  double loss(const Eigen::MatrixXd& inputs, const std::vector<int>& labels) const;
  MlpGradients gradients(const Eigen::MatrixXd& inputs, const std::vector<int>& labels, double* loss = nullptr) const;
  void adadelta_update(const MlpGradients& grads, const AdadeltaParams& params);

  // Probability of class 1 for one feature vector.
  double prob_same(const std::vector<double>& features) const;

private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

// Largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-6) over every
// parameter, with central differences of step h.
double max_gradient_relative_error(const Mlp& model, const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                                   double h = 1e-5);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch = 250;
  std::uint64_t seed = 0;
  AdadeltaParams optimizer;
  std::vector<std::size_t> dims = Mlp::default_dims();
};

struct TrainResult {
  Mlp model;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean training NLL after each epoch
};

TrainResult train_mlp(const std::vector<PairExample>& train, const TrainConfig& config);

struct PairPrediction {
  double probability_same;
  bool same;
};

// Symmetrized over both orientations; same iff p > 0.5.
PairPrediction predict_pair(const Mlp& model, const std::vector<double>& features);
PairPrediction predict_pair(const Mlp& model, const Dataset& normalized, std::size_t i, std::size_t j);

double pair_accuracy(const Mlp& model, const std::vector<PairExample>& pairs);

// Per-problem max(same fraction, different fraction), averaged over problems.
double majority_baseline(const std::vector<PairExample>& pairs);

struct BsfEvaluation {
  double acc_meta_it = 0.0;
  double acc_meta_et = 0.0;
  double acc_majority_it = 0.0;
  double acc_majority_et = 0.0;
};

BsfEvaluation evaluate_bsf(const Mlp& model, const SplitTriple& split);

struct BsfRow {
  std::size_t repeat;
  BsfEvaluation eval;
};

// Independent category draws, sampling and training per repeat.
std::vector<BsfRow> run_bsf_experiment(const std::vector<Dataset>& repo, std::size_t repeats, std::uint64_t seed,
                                       const PairSamplingConfig& sampling, TrainConfig training, unsigned threads = 1);

void write_pairs_csv(const std::vector<PairExample>& pairs, const std::filesystem::path& path);
std::vector<PairExample> read_pairs_csv(const std::filesystem::path& path);

nlohmann::json to_json(const Mlp& model);
Mlp mlp_from_json(const nlohmann::json& doc);

}  // namespace metaul
