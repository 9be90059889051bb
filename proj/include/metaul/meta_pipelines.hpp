#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaul/clusterers.hpp"
#include "metaul/data_model.hpp"
#include "metaul/regression.hpp"

namespace metaul {

// ----------------------------------------------------------------- Meta-K

struct RunRecord {
  std::string dataset_id;
  std::size_t k = 0;
  std::size_t run = 0;
  double silhouette = 0.0;
  std::optional<double> ari;
  Partition partition;
};

struct RunConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t runs_per_k = 10;
  // Fraction of points set aside before clustering and reattached afterwards.
  double outlier_fraction = 0.0;
  OutlierCriterion criterion = OutlierCriterion::distance_from_mean;

  void validate() const;
};

// Single-start k-means runs for every k in [k_min, k_max], each with its own
// sub-seed. Silhouette is taken on the clustered (pruned) points; ARI, when
// the dataset is labeled, on the full partition with outliers reattached.
// Records are ordered by k, then run.
std::vector<RunRecord> generate_runs(const Dataset& dataset, const RunConfig& config, std::uint64_t seed);

struct DatasetRuns {
  std::string dataset_id;
  std::vector<RunRecord> records;
};

// generate_runs over every dataset with per-dataset sub-seeds.
std::vector<DatasetRuns> generate_all_runs(const std::vector<Dataset>& datasets, const RunConfig& config,
                                           std::uint64_t seed, unsigned threads = 1);

// The chosen k and the index of the chosen record.
struct KChoice {
  std::size_t k = 0;
  std::size_t record = 0;
};

// k whose best run has the highest ARI; ties go to the smaller k.
std::size_t best_fit_k(const std::vector<RunRecord>& records);

// Record with the highest silhouette; ties go to the smaller k, then run.
KChoice baseline_k_silhouette(const std::vector<RunRecord>& records);

struct MetaKModel {
  std::size_t k_min = 2;
  std::vector<LinearModel> models;  // models[k - k_min]: silhouette -> ARI

  std::size_t k_max() const { return k_min + models.size() - 1; }
  const LinearModel& model_for(std::size_t k) const;
};

// One least-squares fit of ARI on silhouette per k over the pooled records.
MetaKModel train_meta_k(const std::vector<RunRecord>& records, std::size_t k_min, std::size_t k_max);

// Per (k, run) predicted ARI; a k scores the max over its runs; the argmax k
// (smallest on ties) and its best-predicted run are returned.
KChoice predict_k(const MetaKModel& model, const std::vector<RunRecord>& records);

struct MetaKEvaluation {
  double rmse_meta = 0.0;
  double rmse_baseline = 0.0;
  double mean_ari_meta = 0.0;
  double mean_ari_baseline = 0.0;
};

MetaKEvaluation evaluate_meta_k(const MetaKModel& model, const std::vector<DatasetRuns>& runs,
                                const std::vector<std::size_t>& test);

struct MetaKRow {
  double train_fraction;
  std::size_t repeat;
  MetaKEvaluation eval;
};

std::vector<MetaKRow> run_meta_k_experiment(const std::vector<DatasetRuns>& runs, std::uint64_t repo_seed,
                                            const std::vector<double>& train_fractions, std::size_t repeats,
                                            std::uint64_t split_seed, std::size_t k_min, std::size_t k_max);

nlohmann::json to_json(const MetaKModel& model);
MetaKModel meta_k_model_from_json(const nlohmann::json& doc);

// -------------------------------------------------------- algorithm selection

// The ten-member family: five base algorithms with and without normalization.
std::vector<ClustererSpec> default_family(std::size_t k = 2, std::uint64_t seed = 0);

struct AlgoCell {
  PhiFeatures phi;
  double ari = 0.0;
  bool failed = false;
  Partition partition;
};

// Every family member run once on every dataset.
struct AlgoTable {
  std::vector<std::string> member_names;
  std::vector<std::string> dataset_ids;
  std::vector<std::vector<AlgoCell>> cells;  // [dataset][member]
};

// Members run with k = 2 and a per-(dataset, member) seed. Failures become
// flagged rows with ARI 0 and silhouette 0.
AlgoTable build_algo_table(const std::vector<ClustererSpec>& family, const std::vector<Dataset>& datasets,
                           std::uint64_t seed, unsigned threads = 1);

struct AlgoSelectModel {
  std::vector<std::string> member_names;
  std::vector<LinearModel> models;  // Phi -> ARI, one per member
};

AlgoSelectModel train_algo_select(const AlgoTable& table, const std::vector<std::size_t>& train);
AlgoSelectModel train_algo_select(const std::vector<ClustererSpec>& family, const std::vector<Dataset>& train,
                                  std::uint64_t seed);

struct AlgoChoice {
  std::size_t member = 0;
  Partition partition;
  std::vector<double> predicted;  // NaN for failed members
};

// Runs every member on an unlabeled dataset and returns the one with the
// highest predicted ARI (earliest on ties).
AlgoChoice select_algorithm(const AlgoSelectModel& model, const std::vector<ClustererSpec>& family,
                            const Dataset& dataset, std::uint64_t seed);

// Same decision from a precomputed table row.
std::size_t select_from_table(const AlgoSelectModel& model, const AlgoTable& table, std::size_t dataset);

struct AlgoEvaluation {
  double mean_ari_meta = 0.0;
  std::vector<double> mean_ari_members;
};

AlgoEvaluation evaluate_algo_select(const AlgoSelectModel& model, const AlgoTable& table,
                                    const std::vector<std::size_t>& test);

struct AlgoSelectRow {
  double train_fraction;
  std::size_t repeat;
  AlgoEvaluation eval;
};

std::vector<AlgoSelectRow> run_algo_select_experiment(const AlgoTable& table, std::uint64_t repo_seed,
                                                      const std::vector<double>& train_fractions,
                                                      std::size_t repeats, std::uint64_t split_seed);

nlohmann::json to_json(const AlgoSelectModel& model);
AlgoSelectModel algo_select_model_from_json(const nlohmann::json& doc);

// ------------------------------------------------------------ outlier sweep

struct OutlierSweepRow {
  double train_fraction;
  std::size_t repeat;
  double p;
  MetaKEvaluation eval;
};

struct OutlierSweepResult {
  std::vector<double> p_grid;
  std::vector<double> mean_ari;  // per p, over all rows
  double best_p = 0.0;
  std::vector<OutlierSweepRow> rows;
};

// For each p: runs on pruned data with outliers reattached, then the Meta-K
// train/evaluate procedure over the same splits as every other p.
OutlierSweepResult sweep_outlier_fraction(const std::vector<Dataset>& datasets, std::uint64_t repo_seed,
                                          const std::vector<double>& p_grid, const RunConfig& base_config,
                                          const std::vector<double>& train_fractions, std::size_t repeats,
                                          std::uint64_t seed, unsigned threads = 1);

std::vector<double> default_p_grid();

}  // namespace metaul
