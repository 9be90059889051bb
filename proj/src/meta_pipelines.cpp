#include "metaul/meta_pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "metaul/metrics.hpp"
#include "metaul/parallel.hpp"
#include "metaul/rng.hpp"

namespace metaul {

void RunConfig::validate() const {
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("k range must satisfy 2 <= k_min <= k_max");
  if (runs_per_k < 1) throw std::invalid_argument("need at least one run per k");
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
    throw std::invalid_argument("outlier fraction must lie in [0, 1)");
  }
}

std::vector<RunRecord> generate_runs(const Dataset& dataset, const RunConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = dataset.n();
  const auto outliers = outlier_indices(dataset.points, config.outlier_fraction, config.criterion);
  std::vector<bool> is_outlier(n, false);
  for (std::size_t i : outliers) is_outlier[i] = true;
  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_outlier[i]) inliers.push_back(i);
  }
  if (inliers.size() < config.k_max) {
    throw std::invalid_argument(dataset.id + ": fewer points than the largest k");
  }

  PointMatrix kept(static_cast<Eigen::Index>(inliers.size()), dataset.points.cols());
  for (std::size_t r = 0; r < inliers.size(); ++r) {
    kept.row(static_cast<Eigen::Index>(r)) = dataset.points.row(static_cast<Eigen::Index>(inliers[r]));
  }
  const Eigen::MatrixXd dist = pairwise_distances(kept);
  std::optional<Partition> truth;
  if (dataset.labels) truth = labels_to_partition(*dataset.labels);

  std::vector<RunRecord> records;
  records.reserve((config.k_max - config.k_min + 1) * config.runs_per_k);
  for (std::size_t k = config.k_min; k <= config.k_max; ++k) {
    for (std::size_t run = 0; run < config.runs_per_k; ++run) {
      const ClusterResult res = kmeans(kept, k, 1, mix_seed(seed, (k << 20) | run));
      RunRecord rec;
      rec.dataset_id = dataset.id;
      rec.k = k;
      rec.run = run;
      rec.silhouette = silhouette_score(dist, res.partition);
      if (outliers.empty()) {
        rec.partition = res.partition;
      } else {
        std::vector<int> assignment(n, -1);
        for (std::size_t r = 0; r < inliers.size(); ++r) assignment[inliers[r]] = res.partition.assignment()[r];
        for (std::size_t i : outliers) {
          assignment[i] = static_cast<int>(nearest_center(res.centers, dataset.points.row(static_cast<Eigen::Index>(i))));
        }
        rec.partition = Partition::from_assignment(assignment);
      }
      if (truth) rec.ari = adjusted_rand_index(n, *truth, rec.partition);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<DatasetRuns> generate_all_runs(const std::vector<Dataset>& datasets, const RunConfig& config,
                                           std::uint64_t seed, unsigned threads) {
  std::vector<DatasetRuns> out(datasets.size());
  parallel_for(datasets.size(), threads, [&](std::size_t i) {
    out[i].dataset_id = datasets[i].id;
    out[i].records = generate_runs(datasets[i], config, mix_seed(seed, i));
  });
  return out;
}

std::size_t best_fit_k(const std::vector<RunRecord>& records) {
  std::size_t best_k = 0;
  double best_ari = -std::numeric_limits<double>::infinity();
  for (const auto& rec : records) {
    if (!rec.ari) throw std::invalid_argument("best_fit_k needs labeled records");
    if (*rec.ari > best_ari || (*rec.ari == best_ari && rec.k < best_k)) {
      best_ari = *rec.ari;
      best_k = rec.k;
    }
  }
  if (records.empty()) throw std::invalid_argument("no run records");
  return best_k;
}

namespace {

// First maximum in (k, run) order.
KChoice argmax_by(const std::vector<RunRecord>& records, const auto& score) {
  if (records.empty()) throw std::invalid_argument("no run records");
  KChoice best{records[0].k, 0};
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double s = score(records[i]);
    const bool better = s > best_score || (s == best_score && (records[i].k < best.k ||
                                                               (records[i].k == best.k && records[i].run < records[best.record].run)));
    if (better) {
      best_score = s;
      best = {records[i].k, i};
    }
  }
  return best;
}

}  // namespace

KChoice baseline_k_silhouette(const std::vector<RunRecord>& records) {
  return argmax_by(records, [](const RunRecord& r) { return r.silhouette; });
}

const LinearModel& MetaKModel::model_for(std::size_t k) const {
  if (k < k_min || k > k_max()) throw std::out_of_range("no Meta-K model for k = " + std::to_string(k));
  return models[k - k_min];
}

MetaKModel train_meta_k(const std::vector<RunRecord>& records, std::size_t k_min, std::size_t k_max) {
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("invalid k range");
  std::vector<std::vector<std::vector<double>>> x(k_max - k_min + 1);
  std::vector<std::vector<double>> y(k_max - k_min + 1);
  for (const auto& rec : records) {
    if (rec.k < k_min || rec.k > k_max) continue;
    if (!rec.ari) throw std::invalid_argument("Meta-K training needs labeled records");
    x[rec.k - k_min].push_back({rec.silhouette});
    y[rec.k - k_min].push_back(*rec.ari);
  }
  MetaKModel model;
  model.k_min = k_min;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].empty()) throw std::invalid_argument("no training records for k = " + std::to_string(k_min + i));
    model.models.push_back(fit_least_squares(x[i], y[i]));
  }
  return model;
}

KChoice predict_k(const MetaKModel& model, const std::vector<RunRecord>& records) {
  return argmax_by(records, [&](const RunRecord& r) {
    const double sil[1] = {r.silhouette};
    return predict(model.model_for(r.k), sil);
  });
}

MetaKEvaluation evaluate_meta_k(const MetaKModel& model, const std::vector<DatasetRuns>& runs,
                                const std::vector<std::size_t>& test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  MetaKEvaluation ev;
  double se_meta = 0.0;
  double se_base = 0.0;
  for (std::size_t t : test) {
    const auto& records = runs.at(t).records;
    const double k_star = static_cast<double>(best_fit_k(records));
    const KChoice meta = predict_k(model, records);
    const KChoice base = baseline_k_silhouette(records);
    se_meta += (static_cast<double>(meta.k) - k_star) * (static_cast<double>(meta.k) - k_star);
    se_base += (static_cast<double>(base.k) - k_star) * (static_cast<double>(base.k) - k_star);
    ev.mean_ari_meta += *records[meta.record].ari;
    ev.mean_ari_baseline += *records[base.record].ari;
  }
  const double n = static_cast<double>(test.size());
  ev.rmse_meta = std::sqrt(se_meta / n);
  ev.rmse_baseline = std::sqrt(se_base / n);
  ev.mean_ari_meta /= n;
  ev.mean_ari_baseline /= n;
  return ev;
}

std::vector<MetaKRow> run_meta_k_experiment(const std::vector<DatasetRuns>& runs, std::uint64_t repo_seed,
                                            const std::vector<double>& train_fractions, std::size_t repeats,
                                            std::uint64_t split_seed, std::size_t k_min, std::size_t k_max) {
  std::vector<MetaKRow> rows;
  for (double f : train_fractions) {
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      const Split split = split_repository(runs.size(), repo_seed, SplitSpec{f, rep, split_seed});
      std::vector<RunRecord> pooled;
      for (std::size_t i : split.train) pooled.insert(pooled.end(), runs[i].records.begin(), runs[i].records.end());
      const MetaKModel model = train_meta_k(pooled, k_min, k_max);
      rows.push_back({f, rep, evaluate_meta_k(model, runs, split.test)});
    }
  }
  return rows;
}

nlohmann::json to_json(const MetaKModel& model) {
  nlohmann::json doc;
  doc["k_min"] = model.k_min;
  doc["models"] = nlohmann::json::array();
  for (const auto& m : model.models) doc["models"].push_back(to_json(m));
  return doc;
}

MetaKModel meta_k_model_from_json(const nlohmann::json& doc) {
  MetaKModel model;
  model.k_min = doc.at("k_min").get<std::size_t>();
  for (const auto& m : doc.at("models")) model.models.push_back(linear_model_from_json(m));
  if (model.models.empty()) throw DataError("Meta-K model has no per-k models");
  return model;
}

// ---------------------------------------------------------------------------

std::vector<ClustererSpec> default_family(std::size_t k, std::uint64_t seed) {
  std::vector<ClustererSpec> family;
  for (auto kind : {ClustererKind::kmeans, ClustererKind::agglo_single, ClustererKind::agglo_complete,
                    ClustererKind::agglo_average, ClustererKind::agglo_ward}) {
    for (bool normalize : {false, true}) {
      ClustererSpec spec;
      spec.kind = kind;
      spec.k = k;
      spec.normalize_first = normalize;
      spec.restarts = kind == ClustererKind::kmeans ? 10 : 1;
      spec.seed = seed;
      family.push_back(spec);
    }
  }
  return family;
}

namespace {

ClustererSpec member_for(const ClustererSpec& spec, std::uint64_t seed, std::size_t dataset, std::size_t member) {
  ClustererSpec s = spec;
  s.k = 2;
  s.seed = mix_seed(mix_seed(seed ^ spec.seed, dataset), member);
  return s;
}

AlgoCell run_cell(const ClustererSpec& spec, const Dataset& dataset, const std::optional<Partition>& truth) {
  AlgoCell cell;
  const PointMatrix view = spec.normalize_first ? normalize_columns(dataset.points) : dataset.points;
  const SpectrumSummary spectrum = spectrum_summary(view);
  try {
    cell.partition = run_clusterer(dataset.points, spec).partition;
    cell.phi = phi_features(spectrum, silhouette_score(view, cell.partition));
    if (truth) cell.ari = adjusted_rand_index(dataset.n(), *truth, cell.partition);
  } catch (const std::exception&) {
    cell.failed = true;
    cell.ari = 0.0;
    cell.phi = phi_features(spectrum, 0.0);
    cell.partition = Partition();
  }
  return cell;
}

}  // namespace

AlgoTable build_algo_table(const std::vector<ClustererSpec>& family, const std::vector<Dataset>& datasets,
                           std::uint64_t seed, unsigned threads) {
  if (family.empty()) throw std::invalid_argument("empty algorithm family");
  AlgoTable table;
  for (const auto& spec : family) table.member_names.push_back(spec.name());
  table.cells.resize(datasets.size());
  for (const auto& ds : datasets) table.dataset_ids.push_back(ds.id);
  parallel_for(datasets.size(), threads, [&](std::size_t i) {
    const auto& ds = datasets[i];
    if (!ds.labels) throw std::invalid_argument(ds.id + ": algorithm selection training needs labels");
    const std::optional<Partition> truth = labels_to_partition(*ds.labels);
    auto& row = table.cells[i];
    for (std::size_t j = 0; j < family.size(); ++j) row.push_back(run_cell(member_for(family[j], seed, i, j), ds, truth));
  });
  return table;
}

AlgoSelectModel train_algo_select(const AlgoTable& table, const std::vector<std::size_t>& train) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  AlgoSelectModel model;
  model.member_names = table.member_names;
  for (std::size_t j = 0; j < table.member_names.size(); ++j) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (std::size_t i : train) {
      const auto& cell = table.cells.at(i)[j];
      x.push_back(cell.phi.to_vector());
      y.push_back(cell.ari);
    }
    model.models.push_back(fit_least_squares(x, y));
  }
  return model;
}

AlgoSelectModel train_algo_select(const std::vector<ClustererSpec>& family, const std::vector<Dataset>& train,
                                  std::uint64_t seed) {
  const AlgoTable table = build_algo_table(family, train, seed);
  std::vector<std::size_t> all(train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return train_algo_select(table, all);
}

namespace {

std::size_t argmax_prediction(const std::vector<double>& predicted) {
  std::size_t best = predicted.size();
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    if (std::isnan(predicted[j])) continue;
    if (best == predicted.size() || predicted[j] > predicted[best]) best = j;
  }
  if (best == predicted.size()) throw std::runtime_error("every family member failed");
  return best;
}

}  // namespace

AlgoChoice select_algorithm(const AlgoSelectModel& model, const std::vector<ClustererSpec>& family,
                            const Dataset& dataset, std::uint64_t seed) {
  if (family.size() != model.models.size()) throw std::invalid_argument("family does not match the model");
  AlgoChoice choice;
  std::vector<Partition> partitions(family.size());
  for (std::size_t j = 0; j < family.size(); ++j) {
    const AlgoCell cell = run_cell(member_for(family[j], seed, 0, j), dataset, std::nullopt);
    if (cell.failed) {
      choice.predicted.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    choice.predicted.push_back(predict(model.models[j], cell.phi.to_vector()));
    partitions[j] = cell.partition;
  }
  choice.member = argmax_prediction(choice.predicted);
  choice.partition = partitions[choice.member];
  return choice;
}

std::size_t select_from_table(const AlgoSelectModel& model, const AlgoTable& table, std::size_t dataset) {
  std::vector<double> predicted;
  for (std::size_t j = 0; j < model.models.size(); ++j) {
    const auto& cell = table.cells.at(dataset)[j];
    predicted.push_back(cell.failed ? std::numeric_limits<double>::quiet_NaN()
                                    : predict(model.models[j], cell.phi.to_vector()));
  }
  return argmax_prediction(predicted);
}

AlgoEvaluation evaluate_algo_select(const AlgoSelectModel& model, const AlgoTable& table,
                                    const std::vector<std::size_t>& test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  AlgoEvaluation ev;
  ev.mean_ari_members.assign(table.member_names.size(), 0.0);
  for (std::size_t t : test) {
    ev.mean_ari_meta += table.cells.at(t)[select_from_table(model, table, t)].ari;
    for (std::size_t j = 0; j < ev.mean_ari_members.size(); ++j) ev.mean_ari_members[j] += table.cells[t][j].ari;
  }
  const double n = static_cast<double>(test.size());
  ev.mean_ari_meta /= n;
  for (auto& v : ev.mean_ari_members) v /= n;
  return ev;
}

std::vector<AlgoSelectRow> run_algo_select_experiment(const AlgoTable& table, std::uint64_t repo_seed,
                                                      const std::vector<double>& train_fractions,
                                                      std::size_t repeats, std::uint64_t split_seed) {
  std::vector<AlgoSelectRow> rows;
  for (double f : train_fractions) {
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      const Split split = split_repository(table.cells.size(), repo_seed, SplitSpec{f, rep, split_seed});
      const AlgoSelectModel model = train_algo_select(table, split.train);
      rows.push_back({f, rep, evaluate_algo_select(model, table, split.test)});
    }
  }
  return rows;
}

nlohmann::json to_json(const AlgoSelectModel& model) {
  nlohmann::json doc;
  doc["members"] = nlohmann::json::array();
  for (std::size_t j = 0; j < model.models.size(); ++j) {
    doc["members"].push_back({{"name", model.member_names[j]}, {"model", to_json(model.models[j])}});
  }
  return doc;
}

AlgoSelectModel algo_select_model_from_json(const nlohmann::json& doc) {
  AlgoSelectModel model;
  for (const auto& m : doc.at("members")) {
    model.member_names.push_back(m.at("name").get<std::string>());
    model.models.push_back(linear_model_from_json(m.at("model")));
  }
  return model;
}

// ---------------------------------------------------------------------------

std::vector<double> default_p_grid() { return {0.0, 0.01, 0.02, 0.03, 0.04, 0.05}; }

OutlierSweepResult sweep_outlier_fraction(const std::vector<Dataset>& datasets, std::uint64_t repo_seed,
                                          const std::vector<double>& p_grid, const RunConfig& base_config,
                                          const std::vector<double>& train_fractions, std::size_t repeats,
                                          std::uint64_t seed, unsigned threads) {
  if (p_grid.empty()) throw std::invalid_argument("empty outlier grid");
  OutlierSweepResult result;
  result.p_grid = p_grid;
  for (double p : p_grid) {
    RunConfig config = base_config;
    config.outlier_fraction = p;
    const auto runs = generate_all_runs(datasets, config, seed, threads);
    const auto rows = run_meta_k_experiment(runs, repo_seed, train_fractions, repeats, seed, config.k_min, config.k_max);
    double sum = 0.0;
    for (const auto& row : rows) {
      result.rows.push_back({row.train_fraction, row.repeat, p, row.eval});
      sum += row.eval.mean_ari_meta;
    }
    result.mean_ari.push_back(rows.empty() ? 0.0 : sum / static_cast<double>(rows.size()));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < p_grid.size(); ++i) {
    if (result.mean_ari[i] > result.mean_ari[best]) best = i;
  }
  result.best_p = p_grid[best];
  return result;
}

}  // namespace metaul
