#include "metaul/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "metaul/csv.hpp"
#include "metaul/erm_meta.hpp"
#include "metaul/meta_pipelines.hpp"
#include "metaul/metrics.hpp"
#include "metaul/report.hpp"
#include "metaul/similarity_net.hpp"

namespace fs = std::filesystem;

namespace metaul::cli {

namespace {

const std::vector<std::string> kExperiments{"algo-select", "meta-k", "outliers", "fit-threshold", "meta-scale", "bsf"};

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
  return s;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

// --------------------------------------------------------------- commands

void cmd_synth(const ExperimentConfig& cfg, std::ostream& out) {
  SynthSpec spec = cfg.synth;
  spec.seed = cfg.seed;
  const MetaRepository repo = make_synthetic_repository(spec);
  write_repository(repo, cfg.out);
  write_json(fs::path(cfg.out) / "config.json", cfg.to_json());
  out << "wrote " << repo.size() << " datasets to " << cfg.out << "\n";
}

std::vector<Dataset> labeled_datasets(const ExperimentConfig& cfg) {
  const MetaRepository repo = load_repository(cfg.repo, cfg.seed);
  auto datasets = repository_datasets(repo);
  for (const auto& ds : datasets) {
    if (!ds.labels) throw DataError(ds.id + ": experiments need labeled datasets");
  }
  if (datasets.size() < 2) throw DataError("experiments need at least two datasets");
  return datasets;
}

RunConfig run_config(const ExperimentConfig& cfg) {
  RunConfig rc;
  rc.k_min = cfg.k_min;
  rc.k_max = cfg.k_max;
  rc.runs_per_k = cfg.runs_per_k;
  rc.criterion = cfg.raw_norm ? OutlierCriterion::raw_norm : OutlierCriterion::distance_from_mean;
  return rc;
}

void run_meta_k(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto datasets = labeled_datasets(cfg);
  const RunConfig rc = run_config(cfg);
  const auto runs = generate_all_runs(datasets, rc, cfg.seed, cfg.threads);

  std::ostringstream rec;
  rec << "dataset_id,k,run,silhouette,ari\n";
  std::vector<RunRecord> pooled;
  for (const auto& dr : runs) {
    for (const auto& r : dr.records) {
      rec << r.dataset_id << ',' << r.k << ',' << r.run << ',' << format_double(r.silhouette) << ','
          << format_double(*r.ari) << '\n';
      pooled.push_back(r);
    }
  }
  write_text_file(dir / "runs.csv", rec.str());

  const auto rows = run_meta_k_experiment(runs, cfg.seed, cfg.train_fractions, cfg.repeats, cfg.seed, rc.k_min, rc.k_max);
  std::ostringstream csv;
  csv << "train_frac,repeat,rmse_meta,rmse_baseline,ari_meta,ari_baseline\n";
  for (const auto& row : rows) {
    csv << format_double(row.train_fraction) << ',' << row.repeat << ',' << format_double(row.eval.rmse_meta) << ','
        << format_double(row.eval.rmse_baseline) << ',' << format_double(row.eval.mean_ari_meta) << ','
        << format_double(row.eval.mean_ari_baseline) << '\n';
  }
  write_text_file(dir / "meta_k.csv", csv.str());
  write_json(dir / "meta_k_model.json", to_json(train_meta_k(pooled, rc.k_min, rc.k_max)));
  out << "meta-k: " << rows.size() << " evaluation rows\n";
}

void run_algo_select(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto datasets = labeled_datasets(cfg);
  const auto family = default_family(2, cfg.seed);
  const AlgoTable table = build_algo_table(family, datasets, cfg.seed, cfg.threads);

  std::ostringstream cells;
  cells << "dataset_id,member,d,m,sigma_min,sigma_max,sil,ari,failed\n";
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    for (std::size_t j = 0; j < family.size(); ++j) {
      const auto& c = table.cells[i][j];
      cells << table.dataset_ids[i] << ',' << table.member_names[j] << ',' << format_double(c.phi.d) << ','
            << format_double(c.phi.m) << ',' << format_double(c.phi.sigma_min) << ','
            << format_double(c.phi.sigma_max) << ',' << format_double(c.phi.sil) << ',' << format_double(c.ari)
            << ',' << (c.failed ? 1 : 0) << '\n';
    }
  }
  write_text_file(dir / "algo_table.csv", cells.str());

  const auto rows = run_algo_select_experiment(table, cfg.seed, cfg.train_fractions, cfg.repeats, cfg.seed);
  std::ostringstream csv;
  csv << "train_frac,repeat,ari_meta";
  for (const auto& name : table.member_names) csv << ",ari_" << name;
  csv << '\n';
  for (const auto& row : rows) {
    csv << format_double(row.train_fraction) << ',' << row.repeat << ',' << format_double(row.eval.mean_ari_meta);
    for (double a : row.eval.mean_ari_members) csv << ',' << format_double(a);
    csv << '\n';
  }
  write_text_file(dir / "algo_select.csv", csv.str());

  std::vector<std::size_t> all(datasets.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  write_json(dir / "algo_select_model.json", to_json(train_algo_select(table, all)));
  out << "algo-select: " << rows.size() << " evaluation rows\n";
}

void run_outliers(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto datasets = labeled_datasets(cfg);
  const auto grid = cfg.p_grid.empty() ? default_p_grid() : cfg.p_grid;
  const auto result =
      sweep_outlier_fraction(datasets, cfg.seed, grid, run_config(cfg), cfg.train_fractions, cfg.repeats, cfg.seed,
                             cfg.threads);
  std::ostringstream csv;
  csv << "p,train_frac,repeat,rmse_meta,rmse_baseline,ari_meta,ari_baseline\n";
  for (const auto& row : result.rows) {
    csv << format_double(row.p) << ',' << format_double(row.train_fraction) << ',' << row.repeat << ','
        << format_double(row.eval.rmse_meta) << ',' << format_double(row.eval.rmse_baseline) << ','
        << format_double(row.eval.mean_ari_meta) << ',' << format_double(row.eval.mean_ari_baseline) << '\n';
  }
  write_text_file(dir / "outliers.csv", csv.str());
  std::ostringstream summary;
  summary << "p,mean_ari\n";
  for (std::size_t i = 0; i < result.p_grid.size(); ++i) {
    summary << format_double(result.p_grid[i]) << ',' << format_double(result.mean_ari[i]) << '\n';
  }
  write_text_file(dir / "outliers_summary.csv", summary.str());
  out << "best_p=" << format_double(result.best_p) << "\n";
}

std::vector<GraphProblem> graph_problems(const std::vector<Dataset>& datasets) {
  std::vector<GraphProblem> problems;
  for (const auto& ds : datasets) {
    problems.push_back({WeightedGraph::complete_euclidean(ds.points), labels_to_partition(*ds.labels)});
  }
  return problems;
}

void run_fit_threshold(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto fit = fit_threshold_kruskal(graph_problems(labeled_datasets(cfg)));
  write_text_file(dir / "profile.csv", profile_csv(fit));
  out << "r_star=" << format_double(fit.r_star) << " min_mean_loss=" << format_double(fit.min_mean_loss) << "\n";
}

double mean_rule_loss(const MetaScaleRule& rule, const std::vector<GraphProblem>& problems,
                      const std::vector<std::size_t>& idx) {
  double sum = 0.0;
  for (std::size_t i : idx) {
    const auto& p = problems[i];
    sum += clustering_loss(p.graph.n_vertices(), p.truth, rule(p.graph));
  }
  return sum / static_cast<double>(idx.size());
}

void run_meta_scale(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto problems = graph_problems(labeled_datasets(cfg));
  std::ostringstream csv;
  csv << "train_frac,repeat,r_star,train_loss,test_loss\n";
  for (double f : cfg.train_fractions) {
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
      const Split split = split_repository(problems.size(), cfg.seed, SplitSpec{f, rep, cfg.seed});
      std::vector<GraphProblem> train;
      for (std::size_t i : split.train) train.push_back(problems[i]);
      const MetaScaleRule rule = fit_meta_scale(train);
      csv << format_double(f) << ',' << rep << ',' << format_double(rule.r_star) << ','
          << format_double(mean_rule_loss(rule, problems, split.train)) << ','
          << format_double(mean_rule_loss(rule, problems, split.test)) << '\n';
    }
  }
  write_text_file(dir / "meta_scale.csv", csv.str());
  const MetaScaleRule all = fit_meta_scale(problems);
  write_json(dir / "meta_scale_rule.json", {{"r_star", all.r_star}});
  out << "r_star=" << format_double(all.r_star) << "\n";
}

void run_bsf(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
  const MetaRepository repo = load_repository(cfg.repo, cfg.seed);
  const auto datasets = repository_datasets(repo);
  PairSamplingConfig sampling;
  sampling.pair_cap = cfg.pair_cap;
  TrainConfig training;
  training.epochs = cfg.epochs;
  training.batch = cfg.batch;
  const auto rows = run_bsf_experiment(datasets, cfg.repeats, cfg.seed, sampling, training, cfg.threads);
  std::ostringstream csv;
  csv << "pair_cap,repeat,acc_meta_it,acc_meta_et,acc_majority_it,acc_majority_et\n";
  for (const auto& row : rows) {
    csv << cfg.pair_cap << ',' << row.repeat << ',' << format_double(row.eval.acc_meta_it) << ','
        << format_double(row.eval.acc_meta_et) << ',' << format_double(row.eval.acc_majority_it) << ','
        << format_double(row.eval.acc_majority_et) << '\n';
  }
  write_text_file(dir / "bsf.csv", csv.str());
  out << "bsf: " << rows.size() << " repeats\n";
}

void cmd_run(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir(cfg.out);
  write_json(dir / "config.json", cfg.to_json());
  if (cfg.experiment == "meta-k") run_meta_k(cfg, dir, out);
  else if (cfg.experiment == "algo-select") run_algo_select(cfg, dir, out);
  else if (cfg.experiment == "outliers") run_outliers(cfg, dir, out);
  else if (cfg.experiment == "fit-threshold") run_fit_threshold(cfg, dir, out);
  else if (cfg.experiment == "meta-scale") run_meta_scale(cfg, dir, out);
  else if (cfg.experiment == "bsf") run_bsf(cfg, dir, out);
  else throw std::invalid_argument("unknown experiment: " + cfg.experiment);
}

void cmd_report(const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<CsvTable> tables;
  for (const auto& path : cfg.inputs) tables.push_back(read_csv(path));
  const std::string text = report_csv(aggregate_results(tables));
  if (cfg.out.empty()) {
    out << text;
    return;
  }
  write_text_file(fs::path(cfg.out) / "report.csv", text);
  write_json(fs::path(cfg.out) / "config.json", cfg.to_json());
}

}  // namespace

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  if (command == "synth") {
    require(!out.empty(), "--out is required");
    require(synth.problems >= 1, "--problems must be at least 1");
    return;
  }
  if (command == "report") {
    require(!inputs.empty(), "report needs at least one input CSV");
    return;
  }
  require(command == "run", "unknown command: " + command);
  require(std::find(kExperiments.begin(), kExperiments.end(), experiment) != kExperiments.end(),
          "unknown experiment: " + experiment);
  require(!repo.empty(), "--repo is required");
  require(!out.empty(), "--out is required");
  require(!train_fractions.empty(), "--train-frac needs at least one value");
  for (double f : train_fractions) require(f > 0.0 && f < 1.0, "training fractions must lie in (0, 1)");
  require(repeats >= 1, "--repeats must be at least 1");
  require(threads >= 1, "--threads must be at least 1");
  for (double p : p_grid) require(p >= 0.0 && p < 1.0, "outlier fractions must lie in [0, 1)");
  require(k_min >= 2 && k_max >= k_min, "k range must satisfy 2 <= k-min <= k-max");
  require(runs_per_k >= 1, "--runs-per-k must be at least 1");
  require(pair_cap >= 1 && epochs >= 1 && batch >= 1, "--pair-cap, --epochs and --batch must be positive");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json doc;
  doc["command"] = command;
  doc["seed"] = seed;
  if (command == "synth") {
    doc["out"] = out;
    doc["synth"] = {{"problems", synth.problems},         {"min_points", synth.min_points},
                    {"max_points", synth.max_points},     {"min_dims", synth.min_dims},
                    {"max_dims", synth.max_dims},         {"min_clusters", synth.min_clusters},
                    {"max_clusters", synth.max_clusters}, {"separation", synth.separation},
                    {"sigma", synth.sigma},               {"outlier_fraction", synth.outlier_fraction},
                    {"outlier_distance", synth.outlier_distance}};
  } else if (command == "report") {
    doc["inputs"] = inputs;
    doc["out"] = out;
  } else {
    doc["experiment"] = experiment;
    doc["repo"] = repo;
    doc["out"] = out;
    doc["train_frac"] = join_doubles(train_fractions);
    doc["repeats"] = repeats;
    doc["threads"] = threads;
    doc["p_grid"] = join_doubles(p_grid.empty() ? default_p_grid() : p_grid);
    doc["k_min"] = k_min;
    doc["k_max"] = k_max;
    doc["runs_per_k"] = runs_per_k;
    doc["outlier_criterion"] = raw_norm ? "raw_norm" : "distance_from_mean";
    doc["pair_cap"] = pair_cap;
    doc["epochs"] = epochs;
    doc["batch"] = batch;
  }
  return doc;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  CLI::App app{"Meta-unsupervised clustering experiments", "metaul"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Write a synthetic labeled repository");
  synth->add_option("--out", cfg.out, "Output directory")->required();
  synth->add_option("--seed", cfg.seed, "Random seed");
  synth->add_option("--problems", cfg.synth.problems, "Number of datasets");
  synth->add_option("--min-points", cfg.synth.min_points);
  synth->add_option("--max-points", cfg.synth.max_points);
  synth->add_option("--min-dims", cfg.synth.min_dims);
  synth->add_option("--max-dims", cfg.synth.max_dims);
  synth->add_option("--min-clusters", cfg.synth.min_clusters);
  synth->add_option("--max-clusters", cfg.synth.max_clusters);
  synth->add_option("--separation", cfg.synth.separation, "Minimum center distance in blob sds");
  synth->add_option("--sigma", cfg.synth.sigma, "Blob standard deviation");
  synth->add_option("--outlier-fraction", cfg.synth.outlier_fraction, "Planted outlier fraction per dataset");
  synth->add_option("--outlier-distance", cfg.synth.outlier_distance);

  auto* runc = app.add_subcommand("run", "Run one experiment over a repository");
  runc->add_option("experiment", cfg.experiment, "Experiment name")->required()->check(CLI::IsMember(kExperiments));
  runc->add_option("--repo", cfg.repo, "Repository directory or manifest")->required();
  runc->add_option("--out", cfg.out, "Output directory")->required();
  runc->add_option("--seed", cfg.seed, "Random seed");
  runc->add_option("--train-frac", cfg.train_fractions, "Comma separated training fractions")->delimiter(',');
  runc->add_option("--repeats", cfg.repeats, "Random splits per training fraction");
  runc->add_option("--threads", cfg.threads, "Worker threads");
  runc->add_option("--p-grid", cfg.p_grid, "Comma separated outlier fractions")->delimiter(',');
  runc->add_option("--k-min", cfg.k_min);
  runc->add_option("--k-max", cfg.k_max);
  runc->add_option("--runs-per-k", cfg.runs_per_k, "Single-start k-means runs per k");
  runc->add_flag("--raw-norm", cfg.raw_norm, "Rank outliers by raw norm instead of distance from the mean");
  runc->add_option("--pair-cap", cfg.pair_cap, "Pairs sampled per dataset and split");
  runc->add_option("--epochs", cfg.epochs);
  runc->add_option("--batch", cfg.batch);

  auto* report = app.add_subcommand("report", "Aggregate result CSVs by their first column");
  report->add_option("inputs", cfg.inputs, "Result CSV files")->required();
  report->add_option("--out", cfg.out, "Output directory (stdout if omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (synth->parsed()) cfg.command = "synth";
    else if (runc->parsed()) cfg.command = "run";
    else cfg.command = "report";
    cfg.validate();
    if (cfg.command == "synth") cmd_synth(cfg, out);
    else if (cfg.command == "run") cmd_run(cfg, out);
    else cmd_report(cfg, out);
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

}  // namespace metaul::cli
