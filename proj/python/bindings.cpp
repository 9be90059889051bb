#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metaul/cli.hpp"
#include "metaul/clusterers.hpp"
#include "metaul/erm_meta.hpp"
#include "metaul/meta_pipelines.hpp"
#include "metaul/metrics.hpp"
#include "metaul/regression.hpp"

namespace py = pybind11;
using namespace metaul;

namespace {

// Python-facing partitions are per-item label lists.
Partition to_partition(const std::vector<int>& labels) { return Partition::from_assignment(labels); }

std::vector<int> to_labels(const Partition& p) {
  std::vector<int> out(p.n_items(), -1);
  for (std::size_t c = 0; c < p.num_parts(); ++c) {
    for (std::size_t i : p.parts()[c]) out[i] = static_cast<int>(c);
  }
  return out;
}

using EdgeTuple = std::tuple<std::size_t, std::size_t, double>;

WeightedGraph to_graph(std::size_t n, const std::vector<EdgeTuple>& edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& [u, v, w] : edges) out.push_back({u, v, w});
  return WeightedGraph(n, std::move(out));
}

using GraphTuple = std::tuple<std::size_t, std::vector<EdgeTuple>, std::vector<int>>;

std::vector<GraphProblem> to_graph_problems(const std::vector<GraphTuple>& graphs) {
  std::vector<GraphProblem> out;
  for (const auto& [n, edges, labels] : graphs) out.push_back({to_graph(n, edges), to_partition(labels)});
  return out;
}

Dataset to_dataset(const PointMatrix& points, const std::vector<int>& labels, std::size_t index) {
  Dataset ds;
  ds.id = "py_" + std::to_string(index);
  ds.points = points;
  ds.labels = labels;
  ds.validate();
  return ds;
}

Linkage parse_linkage(const std::string& name) {
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  if (name == "ward") return Linkage::ward;
  throw std::invalid_argument("unknown linkage: " + name);
}

}  // namespace

PYBIND11_MODULE(_metaul, m) {
  m.doc() = "Meta-unsupervised clustering toolkit";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "clustering_loss",
      [](const std::vector<int>& y, const std::vector<int>& z) {
        return clustering_loss(y.size(), to_partition(y), to_partition(z));
      },
      py::arg("truth"), py::arg("clustering"));
  m.def(
      "rand_index",
      [](const std::vector<int>& y, const std::vector<int>& z) {
        return rand_index(y.size(), to_partition(y), to_partition(z));
      },
      py::arg("truth"), py::arg("clustering"));
  m.def(
      "adjusted_rand_index",
      [](const std::vector<int>& y, const std::vector<int>& z) {
        return adjusted_rand_index(y.size(), to_partition(y), to_partition(z));
      },
      py::arg("truth"), py::arg("clustering"));
  m.def(
      "silhouette_score",
      [](const PointMatrix& x, const std::vector<int>& labels) { return silhouette_score(x, to_partition(labels)); },
      py::arg("points"), py::arg("labels"));

  m.def(
      "kmeans",
      [](const PointMatrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed) {
        return to_labels(kmeans(x, k, restarts, seed).partition);
      },
      py::arg("points"), py::arg("k"), py::arg("restarts") = 10, py::arg("seed") = 0);
  m.def(
      "agglomerative",
      [](const PointMatrix& x, std::size_t k, const std::string& linkage) {
        return to_labels(agglomerative(x, k, parse_linkage(linkage)).partition);
      },
      py::arg("points"), py::arg("k"), py::arg("linkage") = "ward");
  m.def(
      "single_linkage_threshold",
      [](std::size_t n, const std::vector<EdgeTuple>& edges, double r, bool strict) {
        return to_labels(single_linkage_threshold(to_graph(n, edges), r, strict));
      },
      py::arg("n_vertices"), py::arg("edges"), py::arg("r"), py::arg("strict") = false);
  m.def("outlier_indices",
        [](const PointMatrix& x, double theta) { return outlier_indices(x, theta); }, py::arg("points"),
        py::arg("theta"));

  m.def(
      "fit_threshold",
      [](const std::vector<GraphTuple>& graphs, bool brute_force) {
        const auto train = to_graph_problems(graphs);
        const auto fit = brute_force ? fit_threshold_bruteforce(train) : fit_threshold_kruskal(train);
        std::vector<std::pair<double, double>> profile;
        for (const auto& c : fit.profile) profile.emplace_back(c.r, c.mean_loss);
        py::dict out;
        out["r_star"] = fit.r_star;
        out["min_mean_loss"] = fit.min_mean_loss;
        out["profile"] = profile;
        return out;
      },
      py::arg("graphs"), py::arg("brute_force") = false,
      "graphs: list of (n_vertices, [(u, v, w), ...], truth_labels)");
  m.def(
      "fit_meta_scale", [](const std::vector<GraphTuple>& graphs) { return fit_meta_scale(to_graph_problems(graphs)).r_star; },
      py::arg("graphs"));
  m.def(
      "generalization_bound",
      [](std::size_t n, std::size_t family_size, double delta) {
        return generalization_bound({n, family_size, std::nullopt, delta});
      },
      py::arg("n"), py::arg("family_size"), py::arg("delta") = 0.05);

  m.def(
      "synthetic_repository",
      [](std::size_t problems, std::uint64_t seed, std::size_t min_points, std::size_t max_points,
         std::size_t min_clusters, std::size_t max_clusters, double outlier_fraction) {
        SynthSpec spec;
        spec.problems = problems;
        spec.seed = seed;
        spec.min_points = min_points;
        spec.max_points = max_points;
        spec.min_clusters = min_clusters;
        spec.max_clusters = max_clusters;
        spec.outlier_fraction = outlier_fraction;
        std::vector<std::pair<PointMatrix, std::vector<int>>> out;
        for (const auto& ds : repository_datasets(make_synthetic_repository(spec))) out.emplace_back(ds.points, *ds.labels);
        return out;
      },
      py::arg("problems") = 20, py::arg("seed") = 0, py::arg("min_points") = 200, py::arg("max_points") = 200,
      py::arg("min_clusters") = 2, py::arg("max_clusters") = 4, py::arg("outlier_fraction") = 0.0);

  m.def(
      "meta_k_experiment",
      [](const std::vector<std::pair<PointMatrix, std::vector<int>>>& data, std::uint64_t seed,
         const std::vector<double>& train_fractions, std::size_t repeats, std::size_t k_min, std::size_t k_max,
         std::size_t runs_per_k, double outlier_fraction) {
        std::vector<Dataset> datasets;
        for (std::size_t i = 0; i < data.size(); ++i) datasets.push_back(to_dataset(data[i].first, data[i].second, i));
        RunConfig config;
        config.k_min = k_min;
        config.k_max = k_max;
        config.runs_per_k = runs_per_k;
        config.outlier_fraction = outlier_fraction;
        const auto runs = generate_all_runs(datasets, config, seed);
        py::list rows;
        for (const auto& r : run_meta_k_experiment(runs, seed, train_fractions, repeats, seed, k_min, k_max)) {
          py::dict row;
          row["train_frac"] = r.train_fraction;
          row["repeat"] = r.repeat;
          row["rmse_meta"] = r.eval.rmse_meta;
          row["rmse_baseline"] = r.eval.rmse_baseline;
          row["ari_meta"] = r.eval.mean_ari_meta;
          row["ari_baseline"] = r.eval.mean_ari_baseline;
          rows.append(row);
        }
        return rows;
      },
      py::arg("datasets"), py::arg("seed") = 0, py::arg("train_fractions") = std::vector<double>{0.5},
      py::arg("repeats") = 10, py::arg("k_min") = 2, py::arg("k_max") = 10, py::arg("runs_per_k") = 10,
      py::arg("outlier_fraction") = 0.0, "datasets: list of (points, labels)");

  m.def(
      "algo_select_experiment",
      [](const std::vector<std::pair<PointMatrix, std::vector<int>>>& data, std::uint64_t seed,
         const std::vector<double>& train_fractions, std::size_t repeats) {
        std::vector<Dataset> datasets;
        for (std::size_t i = 0; i < data.size(); ++i) datasets.push_back(to_dataset(data[i].first, data[i].second, i));
        const auto table = build_algo_table(default_family(2, seed), datasets, seed);
        py::list rows;
        for (const auto& r : run_algo_select_experiment(table, seed, train_fractions, repeats, seed)) {
          py::dict row;
          row["train_frac"] = r.train_fraction;
          row["repeat"] = r.repeat;
          row["ari_meta"] = r.eval.mean_ari_meta;
          py::dict members;
          for (std::size_t j = 0; j < table.member_names.size(); ++j) {
            members[py::str(table.member_names[j])] = r.eval.mean_ari_members[j];
          }
          row["ari_members"] = members;
          rows.append(row);
        }
        return rows;
      },
      py::arg("datasets"), py::arg("seed") = 0, py::arg("train_fractions") = std::vector<double>{0.5},
      py::arg("repeats") = 10);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one metaul command line; returns (exit_code, stdout, stderr).");
}
