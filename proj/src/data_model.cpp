#include "metaul/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaul/csv.hpp"
#include "metaul/rng.hpp"

namespace metaul {

namespace fs = std::filesystem;

int Dataset::num_classes() const {
  if (!labels || labels->empty()) return 0;
  return *std::max_element(labels->begin(), labels->end()) + 1;
}

void Dataset::validate() const {
  if (points.rows() < 2) throw DataError(id + ": need at least 2 points");
  if (points.cols() < 1) throw DataError(id + ": need at least 1 feature");
  if (!points.allFinite()) throw DataError(id + ": non-finite feature value");
  if (!labels) return;
  if (labels->size() != n()) throw DataError(id + ": label count does not match point count");
  const int k = num_classes();
  if (k < 2) throw DataError(id + ": labels must contain at least 2 classes");
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int c : *labels) {
    if (c < 0) throw DataError(id + ": negative class id");
    seen[static_cast<std::size_t>(c)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError(id + ": class ids must be contiguous from 0");
  }
}

// ---------------------------------------------------------------------------

Partition::Partition(std::size_t n_items, std::vector<std::vector<std::size_t>> parts)
    : n_items_(n_items), parts_(std::move(parts)), assignment_(n_items, -1) {
  for (std::size_t p = 0; p < parts_.size(); ++p) {
    if (parts_[p].empty()) throw std::invalid_argument("partition part is empty");
    for (std::size_t item : parts_[p]) {
      if (item >= n_items_) throw std::invalid_argument("partition item out of range");
      if (assignment_[item] >= 0) throw std::invalid_argument("partition parts overlap");
      assignment_[item] = static_cast<int>(p);
      ++covered_;
    }
  }
}

Partition Partition::from_assignment(std::span<const int> assignment) {
  std::map<int, std::size_t> part_of_id;
  std::vector<std::vector<std::size_t>> parts;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int id = assignment[i];
    if (id < 0) continue;
    auto [it, inserted] = part_of_id.try_emplace(id, parts.size());
    if (inserted) parts.emplace_back();
    parts[it->second].push_back(i);
  }
  return Partition(assignment.size(), std::move(parts));
}

Partition Partition::singletons(std::size_t n_items) {
  std::vector<std::vector<std::size_t>> parts(n_items);
  for (std::size_t i = 0; i < n_items; ++i) parts[i] = {i};
  return Partition(n_items, std::move(parts));
}

bool Partition::equivalent(const Partition& other) const {
  return n_items_ == other.n_items_ && canonical() == other.canonical();
}

Partition Partition::canonical() const {
  auto parts = parts_;
  for (auto& p : parts) std::sort(p.begin(), p.end());
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return Partition(n_items_, std::move(parts));
}

// ---------------------------------------------------------------------------

WeightedGraph::WeightedGraph(std::size_t n_vertices, std::vector<Edge> edges)
    : n_(n_vertices), edges_(std::move(edges)) {
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  keys.reserve(edges_.size());
  for (auto& e : edges_) {
    if (e.u == e.v) throw std::invalid_argument("graph self-loop");
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.v >= n_) throw std::invalid_argument("graph vertex out of range");
    if (!std::isfinite(e.w) || e.w < 0.0) throw std::invalid_argument("graph weight must be finite and >= 0");
    keys.emplace_back(e.u, e.v);
  }
  std::sort(keys.begin(), keys.end());
  if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
    throw std::invalid_argument("graph has a duplicate edge");
  }
}

WeightedGraph WeightedGraph::complete_euclidean(const PointMatrix& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      edges.push_back({i, j, (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm()});
    }
  }
  return WeightedGraph(n, std::move(edges));
}

double WeightedGraph::min_weight() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : edges_) m = std::min(m, e.w);
  return m;
}

WeightedGraph WeightedGraph::scaled(double alpha) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("scale factor must be positive");
  auto edges = edges_;
  for (auto& e : edges) e.w *= alpha;
  return WeightedGraph(n_, std::move(edges));
}

std::size_t Problem::n_items() const {
  if (const auto* ds = std::get_if<Dataset>(&data)) return ds->n();
  return std::get<WeightedGraph>(data).n_vertices();
}

std::string Problem::id() const {
  if (const auto* ds = std::get_if<Dataset>(&data)) return ds->id;
  return {};
}

void MetaRepository::validate() const {
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const auto& p = problems[i];
    // Unlabeled datasets carry an empty truth and are only usable for prediction.
    if (p.truth.n_items() == 0) continue;
    if (p.truth.n_items() != p.n_items() || !p.truth.is_valid()) {
      throw DataError("problem " + std::to_string(i) + ": ground truth is not a valid partition");
    }
  }
}

// ---------------------------------------------------------------------------

Dataset load_dataset_csv(const fs::path& path, bool has_labels) {
  const CsvTable table = read_csv(path);
  const std::size_t n_cols = table.header.size();
  const std::size_t d = has_labels ? n_cols - 1 : n_cols;
  if (has_labels && (n_cols < 2 || table.header.back() != "label")) {
    throw DataError(path.string() + ": last column must be 'label'");
  }
  if (d < 1) throw DataError(path.string() + ": no feature columns");
  for (std::size_t j = 0; j < d; ++j) {
    if (table.header[j] != "f" + std::to_string(j)) {
      throw DataError(path.string() + ": feature column " + std::to_string(j) + " must be named f" +
                      std::to_string(j));
    }
  }

  Dataset ds;
  ds.id = path.stem().string();
  ds.name = ds.id;
  ds.points.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(d));
  std::vector<int> labels;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double v = parse_double(row[j], "feature in " + path.string());
      if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite feature value '" + row[j] + "'");
      ds.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
    if (has_labels) {
      const long long c = parse_integer(row[d], "label in " + path.string());
      if (c < 0 || c > std::numeric_limits<int>::max()) throw DataError(path.string() + ": label out of range");
      labels.push_back(static_cast<int>(c));
    }
  }
  if (has_labels) ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

void write_dataset_csv(const Dataset& dataset, const fs::path& path) {
  std::ostringstream out;
  for (std::size_t j = 0; j < dataset.d(); ++j) out << (j ? "," : "") << 'f' << j;
  if (dataset.labels) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    for (std::size_t j = 0; j < dataset.d(); ++j) {
      out << (j ? "," : "") << format_double(dataset.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    if (dataset.labels) out << ',' << (*dataset.labels)[i];
    out << '\n';
  }
  write_text_file(path, out.str());
}

Partition labels_to_partition(std::span<const int> labels) {
  int max_label = -1;
  for (int c : labels) {
    if (c < 0) throw DataError("negative class id");
    max_label = std::max(max_label, c);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  std::vector<std::vector<std::size_t>> parts;
  for (auto& p : by_class) {
    if (!p.empty()) parts.push_back(std::move(p));
  }
  if (parts.size() < 2) throw DataError("labels must contain at least 2 distinct classes");
  return Partition(labels.size(), std::move(parts));
}

PointMatrix normalize_columns(const PointMatrix& points) {
  PointMatrix out = points;
  const double n = static_cast<double>(points.rows());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    auto col = out.col(j);
    const double mean = col.sum() / n;
    col.array() -= mean;
    const double var = col.squaredNorm() / n;
    if (var > 0.0) {
      col /= std::sqrt(var);
    } else {
      col.setZero();
    }
  }
  return out;
}

Dataset normalize_dataset(const Dataset& dataset) {
  Dataset out = dataset;
  out.points = normalize_columns(dataset.points);
  return out;
}

Split split_repository(std::size_t n_problems, std::uint64_t repo_seed, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n_problems) * spec.train_fraction + 0.5));
  if (n_train == 0 || n_train >= n_problems) {
    throw std::invalid_argument("split of " + std::to_string(n_problems) + " problems at fraction " +
                                format_double(spec.train_fraction) + " leaves one side empty");
  }
  std::vector<std::size_t> order(n_problems);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(mix_seed(repo_seed, spec.seed), spec.repeat_index));
  rng.shuffle(order);
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split split_repository(const MetaRepository& repo, const SplitSpec& spec) {
  return split_repository(repo.size(), repo.seed, spec);
}

// ---------------------------------------------------------------------------

std::size_t planted_outlier_count(std::size_t n_points, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_points) + 1e-9));
}

namespace {

std::size_t draw_in_range(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

PointMatrix separated_centers(Rng& rng, std::size_t k, std::size_t d, double min_dist) {
  PointMatrix centers(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  double side = min_dist * std::max(2.0, 2.0 * std::pow(static_cast<double>(k), 1.0 / static_cast<double>(d)));
  std::size_t placed = 0;
  int failures = 0;
  while (placed < k) {
    Eigen::RowVectorXd c(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(j)) = rng.uniform(-side / 2, side / 2);
    bool ok = true;
    for (std::size_t i = 0; i < placed && ok; ++i) {
      ok = (centers.row(static_cast<Eigen::Index>(i)) - c).norm() >= min_dist;
    }
    if (ok) {
      centers.row(static_cast<Eigen::Index>(placed++)) = c;
    } else if (++failures % 1000 == 0) {
      side *= 1.5;
    }
  }
  return centers;
}

Eigen::RowVectorXd random_direction(Rng& rng, std::size_t d) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(d));
  do {
    for (std::size_t j = 0; j < d; ++j) v(static_cast<Eigen::Index>(j)) = rng.normal();
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

Problem make_blob_problem(const SynthSpec& spec, std::size_t index) {
  Rng rng(mix_seed(spec.seed, index));
  const std::size_t n = draw_in_range(rng, spec.min_points, spec.max_points);
  const std::size_t d = draw_in_range(rng, spec.min_dims, spec.max_dims);
  const std::size_t k = draw_in_range(rng, spec.min_clusters, spec.max_clusters);
  if (k > n) throw std::invalid_argument("synthetic spec has more clusters than points");

  const PointMatrix centers = separated_centers(rng, k, d, spec.separation * spec.sigma);
  PointMatrix points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i * k / n;
    labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < d; ++j) {
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + spec.sigma * rng.normal();
    }
  }

  const std::size_t n_out = planted_outlier_count(n, spec.outlier_fraction);
  if (n_out > 0) {
    const Eigen::RowVectorXd center_mean = centers.colwise().mean();
    double reach = 0.0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) reach = std::max(reach, (centers.row(c) - center_mean).norm());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    for (std::size_t o = 0; o < n_out; ++o) {
      const auto row = static_cast<Eigen::Index>(idx[o]);
      points.row(row) = center_mean + (reach + spec.outlier_distance * spec.sigma) * random_direction(rng, d);
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Dataset ds;
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%04zu", index);
  ds.id = id;
  ds.name = id;
  ds.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<int> shuffled(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.points.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(order[i]));
    shuffled[i] = labels[order[i]];
  }
  ds.labels = std::move(shuffled);
  Partition truth = labels_to_partition(*ds.labels);
  return Problem{std::move(ds), std::move(truth)};
}

}  // namespace

MetaRepository make_synthetic_repository(const SynthSpec& spec) {
  if (spec.problems == 0) throw std::invalid_argument("synthetic spec needs at least one problem");
  if (spec.min_points < 2 || spec.min_points > spec.max_points) throw std::invalid_argument("invalid point range");
  if (spec.min_dims < 1 || spec.min_dims > spec.max_dims) throw std::invalid_argument("invalid dimension range");
  if (spec.min_clusters < 2 || spec.min_clusters > spec.max_clusters) {
    throw std::invalid_argument("invalid cluster range");
  }
  if (spec.max_clusters > spec.min_points) throw std::invalid_argument("more clusters than points");
  if (!(spec.sigma > 0.0) || !(spec.separation >= 0.0)) throw std::invalid_argument("invalid blob geometry");
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction < 0.5)) {
    throw std::invalid_argument("outlier fraction must lie in [0, 0.5)");
  }
  MetaRepository repo;
  repo.seed = spec.seed;
  repo.problems.reserve(spec.problems);
  for (std::size_t i = 0; i < spec.problems; ++i) repo.problems.push_back(make_blob_problem(spec, i));
  return repo;
}

// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + manifest.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError("manifest must be a JSON array");
  std::vector<ManifestEntry> entries;
  for (const auto& item : doc) {
    try {
      entries.push_back({item.at("id").get<std::string>(), item.at("path").get<std::string>(),
                         item.at("has_labels").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest entry: " + std::string(e.what()));
    }
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& manifest) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries) doc.push_back({{"id", e.id}, {"path", e.path}, {"has_labels", e.has_labels}});
  write_text_file(manifest, doc.dump(2) + "\n");
}

MetaRepository load_repository(const fs::path& path, std::uint64_t seed) {
  const fs::path manifest = fs::is_directory(path) ? path / "manifest.json" : path;
  const auto entries = read_manifest(manifest);
  MetaRepository repo;
  repo.seed = seed;
  for (const auto& e : entries) {
    Dataset ds = load_dataset_csv(manifest.parent_path() / e.path, e.has_labels);
    ds.id = e.id;
    Partition truth = ds.labels ? labels_to_partition(*ds.labels) : Partition();
    repo.problems.push_back(Problem{std::move(ds), std::move(truth)});
  }
  repo.validate();
  return repo;
}

void write_repository(const MetaRepository& repo, const fs::path& dir) {
  std::vector<ManifestEntry> entries;
  for (const auto& p : repo.problems) {
    const auto* ds = std::get_if<Dataset>(&p.data);
    if (!ds) throw DataError("only dataset problems can be written as CSV");
    write_dataset_csv(*ds, dir / (ds->id + ".csv"));
    entries.push_back({ds->id, ds->id + ".csv", ds->labels.has_value()});
  }
  write_manifest(entries, dir / "manifest.json");
}

std::vector<Dataset> repository_datasets(const MetaRepository& repo) {
  std::vector<Dataset> out;
  out.reserve(repo.size());
  for (const auto& p : repo.problems) {
    const auto* ds = std::get_if<Dataset>(&p.data);
    if (!ds) throw DataError("repository contains a graph problem where a dataset is required");
    out.push_back(*ds);
  }
  return out;
}

}  // namespace metaul
