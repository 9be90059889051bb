#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "metaul/types.hpp"

namespace metaul {

// A numeric dataset, optionally with ground-truth class labels.
struct Dataset {
  std::string id;
  std::string name;
  PointMatrix points;
  std::optional<std::vector<int>> labels;

  std::size_t n() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(points.cols()); }
  int num_classes() const;

  // Throws DataError if a Dataset invariant is violated.
  void validate() const;
};

// Disjoint, non-empty parts over item indices {0..n_items-1}. A partition does
// not have to cover every item; see is_valid().
class Partition {
public:
  Partition() = default;
  Partition(std::size_t n_items, std::vector<std::vector<std::size_t>> parts);

  // Builds a partition from per-item cluster ids; ids < 0 mark uncovered items.
  // Parts are ordered by their smallest member.
  static Partition from_assignment(std::span<const int> assignment);
  static Partition singletons(std::size_t n_items);

  std::size_t n_items() const { return n_items_; }
  std::size_t num_parts() const { return parts_.size(); }
  const std::vector<std::vector<std::size_t>>& parts() const { return parts_; }
  const std::vector<std::size_t>& part(std::size_t i) const { return parts_[i]; }

  // Part index of each item, -1 if uncovered.
  const std::vector<int>& assignment() const { return assignment_; }
  bool covers_all() const { return covered_ == n_items_; }

  // Valid clustering: covers every item and has at least two parts.
  bool is_valid() const { return covers_all() && parts_.size() >= 2; }

  bool same_part(std::size_t a, std::size_t b) const {
    return assignment_[a] >= 0 && assignment_[a] == assignment_[b];
  }

  // Same co-membership relation (ignores part order).
  bool equivalent(const Partition& other) const;

  // Parts sorted by smallest member, members sorted ascending.
  Partition canonical() const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.n_items_ == b.n_items_ && a.parts_ == b.parts_;
  }

private:
  std::size_t n_items_ = 0;
  std::size_t covered_ = 0;
  std::vector<std::vector<std::size_t>> parts_;
  std::vector<int> assignment_;
};

struct Edge {
  std::size_t u;
  std::size_t v;
  double w;
};

// Undirected graph with nonnegative finite weights, u < v on every edge.
class WeightedGraph {
public:
  WeightedGraph() = default;
  WeightedGraph(std::size_t n_vertices, std::vector<Edge> edges);

  // Complete graph of pairwise Euclidean distances between rows.
  static WeightedGraph complete_euclidean(const PointMatrix& points);

  std::size_t n_vertices() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool is_complete() const { return edges_.size() == n_ * (n_ - 1) / 2 || n_ < 2; }
  double min_weight() const;

  WeightedGraph scaled(double alpha) const;

private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
};

using ProblemData = std::variant<Dataset, WeightedGraph>;

struct Problem {
  ProblemData data;
  Partition truth;

  std::size_t n_items() const;
  std::string id() const;
};

struct MetaRepository {
  std::vector<Problem> problems;
  std::uint64_t seed = 0;

  std::size_t size() const { return problems.size(); }
  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.5;
  std::size_t repeat_index = 0;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Dataset load_dataset_csv(const std::filesystem::path& path, bool has_labels);
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);

Partition labels_to_partition(std::span<const int> labels);

// Zero mean, unit population variance per column; constant columns become 0.
Dataset normalize_dataset(const Dataset& dataset);
PointMatrix normalize_columns(const PointMatrix& points);

// Train size is floor(n * f + 0.5); both sides must be non-empty.
Split split_repository(std::size_t n_problems, std::uint64_t repo_seed, const SplitSpec& spec);
Split split_repository(const MetaRepository& repo, const SplitSpec& spec);

struct SynthSpec {
  std::size_t problems = 20;
  std::size_t min_points = 200;
  std::size_t max_points = 200;
  std::size_t min_dims = 2;
  std::size_t max_dims = 5;
  std::size_t min_clusters = 2;
  std::size_t max_clusters = 4;
  // Minimum distance between blob centers, in units of the blob sd.
  double separation = 10.0;
  double sigma = 1.0;
  double outlier_fraction = 0.0;
  // Planted outliers sit this many sd beyond the furthest blob center.
  double outlier_distance = 30.0;
  std::uint64_t seed = 0;
};

// Mixture of isotropic Gaussian blobs per problem; ground truth is blob
// membership. Planted outliers keep the label of the blob they were taken from.
MetaRepository make_synthetic_repository(const SynthSpec& spec);
std::size_t planted_outlier_count(std::size_t n_points, double fraction);

// Manifest: JSON array of {"id", "path", "has_labels"}; paths relative to the
// manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string path;
  bool has_labels = true;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& manifest);

// Loads every dataset of a manifest (a directory argument means
// <dir>/manifest.json). Labeled datasets get their labels as ground truth.
MetaRepository load_repository(const std::filesystem::path& path, std::uint64_t seed);

// Writes each Dataset problem as <dir>/<id>.csv plus manifest.json.
void write_repository(const MetaRepository& repo, const std::filesystem::path& dir);

// Datasets of a repository in order; throws DataError for graph problems.
std::vector<Dataset> repository_datasets(const MetaRepository& repo);

}  // namespace metaul
