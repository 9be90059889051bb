#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaul/data_model.hpp"

namespace metaul {

enum class ClustererKind { kmeans, agglo_single, agglo_complete, agglo_average, agglo_ward };
enum class Linkage { single, complete, average, ward };

struct ClustererSpec {
  ClustererKind kind = ClustererKind::kmeans;
  std::size_t k = 2;
  bool normalize_first = false;
  std::size_t restarts = 1;
  std::uint64_t seed = 0;

  // "KMeans", "Ward-N", ...
  std::string name() const;
  void validate() const;
};

std::string to_string(ClustererKind kind);
ClustererKind parse_clusterer_kind(const std::string& text);

struct ClusterResult {
  Partition partition;
  PointMatrix centers;  // row i is the centroid of part i
  std::optional<double> inertia;
};

// One Lloyd run from the given initial centers.
struct LloydRun {
  std::vector<int> assignment;
  PointMatrix centers;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after each assignment step (for monotonicity checks).
  std::vector<double> inertia_trace;
};

constexpr std::size_t kLloydMaxIterations = 300;

// k-means++ seeding.
PointMatrix kmeans_plus_plus(const PointMatrix& points, std::size_t k, std::uint64_t seed);

// Lloyd iteration until assignments stop changing or max_iterations. Empty
// clusters are reseeded with the point furthest from its center (taken from a
// cluster that keeps at least one point).
LloydRun lloyd(const PointMatrix& points, PointMatrix centers, std::size_t max_iterations = kLloydMaxIterations);

// Best-inertia result over `restarts` k-means++ seeded Lloyd runs; the lowest
// restart index wins ties.
ClusterResult kmeans(const PointMatrix& points, std::size_t k, std::size_t restarts, std::uint64_t seed);

// Greedy agglomeration from singletons with Lance-Williams updates until k
// clusters remain. Ties merge the lexicographically lowest index pair.
ClusterResult agglomerative(const PointMatrix& points, std::size_t k, Linkage linkage);

// Connected components over edges with w <= r (or w < r when strict). May
// return a single part, which is not a valid clustering.
Partition single_linkage_threshold(const WeightedGraph& graph, double r, bool strict);

// Runs a clusterer spec, normalizing first if requested. Centers are always
// centroids in the input space.
ClusterResult run_clusterer(const PointMatrix& points, const ClustererSpec& spec);

enum class OutlierCriterion {
  distance_from_mean,  // furthest from the data mean
  raw_norm,            // largest Euclidean norm
};

// Indices of the floor(theta * n) points ranked most extreme (ties to the lower
// index), in ascending index order.
std::vector<std::size_t> outlier_indices(const PointMatrix& points, double theta,
                                         OutlierCriterion criterion = OutlierCriterion::distance_from_mean);

// Sets aside the outliers, clusters the rest with `base` and reattaches each
// outlier to the nearest resulting center.
ClusterResult cluster_with_outlier_removal(const PointMatrix& points, double theta, const ClustererSpec& base,
                                           OutlierCriterion criterion = OutlierCriterion::distance_from_mean);

// Row-wise centroids of each part.
PointMatrix part_centroids(const PointMatrix& points, const Partition& partition);

// Index of the nearest row of `centers` (lowest index on ties).
std::size_t nearest_center(const PointMatrix& centers, const Eigen::Ref<const Eigen::RowVectorXd>& x);

}  // namespace metaul
