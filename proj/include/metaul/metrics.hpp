#pragma once

#include <cstdint>
#include <vector>

#include "metaul/data_model.hpp"

namespace metaul {

// Co-occurrence counts of two partitions over the items both cover.
struct ContingencyTable {
  std::vector<std::vector<std::uint64_t>> counts;  // rows: parts of Y, cols: parts of Z
  std::vector<std::uint64_t> row_sums;
  std::vector<std::uint64_t> col_sums;
  std::uint64_t total = 0;

  static ContingencyTable build(const Partition& y, const Partition& z);
};

// Unordered same-part pair counts: within Y, within Z, within both.
struct PairCounts {
  std::uint64_t same_y = 0;
  std::uint64_t same_z = 0;
  std::uint64_t same_both = 0;

  // Ordered pairs (x, x') on which Y and Z disagree about co-membership.
  std::uint64_t ordered_disagreements() const { return 2 * (same_y + same_z - 2 * same_both); }
};

PairCounts pair_counts(const ContingencyTable& table);

// disagreements / (n (n - 1)), the form shared by every loss computation so
// that incremental and from-scratch evaluations agree bit for bit.
double pair_disagreement_loss(std::uint64_t ordered_disagreements, std::size_t n_items);

// Fraction of ordered distinct pairs where Y and Z disagree; 1 unless both
// partitions are valid clusterings of n_items.
double clustering_loss(std::size_t n_items, const Partition& y, const Partition& z);

// 1 - clustering_loss. Throws std::invalid_argument for invalid partitions.
double rand_index(std::size_t n_items, const Partition& y, const Partition& z);

// Hubert-Arabie adjusted Rand index. When the expected and maximum index
// coincide the value is 1 if the co-membership relations agree and 0 otherwise.
double adjusted_rand_index(std::size_t n_items, const Partition& y, const Partition& z);

// Symmetric matrix of pairwise Euclidean distances.
Eigen::MatrixXd pairwise_distances(const PointMatrix& points);

// Mean silhouette over all points; singleton-cluster points and 0/0 cases
// contribute 0. Throws std::invalid_argument for fewer than two clusters or a
// partition that does not cover every row.
double silhouette_score(const PointMatrix& points, const Partition& clustering);
double silhouette_score(const Eigen::MatrixXd& distances, const Partition& clustering);

}  // namespace metaul
