#include "metaul/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace metaul {

namespace {

constexpr std::uint64_t choose2(std::uint64_t x) { return x < 2 ? 0 : x * (x - 1) / 2; }

void require_valid(std::size_t n_items, const Partition& y, const Partition& z) {
  if (y.n_items() != n_items || z.n_items() != n_items || !y.is_valid() || !z.is_valid()) {
    throw std::invalid_argument("partitions must be valid clusterings of the same items");
  }
}

}  // namespace

ContingencyTable ContingencyTable::build(const Partition& y, const Partition& z) {
  if (y.n_items() != z.n_items()) throw std::invalid_argument("partitions cover different item sets");
  ContingencyTable t;
  t.counts.assign(y.num_parts(), std::vector<std::uint64_t>(z.num_parts(), 0));
  t.row_sums.assign(y.num_parts(), 0);
  t.col_sums.assign(z.num_parts(), 0);
  const auto& ya = y.assignment();
  const auto& za = z.assignment();
  for (std::size_t i = 0; i < y.n_items(); ++i) {
    if (ya[i] < 0 || za[i] < 0) continue;
    const auto r = static_cast<std::size_t>(ya[i]);
    const auto c = static_cast<std::size_t>(za[i]);
    ++t.counts[r][c];
    ++t.row_sums[r];
    ++t.col_sums[c];
    ++t.total;
  }
  return t;
}

PairCounts pair_counts(const ContingencyTable& table) {
  PairCounts pc;
  for (auto a : table.row_sums) pc.same_y += choose2(a);
  for (auto b : table.col_sums) pc.same_z += choose2(b);
  for (const auto& row : table.counts) {
    for (auto c : row) pc.same_both += choose2(c);
  }
  return pc;
}

double pair_disagreement_loss(std::uint64_t ordered_disagreements, std::size_t n_items) {
  const double n = static_cast<double>(n_items);
  return static_cast<double>(ordered_disagreements) / (n * (n - 1.0));
}

double clustering_loss(std::size_t n_items, const Partition& y, const Partition& z) {
  if (y.n_items() != n_items || z.n_items() != n_items || !y.is_valid() || !z.is_valid()) return 1.0;
  return pair_disagreement_loss(pair_counts(ContingencyTable::build(y, z)).ordered_disagreements(), n_items);
}

double rand_index(std::size_t n_items, const Partition& y, const Partition& z) {
  require_valid(n_items, y, z);
  return 1.0 - clustering_loss(n_items, y, z);
}

double adjusted_rand_index(std::size_t n_items, const Partition& y, const Partition& z) {
  require_valid(n_items, y, z);
  const PairCounts pc = pair_counts(ContingencyTable::build(y, z));
  const std::uint64_t all_pairs = choose2(n_items);
  // max == expected  <=>  (same_y + same_z) * all_pairs == 2 * same_y * same_z
  using u128 = unsigned __int128;
  const u128 lhs = static_cast<u128>(pc.same_y + pc.same_z) * all_pairs;
  const u128 rhs = static_cast<u128>(2) * pc.same_y * pc.same_z;
  if (lhs == rhs) {
    return (pc.same_both == pc.same_y && pc.same_both == pc.same_z) ? 1.0 : 0.0;
  }
  const double index = static_cast<double>(pc.same_both);
  const double expected =
      static_cast<double>(pc.same_y) * static_cast<double>(pc.same_z) / static_cast<double>(all_pairs);
  const double max_index = 0.5 * (static_cast<double>(pc.same_y) + static_cast<double>(pc.same_z));
  return (index - expected) / (max_index - expected);
}

Eigen::MatrixXd pairwise_distances(const PointMatrix& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

double silhouette_score(const Eigen::MatrixXd& distances, const Partition& clustering) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (clustering.n_items() != n || !clustering.covers_all()) {
    throw std::invalid_argument("silhouette needs a partition covering every point");
  }
  if (clustering.num_parts() < 2) throw std::invalid_argument("silhouette needs at least 2 clusters");

  const std::size_t k = clustering.num_parts();
  const auto& assign = clustering.assignment();
  std::vector<double> sums(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(assign[i]);
    const std::size_t own_size = clustering.part(own).size();
    if (own_size == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      sums[static_cast<std::size_t>(assign[j])] += distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const double a = sums[own] / static_cast<double>(own_size - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, sums[c] / static_cast<double>(clustering.part(c).size()));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette_score(const PointMatrix& points, const Partition& clustering) {
  return silhouette_score(pairwise_distances(points), clustering);
}

}  // namespace metaul
