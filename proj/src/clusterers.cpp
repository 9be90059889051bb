#include "metaul/clusterers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "metaul/rng.hpp"
#include "metaul/union_find.hpp"

namespace metaul {

std::string to_string(ClustererKind kind) {
  switch (kind) {
    case ClustererKind::kmeans: return "kmeans";
    case ClustererKind::agglo_single: return "agglo_single";
    case ClustererKind::agglo_complete: return "agglo_complete";
    case ClustererKind::agglo_average: return "agglo_average";
    case ClustererKind::agglo_ward: return "agglo_ward";
  }
  return "unknown";
}

ClustererKind parse_clusterer_kind(const std::string& text) {
  for (auto kind : {ClustererKind::kmeans, ClustererKind::agglo_single, ClustererKind::agglo_complete,
                    ClustererKind::agglo_average, ClustererKind::agglo_ward}) {
    if (to_string(kind) == text) return kind;
  }
  throw std::invalid_argument("unknown clusterer kind '" + text + "'");
}

std::string ClustererSpec::name() const {
  std::string base;
  switch (kind) {
    case ClustererKind::kmeans: base = "KMeans"; break;
    case ClustererKind::agglo_single: base = "Single"; break;
    case ClustererKind::agglo_complete: base = "Complete"; break;
    case ClustererKind::agglo_average: base = "Average"; break;
    case ClustererKind::agglo_ward: base = "Ward"; break;
  }
  return normalize_first ? base + "-N" : base;
}

void ClustererSpec::validate() const {
  if (k < 2) throw std::invalid_argument("clusterer needs k >= 2");
  if (restarts < 1) throw std::invalid_argument("clusterer needs restarts >= 1");
}

// ---------------------------------------------------------------------------

std::size_t nearest_center(const PointMatrix& centers, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

PointMatrix part_centroids(const PointMatrix& points, const Partition& partition) {
  PointMatrix centers = PointMatrix::Zero(static_cast<Eigen::Index>(partition.num_parts()), points.cols());
  for (std::size_t p = 0; p < partition.num_parts(); ++p) {
    const auto& members = partition.part(p);
    for (std::size_t i : members) centers.row(static_cast<Eigen::Index>(p)) += points.row(static_cast<Eigen::Index>(i));
    centers.row(static_cast<Eigen::Index>(p)) /= static_cast<double>(members.size());
  }
  return centers;
}

PointMatrix kmeans_plus_plus(const PointMatrix& points, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  Rng rng(seed);
  PointMatrix centers(static_cast<Eigen::Index>(k), points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points.row(static_cast<Eigen::Index>(i)) - centers.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Rounding can leave target beyond the running sum; take the last positive weight.
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centers;
}

namespace {

double inertia_of(const PointMatrix& points, const PointMatrix& centers, const std::vector<int>& assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centers.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total;
}

}  // namespace

LloydRun lloyd(const PointMatrix& points, PointMatrix centers, std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(centers.rows());
  if (k == 0 || k > n) throw std::invalid_argument("lloyd needs 1 <= k <= n");

  LloydRun run;
  run.assignment.assign(n, -1);
  std::vector<int> next(n);
  std::vector<std::size_t> sizes(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_center(centers, points.row(static_cast<Eigen::Index>(i)));
      next[i] = static_cast<int>(c);
      ++sizes[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(next[i]);
        if (sizes[own] < 2) continue;
        const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(own))).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[static_cast<std::size_t>(next[far])];
      next[far] = static_cast<int>(c);
      sizes[c] = 1;
      centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
    }

    const bool changed = next != run.assignment;
    run.assignment = next;
    centers.setZero();
    for (std::size_t i = 0; i < n; ++i) centers.row(next[i]) += points.row(static_cast<Eigen::Index>(i));
    for (std::size_t c = 0; c < k; ++c) centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    run.inertia_trace.push_back(inertia_of(points, centers, run.assignment));
    run.iterations = iter + 1;
    if (!changed) break;
  }
  run.inertia = run.inertia_trace.back();
  run.centers = std::move(centers);
  return run;
}

ClusterResult kmeans(const PointMatrix& points, std::size_t k, std::size_t restarts, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1 || k > n) throw std::invalid_argument("kmeans needs 1 <= k <= n points");
  if (restarts < 1) throw std::invalid_argument("kmeans needs at least one restart");
  LloydRun best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    LloydRun run = lloyd(points, kmeans_plus_plus(points, k, mix_seed(seed, r)));
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  ClusterResult result;
  result.partition = Partition::from_assignment(best.assignment);
  result.centers = part_centroids(points, result.partition);
  result.inertia = best.inertia;
  return result;
}

// ---------------------------------------------------------------------------

ClusterResult agglomerative(const PointMatrix& points, std::size_t k, Linkage linkage) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 2 || k > n) throw std::invalid_argument("agglomerative needs 2 <= k <= n");

  const auto idx = [](std::size_t i) { return static_cast<Eigen::Index>(i); };
  Eigen::MatrixXd dist(idx(n), idx(n));
  for (std::size_t i = 0; i < n; ++i) {
    dist(idx(i), idx(i)) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sq = (points.row(idx(i)) - points.row(idx(j))).squaredNorm();
      const double d = linkage == Linkage::ward ? sq : std::sqrt(sq);
      dist(idx(i), idx(j)) = d;
      dist(idx(j), idx(i)) = d;
    }
  }

  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, std::numeric_limits<double>::infinity());

  const auto refresh = [&](std::size_t i) {
    nn[i] = n;
    nn_dist[i] = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (dist(idx(i), idx(j)) < nn_dist[i]) {
        nn_dist[i] = dist(idx(i), idx(j));
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  for (std::size_t remaining = n; remaining > k; --remaining) {
    std::size_t a = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn_dist[i] < best) {
        best = nn_dist[i];
        a = i;
      }
    }
    const std::size_t b = nn[a];  // a < b by the lowest-pair scan order
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    const double dab = dist(idx(a), idx(b));
    for (std::size_t l = 0; l < n; ++l) {
      if (!active[l] || l == a || l == b) continue;
      const double dal = dist(idx(a), idx(l));
      const double dbl = dist(idx(b), idx(l));
      double merged = 0.0;
      switch (linkage) {
        case Linkage::single: merged = std::min(dal, dbl); break;
        case Linkage::complete: merged = std::max(dal, dbl); break;
        case Linkage::average: merged = (na * dal + nb * dbl) / (na + nb); break;
        case Linkage::ward: {
          const double nl = static_cast<double>(size[l]);
          merged = ((na + nl) * dal + (nb + nl) * dbl - nl * dab) / (na + nb + nl);
          break;
        }
      }
      dist(idx(a), idx(l)) = merged;
      dist(idx(l), idx(a)) = merged;
    }
    size[a] += size[b];
    active[b] = false;
    parent[b] = a;

    refresh(a);
    for (std::size_t l = 0; l < n; ++l) {
      if (!active[l] || l == a) continue;
      if (nn[l] == a || nn[l] == b) {
        refresh(l);
      } else {
        const double d = dist(idx(l), idx(a));
        if (d < nn_dist[l] || (d == nn_dist[l] && a < nn[l])) {
          nn_dist[l] = d;
          nn[l] = a;
        }
      }
    }
  }

  std::vector<int> assignment(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    assignment[i] = static_cast<int>(r);
  }
  ClusterResult result;
  result.partition = Partition::from_assignment(assignment);
  result.centers = part_centroids(points, result.partition);
  return result;
}

Partition single_linkage_threshold(const WeightedGraph& graph, double r, bool strict) {
  UnionFind uf(graph.n_vertices());
  for (const auto& e : graph.edges()) {
    if (strict ? e.w < r : e.w <= r) uf.unite(e.u, e.v);
  }
  std::vector<int> assignment(graph.n_vertices());
  for (std::size_t v = 0; v < graph.n_vertices(); ++v) assignment[v] = static_cast<int>(uf.find(v));
  return Partition::from_assignment(assignment);
}

ClusterResult run_clusterer(const PointMatrix& points, const ClustererSpec& spec) {
  spec.validate();
  const PointMatrix work = spec.normalize_first ? normalize_columns(points) : points;
  ClusterResult result;
  switch (spec.kind) {
    case ClustererKind::kmeans: result = kmeans(work, spec.k, spec.restarts, spec.seed); break;
    case ClustererKind::agglo_single: result = agglomerative(work, spec.k, Linkage::single); break;
    case ClustererKind::agglo_complete: result = agglomerative(work, spec.k, Linkage::complete); break;
    case ClustererKind::agglo_average: result = agglomerative(work, spec.k, Linkage::average); break;
    case ClustererKind::agglo_ward: result = agglomerative(work, spec.k, Linkage::ward); break;
  }
  if (spec.normalize_first) {
    result.centers = part_centroids(points, result.partition);
    if (result.inertia) {
      result.inertia = inertia_of(points, result.centers, result.partition.assignment());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> outlier_indices(const PointMatrix& points, double theta, OutlierCriterion criterion) {
  if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument("outlier fraction must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(points.rows());
  const auto count = static_cast<std::size_t>(std::floor(theta * static_cast<double>(n) + 1e-9));
  if (count == 0) return {};
  Eigen::RowVectorXd origin = Eigen::RowVectorXd::Zero(points.cols());
  if (criterion == OutlierCriterion::distance_from_mean) origin = points.colwise().mean();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = (points.row(static_cast<Eigen::Index>(i)) - origin).squaredNorm();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

ClusterResult cluster_with_outlier_removal(const PointMatrix& points, double theta, const ClustererSpec& base,
                                           OutlierCriterion criterion) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto outliers = outlier_indices(points, theta, criterion);
  if (outliers.empty()) return run_clusterer(points, base);
  if (outliers.size() + 2 > n) throw std::invalid_argument("outlier removal must keep at least 2 points");
  if (n - outliers.size() < base.k) throw std::invalid_argument("too few inliers left for k clusters");

  std::vector<bool> is_outlier(n, false);
  for (std::size_t i : outliers) is_outlier[i] = true;
  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_outlier[i]) inliers.push_back(i);
  }
  PointMatrix kept(static_cast<Eigen::Index>(inliers.size()), points.cols());
  for (std::size_t r = 0; r < inliers.size(); ++r) kept.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(inliers[r]));

  const ClusterResult inner = run_clusterer(kept, base);
  std::vector<int> assignment(n, -1);
  for (std::size_t r = 0; r < inliers.size(); ++r) assignment[inliers[r]] = inner.partition.assignment()[r];
  for (std::size_t i : outliers) {
    assignment[i] = static_cast<int>(nearest_center(inner.centers, points.row(static_cast<Eigen::Index>(i))));
  }

  ClusterResult result;
  result.partition = Partition::from_assignment(assignment);
  result.centers = part_centroids(points, result.partition);
  if (inner.inertia) result.inertia = inertia_of(points, result.centers, result.partition.assignment());
  return result;
}

}  // namespace metaul
