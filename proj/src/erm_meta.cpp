#include "metaul/erm_meta.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "metaul/csv.hpp"
#include "metaul/metrics.hpp"
#include "metaul/union_find.hpp"

namespace metaul {

AlgorithmFamily::AlgorithmFamily(std::vector<FamilyMember> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("algorithm family must not be empty");
  std::set<std::string> names;
  for (const auto& m : members_) {
    if (!names.insert(m.name).second) throw std::invalid_argument("duplicate family member name '" + m.name + "'");
    if (!m.run) throw std::invalid_argument("family member '" + m.name + "' has no rule");
  }
}

AlgorithmFamily AlgorithmFamily::from_specs(const std::vector<ClustererSpec>& specs) {
  std::vector<FamilyMember> members;
  for (const auto& spec : specs) {
    members.push_back({spec.name(), [spec](const Problem& p) {
                         const auto* ds = std::get_if<Dataset>(&p.data);
                         if (!ds) throw std::invalid_argument("clusterer member needs a dataset problem");
                         return run_clusterer(ds->points, spec).partition;
                       }});
  }
  return AlgorithmFamily(std::move(members));
}

AlgorithmFamily AlgorithmFamily::thresholds(const std::vector<double>& rs) {
  std::vector<FamilyMember> members;
  for (double r : rs) {
    members.push_back({"L_r=" + format_double(r), [r](const Problem& p) {
                         if (const auto* g = std::get_if<WeightedGraph>(&p.data)) {
                           return single_linkage_threshold(*g, r, false);
                         }
                         const auto& ds = std::get<Dataset>(p.data);
                         return single_linkage_threshold(WeightedGraph::complete_euclidean(ds.points), r, false);
                       }});
  }
  return AlgorithmFamily(std::move(members));
}

ErmSelection erm_select_from_losses(const std::vector<std::vector<double>>& losses) {
  if (losses.empty()) throw std::invalid_argument("no family members");
  ErmSelection sel;
  for (const auto& row : losses) {
    if (row.empty()) throw std::invalid_argument("erm needs a non-empty training set");
    double sum = 0.0;
    for (double l : row) sum += l;
    sel.mean_losses.push_back(sum / static_cast<double>(row.size()));
  }
  sel.best = 0;
  for (std::size_t m = 1; m < sel.mean_losses.size(); ++m) {
    if (sel.mean_losses[m] < sel.mean_losses[sel.best]) sel.best = m;
  }
  return sel;
}

ErmSelection erm_select(const AlgorithmFamily& family, const std::vector<Problem>& train) {
  if (train.empty()) throw std::invalid_argument("erm needs a non-empty training set");
  std::vector<std::vector<double>> losses(family.size(), std::vector<double>(train.size(), 1.0));
  for (std::size_t m = 0; m < family.size(); ++m) {
    for (std::size_t p = 0; p < train.size(); ++p) {
      try {
        losses[m][p] = clustering_loss(train[p].n_items(), train[p].truth, family[m].run(train[p]));
      } catch (const std::exception&) {
        losses[m][p] = 1.0;
      }
    }
  }
  return erm_select_from_losses(losses);
}

double generalization_bound(const BoundParams& params) {
  if (params.n < 1) throw std::invalid_argument("bound needs n >= 1");
  if (!(params.delta > 0.0 && params.delta < 1.0)) throw std::invalid_argument("bound needs delta in (0, 1)");
  const double n = static_cast<double>(params.n);
  if (params.bits) {
    return std::sqrt(2.0 * (static_cast<double>(*params.bits) * std::log(2.0) + std::log(1.0 / params.delta)) / n);
  }
  if (params.family_size < 1) throw std::invalid_argument("bound needs a non-empty family");
  return std::sqrt((2.0 / n) * std::log(static_cast<double>(params.family_size) / params.delta));
}

// ---------------------------------------------------------------------------

LossAccumulator::LossAccumulator(const std::vector<GraphProblem>& train) : numerators_(train.size(), 0) {
  for (const auto& gp : train) {
    if (gp.graph.n_vertices() >= 2) sizes_.push_back(gp.graph.n_vertices());
  }
  std::sort(sizes_.begin(), sizes_.end());
  sizes_.erase(std::unique(sizes_.begin(), sizes_.end()), sizes_.end());
  group_sums_.assign(sizes_.size(), 0);
  group_of_.assign(train.size(), kNoGroup);
  n_items_.assign(train.size(), 0);
  for (std::size_t g = 0; g < train.size(); ++g) {
    const std::size_t n = train[g].graph.n_vertices();
    n_items_[g] = n;
    if (n < 2) {
      ++degenerate_;
    } else {
      group_of_[g] = static_cast<std::size_t>(std::lower_bound(sizes_.begin(), sizes_.end(), n) - sizes_.begin());
    }
  }
}

void LossAccumulator::set(std::size_t graph, std::uint64_t disagreements) {
  if (group_of_[graph] == kNoGroup) return;
  group_sums_[group_of_[graph]] += disagreements - numerators_[graph];
  numerators_[graph] = disagreements;
}

void LossAccumulator::set_invalid(std::size_t graph) {
  // n (n - 1) / (n (n - 1)) is exactly 1. Graphs with < 2 vertices are fixed at 1.
  const std::uint64_t n = n_items_[graph];
  if (n >= 2) set(graph, n * (n - 1));
}

double LossAccumulator::mean() const {
  // Exact integer sums grouped by graph size, reduced in ascending size order,
  // so the value does not depend on how the per-graph counts were produced.
  double total = static_cast<double>(degenerate_);
  for (std::size_t i = 0; i < sizes_.size(); ++i) total += pair_disagreement_loss(group_sums_[i], sizes_[i]);
  return total / static_cast<double>(numerators_.size());
}

namespace {

struct SweepEdge {
  double w;
  std::size_t graph;
  std::size_t u;
  std::size_t v;
};

void require_train(const std::vector<GraphProblem>& train) {
  if (train.empty()) throw std::invalid_argument("threshold fit needs a non-empty training set");
  for (const auto& gp : train) {
    if (gp.truth.n_items() != gp.graph.n_vertices()) {
      throw std::invalid_argument("ground truth does not match its graph's vertex count");
    }
  }
}

bool truth_usable(const GraphProblem& gp) { return gp.graph.n_vertices() >= 2 && gp.truth.is_valid(); }

std::vector<double> candidate_thresholds(const std::vector<GraphProblem>& train) {
  std::vector<double> rs;
  for (const auto& gp : train) {
    for (const auto& e : gp.graph.edges()) rs.push_back(e.w);
  }
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  rs.insert(rs.begin(), threshold_below(train));
  return rs;
}

ThresholdFitResult finish(std::vector<ThresholdCandidate> profile) {
  ThresholdFitResult fit;
  fit.profile = std::move(profile);
  fit.r_star = fit.profile.front().r;
  fit.min_mean_loss = fit.profile.front().mean_loss;
  for (const auto& c : fit.profile) {
    if (c.mean_loss < fit.min_mean_loss) {
      fit.min_mean_loss = c.mean_loss;
      fit.r_star = c.r;
    }
  }
  return fit;
}

}  // namespace

double threshold_below(const std::vector<GraphProblem>& train) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& gp : train) lo = std::min(lo, gp.graph.min_weight());
  return lo > 0.0 ? 0.0 : -1.0;
}

ThresholdFitResult fit_threshold_kruskal(const std::vector<GraphProblem>& train) {
  require_train(train);
  const std::size_t n_graphs = train.size();
  std::vector<std::size_t> offset(n_graphs + 1, 0);
  for (std::size_t g = 0; g < n_graphs; ++g) offset[g + 1] = offset[g] + train[g].graph.n_vertices();

  LossAccumulator acc(train);
  std::vector<bool> usable(n_graphs);
  std::vector<std::int64_t> disagreements(n_graphs, 0);
  std::vector<std::size_t> components(n_graphs, 0);
  // Truth-label histogram of each component, kept at its union-find root.
  std::vector<std::unordered_map<int, std::uint64_t>> hist(offset.back());
  std::size_t total_edges = 0;
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const auto& gp = train[g];
    usable[g] = truth_usable(gp);
    total_edges += gp.graph.edges().size();
    if (!usable[g]) {
      acc.set_invalid(g);
      continue;
    }
    // All singletons: every same-truth ordered pair disagrees.
    std::int64_t same = 0;
    for (const auto& part : gp.truth.parts()) {
      same += static_cast<std::int64_t>(part.size() * (part.size() - 1));
    }
    disagreements[g] = same;
    components[g] = gp.graph.n_vertices();
    acc.set(g, static_cast<std::uint64_t>(same));
    for (std::size_t v = 0; v < gp.graph.n_vertices(); ++v) hist[offset[g] + v][gp.truth.assignment()[v]] = 1;
  }

  std::vector<SweepEdge> edges;
  edges.reserve(total_edges);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    for (const auto& e : train[g].graph.edges()) edges.push_back({e.w, g, e.u, e.v});
  }
  std::sort(edges.begin(), edges.end(), [](const SweepEdge& a, const SweepEdge& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.graph != b.graph) return a.graph < b.graph;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });

  std::vector<ThresholdCandidate> profile;
  profile.reserve(edges.size() + 1);
  profile.push_back({threshold_below(train), acc.mean()});

  UnionFind uf(offset.back());
  std::size_t i = 0;
  while (i < edges.size()) {
    const double w = edges[i].w;
    for (; i < edges.size() && edges[i].w == w; ++i) {
      const auto& e = edges[i];
      if (!usable[e.graph] || components[e.graph] == 1) continue;
      const std::size_t ra = uf.find(offset[e.graph] + e.u);
      const std::size_t rb = uf.find(offset[e.graph] + e.v);
      if (ra == rb) continue;
      const bool a_small = hist[ra].size() <= hist[rb].size();
      const auto& small = a_small ? hist[ra] : hist[rb];
      const auto& large = a_small ? hist[rb] : hist[ra];
      std::uint64_t cross_same = 0;
      for (const auto& [label, count] : small) {
        const auto it = large.find(label);
        if (it != large.end()) cross_same += count * it->second;
      }
      const std::uint64_t cross = static_cast<std::uint64_t>(uf.component_size(ra)) * uf.component_size(rb);
      disagreements[e.graph] +=
          2 * (static_cast<std::int64_t>(cross) - 2 * static_cast<std::int64_t>(cross_same));

      const std::size_t root = uf.unite(ra, rb);
      const std::size_t gone = root == ra ? rb : ra;
      auto& into = hist[root];
      auto& from = hist[gone];
      if (into.size() < from.size()) into.swap(from);
      for (const auto& [label, count] : from) into[label] += count;
      from = {};

      if (--components[e.graph] == 1) {
        acc.set_invalid(e.graph);
      } else {
        acc.set(e.graph, static_cast<std::uint64_t>(disagreements[e.graph]));
      }
    }
    profile.push_back({w, acc.mean()});
  }
  return finish(std::move(profile));
}

ThresholdFitResult fit_threshold_bruteforce(const std::vector<GraphProblem>& train) {
  require_train(train);
  std::vector<ThresholdCandidate> profile;
  LossAccumulator acc(train);
  for (double r : candidate_thresholds(train)) {
    for (std::size_t g = 0; g < train.size(); ++g) {
      const auto& gp = train[g];
      const Partition z = single_linkage_threshold(gp.graph, r, false);
      if (!truth_usable(gp) || !z.is_valid()) {
        acc.set_invalid(g);
      } else {
        acc.set(g, pair_counts(ContingencyTable::build(gp.truth, z)).ordered_disagreements());
      }
    }
    profile.push_back({r, acc.mean()});
  }
  return finish(std::move(profile));
}

// ---------------------------------------------------------------------------

Partition MetaScaleRule::operator()(const WeightedGraph& graph) const {
  return single_linkage_threshold(graph, r_star, true);
}

MetaScaleRule fit_meta_scale(const std::vector<GraphProblem>& train) {
  if (train.empty()) throw std::invalid_argument("meta-scale fit needs a non-empty training set");
  double r = std::numeric_limits<double>::infinity();
  for (const auto& gp : train) {
    if (!gp.graph.is_complete()) throw std::invalid_argument("meta-scale training graphs must be complete");
    if (gp.truth.n_items() != gp.graph.n_vertices() || !gp.truth.is_valid()) {
      throw std::invalid_argument("meta-scale training truth must be a valid partition");
    }
    for (const auto& e : gp.graph.edges()) {
      if (!gp.truth.same_part(e.u, e.v)) r = std::min(r, e.w);
    }
  }
  if (!std::isfinite(r)) throw std::invalid_argument("no cross-cluster pair in the training set");
  return MetaScaleRule{r};
}

std::string profile_csv(const ThresholdFitResult& fit) {
  std::ostringstream out;
  out << "r,mean_loss\n";
  for (const auto& c : fit.profile) out << format_double(c.r) << ',' << format_double(c.mean_loss) << '\n';
  return out.str();
}

}  // namespace metaul
