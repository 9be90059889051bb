#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metaul/clusterers.hpp"
#include "metaul/data_model.hpp"

namespace metaul {

// A named unsupervised rule over problems.
struct FamilyMember {
  std::string name;
  std::function<Partition(const Problem&)> run;
};

class AlgorithmFamily {
public:
  AlgorithmFamily() = default;
  explicit AlgorithmFamily(std::vector<FamilyMember> members);

  // Wraps clusterer specs as members that cluster a problem's Dataset.
  static AlgorithmFamily from_specs(const std::vector<ClustererSpec>& specs);
  // Members L_r for each threshold (w <= r).
  static AlgorithmFamily thresholds(const std::vector<double>& rs);

  std::size_t size() const { return members_.size(); }
  const FamilyMember& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<FamilyMember>& members() const { return members_; }

private:
  std::vector<FamilyMember> members_;
};

struct ErmSelection {
  std::size_t best = 0;
  std::vector<double> mean_losses;  // per member, in family order
};

// Empirical risk minimizer under the pairwise clustering loss. A member that
// throws on a problem is charged loss 1 there. Ties go to the earliest member.
ErmSelection erm_select(const AlgorithmFamily& family, const std::vector<Problem>& train);

// Same, from a precomputed loss table: losses[member][problem].
ErmSelection erm_select_from_losses(const std::vector<std::vector<double>>& losses);

struct BoundParams {
  std::size_t n = 1;
  std::size_t family_size = 1;
  // If set, the family is bounded by 2^bits members.
  std::optional<unsigned> bits;
  double delta = 0.05;
};

// sqrt((2/n) ln(|C|/delta)), or sqrt(2 (b ln 2 + ln(1/delta)) / n) for b bits.
double generalization_bound(const BoundParams& params);

struct ThresholdCandidate {
  double r;
  double mean_loss;
};

struct ThresholdFitResult {
  double r_star = 0.0;
  double min_mean_loss = 1.0;
  std::vector<ThresholdCandidate> profile;
};

struct GraphProblem {
  WeightedGraph graph;
  Partition truth;
};

// Threshold below every edge weight: 0 if all weights are positive, else -1.
double threshold_below(const std::vector<GraphProblem>& train);

// Exact mean loss of L_r for every candidate r (the value below all weights,
// then each distinct weight) via one Kruskal sweep over the union of all
// graphs with incremental loss bookkeeping. The smallest minimizing r wins.
ThresholdFitResult fit_threshold_kruskal(const std::vector<GraphProblem>& train);

// Reference implementation: recomputes components and losses per candidate.
ThresholdFitResult fit_threshold_bruteforce(const std::vector<GraphProblem>& train);

// Mean of per-graph losses given as exact disagreement counts. Both fitters
// reduce through this so their profiles compare exactly.
class LossAccumulator {
public:
  explicit LossAccumulator(const std::vector<GraphProblem>& train);
  void set(std::size_t graph, std::uint64_t disagreements);
  void set_invalid(std::size_t graph);
  double mean() const;

private:
  static constexpr std::size_t kNoGroup = static_cast<std::size_t>(-1);
  std::vector<std::size_t> n_items_;
  std::vector<std::uint64_t> numerators_;
  std::vector<std::size_t> group_of_;
  std::vector<std::size_t> sizes_;
  std::vector<std::uint64_t> group_sums_;
  std::size_t degenerate_ = 0;
};

// Learned single-linkage rule: components under edges with w < r_star.
struct MetaScaleRule {
  double r_star = 0.0;

  Partition operator()(const WeightedGraph& graph) const;
};

// r_star is the smallest distance between two vertices in different truth
// parts over all training problems. Graphs must be complete.
MetaScaleRule fit_meta_scale(const std::vector<GraphProblem>& train);

std::string profile_csv(const ThresholdFitResult& fit);

}  // namespace metaul
