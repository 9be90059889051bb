#include <doctest.h>

#include <cmath>

#include "metaul/erm_meta.hpp"
#include "metaul/metrics.hpp"
#include "test_util.hpp"

using namespace metaul;

namespace {

GraphProblem path_problem() {
  return {WeightedGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 5.0}}), Partition(4, {{0, 1, 2}, {3}})};
}

// Random graph on n vertices with weights from a small grid so ties occur.
GraphProblem random_graph_problem(Rng& rng) {
  const std::size_t n = 2 + rng.below(19);
  std::vector<Edge> edges;
  const double density = rng.uniform(0.2, 1.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < density) edges.push_back({u, v, static_cast<double>(rng.below(12)) * 0.5});
    }
  }
  return {WeightedGraph(n, edges), metaul::testing::random_partition(n, 2 + rng.below(3), rng)};
}

}  // namespace

TEST_CASE("threshold fit on the path example") {
  const std::vector<GraphProblem> train{path_problem()};
  for (const auto& fit : {fit_threshold_kruskal(train), fit_threshold_bruteforce(train)}) {
    REQUIRE(fit.profile.size() == 3);
    CHECK(fit.profile[0].r == 0.0);
    CHECK(fit.profile[0].mean_loss == 0.5);
    CHECK(fit.profile[1].r == 1.0);
    CHECK(fit.profile[1].mean_loss == 0.0);
    CHECK(fit.profile[2].r == 5.0);
    CHECK(fit.profile[2].mean_loss == 1.0);
    CHECK(fit.r_star == 1.0);
    CHECK(fit.min_mean_loss == 0.0);
  }
  const std::vector<GraphProblem> twice{path_problem(), path_problem()};
  const auto fit2 = fit_threshold_kruskal(twice);
  CHECK(fit2.r_star == 1.0);
  CHECK(fit2.profile[0].mean_loss == 0.5);
  CHECK(profile_csv(fit2) == "r,mean_loss\n0,0.5\n1,0\n5,1\n");
}

TEST_CASE("threshold fit on a single edge with both vertices together") {
  const std::vector<GraphProblem> train{{WeightedGraph(2, {{0, 1, 3.0}}), Partition(2, {{0, 1}})}};
  for (const auto& fit : {fit_threshold_kruskal(train), fit_threshold_bruteforce(train)}) {
    CHECK(fit.r_star == 0.0);
    CHECK(fit.min_mean_loss == 1.0);
    CHECK(fit.profile.back().mean_loss == 1.0);
  }
  CHECK_THROWS_AS(fit_threshold_kruskal({}), std::invalid_argument);
  CHECK_THROWS_AS(fit_threshold_bruteforce({}), std::invalid_argument);
}

TEST_CASE("threshold below the smallest weight") {
  CHECK(threshold_below({path_problem()}) == 0.0);
  const GraphProblem zero{WeightedGraph(3, {{0, 1, 0.0}, {1, 2, 1.0}}), Partition(3, {{0, 1}, {2}})};
  CHECK(threshold_below({zero}) == -1.0);
  const auto fit = fit_threshold_kruskal({zero});
  CHECK(fit.profile.front().r == -1.0);
  CHECK(fit.r_star == 0.0);
  CHECK(fit.min_mean_loss == 0.0);
}

TEST_CASE("kruskal fit equals brute force and the direct loss mean") {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<GraphProblem> train;
    const std::size_t graphs = 1 + rng.below(8);
    for (std::size_t g = 0; g < graphs; ++g) train.push_back(random_graph_problem(rng));
    const auto fast = fit_threshold_kruskal(train);
    const auto slow = fit_threshold_bruteforce(train);
    CHECK(fast.r_star == slow.r_star);
    CHECK(fast.min_mean_loss == slow.min_mean_loss);
    REQUIRE(fast.profile.size() == slow.profile.size());
    for (std::size_t i = 0; i < fast.profile.size(); ++i) {
      CHECK(fast.profile[i].r == slow.profile[i].r);
      CHECK(fast.profile[i].mean_loss == slow.profile[i].mean_loss);
      double direct = 0.0;
      for (const auto& gp : train) {
        direct += clustering_loss(gp.graph.n_vertices(), gp.truth,
                                  single_linkage_threshold(gp.graph, fast.profile[i].r, false));
      }
      CHECK(std::abs(fast.profile[i].mean_loss - direct / static_cast<double>(graphs)) <= 1e-12);
    }
  }
}

TEST_CASE("erm selection") {
  const auto truth = Partition(4, {{0, 1}, {2, 3}});
  const WeightedGraph g(4, {{0, 1, 1.0}, {2, 3, 1.0}, {1, 2, 4.0}});
  const std::vector<Problem> train{{g, truth}, {g.scaled(1.0), truth}};
  const AlgorithmFamily family({{"oracle", [&](const Problem&) { return truth; }},
                                {"wrong", [](const Problem&) { return Partition(4, {{0, 2}, {1, 3}}); }},
                                {"broken", [](const Problem&) -> Partition { throw std::runtime_error("x"); }}});
  const auto sel = erm_select(family, train);
  CHECK(sel.best == 0);
  CHECK(sel.mean_losses[0] == 0.0);
  CHECK(sel.mean_losses[2] == 1.0);

  const AlgorithmFamily single({{"only", [](const Problem&) { return Partition::singletons(4); }}});
  CHECK(erm_select(single, train).best == 0);
  CHECK_THROWS_AS(erm_select(family, {}), std::invalid_argument);
  CHECK_THROWS_AS(AlgorithmFamily(std::vector<FamilyMember>{}), std::invalid_argument);
  CHECK_THROWS_AS(AlgorithmFamily({{"a", [](const Problem&) { return Partition(); }},
                                   {"a", [](const Problem&) { return Partition(); }}}),
                  std::invalid_argument);

  const auto thresholds = AlgorithmFamily::thresholds({0.5, 2.0, 10.0});
  const auto tsel = erm_select(thresholds, train);
  CHECK(tsel.best == 1);
  CHECK(tsel.mean_losses[1] == 0.0);
  CHECK(tsel.mean_losses[2] == 1.0);

  CHECK(erm_select_from_losses({{0.3, 0.3}, {0.2, 0.4}, {0.1, 0.5}}).best == 0);
}

TEST_CASE("erm over clusterer specs on blob problems") {
  SynthSpec spec;
  spec.problems = 6;
  spec.min_points = spec.max_points = 60;
  spec.min_clusters = spec.max_clusters = 2;
  spec.seed = 8;
  const auto repo = make_synthetic_repository(spec);
  ClustererSpec km;
  km.restarts = 3;
  ClustererSpec single;
  single.kind = ClustererKind::agglo_single;
  const auto sel = erm_select(AlgorithmFamily::from_specs({km, single}), repo.problems);
  CHECK(sel.mean_losses[sel.best] <= sel.mean_losses[1 - sel.best]);
  CHECK(sel.mean_losses[0] == 0.0);
}

TEST_CASE("generalization bound") {
  const double b = generalization_bound({200, 10, std::nullopt, 0.05});
  CHECK(b == doctest::Approx(0.23018).epsilon(1e-5));
  CHECK(std::abs(b - 0.230180) < 5e-6);
  CHECK(generalization_bound({800, 10, std::nullopt, 0.05}) == doctest::Approx(b / 2).epsilon(1e-12));
  CHECK(generalization_bound({100, 1, std::nullopt, 0.999999}) < 1e-3);
  const double bits = generalization_bound({100, 1, 4u, 0.05});
  CHECK(bits == doctest::Approx(std::sqrt(2.0 * (4.0 * std::log(2.0) + std::log(20.0)) / 100.0)).epsilon(1e-14));
  CHECK_THROWS_AS(generalization_bound({0, 10, std::nullopt, 0.05}), std::invalid_argument);
  CHECK_THROWS_AS(generalization_bound({10, 10, std::nullopt, 1.0}), std::invalid_argument);
}

TEST_CASE("meta-scale rule") {
  // Within-part distances 1, across 5.
  std::vector<Edge> edges;
  const Partition truth(4, {{0, 1}, {2, 3}});
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t v = u + 1; v < 4; ++v) edges.push_back({u, v, truth.same_part(u, v) ? 1.0 : 5.0});
  }
  const WeightedGraph g(4, edges);
  const auto rule = fit_meta_scale({{g, truth}});
  CHECK(rule.r_star == 5.0);
  CHECK(rule(g) == truth);
  const auto scaled = fit_meta_scale({{g.scaled(3.0), truth}});
  CHECK(scaled.r_star == 15.0);
  CHECK(scaled(g.scaled(3.0)) == rule(g));

  CHECK_THROWS_AS(fit_meta_scale({{WeightedGraph(3, {{0, 1, 1.0}}), Partition(3, {{0, 1}, {2}})}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_meta_scale({{g, Partition(4, {{0, 1, 2, 3}})}}), std::invalid_argument);
}
