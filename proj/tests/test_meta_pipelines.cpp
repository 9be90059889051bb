#include <doctest.h>

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "metaul/meta_pipelines.hpp"
#include "metaul/metrics.hpp"
#include "test_util.hpp"

using namespace metaul;

namespace {

// 9 x 10 records with silhouette and ARI given per (k, run).
template <typename Sil, typename Ari>
std::vector<RunRecord> synthetic_records(const std::string& id, Sil sil, Ari ari) {
  std::vector<RunRecord> out;
  for (std::size_t k = 2; k <= 10; ++k) {
    for (std::size_t run = 0; run < 10; ++run) {
      RunRecord r;
      r.dataset_id = id;
      r.k = k;
      r.run = run;
      r.silhouette = sil(k, run);
      r.ari = ari(k, run);
      out.push_back(r);
    }
  }
  return out;
}

MetaKModel identity_model() {
  MetaKModel m;
  m.k_min = 2;
  m.models.assign(9, LinearModel{{1.0}, 0.0});
  return m;
}

std::vector<Dataset> blob_datasets(std::size_t problems, std::uint64_t seed, std::size_t points = 80) {
  SynthSpec spec;
  spec.problems = problems;
  spec.min_points = spec.max_points = points;
  spec.min_clusters = 2;
  spec.max_clusters = 4;
  spec.seed = seed;
  return repository_datasets(make_synthetic_repository(spec));
}

}  // namespace

TEST_CASE("generate_runs") {
  const auto ds = blob_datasets(1, 3).front();
  const auto runs = generate_runs(ds, RunConfig{}, 5);
  REQUIRE(runs.size() == 90);
  for (const auto& r : runs) {
    CHECK(std::isfinite(r.silhouette));
    REQUIRE(r.ari.has_value());
    CHECK(std::isfinite(*r.ari));
    CHECK(r.partition.num_parts() == r.k);
    CHECK(r.silhouette == silhouette_score(ds.points, r.partition));
    CHECK(*r.ari == adjusted_rand_index(ds.n(), labels_to_partition(*ds.labels), r.partition));
  }
  const auto again = generate_runs(ds, RunConfig{}, 5);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(runs[i].partition == again[i].partition);
    CHECK(runs[i].silhouette == again[i].silhouette);
  }
  Dataset unlabeled = ds;
  unlabeled.labels.reset();
  const auto bare = generate_runs(unlabeled, RunConfig{}, 5);
  CHECK(bare.size() == 90);
  for (const auto& r : bare) CHECK_FALSE(r.ari.has_value());

  Dataset tiny = ds;
  tiny.points.conservativeResize(8, Eigen::NoChange);
  tiny.labels->resize(8);
  (*tiny.labels)[0] = 0;
  (*tiny.labels)[1] = 1;
  CHECK_THROWS_AS(generate_runs(tiny, RunConfig{}, 5), std::invalid_argument);
}

TEST_CASE("best_fit_k and baseline") {
  const auto peaked = synthetic_records("a", [](std::size_t, std::size_t) { return 0.1; },
                                        [](std::size_t k, std::size_t) { return k == 3 ? 0.9 : 0.2; });
  CHECK(best_fit_k(peaked) == 3);
  const auto flat = synthetic_records("a", [](std::size_t, std::size_t) { return 0.5; },
                                      [](std::size_t, std::size_t) { return 0.4; });
  CHECK(best_fit_k(flat) == 2);
  CHECK(baseline_k_silhouette(flat).k == 2);
  CHECK(baseline_k_silhouette(flat).record == 0);

  const auto sil_peak = synthetic_records(
      "a", [](std::size_t k, std::size_t run) { return k == 4 && run == 7 ? 0.8 : 0.3; },
      [](std::size_t, std::size_t) { return 0.0; });
  const auto choice = baseline_k_silhouette(sil_peak);
  CHECK(choice.k == 4);
  CHECK(sil_peak[choice.record].run == 7);

  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto recs = synthetic_records(
        "r", [&](std::size_t, std::size_t) { return rng.uniform(); },
        [&](std::size_t, std::size_t) { return static_cast<double>(rng.below(20)) / 20.0; });
    std::size_t oracle = 0;
    double best = -1.0;
    for (std::size_t k = 2; k <= 10; ++k) {
      double best_k = -1.0;
      for (const auto& r : recs) {
        if (r.k == k) best_k = std::max(best_k, *r.ari);
      }
      if (best_k > best) {
        best = best_k;
        oracle = k;
      }
    }
    CHECK(best_fit_k(recs) == oracle);
  }
}

TEST_CASE("two separated blobs give a silhouette choice of 2") {
  Rng rng(9);
  Dataset ds;
  ds.points = metaul::testing::random_points(100, 2, rng);
  ds.points.bottomRows(50).col(0).array() += 20.0;
  ds.labels = std::vector<int>(100, 0);
  std::fill(ds.labels->begin() + 50, ds.labels->end(), 1);
  CHECK(baseline_k_silhouette(generate_runs(ds, RunConfig{}, 1)).k == 2);
}

TEST_CASE("train_meta_k recovers an exact linear relation") {
  Rng rng(5);
  std::vector<RunRecord> pooled;
  for (int d = 0; d < 3; ++d) {
    const auto recs = synthetic_records(
        "d", [&](std::size_t, std::size_t) { return rng.uniform(-1, 1); }, [](std::size_t, std::size_t) { return 0.0; });
    for (auto r : recs) {
      r.ari = 2.0 * r.silhouette - 0.1;
      pooled.push_back(r);
    }
  }
  const auto model = train_meta_k(pooled, 2, 10);
  CHECK(model.models.size() == 9);
  CHECK(model.k_max() == 10);
  for (const auto& m : model.models) {
    CHECK(std::abs(m.weights[0] - 2.0) <= 1e-9);
    CHECK(std::abs(m.intercept + 0.1) <= 1e-9);
  }

  for (auto& r : pooled) r.ari = 0.25 * static_cast<double>(r.k);
  for (const auto& [k, m] : std::vector<std::pair<std::size_t, LinearModel>>{{2, train_meta_k(pooled, 2, 10).models[0]}}) {
    CHECK(std::abs(m.weights[0]) <= 1e-9);
    CHECK(std::abs(m.intercept - 0.25 * static_cast<double>(k)) <= 1e-9);
  }

  std::vector<RunRecord> missing;
  for (const auto& r : pooled) {
    if (r.k != 7) missing.push_back(r);
  }
  CHECK_THROWS_AS(train_meta_k(missing, 2, 10), std::invalid_argument);

  const auto back = meta_k_model_from_json(nlohmann::json::parse(to_json(model).dump()));
  CHECK(back.k_min == 2);
  CHECK(back.models.size() == 9);
  CHECK(back.models[3].weights == model.models[3].weights);
}

TEST_CASE("predict_k") {
  MetaKModel m = identity_model();
  for (auto& lm : m.models) lm = LinearModel{{0.0}, 0.1};
  m.models[1] = LinearModel{{0.0}, 0.7};
  m.models[3] = LinearModel{{0.0}, 0.7};
  const auto recs = synthetic_records("a", [](std::size_t, std::size_t) { return 0.2; },
                                      [](std::size_t, std::size_t) { return 0.0; });
  CHECK(predict_k(m, recs).k == 3);

  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = synthetic_records(
        "b", [&](std::size_t, std::size_t) { return static_cast<double>(rng.below(30)) / 30.0; },
        [](std::size_t, std::size_t) { return 0.0; });
    const auto a = predict_k(identity_model(), r);
    const auto b = baseline_k_silhouette(r);
    CHECK(a.k == b.k);
    CHECK(a.record == b.record);
  }
}

TEST_CASE("evaluate_meta_k reductions") {
  Rng rng(7);
  std::vector<DatasetRuns> runs;
  for (int d = 0; d < 12; ++d) {
    auto recs = synthetic_records(
        "d" + std::to_string(d), [&](std::size_t, std::size_t) { return rng.uniform(-1, 1); },
        [](std::size_t, std::size_t) { return 0.0; });
    for (auto& r : recs) r.ari = 2.0 * r.silhouette - 0.1;
    runs.push_back({recs.front().dataset_id, recs});
  }
  std::vector<RunRecord> pooled;
  for (std::size_t d = 0; d < 6; ++d) pooled.insert(pooled.end(), runs[d].records.begin(), runs[d].records.end());
  const auto model = train_meta_k(pooled, 2, 10);
  const std::vector<std::size_t> test{6, 7, 8, 9, 10, 11};
  const auto ev = evaluate_meta_k(model, runs, test);
  CHECK(ev.rmse_meta == 0.0);
  for (std::size_t t : test) CHECK(predict_k(model, runs[t].records).k == best_fit_k(runs[t].records));

  const auto base = evaluate_meta_k(identity_model(), runs, test);
  CHECK(base.rmse_meta == base.rmse_baseline);
  CHECK(base.mean_ari_meta == base.mean_ari_baseline);

  // Reported ARI is the metric recomputed on the chosen stored partitions.
  const auto real_runs = generate_all_runs(blob_datasets(6, 2), RunConfig{}, 3);
  const auto real_model = identity_model();
  const auto real_ev = evaluate_meta_k(real_model, real_runs, {0, 1, 2, 3, 4, 5});
  const auto datasets = blob_datasets(6, 2);
  double sum = 0.0;
  for (std::size_t t = 0; t < 6; ++t) {
    const auto& rec = real_runs[t].records[predict_k(real_model, real_runs[t].records).record];
    sum += adjusted_rand_index(datasets[t].n(), labels_to_partition(*datasets[t].labels), rec.partition);
  }
  CHECK(std::abs(real_ev.mean_ari_meta - sum / 6.0) <= 1e-15);
}

TEST_CASE("meta-k experiment rows") {
  const auto runs = generate_all_runs(blob_datasets(10, 4), RunConfig{}, 3);
  const auto rows = run_meta_k_experiment(runs, 1, {0.5}, 10, 1, 2, 10);
  CHECK(rows.size() == 10);
  const auto again = run_meta_k_experiment(runs, 1, {0.5}, 10, 1, 2, 10);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].eval.mean_ari_meta == again[i].eval.mean_ari_meta);
  for (const auto& r : rows) CHECK(r.eval.rmse_baseline >= 0.0);
}

TEST_CASE("generate_all_runs is independent of the thread count") {
  const auto datasets = blob_datasets(5, 6);
  const auto one = generate_all_runs(datasets, RunConfig{}, 8, 1);
  const auto many = generate_all_runs(datasets, RunConfig{}, 8, 3);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t i = 0; i < one[d].records.size(); ++i) {
      CHECK(one[d].records[i].partition == many[d].records[i].partition);
    }
  }
}

TEST_CASE("algorithm selection learns intercepts") {
  const auto datasets = blob_datasets(8, 10, 40);
  AlgoTable table;
  table.member_names = {"good", "bad"};
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    table.dataset_ids.push_back(datasets[i].id);
    AlgoCell good, bad;
    good.ari = 1.0;
    bad.ari = 0.0;
    table.cells.push_back({good, bad});
  }
  const auto model = train_algo_select(table, {0, 1, 2, 3});
  const std::vector<double> phi = AlgoCell{}.phi.to_vector();
  CHECK(predict(model.models[0], phi) - predict(model.models[1], phi) >= 0.9);
  CHECK(select_from_table(model, table, 5) == 0);
  CHECK(evaluate_algo_select(model, table, {4, 5, 6, 7}).mean_ari_meta == 1.0);

  const auto back = algo_select_model_from_json(nlohmann::json::parse(to_json(model).dump()));
  CHECK(back.member_names == model.member_names);
  CHECK(back.models[0].intercept == model.models[0].intercept);
}

TEST_CASE("select_algorithm tie-breaks and determinism") {
  const auto datasets = blob_datasets(6, 12, 40);
  ClustererSpec km;
  km.restarts = 2;
  const std::vector<ClustererSpec> single{km};
  const auto m1 = train_algo_select(single, datasets, 1);
  CHECK(select_algorithm(m1, single, datasets[0], 2).member == 0);

  ClustererSpec ward;
  ward.kind = ClustererKind::agglo_ward;
  const std::vector<ClustererSpec> twins{ward, ward};
  AlgoSelectModel same;
  same.member_names = {"a", "b"};
  same.models.assign(2, LinearModel{{0, 0, 0, 0, 1}, 0});
  const auto c = select_algorithm(same, twins, datasets[1], 3);
  CHECK(c.member == 0);
  CHECK(c.predicted[0] == c.predicted[1]);

  const auto family = default_family(2, 0);
  CHECK(family.size() == 10);
  const auto model = train_algo_select(family, datasets, 4);
  const auto a = select_algorithm(model, family, datasets[2], 9);
  const auto b = select_algorithm(model, family, datasets[2], 9);
  CHECK(a.member == b.member);
  CHECK(a.partition == b.partition);
  CHECK(a.predicted == b.predicted);
}

TEST_CASE("algo table cells match recomputed metrics") {
  const auto datasets = blob_datasets(4, 14, 50);
  const auto family = default_family(2, 0);
  const auto table = build_algo_table(family, datasets, 5);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (std::size_t j = 0; j < family.size(); ++j) {
      const auto& cell = table.cells[i][j];
      REQUIRE_FALSE(cell.failed);
      CHECK(cell.ari == adjusted_rand_index(datasets[i].n(), labels_to_partition(*datasets[i].labels), cell.partition));
      CHECK(cell.phi.m == static_cast<double>(datasets[i].n()));
    }
  }
  const auto table2 = build_algo_table(family, datasets, 5, 2);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (std::size_t j = 0; j < family.size(); ++j) CHECK(table.cells[i][j].ari == table2.cells[i][j].ari);
  }
}

TEST_CASE("outlier sweep at p = 0 reproduces Meta-K") {
  const auto datasets = blob_datasets(8, 16, 60);
  const RunConfig config;
  const auto sweep = sweep_outlier_fraction(datasets, 3, {0.0, 0.02}, config, {0.5}, 4, 11);
  const auto runs = generate_all_runs(datasets, config, 11);
  const auto rows = run_meta_k_experiment(runs, 3, {0.5}, 4, 11, 2, 10);
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(sweep.rows[i].p == 0.0);
    CHECK(sweep.rows[i].eval.mean_ari_meta == rows[i].eval.mean_ari_meta);
    CHECK(sweep.rows[i].eval.rmse_meta == rows[i].eval.rmse_meta);
    sum += rows[i].eval.mean_ari_meta;
  }
  CHECK(sweep.mean_ari[0] == sum / static_cast<double>(rows.size()));
  CHECK(sweep.rows.size() == 8);
  CHECK((sweep.best_p == 0.0 || sweep.best_p == 0.02));
  const double best = std::max(sweep.mean_ari[0], sweep.mean_ari[1]);
  CHECK(sweep.mean_ari[sweep.best_p == 0.0 ? 0 : 1] == best);
  if (sweep.mean_ari[0] == sweep.mean_ari[1]) CHECK(sweep.best_p == 0.0);
  CHECK(default_p_grid().size() == 6);
}
