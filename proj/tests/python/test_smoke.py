import numpy as np
import pytest

import metaul


def test_metrics_examples():
    y = [0, 0, 1, 1]
    z = [0, 0, 0, 1]
    assert metaul.clustering_loss(y, z) == 0.5
    assert metaul.rand_index(y, z) == 0.5
    assert metaul.adjusted_rand_index(y, z) == 0.0
    assert metaul.adjusted_rand_index(y, y) == 1.0


def test_silhouette_example():
    x = np.array([[0.0], [1.0], [10.0], [11.0]])
    assert metaul.silhouette_score(x, [0, 0, 1, 1]) == pytest.approx(0.899749, abs=1e-6)


def test_clusterers_recover_blobs():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 1, (40, 2)), rng.normal(20, 1, (40, 2))])
    truth = [0] * 40 + [1] * 40
    assert metaul.adjusted_rand_index(truth, metaul.kmeans(x, 2, seed=3)) == 1.0
    for linkage in ("single", "complete", "average", "ward"):
        assert metaul.adjusted_rand_index(truth, metaul.agglomerative(x, 2, linkage)) == 1.0
    with pytest.raises(ValueError):
        metaul.agglomerative(x, 2, "centroid")


def test_threshold_fit_path_example():
    graph = (4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 5.0)], [0, 0, 0, 1])
    for brute in (False, True):
        fit = metaul.fit_threshold([graph], brute_force=brute)
        assert fit["r_star"] == 1.0
        assert fit["min_mean_loss"] == 0.0
        assert fit["profile"] == [(0.0, 0.5), (1.0, 0.0), (5.0, 1.0)]
    assert metaul.single_linkage_threshold(4, graph[1], 1.0) == [0, 0, 0, 1]


def test_meta_scale_and_bound():
    edges = [(0, 1, 1.0), (0, 2, 5.0), (0, 3, 5.0), (1, 2, 5.0), (1, 3, 5.0), (2, 3, 1.0)]
    assert metaul.fit_meta_scale([(4, edges, [0, 0, 1, 1])]) == 5.0
    assert metaul.generalization_bound(200, 10, 0.05) == pytest.approx(0.23018, abs=5e-6)


def test_outlier_indices():
    x = np.array([[0.0], [0.1], [0.2], [100.0]])
    assert metaul.outlier_indices(x, 0.25) == [3]


def test_synthetic_repository_and_meta_k():
    repo = metaul.synthetic_repository(problems=8, seed=2, min_points=40, max_points=40)
    assert len(repo) == 8
    points, labels = repo[0]
    assert points.shape[0] == 40 and len(labels) == 40
    again = metaul.synthetic_repository(problems=8, seed=2, min_points=40, max_points=40)
    assert np.array_equal(again[0][0], points)
    rows = metaul.meta_k_experiment(repo, seed=1, repeats=3, k_max=5, runs_per_k=2)
    assert len(rows) == 3
    assert all(r["rmse_meta"] >= 0 for r in rows)
    sel = metaul.algo_select_experiment(repo, seed=1, repeats=2)
    assert len(sel) == 2
    assert "KMeans" in sel[0]["ari_members"]


def test_invalid_input_raises():
    with pytest.raises(ValueError):
        metaul.meta_k_experiment([(np.zeros((5, 2)), [0, 0, 0, 0, 0])])


def test_cli_roundtrip(tmp_path):
    code, out, _ = metaul.cli(["synth", "--out", str(tmp_path / "repo"), "--problems", "4", "--min-points", "30",
                               "--max-points", "30"])
    assert code == 0
    assert (tmp_path / "repo" / "manifest.json").exists()
    code, _, _ = metaul.cli(["run", "fit-threshold", "--repo", str(tmp_path / "repo"), "--out", str(tmp_path / "ft")])
    assert code == 0
    assert (tmp_path / "ft" / "profile.csv").read_text().startswith("r,mean_loss\n")
    assert metaul.cli(["run", "meta-k", "--repo", str(tmp_path / "missing"), "--out", str(tmp_path / "x")])[0] == 2
