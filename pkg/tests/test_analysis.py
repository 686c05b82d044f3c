import numpy as np
import pytest
from oracles import hand_spearman

from msglon.analysis import (
    DATASET_COLUMNS,
    GRID_BINS,
    CorpusEntry,
    average_ranks,
    cell_medians,
    correlation_table,
    coverage,
    coverage_of_features,
    export_dataset,
    read_dataset,
    spearman,
)
from msglon.bench import InstancePerformance
from msglon.errors import ValidationError
from msglon.lon import FEATURE_COLUMNS, LonFeatures


def _features(num_nodes, gfs, m=100):
    del m
    return LonFeatures(
        num_nodes=num_nodes,
        edge_density=0.1,
        num_sinks=1,
        avg_path_opt=1.0,
        avg_path_sinks=1.0,
        in_strength_opt=0.5,
        in_strength_sinks=0.5,
        global_funnel_size=gfs,
    )


def test_single_point_coverage():
    grid = coverage(np.array([1.0]), np.array([1.0]), m=100)
    assert grid.coverage == pytest.approx(1 / (GRID_BINS * GRID_BINS))
    assert grid.bins[0, GRID_BINS - 1] == 1  # top edge folds into the last bin
    assert grid.bins.sum() == 1


def test_bin_boundaries():
    m = 61
    grid = coverage(np.array([61.0, 1.0, 3.0]), np.array([0.0, 1.0 / 30 - 1e-9, 1.0 / 30]), m=m)
    assert grid.bins[GRID_BINS - 1, 0] == 1  # num_nodes == m -> last row
    assert grid.bins[0, 0] == 1  # gfs just under one bin width -> col 0
    assert grid.bins[1, 1] == 1  # (3 - 1) / 60 * 30 = 1 -> row 1; gfs boundary -> col 1


def test_coverage_monotone_under_union():
    rng = np.random.default_rng(0)
    nodes_a, gfs_a = 1 + 99 * rng.random(40), rng.random(40)
    nodes_b, gfs_b = 1 + 99 * rng.random(40), rng.random(40)
    cov_a = coverage(nodes_a, gfs_a, 100).coverage
    cov_ab = coverage(
        np.concatenate([nodes_a, nodes_b]), np.concatenate([gfs_a, gfs_b]), 100
    ).coverage
    assert cov_ab >= cov_a


def test_coverage_of_features_uses_raw_node_count():
    feats = [_features(1, 0.0), _features(100, 1.0)]
    grid = coverage_of_features(feats, 100)
    assert grid.bins[0, 0] == 1
    assert grid.bins[GRID_BINS - 1, GRID_BINS - 1] == 1
    assert grid.coverage == pytest.approx(2 / 900)


def test_coverage_validation():
    with pytest.raises(ValidationError):
        coverage(np.array([1.0]), np.array([0.5, 0.6]), 100)
    with pytest.raises(ValidationError):
        coverage(np.array([1.0]), np.array([0.5]), 1)


def test_cell_medians_places_and_aggregates():
    nodes = np.array([1.0, 1.0, 100.0])
    gfs = np.array([0.0, 0.0, 1.0])
    vals = np.array([1.0, 3.0, 7.0])
    grid = cell_medians(nodes, gfs, vals, 100)
    assert grid[0, 0] == 2.0
    assert grid[GRID_BINS - 1, GRID_BINS - 1] == 7.0
    assert np.isnan(grid).sum() == GRID_BINS * GRID_BINS - 2


def test_average_ranks_with_ties():
    np.testing.assert_array_equal(
        average_ranks(np.array([10.0, 20.0, 20.0, 30.0])), [1.0, 2.5, 2.5, 4.0]
    )
    np.testing.assert_array_equal(
        average_ranks(np.array([5.0, 5.0, 5.0])), [2.0, 2.0, 2.0]
    )


def test_spearman_reference_cases():
    x = np.arange(10.0)
    assert spearman(x, 2 * x + 1) == pytest.approx(1.0)
    assert spearman(x, -x) == pytest.approx(-1.0)
    assert spearman(x, np.full(10, 3.0)) is None
    with pytest.raises(ValidationError):
        spearman(x, x[:5])
    with pytest.raises(ValidationError):
        spearman(np.array([1.0]), np.array([2.0]))


def test_spearman_with_ties_matches_hand_oracle():
    x = np.array([1.0, 2.0, 2.0, 3.0, 5.0, 5.0])
    y = np.array([0.2, 0.3, 0.3, 0.1, 0.9, 0.8])
    got = spearman(x, y)
    assert got == pytest.approx(hand_spearman(x, y), rel=1e-15)
    scipy_stats = pytest.importorskip("scipy.stats")
    rho, _ = scipy_stats.spearmanr(x, y)
    assert got == pytest.approx(rho, rel=1e-12)


def _corpus(n=3):
    return [
        CorpusEntry(
            instance_id=f"i{k:06d}",
            dim=2,
            m=100,
            kind="ns",
            generation=k,
            features=_features(1 + k, k / 10),
        )
        for k in range(n)
    ]


def test_dataset_roundtrip(tmp_path):
    corpus = _corpus()
    perf = {}
    for k in range(3):
        for alg, rate in (("de", 0.5 + 0.1 * k), ("cmaes", 0.25 + 0.1 * k)):
            perf[(f"i{k:06d}", alg)] = InstancePerformance(
                algorithm=alg, success_rate=rate, conv_time=123.456 + k, trials=31
            )
    path = tmp_path / "nested" / "dataset.csv"
    export_dataset(corpus, perf, path)
    rows = read_dataset(path)
    assert len(rows) == 6
    assert {r["algorithm"] for r in rows} == {"de", "cmaes"}
    for row in rows:
        k = int(row["instance_id"][1:])
        assert row["num_nodes"] == 1 + k
        assert row["global_funnel_size"] == k / 10  # repr round trip is lossless
        assert row["success_rate"] == perf[(row["instance_id"], row["algorithm"])].success_rate
        assert row["conv_time"] == perf[(row["instance_id"], row["algorithm"])].conv_time


def test_dataset_missing_performance_warns(tmp_path):
    corpus = _corpus(2)
    perf = {("i000000", "de"): InstancePerformance("de", 1.0, 10.0, 5)}
    path = tmp_path / "dataset.csv"
    with pytest.warns(UserWarning, match="i000001"):
        export_dataset(corpus, perf, path)
    rows = read_dataset(path)
    assert rows[0]["success_rate"] == 1.0
    assert rows[1]["success_rate"] is None and rows[1]["conv_time"] is None


def test_dataset_feature_only_export(tmp_path):
    path = tmp_path / "dataset.csv"
    export_dataset(_corpus(2), {}, path)
    rows = read_dataset(path)
    assert len(rows) == 2
    assert all(r["algorithm"] == "" and r["success_rate"] is None for r in rows)


def test_dataset_header_enforced(tmp_path):
    path = tmp_path / "dataset.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValidationError):
        read_dataset(path)


def test_dataset_schema_is_regression_ready(tmp_path):
    path = tmp_path / "dataset.csv"
    export_dataset(_corpus(1), {("i000000", "de"): InstancePerformance("de", 1.0, 1.0, 1)}, path)
    header = path.read_text().splitlines()[0].split(",")
    assert header == list(DATASET_COLUMNS)
    assert set(FEATURE_COLUMNS) < set(header)
    assert {"success_rate", "conv_time"} < set(header)


def test_correlation_table_signs(tmp_path):
    rng = np.random.default_rng(1)
    rows = []
    for alg in ("de", "cmaes"):
        for k in range(20):
            gfs = float(rng.random())
            rows.append({
                "algorithm": alg,
                "dim": 2,
                "num_nodes": 100 - 90 * gfs + rng.normal(0, 1),
                "edge_density": 0.1,
                "num_sinks": 2.0,
                "avg_path_opt": 1.0,
                "avg_path_sinks": 1.0,
                "in_strength_opt": gfs,
                "in_strength_sinks": 0.5,
                "global_funnel_size": gfs,
                "success_rate": gfs,  # perfectly rank-aligned
                "conv_time": None if k == 0 else 100.0 - gfs,
            })
    table = correlation_table(rows)
    by_key = {(r.algorithm, r.feature, r.metric): r for r in table}
    for alg in ("de", "cmaes"):
        assert by_key[(alg, "global_funnel_size", "success_rate")].rho == pytest.approx(1.0)
        assert by_key[(alg, "in_strength_opt", "success_rate")].rho == pytest.approx(1.0)
        assert by_key[(alg, "num_nodes", "success_rate")].rho < -0.9
        assert by_key[(alg, "edge_density", "success_rate")].rho is None  # constant
        assert by_key[(alg, "global_funnel_size", "success_rate")].n == 20
        assert by_key[(alg, "global_funnel_size", "conv_time")].n == 19  # None dropped
        assert by_key[(alg, "global_funnel_size", "conv_time")].rho == pytest.approx(-1.0)
