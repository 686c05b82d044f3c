"""Aggregate analysis: feature-space coverage, rank correlations, dataset export.

Coverage buckets instances into a fixed 30x30 grid over (num_nodes, funnel
size) and reports the fraction of occupied cells. Correlations are Spearman
rho with average-rank tie handling; undefined correlations (zero rank
variance) are reported as missing rather than dropped. The dataset exporter
writes one CSV row per (instance, algorithm) pair with the full feature
vector and the measured performance, and reads back losslessly.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .bench import InstancePerformance
from .errors import ValidationError
from .lon import FEATURE_COLUMNS, LonFeatures

GRID_BINS = 30

PERFORMANCE_METRICS = ("success_rate", "conv_time")

#: Fixed column order of the exported dataset.
DATASET_COLUMNS = (
    "instance_id",
    "algorithm",
    "dim",
    "m",
    "kind",
    "generation",
    *FEATURE_COLUMNS,
    *PERFORMANCE_METRICS,
)


@dataclass(frozen=True)
class CoverageGrid:
    """Occupancy counts over the (num_nodes, global_funnel_size) grid."""

    bins: np.ndarray  # (GRID_BINS, GRID_BINS) int counts
    coverage: float
    m: int

    def __post_init__(self):
        bins = np.ascontiguousarray(self.bins, dtype=np.int64)
        object.__setattr__(self, "bins", bins)
        bins.setflags(write=False)
        if bins.shape != (GRID_BINS, GRID_BINS):
            raise ValidationError(f"grid must be {GRID_BINS}x{GRID_BINS}")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValidationError("coverage must lie in [0, 1]")


def _bin_index(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Uniform bin index over [lo, hi]; values at the top edge go to the last bin."""
    scaled = (np.asarray(values, dtype=float) - lo) / (hi - lo)
    idx = np.floor(scaled * GRID_BINS).astype(np.int64)
    return np.clip(idx, 0, GRID_BINS - 1)


def coverage(num_nodes: np.ndarray, funnel_sizes: np.ndarray, m: int) -> CoverageGrid:
    """Occupied-cell fraction of the instance set on the fixed grid.

    The num_nodes axis spans the attainable range [1, m]; the funnel-size
    axis spans [0, 1]. Boundary values land in the upper bin.
    """
    num_nodes = np.asarray(num_nodes, dtype=float)
    funnel_sizes = np.asarray(funnel_sizes, dtype=float)
    if num_nodes.shape != funnel_sizes.shape:
        raise ValidationError("feature arrays must have matching lengths")
    if m < 2:
        raise ValidationError("grid needs m >= 2 for a non-degenerate axis")
    bins = np.zeros((GRID_BINS, GRID_BINS), dtype=np.int64)
    if num_nodes.size:
        rows = _bin_index(num_nodes, 1.0, float(m))
        cols = _bin_index(funnel_sizes, 0.0, 1.0)
        np.add.at(bins, (rows, cols), 1)
    return CoverageGrid(bins=bins, coverage=float(np.count_nonzero(bins) / bins.size), m=m)


def coverage_of_features(features: list[LonFeatures], m: int) -> CoverageGrid:
    return coverage(
        np.array([f.num_nodes for f in features]),
        np.array([f.global_funnel_size for f in features]),
        m,
    )


def cell_medians(num_nodes: np.ndarray, funnel_sizes: np.ndarray,
                 values: np.ndarray, m: int) -> np.ndarray:
    """Per-cell median of ``values`` on the coverage grid; NaN where empty."""
    num_nodes = np.asarray(num_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    rows = _bin_index(num_nodes, 1.0, float(m))
    cols = _bin_index(funnel_sizes, 0.0, 1.0)
    grid = np.full((GRID_BINS, GRID_BINS), np.nan)
    flat = rows * GRID_BINS + cols
    for cell in np.unique(flat):
        grid[cell // GRID_BINS, cell % GRID_BINS] = np.median(values[flat == cell])
    return grid


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by the mean of their positions."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def spearman(xs: np.ndarray, ys: np.ndarray) -> float | None:
    """Spearman rank correlation; None when either side has zero rank variance."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValidationError("spearman needs two equal-length vectors")
    if len(xs) < 2:
        raise ValidationError("spearman needs at least two observations")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    sx = rx - rx.mean()
    sy = ry - ry.mean()
    vx = float(np.sum(sx * sx))
    vy = float(np.sum(sy * sy))
    if vx == 0.0 or vy == 0.0:
        return None
    return float(np.sum(sx * sy) / np.sqrt(vx * vy))


@dataclass(frozen=True)
class CorrelationRow:
    """One (feature, metric) correlation within an (algorithm, dim) group."""

    algorithm: str
    dim: int
    feature: str
    metric: str
    rho: float | None
    n: int


def correlation_table(rows: list[dict],
                      features: tuple[str, ...] = FEATURE_COLUMNS,
                      metrics: tuple[str, ...] = PERFORMANCE_METRICS) -> list[CorrelationRow]:
    """Spearman rho of every feature against every metric, per (algorithm, dim).

    ``rows`` are dataset records as produced by :func:`read_dataset`; rows
    with a missing metric value are excluded from that metric's correlation.
    """
    groups: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["algorithm"], row["dim"]), []).append(row)
    out: list[CorrelationRow] = []
    for (algorithm, dim), members in sorted(groups.items()):
        for metric in metrics:
            usable = [r for r in members if r.get(metric) is not None]
            for feature in features:
                rho = (
                    spearman(
                        np.array([r[feature] for r in usable]),
                        np.array([r[metric] for r in usable]),
                    )
                    if len(usable) >= 2
                    else None
                )
                out.append(CorrelationRow(algorithm=algorithm, dim=dim, feature=feature,
                                          metric=metric, rho=rho, n=len(usable)))
    return out


@dataclass(frozen=True)
class CorpusEntry:
    """One instance's identity and feature vector, as used by the exporter."""

    instance_id: str
    dim: int
    m: int
    kind: str
    generation: int
    features: LonFeatures


def export_dataset(corpus: list[CorpusEntry],
                   performance: dict[tuple[str, str], InstancePerformance],
                   path) -> None:
    """Write the regression-ready CSV: one row per (instance, algorithm).

    ``performance`` is keyed by (instance_id, algorithm). Instances without a
    measurement for some algorithm get empty performance cells and a warning.
    With an empty performance map a single feature-only row per instance is
    emitted (algorithm column empty).
    """
    import os
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    algorithms = sorted({alg for (_, alg) in performance}) or [""]
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_COLUMNS)
        for entry in corpus:
            feats = entry.features.as_dict()
            for algorithm in algorithms:
                perf = performance.get((entry.instance_id, algorithm))
                if perf is None and algorithm:
                    warnings.warn(
                        f"no {algorithm} performance for instance {entry.instance_id}",
                        stacklevel=2,
                    )
                writer.writerow([
                    entry.instance_id,
                    algorithm,
                    entry.dim,
                    entry.m,
                    entry.kind,
                    entry.generation,
                    *[repr(feats[c]) for c in FEATURE_COLUMNS],
                    "" if perf is None else repr(perf.success_rate),
                    "" if perf is None else repr(perf.conv_time),
                ])
    os.replace(tmp, path)


def read_dataset(path) -> list[dict]:
    """Read an exported dataset back into typed records (missing cells -> None)."""
    out: list[dict] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(DATASET_COLUMNS):
            raise ValidationError(f"unexpected dataset header: {header}")
        for raw in reader:
            row = dict(zip(DATASET_COLUMNS, raw))
            record: dict = {
                "instance_id": row["instance_id"],
                "algorithm": row["algorithm"],
                "dim": int(row["dim"]),
                "m": int(row["m"]),
                "kind": row["kind"],
                "generation": int(row["generation"]),
            }
            for c in FEATURE_COLUMNS:
                record[c] = float(row[c])
            for c in PERFORMANCE_METRICS:
                record[c] = float(row[c]) if row[c] != "" else None
            out.append(record)
    return out
