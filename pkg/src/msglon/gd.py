"""Capped gradient ascent as an independent basin oracle.

The analytic basin partition claims that following the locally dominating
bump from any point leads to that bump's merge-chain optimum. This module
checks the claim numerically: run capped gradient steps on the landscape
itself, map each endpoint to an optimum, and report the fraction of start
points where the two assignments disagree.

The iteration moves toward the center of the currently maximal bump

    x <- x + min(eta * g_k(x) / sigma_k^2, 1) * (c_k - x)

which is plain gradient ascent on g_k with the step capped so it never
overshoots the center. Iterates are convex combinations of box points, so
they stay inside the box by construction; clipping only guards rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import landscape as ls
from . import lon as lon_mod
from .errors import ValidationError
from .landscape import MsgInstance
from .lon import BasinAssignment


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent oracle settings.

    ``center_tolerance`` is the endpoint-to-center proximity check; endpoints
    farther than this from their assigned optimum's center fall back to the
    nearest optimum center and are counted in ``fallback_count``.
    """

    eta: float = 0.01
    max_steps: int = 2000
    starts_per_dim: int = 5000
    move_tolerance: float = 1e-12
    center_tolerance: float = 1e-3

    def __post_init__(self):
        if self.eta <= 0.0:
            raise ValidationError("eta must be positive")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be >= 1")
        if self.starts_per_dim < 1:
            raise ValidationError("starts_per_dim must be >= 1")


@dataclass(frozen=True)
class GdBatchResult:
    """Endpoints and optimum assignments for one batch of starts."""

    endpoints: np.ndarray  # (n, d) final iterates
    assigned: np.ndarray  # (n,) optimum component index per start
    steps: np.ndarray  # (n,) steps taken until the step norm vanished
    fallback_count: int  # endpoints mapped by nearest-center fallback


def descend_batch(instance: MsgInstance, starts: np.ndarray,
                  config: GdConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run capped gradient steps from every start; returns (endpoints, steps).

    All trajectories advance in lockstep with an active mask, so the cost per
    step is one kernel pass over the still-moving points.
    """
    config = config or GdConfig()
    X = np.clip(np.atleast_2d(np.asarray(starts, dtype=float)).copy(), 0.0, 1.0)
    n, d = X.shape
    m = instance.m
    steps = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    inv_sigma_sq = instance._inv_sigma_sq
    centers = instance.centers
    kernel = instance._score_gemm  # (d+2, m): scores = [x, ||x||^2, 1] @ kernel
    # preallocated per-step work buffers; leading-axis slices stay contiguous
    P = np.ones((n, d + 2))
    S = np.empty((n, m))
    tol_sq = config.move_tolerance**2
    for _ in range(config.max_steps):
        na = active.size
        pts = X[active]
        P[:na, :d] = pts
        np.einsum("ij,ij->i", pts, pts, out=P[:na, d])
        scores = np.dot(P[:na, :], kernel, out=S[:na, :])
        k = np.argmax(scores, axis=1)
        g = np.exp(np.take_along_axis(scores, k[:, None], axis=1)[:, 0])
        factor = np.minimum(config.eta * g * inv_sigma_sq[k], 1.0)
        delta = factor[:, None] * (centers[k] - pts)
        X[active] = np.clip(pts + delta, 0.0, 1.0)
        steps[active] += 1
        moving = np.einsum("ij,ij->i", delta, delta) >= tol_sq
        active = active[moving]
        if active.size == 0:
            break
    return X, steps


def map_endpoints(instance: MsgInstance, basins: BasinAssignment,
                  endpoints: np.ndarray,
                  config: GdConfig | None = None) -> tuple[np.ndarray, int]:
    """Map GD endpoints to local optima; returns (assignments, fallback count).

    An endpoint is assigned to the owner of its maximal bump, then checked to
    actually sit within ``center_tolerance`` of that optimum's center. Stray
    endpoints (non-converged trajectories) fall back to the nearest optimum
    center and are counted.
    """
    config = config or GdConfig()
    assigned = lon_mod.assign_points(instance, basins, endpoints)
    opt_centers = instance.centers[list(basins.optima.indices)]
    dist_to_assigned = np.linalg.norm(endpoints - instance.centers[assigned], axis=1)
    stray = dist_to_assigned > config.center_tolerance
    if stray.any():
        diff = endpoints[stray][:, None, :] - opt_centers[None, :, :]
        nearest = np.argmin(np.sum(diff * diff, axis=2), axis=1)
        assigned = assigned.copy()
        assigned[stray] = np.asarray(basins.optima.indices)[nearest]
    return assigned, int(np.count_nonzero(stray))


def gd_assign_batch(instance: MsgInstance, starts: np.ndarray,
                    config: GdConfig | None = None,
                    basins: BasinAssignment | None = None) -> GdBatchResult:
    """Descend from every start and map the endpoints to optima."""
    config = config or GdConfig()
    if basins is None:
        basins = lon_mod.build_basins(instance)
    endpoints, steps = descend_batch(instance, starts, config)
    assigned, fallbacks = map_endpoints(instance, basins, endpoints, config)
    return GdBatchResult(endpoints=endpoints, assigned=assigned, steps=steps,
                         fallback_count=fallbacks)


def gd_converge(instance: MsgInstance, x0: np.ndarray,
                config: GdConfig | None = None,
                basins: BasinAssignment | None = None) -> int:
    """Local optimum reached by capped gradient ascent from a single start."""
    x0 = np.asarray(x0, dtype=float).ravel()
    result = gd_assign_batch(instance, x0[None, :], config, basins)
    return int(result.assigned[0])


@dataclass(frozen=True)
class BoaComparison:
    """Agreement report between gradient-descent and analytic basins."""

    difference_rate: float
    n_starts: int
    n_disagreements: int
    fallback_count: int
    mean_steps: float
    gd_assigned: np.ndarray
    analytic_assigned: np.ndarray


def compare_basins(instance: MsgInstance, config: GdConfig | None = None,
                   seed: int = 0) -> BoaComparison:
    """Full gradient-descent-vs-analytic comparison on Sobol' starts.

    ``seed`` is accepted for interface stability; the start sequence is the
    deterministic unscrambled Sobol' prefix.
    """
    del seed
    config = config or GdConfig()
    n = config.starts_per_dim * instance.dim
    starts = ls.sobol_points(instance.dim, n)
    basins = lon_mod.build_basins(instance)
    analytic = lon_mod.assign_points(instance, basins, starts)
    result = gd_assign_batch(instance, starts, config, basins)
    disagree = int(np.count_nonzero(result.assigned != analytic))
    return BoaComparison(
        difference_rate=disagree / n,
        n_starts=n,
        n_disagreements=disagree,
        fallback_count=result.fallback_count,
        mean_steps=float(np.mean(result.steps)),
        gd_assigned=result.assigned,
        analytic_assigned=analytic,
    )


def difference_rate(instance: MsgInstance, config: GdConfig | None = None,
                    seed: int = 0) -> float:
    """Fraction of Sobol' starts whose GD basin differs from the analytic one."""
    return compare_basins(instance, config, seed).difference_rate
