"""Benchmarking protocol shared by the optimizers.

A trial gives an optimizer a fixed evaluation budget on one landscape and
records whether its best evaluated point landed within tolerance of the
global optimum's center, and how many evaluations it spent before its own
convergence test fired (budget exhaustion counts in full). Every objective
call goes through a counting wrapper, so budgets are exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import landscape as ls
from .errors import ValidationError
from .landscape import MsgInstance

SUCCESS_METRICS = ("euclidean", "max")


@dataclass(frozen=True)
class BenchProtocol:
    """Trial counts, budget, and the success / convergence tolerances.

    ``success_metric`` selects how the distance between the best point and
    the global optimum's center is measured: "euclidean" (norm, default) or
    "max" (largest per-coordinate error).
    """

    trials: int = 31
    budget_per_dim: int = 1000
    success_tol: float = 1e-2
    conv_tol_x: float = 1e-11
    conv_tol_f: float = 1e-11
    seed: int = 0
    success_metric: str = "euclidean"

    def __post_init__(self):
        if self.trials < 1 or self.budget_per_dim < 1:
            raise ValidationError("trials and budget_per_dim must be >= 1")
        if self.success_tol <= 0 or self.conv_tol_x <= 0 or self.conv_tol_f <= 0:
            raise ValidationError("tolerances must be positive")
        if self.success_metric not in SUCCESS_METRICS:
            raise ValidationError(
                f"success_metric must be one of {SUCCESS_METRICS}, got {self.success_metric!r}"
            )

    def budget(self, dim: int) -> int:
        return self.budget_per_dim * dim


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of a single optimizer trial.

    ``repairs`` counts covariance repairs (CMA-ES only; 0 for DE).
    """

    success: bool
    evals_used: int
    converged: bool
    best_f: float
    best_x: np.ndarray
    repairs: int = 0


@dataclass(frozen=True)
class InstancePerformance:
    """Per-instance aggregate over all trials of one algorithm."""

    algorithm: str
    success_rate: float
    conv_time: float
    trials: int


class BudgetedObjective:
    """Counts every landscape evaluation and tracks the best point seen.

    Callers ask ``remaining`` and submit at most that many points;
    overspending raises instead of silently exceeding the budget.
    """

    def __init__(self, instance: MsgInstance, budget: int):
        self.instance = instance
        self.budget = budget
        self.evals = 0
        self.best_f = -np.inf
        self.best_x: np.ndarray | None = None

    @property
    def remaining(self) -> int:
        return self.budget - self.evals

    @property
    def exhausted(self) -> bool:
        return self.evals >= self.budget

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] > self.remaining:
            raise ValidationError(
                f"evaluating {points.shape[0]} points would exceed the remaining "
                f"budget of {self.remaining}"
            )
        values, _ = ls.evaluate_batch(self.instance, points)
        self.evals += points.shape[0]
        top = int(np.argmax(values))
        if values[top] > self.best_f:
            self.best_f = float(values[top])
            self.best_x = points[top].copy()
        return values


def is_success(protocol: BenchProtocol, instance: MsgInstance,
               best_x: np.ndarray | None) -> bool:
    """Whether the best point lies within tolerance of the global optimum."""
    if best_x is None:
        return False
    optima = ls.enumerate_local_optima(instance)
    err = best_x - instance.centers[optima.global_index]
    if protocol.success_metric == "euclidean":
        dist = float(np.linalg.norm(err))
    else:
        dist = float(np.max(np.abs(err)))
    return dist < protocol.success_tol


def summarize(algorithm: str, records: list[TrialRecord]) -> InstancePerformance:
    """success_rate and mean evaluations-at-termination over a trial list."""
    return InstancePerformance(
        algorithm=algorithm,
        success_rate=sum(r.success for r in records) / len(records),
        conv_time=float(np.mean([r.evals_used for r in records])),
        trials=len(records),
    )


def measure(instance: MsgInstance, algorithm: str, protocol: BenchProtocol | None = None,
            instance_id: int = 0) -> InstancePerformance:
    """Run all trials of one algorithm on one instance and aggregate.

    Per-trial seeds derive from (protocol seed, algorithm, instance_id), so
    corpus-level runs can be parallelized or reordered without changing any
    number.
    """
    from .cmaes import run_cmaes
    from .de import run_de

    protocol = protocol or BenchProtocol()
    runners = {"de": run_de, "cmaes": run_cmaes}
    if algorithm not in runners:
        raise ValidationError(f"unknown algorithm {algorithm!r}; expected one of {sorted(runners)}")
    from .rng import stream_int

    seed = stream_int(protocol.seed, f"bench-{algorithm}", instance_id)
    records = runners[algorithm](instance, protocol, seed)
    return summarize(algorithm, records)
