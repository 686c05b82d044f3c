"""Differential evolution (rand/1/bin) under the shared benchmark protocol.

Maximizes the landscape with population 10*d, crossover rate 0.9, and
per-individual dither of the scale factor on U(0.5, 1). Candidates are
clipped to the box before evaluation; replacement accepts ties so the
population can drift across plateaus.
"""

from __future__ import annotations

import numpy as np

from .bench import BenchProtocol, BudgetedObjective, TrialRecord, is_success
from .landscape import MsgInstance
from .rng import stream

POP_PER_DIM = 10
CR = 0.9
F_LOW, F_HIGH = 0.5, 1.0


def _spread(population: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Per-coordinate population range (max over coords) and f-range."""
    dx = float(np.max(population.max(axis=0) - population.min(axis=0)))
    df = float(values.max() - values.min())
    return dx, df


def de_trial(instance: MsgInstance, protocol: BenchProtocol,
             rng: np.random.Generator) -> TrialRecord:
    """One DE run until convergence or budget exhaustion."""
    d = instance.dim
    np_size = POP_PER_DIM * d
    objective = BudgetedObjective(instance, protocol.budget(d))

    population = rng.random((np_size, d))
    values = objective(population)
    converged = False

    while not objective.exhausted:
        dx, df = _spread(population, values)
        if dx < protocol.conv_tol_x and df < protocol.conv_tol_f:
            converged = True
            break

        # rand/1 donors: three distinct indices, all different from the target
        idx = np.arange(np_size)
        r = np.empty((np_size, 3), dtype=np.int64)
        for col in range(3):
            pick = rng.integers(np_size, size=np_size)
            while True:
                clash = (pick == idx) | (r[:, :col] == pick[:, None]).any(axis=1)
                if not clash.any():
                    break
                pick[clash] = rng.integers(np_size, size=int(clash.sum()))
            r[:, col] = pick

        f = rng.uniform(F_LOW, F_HIGH, size=np_size)
        donors = population[r[:, 0]] + f[:, None] * (population[r[:, 1]] - population[r[:, 2]])

        cross = rng.random((np_size, d)) < CR
        cross[idx, rng.integers(d, size=np_size)] = True
        candidates = np.clip(np.where(cross, donors, population), 0.0, 1.0)

        n_eval = min(np_size, objective.remaining)
        cand_values = objective(candidates[:n_eval])
        better = cand_values >= values[:n_eval]
        population[:n_eval][better] = candidates[:n_eval][better]
        values[:n_eval][better] = cand_values[better]

    return TrialRecord(
        success=is_success(protocol, instance, objective.best_x),
        evals_used=objective.evals,
        converged=converged,
        best_f=objective.best_f,
        best_x=objective.best_x,
    )


def run_de(instance: MsgInstance, protocol: BenchProtocol | None = None,
           seed: int = 0) -> list[TrialRecord]:
    """All protocol trials of DE on one instance, with per-trial RNG streams."""
    protocol = protocol or BenchProtocol()
    return [
        de_trial(instance, protocol, stream(seed, "de-trial", trial))
        for trial in range(protocol.trials)
    ]
