"""CMA-ES (rank-one + rank-mu update, cumulative step-size adaptation).

Self-contained implementation with the canonical default parameters for
population size, recombination weights, and learning rates. Maximizes the
landscape under the shared benchmark protocol: points are clipped to the box
for evaluation while the distribution is updated from the unclipped samples.
Covariance degeneration is repaired by flooring eigenvalues (no restarts);
repairs are counted on the trial record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bench import BenchProtocol, BudgetedObjective, TrialRecord, is_success
from .landscape import MsgInstance
from .rng import stream

SIGMA0 = 0.3

#: Relative eigenvalue floor used by the degeneration repair.
EIG_FLOOR = 1e-14


@dataclass(frozen=True)
class CmaParams:
    """Static strategy parameters for a given dimension."""

    dim: int
    lam: int
    mu: int
    weights: np.ndarray  # (mu,) positive, sums to 1
    mueff: float
    cc: float
    cs: float
    c1: float
    cmu: float
    damps: float
    chin: float  # E||N(0, I)||

    @classmethod
    def for_dim(cls, dim: int, lam: int | None = None) -> "CmaParams":
        n = dim
        if lam is None:
            lam = 4 + int(3 * np.log(n))
        mu = lam // 2
        raw = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
        weights = raw / raw.sum()
        mueff = float(weights.sum() ** 2 / np.sum(weights**2))
        cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        cs = (mueff + 2) / (n + mueff + 5)
        c1 = 2 / ((n + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        damps = 1 + 2 * max(0.0, np.sqrt((mueff - 1) / (n + 1)) - 1) + cs
        chin = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))
        weights.setflags(write=False)
        return cls(dim=n, lam=lam, mu=mu, weights=weights, mueff=mueff, cc=cc,
                   cs=cs, c1=c1, cmu=cmu, damps=damps, chin=chin)


def _decompose(C: np.ndarray, repairs: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigendecomposition of C with the eigenvalue-floor repair.

    Returns (scales D, basis B, updated repair count) where C = B diag(D^2) B'.
    """
    C = (C + C.T) / 2.0
    eigvals, B = np.linalg.eigh(C)
    top = eigvals[-1]
    if not np.isfinite(top) or top <= 0.0:
        return np.ones(C.shape[0]), np.eye(C.shape[0]), repairs + 1
    floor = top * EIG_FLOOR
    if eigvals[0] < floor:
        eigvals = np.maximum(eigvals, floor)
        repairs += 1
    return np.sqrt(eigvals), B, repairs


def cmaes_trial(instance: MsgInstance, protocol: BenchProtocol,
                rng: np.random.Generator) -> TrialRecord:
    """One CMA-ES run until convergence or budget exhaustion."""
    d = instance.dim
    params = CmaParams.for_dim(d)
    objective = BudgetedObjective(instance, protocol.budget(d))

    xmean = rng.random(d)
    sigma = SIGMA0
    C = np.eye(d)
    pc = np.zeros(d)
    ps = np.zeros(d)
    repairs = 0
    converged = False
    values: np.ndarray | None = None
    D = np.ones(d)

    while not objective.exhausted:
        D, B, repairs = _decompose(C, repairs)
        if values is not None:
            dx = sigma * float(D[-1])
            df = float(values.max() - values.min())
            if dx < protocol.conv_tol_x and df < protocol.conv_tol_f:
                converged = True
                break

        z = rng.standard_normal((params.lam, d))
        y = z @ (B * D[None, :]).T
        x = xmean[None, :] + sigma * y

        n_eval = min(params.lam, objective.remaining)
        values = objective(np.clip(x[:n_eval], 0.0, 1.0))
        if n_eval < params.lam:
            break  # not enough budget for a full generation update

        sel = np.argsort(-values, kind="stable")[: params.mu]
        xold = xmean
        xmean = params.weights @ x[sel]

        y_mean = (xmean - xold) / sigma
        inv_sqrt = B @ ((B / D[None, :]).T)
        ps = (1 - params.cs) * ps + np.sqrt(
            params.cs * (2 - params.cs) * params.mueff
        ) * (inv_sqrt @ y_mean)
        expected = np.sqrt(
            1 - (1 - params.cs) ** (2 * objective.evals / params.lam)
        ) * params.chin
        hsig = float(np.linalg.norm(ps)) / expected < 1.4 + 2 / (d + 1)
        pc = (1 - params.cc) * pc + hsig * np.sqrt(
            params.cc * (2 - params.cc) * params.mueff
        ) * y_mean

        art = (x[sel] - xold[None, :]) / sigma
        rank_mu = (art.T * params.weights) @ art
        C = (
            (1 - params.c1 - params.cmu) * C
            + params.c1 * (np.outer(pc, pc) + (0 if hsig else 1) * params.cc * (2 - params.cc) * C)
            + params.cmu * rank_mu
        )
        sigma *= np.exp((params.cs / params.damps) * (np.linalg.norm(ps) / params.chin - 1))

    return TrialRecord(
        success=is_success(protocol, instance, objective.best_x),
        evals_used=objective.evals,
        converged=converged,
        best_f=objective.best_f,
        best_x=objective.best_x,
        repairs=repairs,
    )


def run_cmaes(instance: MsgInstance, protocol: BenchProtocol | None = None,
              seed: int = 0) -> list[TrialRecord]:
    """All protocol trials of CMA-ES on one instance, with per-trial RNG streams."""
    protocol = protocol or BenchProtocol()
    return [
        cmaes_trial(instance, protocol, stream(seed, "cmaes-trial", trial))
        for trial in range(protocol.trials)
    ]
