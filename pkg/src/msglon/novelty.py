"""Novelty-search generation of landscape instances with diverse LON shapes.

A (mu+lambda)-ES mutates the generator parameters (peak heights and scales;
centers stay fixed), and selection rewards novelty instead of fitness: a
solution's score is its mean phenotype distance to its k nearest neighbors
in the union of the archive and the current population. The phenotype is the
normalized pair (num_nodes / m, global_funnel_size) of the solution's LON.

Novelty within a generation is computed against a reference set frozen at
the start of the selection step, so archive insertion order cannot change
any score. Every random draw comes from streams derived from the run seed,
and per-solution LON sampling is keyed independently, so results do not
depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import landscape as ls
from . import lon as lon_mod
from .errors import ValidationError
from .landscape import WEIGHT_FLOOR, MsgInstance, sigma_bounds
from .lon import LonFeatures
from .rng import stream

ARCHETYPE_SEEDS = ("uni-modal", "uni-sink", "multi-sink")


@dataclass(frozen=True)
class NsConfig:
    """Settings for one generation run (novelty search or random baseline).

    ``seed_archetypes`` switches on the variant that replaces three initial
    population members with the hand-designed archetype genotypes.
    ``lon_samples`` overrides escape samples per optimum for phenotyping
    (default 500 per dimension); ``lon_seed`` keys that sampling and is
    deliberately decoupled from the evolution seed.
    """

    dim: int = 2
    m: int | None = None
    mu: int = 20
    lam: int = 100
    t_max: int = 100
    k: int = 15
    rho_min: float = 0.05
    alpha_w: float = 0.1
    alpha_sigma: float = 0.05
    window: int = 4
    window_hi: int = 30
    factor_up: float = 1.05
    factor_down: float = 0.95
    seed: int = 0
    seed_archetypes: bool = False
    lon_samples: int | None = None
    lon_seed: int = 0

    def __post_init__(self):
        if min(self.mu, self.lam, self.k, self.window) < 1:
            raise ValidationError("mu, lam, k and window must be >= 1")
        if self.t_max < 0:
            raise ValidationError("t_max must be >= 0")
        if self.rho_min <= 0 or self.alpha_w <= 0 or self.alpha_sigma <= 0:
            raise ValidationError("rho_min and mutation scales must be positive")
        if self.seed_archetypes and self.mu < len(ARCHETYPE_SEEDS):
            raise ValidationError("archetype seeding needs mu >= 3")

    @property
    def m_effective(self) -> int:
        return self.m if self.m is not None else ls.default_m(self.dim)

    @property
    def total_solutions(self) -> int:
        return self.mu + self.t_max * self.lam


@dataclass(frozen=True)
class Solution:
    """One evaluated genotype with provenance and cached phenotype."""

    uid: int
    generation: int
    parent: int | None
    weights: np.ndarray
    sigmas: np.ndarray
    phenotype: np.ndarray  # (num_nodes / m, global_funnel_size)
    features: LonFeatures

    def __post_init__(self):
        for name in ("weights", "sigmas", "phenotype"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)


@dataclass(frozen=True)
class ArchiveEvent:
    """Record of one archive insertion, for post-hoc threshold auditing."""

    generation: int
    uid: int
    novelty: float
    threshold: float


@dataclass(frozen=True)
class NsResult:
    """Everything a run produced: all solutions, archive membership, audit trail."""

    config: NsConfig
    solutions: tuple[Solution, ...]
    archive_uids: tuple[int, ...]
    events: tuple[ArchiveEvent, ...]
    thresholds: tuple[tuple[int, float], ...]  # (generation, value after adaptation)

    @property
    def final_threshold(self) -> float:
        return self.thresholds[-1][1] if self.thresholds else self.config.rho_min


def phenotype_of(config: NsConfig, weights: np.ndarray, sigmas: np.ndarray,
                 centers: np.ndarray) -> tuple[np.ndarray, LonFeatures]:
    """The normalized LON phenotype of a genotype; pure given the config."""
    instance = ls.instance_from_genotype(centers, weights, sigmas, kind="evolved")
    lon = lon_mod.build_lon(instance, s=config.lon_samples, seed=config.lon_seed)
    features = lon_mod.compute_features(lon)
    phenotype = np.array([features.num_nodes / instance.m,
                          features.global_funnel_size])
    return phenotype, features


def novelty(z: Solution, reference: list[Solution] | tuple[Solution, ...],
            k: int) -> float:
    """Mean phenotype distance to the k nearest reference solutions.

    Entries that are z itself (same uid) are skipped; with fewer than k
    neighbors the mean runs over what exists, and an empty reference set
    yields +inf (the first solution is maximally novel).
    """
    others = np.array([r.phenotype for r in reference if r.uid != z.uid])
    if others.size == 0:
        return float("inf")
    dists = np.linalg.norm(others - z.phenotype[None, :], axis=1)
    if len(dists) > k:
        dists = np.partition(dists, k - 1)[:k]
    return float(np.mean(dists))


def _novelty_matrix(candidates: list[Solution], reference: list[Solution],
                    k: int) -> np.ndarray:
    """Novelty of every candidate against one frozen reference set."""
    cand = np.array([c.phenotype for c in candidates])
    ref = np.array([r.phenotype for r in reference])
    cand_uid = np.array([c.uid for c in candidates])
    ref_uid = np.array([r.uid for r in reference])
    diff = cand[:, None, :] - ref[None, :, :]
    dists = np.sqrt(np.sum(diff * diff, axis=2))
    dists[cand_uid[:, None] == ref_uid[None, :]] = np.inf
    dists = np.sort(dists, axis=1)
    out = np.empty(len(candidates))
    for row in range(len(candidates)):
        finite = dists[row][np.isfinite(dists[row])]
        out[row] = np.mean(finite[:k]) if finite.size else np.inf
    return out


def _uniform_genotype(rng: np.random.Generator, m: int,
                      bounds: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = bounds
    weights = 1.0 - rng.random(m)  # uniform on (0, 1]
    sigmas = lo + (hi - lo) * rng.random(m)
    return weights, sigmas


def archetype_genotypes(dim: int, m: int) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """The three hand-designed genotypes over the fixed center layout."""
    out = []
    for kind in ARCHETYPE_SEEDS:
        inst = ls.make_archetype(kind, dim, m)
        out.append((kind, inst.weights.copy(), inst.sigmas.copy()))
    return out


def ns_run(config: NsConfig) -> NsResult:
    """One full novelty-search run; returns every solution ever produced.

    Initial population: uniform genotypes (three replaced by archetypes when
    ``seed_archetypes``). The archive starts as the initial population. Each
    generation draws lam offspring by uniform parent choice plus clipped
    Gaussian mutation, phenotypes them, computes novelty against the frozen
    union of archive and population, archives offspring whose novelty
    strictly exceeds the threshold, keeps the top-mu by novelty (ties broken
    by lower uid), and adapts the threshold on a fixed generation window.
    """
    m = config.m_effective
    bounds = sigma_bounds(config.dim, m)
    centers = ls.sample_centers(config.dim, m)

    def make_solution(uid: int, gen: int, parent: int | None,
                      weights: np.ndarray, sigmas: np.ndarray) -> Solution:
        phen, feats = phenotype_of(config, weights, sigmas, centers)
        return Solution(uid=uid, generation=gen, parent=parent, weights=weights,
                        sigmas=sigmas, phenotype=phen, features=feats)

    init_rng = stream(config.seed, "ns-init")
    parents: list[Solution] = []
    for i in range(config.mu):
        w, s = _uniform_genotype(init_rng, m, bounds)
        parents.append(make_solution(i, 0, None, w, s))
    if config.seed_archetypes:
        for i, (kind, w, s) in enumerate(archetype_genotypes(config.dim, m)):
            del kind
            parents[i] = make_solution(i, 0, None, w, s)

    all_solutions: list[Solution] = list(parents)
    archive: list[Solution] = list(parents)
    archive_ids = {p.uid for p in parents}
    events: list[ArchiveEvent] = []
    thresholds: list[tuple[int, float]] = []
    threshold = config.rho_min
    window_additions = 0
    next_uid = config.mu

    for gen in range(1, config.t_max + 1):
        gen_rng = stream(config.seed, "ns-gen", gen)
        offspring: list[Solution] = []
        for _ in range(config.lam):
            parent = parents[int(gen_rng.integers(config.mu))]
            w = np.clip(parent.weights + config.alpha_w * gen_rng.standard_normal(m),
                        WEIGHT_FLOOR, 1.0)
            s = np.clip(parent.sigmas + config.alpha_sigma * gen_rng.standard_normal(m),
                        bounds[0], bounds[1])
            offspring.append(make_solution(next_uid, gen, parent.uid, w, s))
            next_uid += 1
        all_solutions.extend(offspring)

        pool = parents + offspring
        # frozen reference: archive union pool, deduplicated by uid
        reference = archive + [sol for sol in pool if sol.uid not in archive_ids]
        scores = _novelty_matrix(pool, reference, config.k)
        offspring_scores = scores[config.mu:]

        for child, score in zip(offspring, offspring_scores):
            if score > threshold:
                archive.append(child)
                archive_ids.add(child.uid)
                window_additions += 1
                events.append(ArchiveEvent(generation=gen, uid=child.uid,
                                           novelty=float(score), threshold=threshold))

        order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i].uid))
        parents = [pool[i] for i in order[:config.mu]]

        if gen % config.window == 0:
            if window_additions > config.window_hi:
                threshold *= config.factor_up
            elif window_additions == 0:
                threshold *= config.factor_down
            thresholds.append((gen, threshold))
            window_additions = 0

    return NsResult(
        config=config,
        solutions=tuple(all_solutions),
        archive_uids=tuple(sol.uid for sol in archive),
        events=tuple(events),
        thresholds=tuple(thresholds),
    )


def random_baseline(config: NsConfig) -> NsResult:
    """Same solution budget as ns_run, by independent uniform sampling."""
    m = config.m_effective
    bounds = sigma_bounds(config.dim, m)
    centers = ls.sample_centers(config.dim, m)
    rng = stream(config.seed, "random-baseline")
    solutions = []
    for uid in range(config.total_solutions):
        w, s = _uniform_genotype(rng, m, bounds)
        phen, feats = phenotype_of(config, w, s, centers)
        solutions.append(Solution(uid=uid, generation=0, parent=None, weights=w,
                                  sigmas=s, phenotype=phen, features=feats))
    return NsResult(config=config, solutions=tuple(solutions), archive_uids=(),
                    events=(), thresholds=())
