"""Max-set-of-Gaussians landscapes on the unit box.

An instance is the pointwise maximum of ``m`` isotropic Gaussian bumps over
``[0,1]^d`` and is always maximized. Each bump has a peak height ``w`` in
(0, 1], a center inside the box, and a scale ``sigma > 0``. Because a point's
objective value is attained by a single bump, the local optima are exactly
the bump centers that no other bump beats at that center, which makes them
enumerable from one batched evaluation instead of a search run.

Two evaluation kernels coexist on purpose:

* :func:`component_values` is the canonical linear-domain kernel. Everything
  whose correctness depends on exact ties (archetype construction, optimum
  classification, basin merging) goes through it so that equal quantities
  compare bitwise-equal.
* :func:`component_scores` is a log-domain kernel (one exp per point instead
  of ``m``) used by the hot paths: point assignment, gradient descent, and
  optimizer objective calls. The two orderings agree except on measure-zero
  tie sets.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapabilityError, ValidationError
from .rng import stream

INSTANCE_SCHEMA = "msg-instance/1"

#: Components per dimension under the default configuration.
COMPONENTS_PER_DIM = 50

#: Smallest admissible peak height after clipping (keeps log weights finite).
WEIGHT_FLOOR = 1e-12

ARCHETYPE_KINDS = ("uni-modal", "uni-sink", "multi-sink")


def cell_side(dim: int, m: int) -> float:
    """Side length of one of ``m`` equal-volume cells partitioning the unit box."""
    return (1.0 / m) ** (1.0 / dim)


def sigma_bounds(dim: int, m: int) -> tuple[float, float]:
    """Generator bounds (sigma_min, sigma_max) = (side/4, 3*side) for (dim, m)."""
    side = cell_side(dim, m)
    return side / 4.0, 3.0 * side


def default_m(dim: int) -> int:
    return COMPONENTS_PER_DIM * dim


@dataclass(frozen=True)
class GaussianComponent:
    """One isotropic bump: peak height ``weight`` at ``center`` with scale ``sigma``."""

    center: np.ndarray
    weight: float
    sigma: float


@dataclass(frozen=True)
class MsgInstance:
    """One landscape. Immutable; derived arrays are cached and shareable.

    ``centers`` is (m, d), ``weights`` and ``sigmas`` are (m,). ``seed`` and
    ``kind`` record provenance only and do not affect evaluation.
    """

    dim: int
    centers: np.ndarray
    weights: np.ndarray
    sigmas: np.ndarray
    seed: int | None = None
    kind: str = "custom"

    def __post_init__(self):
        centers = np.ascontiguousarray(np.atleast_2d(self.centers), dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float).ravel()
        sigmas = np.ascontiguousarray(self.sigmas, dtype=float).ravel()
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "sigmas", sigmas)
        m, d = centers.shape
        if d != self.dim:
            raise ValidationError(f"centers are {d}-dimensional, instance says dim={self.dim}")
        if m == 0:
            raise ValidationError("instance needs at least one component")
        if weights.shape != (m,) or sigmas.shape != (m,):
            raise ValidationError("weights/sigmas length does not match the number of centers")
        if not np.all(np.isfinite(centers)) or np.any(centers < 0.0) or np.any(centers > 1.0):
            raise ValidationError("centers must lie inside the unit box")
        if np.any(weights <= 0.0) or np.any(weights > 1.0):
            raise ValidationError("weights must be in (0, 1]")
        if np.any(sigmas <= 0.0) or not np.all(np.isfinite(sigmas)):
            raise ValidationError("sigmas must be positive")
        order = np.lexsort(centers.T)
        if m > 1 and np.any(np.all(centers[order][1:] == centers[order][:-1], axis=1)):
            raise ValidationError("centers must be pairwise distinct")
        for arr in (centers, weights, sigmas):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def components(self) -> tuple[GaussianComponent, ...]:
        return tuple(
            GaussianComponent(self.centers[i], float(self.weights[i]), float(self.sigmas[i]))
            for i in range(self.m)
        )

    # Cached kernels for the log-domain fast path. cached_property writes to
    # __dict__ directly, so it coexists with frozen dataclasses.
    @cached_property
    def _inv_two_sigma_sq(self) -> np.ndarray:
        a = 1.0 / (2.0 * self.sigmas**2)
        a.setflags(write=False)
        return a

    @cached_property
    def _inv_sigma_sq(self) -> np.ndarray:
        v = 1.0 / self.sigmas**2
        v.setflags(write=False)
        return v

    @cached_property
    def _score_const(self) -> np.ndarray:
        # log w_i - a_i * ||c_i||^2, the x-independent part of the log value
        c = np.log(self.weights) - self._inv_two_sigma_sq * np.sum(self.centers**2, axis=1)
        c.setflags(write=False)
        return c

    @cached_property
    def _score_lin(self) -> np.ndarray:
        # row i holds 2 * a_i * c_i, so score = const + x @ lin.T - a * ||x||^2
        b = 2.0 * self._inv_two_sigma_sq[:, None] * self.centers
        b.setflags(write=False)
        return b

    @cached_property
    def _score_gemm(self) -> np.ndarray:
        # (d+2, m) kernel turning [x, ||x||^2, 1] rows into scores in one matmul;
        # used by the gradient-descent hot loop
        k = np.vstack([self._score_lin.T, -self._inv_two_sigma_sq, self._score_const])
        k = np.ascontiguousarray(k)
        k.setflags(write=False)
        return k

    def to_dict(self) -> dict:
        return {
            "schema": INSTANCE_SCHEMA,
            "dim": self.dim,
            "m": self.m,
            "seed": self.seed,
            "kind": self.kind,
            "components": [
                {"center": c.center.tolist(), "weight": c.weight, "sigma": c.sigma}
                for c in self.components
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "MsgInstance":
        try:
            if data.get("schema") != INSTANCE_SCHEMA:
                raise ValidationError(f"unsupported instance schema: {data.get('schema')!r}")
            comps = data["components"]
            centers = np.array([c["center"] for c in comps], dtype=float)
            weights = np.array([c["weight"] for c in comps], dtype=float)
            sigmas = np.array([c["sigma"] for c in comps], dtype=float)
            return cls(
                dim=int(data["dim"]),
                centers=centers,
                weights=weights,
                sigmas=sigmas,
                seed=data.get("seed"),
                kind=str(data.get("kind", "custom")),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed instance record: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "MsgInstance":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class LocalOptimumSet:
    """Component indices that are local optima, plus the global optimum's index."""

    indices: tuple[int, ...]
    global_index: int

    def __post_init__(self):
        if not self.indices:
            raise ValidationError("an instance always has at least one local optimum")
        if self.global_index not in self.indices:
            raise ValidationError("global_index must be one of the optimum indices")


def component_values(instance: MsgInstance, points: np.ndarray) -> np.ndarray:
    """Linear-domain value of every bump at every point, shape (n, m).

    Canonical kernel: the elementwise difference/square/sum formulation is
    used everywhere exact tie reproducibility matters. One row costs the same
    as one objective evaluation.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != instance.dim:
        raise ValidationError(
            f"points are {pts.shape[1]}-dimensional, instance expects {instance.dim}"
        )
    diff = pts[:, None, :] - instance.centers[None, :, :]
    sq = np.sum(diff * diff, axis=2)
    return instance.weights[None, :] * np.exp(-sq * instance._inv_two_sigma_sq[None, :])


def component_scores(instance: MsgInstance, points: np.ndarray) -> np.ndarray:
    """Log-domain value of every bump at every point, shape (n, m).

    ``exp(scores)`` equals :func:`component_values` up to rounding; the argmax
    over components matches except on exact-tie sets.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != instance.dim:
        raise ValidationError(
            f"points are {pts.shape[1]}-dimensional, instance expects {instance.dim}"
        )
    scores = pts @ instance._score_lin.T
    scores += instance._score_const[None, :]
    scores -= np.sum(pts * pts, axis=1)[:, None] * instance._inv_two_sigma_sq[None, :]
    return scores


def evaluate_batch(instance: MsgInstance, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Objective value and attaining component for each point (ties: lowest index)."""
    scores = component_scores(instance, points)
    best = np.argmax(scores, axis=1)
    values = np.exp(scores[np.arange(scores.shape[0]), best])
    return values, best


def evaluate(instance: MsgInstance, x: np.ndarray) -> tuple[float, int]:
    """Objective value at ``x`` and the index of the attaining component."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (instance.dim,):
        raise ValidationError(f"point has shape {x.shape}, instance expects ({instance.dim},)")
    values, best = evaluate_batch(instance, x[None, :])
    return float(values[0]), int(best[0])


def center_rivalry(instance: MsgInstance) -> tuple[np.ndarray, np.ndarray]:
    """Per-center optimum mask and strongest rival index, from one batched pass.

    Returns ``(is_optimum, rival)`` where ``is_optimum[i]`` holds iff the bump
    beats every other bump at its own center (strictly), and ``rival[i]`` is
    the index attaining ``max_{j != i} g_j(c_i)`` (ties: lowest index).
    Dominated centers merge toward their rival; the objective at the rival's
    center is strictly larger, so rival chains cannot cycle.
    """
    values = component_values(instance, instance.centers)  # [p, j] = g_j(c_p)
    np.fill_diagonal(values, -np.inf)
    rival = np.argmax(values, axis=1)
    best_rival = values[np.arange(instance.m), rival]
    is_optimum = instance.weights > best_rival
    if not is_optimum.any():
        # cannot happen for a valid instance: the max-weight component with the
        # lowest index is undominated
        raise ValidationError("no local optimum found; instance is inconsistent")
    return is_optimum, rival


def optimum_set(is_optimum: np.ndarray, weights: np.ndarray) -> LocalOptimumSet:
    """Package an optimum mask, picking the global optimum by weight (ties: lowest index)."""
    indices = np.flatnonzero(is_optimum)
    global_index = int(indices[np.argmax(weights[indices])])
    return LocalOptimumSet(indices=tuple(int(i) for i in indices), global_index=global_index)


def enumerate_local_optima(instance: MsgInstance) -> LocalOptimumSet:
    """All local optima of the instance, found from one pass over the centers.

    A center is a local optimum iff no other bump matches or beats it there;
    the global optimum is the one with maximal objective value (its own
    weight), ties broken by lowest index.
    """
    is_optimum, _ = center_rivalry(instance)
    return optimum_set(is_optimum, instance.weights)


def sobol_points(dim: int, count: int) -> np.ndarray:
    """First ``count`` points of the unscrambled d-dimensional Sobol' sequence.

    Joe-Kuo direction numbers via scipy; the initial all-zeros point is
    included. Deterministic for fixed (dim, count).
    """
    from scipy.stats import qmc

    if dim < 1:
        raise ValidationError("dimension must be >= 1")
    if count < 1:
        raise ValidationError("count must be >= 1")
    if dim > qmc.Sobol.MAXDIM:
        raise CapabilityError(
            f"Sobol' direction numbers available up to d={qmc.Sobol.MAXDIM}, requested d={dim}"
        )
    with warnings.catch_warnings():
        # scipy warns when count is not a power of two; balance is irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        return qmc.Sobol(d=dim, scramble=False).random(count)


def sample_centers(dim: int, m: int, seed: int | None = None) -> np.ndarray:
    """The fixed center layout shared by all instances of a given (dim, m).

    ``seed`` is accepted for interface stability but the sequence is
    unscrambled, so it does not influence the result.
    """
    del seed
    return sobol_points(dim, m)


def random_instance(
    dim: int,
    m: int | None = None,
    seed: int = 0,
    centers: np.ndarray | None = None,
) -> MsgInstance:
    """Instance with uniform peak heights in (0, 1] and scales within bounds."""
    if m is None:
        m = default_m(dim)
    if centers is None:
        centers = sample_centers(dim, m)
    lo, hi = sigma_bounds(dim, m)
    rng = stream(seed, "instance")
    weights = 1.0 - rng.random(m)  # uniform on (0, 1]
    sigmas = lo + (hi - lo) * rng.random(m)
    return MsgInstance(dim=dim, centers=centers, weights=weights, sigmas=sigmas,
                       seed=seed, kind="random")


def instance_from_genotype(
    centers: np.ndarray,
    weights: np.ndarray,
    sigmas: np.ndarray,
    seed: int | None = None,
    kind: str = "evolved",
) -> MsgInstance:
    """Instance for a (weights, sigmas) genotype over a fixed center layout."""
    centers = np.asarray(centers, dtype=float)
    return MsgInstance(dim=centers.shape[1], centers=centers, weights=weights,
                       sigmas=sigmas, seed=seed, kind=kind)


def _anchor_index(centers: np.ndarray) -> int:
    """Component whose center is closest to the box midpoint (ties: lowest index)."""
    mid = np.full(centers.shape[1], 0.5)
    return int(np.argmin(np.sum((centers - mid) ** 2, axis=1)))


def make_archetype(kind: str, dim: int, m: int | None = None, noise_seed: int = 0) -> MsgInstance:
    """One of the three hand-designed landscape archetypes.

    * ``uni-modal``: a single wide bump at the anchor; every other component
      is a narrow needle whose height exactly matches the wide bump at its own
      center, so the landscape keeps a single local optimum.
    * ``uni-sink``: anchor height 1; other heights fall off linearly with
      distance from the anchor (farthest center lowest); all scales minimal,
      which yields many optima funnelling into one sink.
    * ``multi-sink``: near-equal heights ``1 + 0.01 * eps`` normalized so the
      maximum is exactly 1; all scales minimal, yielding many competing sinks.
    """
    if m is None:
        m = default_m(dim)
    centers = sample_centers(dim, m)
    lo, hi = sigma_bounds(dim, m)
    anchor = _anchor_index(centers)

    if kind == "uni-modal":
        wide = MsgInstance(dim=dim, centers=centers[anchor:anchor + 1],
                           weights=np.array([1.0]), sigmas=np.array([hi]))
        weights = component_values(wide, centers)[:, 0]
        weights[anchor] = 1.0
        sigmas = np.full(m, lo)
        sigmas[anchor] = hi
    elif kind == "uni-sink":
        dist = np.sqrt(np.sum((centers - centers[anchor]) ** 2, axis=1))
        weights = 1.0 - 0.95 * dist / dist.max()
        weights[anchor] = 1.0
        sigmas = np.full(m, lo)
    elif kind == "multi-sink":
        rng = stream(noise_seed, "multi-sink")
        weights = 1.0 + 0.01 * rng.standard_normal(m)
        weights = np.clip(weights / weights.max(), WEIGHT_FLOOR, 1.0)
        sigmas = np.full(m, lo)
    else:
        raise ValidationError(f"unknown archetype kind {kind!r}; expected one of {ARCHETYPE_KINDS}")

    return MsgInstance(dim=dim, centers=centers, weights=weights, sigmas=sigmas,
                       seed=noise_seed, kind=kind)
