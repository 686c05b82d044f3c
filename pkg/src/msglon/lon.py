"""Basins of attraction and local optima networks (LONs), built analytically.

Every bump of a landscape owns the region where it attains the pointwise max.
A dominated bump (one that is not a local optimum) hands its region to the
strongest rival at its own center; following those hand-offs yields the basin
partition without running any search. Escape edges between basins are then
estimated by perturbation sampling around each optimum, giving a LON whose
total cost is ``m + m*s`` kernel rows for an instance with ``m`` components
and ``s`` samples per optimum.

Functions here call the evaluation kernels through the ``landscape`` module
attribute on purpose, so tests can intercept them to count evaluations.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import landscape as ls
from .errors import ValidationError
from .landscape import LocalOptimumSet, MsgInstance, cell_side
from .rng import stream

LON_SCHEMA = "msg-lon/1"

#: Escape samples per local optimum, per dimension, under the default config.
ESCAPE_SAMPLES_PER_DIM = 500

#: Fixed column order for feature CSV rows.
FEATURE_COLUMNS = (
    "num_nodes",
    "edge_density",
    "num_sinks",
    "avg_path_opt",
    "avg_path_sinks",
    "in_strength_opt",
    "in_strength_sinks",
    "global_funnel_size",
)


@dataclass(frozen=True)
class BasinAssignment:
    """Maps every component to the local optimum that absorbs its region."""

    optima: LocalOptimumSet
    owner: np.ndarray  # (m,) owner[i] = component index of i's basin optimum

    def __post_init__(self):
        owner = np.ascontiguousarray(self.owner, dtype=np.int64)
        object.__setattr__(self, "owner", owner)
        owner.setflags(write=False)
        opt = np.asarray(self.optima.indices, dtype=np.int64)
        if not np.all(np.isin(owner, opt)):
            raise ValidationError("every owner must be a local optimum index")
        if not np.array_equal(owner[opt], opt):
            raise ValidationError("a local optimum must own itself")


@dataclass(frozen=True)
class Lon:
    """Directed graph over local optima with escape-probability edge weights.

    ``nodes`` are component indices (ascending). ``edges`` maps
    (src, dst) component pairs to weights in (0, 1]; zero-weight pairs are
    never stored and self-edges are forbidden. ``kind`` records which pruning
    produced the graph: "escape" (raw), "monotonic", or "funnel".
    """

    nodes: tuple[int, ...]
    f_values: np.ndarray  # (n,) objective value at each node
    coords: np.ndarray  # (n, d) node coordinates
    edges: dict[tuple[int, int], float]
    global_index: int
    sample_count: int
    radius: float
    kind: str = "escape"

    def __post_init__(self):
        f_values = np.ascontiguousarray(self.f_values, dtype=float)
        coords = np.ascontiguousarray(np.atleast_2d(self.coords), dtype=float)
        object.__setattr__(self, "f_values", f_values)
        object.__setattr__(self, "coords", coords)
        f_values.setflags(write=False)
        coords.setflags(write=False)
        n = len(self.nodes)
        if n == 0:
            raise ValidationError("a LON has at least one node")
        if f_values.shape != (n,) or coords.shape[0] != n:
            raise ValidationError("node attribute arrays must match the node count")
        if self.global_index not in self.nodes:
            raise ValidationError("global_index must be a node")
        node_set = set(self.nodes)
        out_sum: dict[int, float] = {}
        for (src, dst), w in self.edges.items():
            if src == dst:
                raise ValidationError(f"self-edge on node {src}")
            if src not in node_set or dst not in node_set:
                raise ValidationError(f"edge ({src}, {dst}) has a non-node endpoint")
            if not 0.0 < w <= 1.0:
                raise ValidationError(f"edge ({src}, {dst}) weight {w} outside (0, 1]")
            out_sum[src] = out_sum.get(src, 0.0) + w
        for src, total in out_sum.items():
            if total > 1.0 + 1e-9:
                raise ValidationError(f"outgoing weights of node {src} sum to {total} > 1")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def position(self) -> dict[int, int]:
        """Component index -> row position in the node arrays."""
        return {node: k for k, node in enumerate(self.nodes)}

    def out_edges(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {node: [] for node in self.nodes}
        for (src, dst), w in sorted(self.edges.items()):
            adj[src].append((dst, w))
        return adj

    def in_edges(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {node: [] for node in self.nodes}
        for (src, dst), w in sorted(self.edges.items()):
            adj[dst].append((src, w))
        return adj

    def to_dict(self) -> dict:
        return {
            "schema": LON_SCHEMA,
            "kind": self.kind,
            "sample_count": self.sample_count,
            "radius": self.radius,
            "global_index": self.global_index,
            "nodes": [
                {
                    "index": int(node),
                    "f": float(self.f_values[k]),
                    "center": self.coords[k].tolist(),
                }
                for k, node in enumerate(self.nodes)
            ],
            "edges": [
                {"src": int(src), "dst": int(dst), "weight": float(w)}
                for (src, dst), w in sorted(self.edges.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Lon":
        try:
            if data.get("schema") != LON_SCHEMA:
                raise ValidationError(f"unsupported LON schema: {data.get('schema')!r}")
            nodes = tuple(int(n["index"]) for n in data["nodes"])
            return cls(
                nodes=nodes,
                f_values=np.array([n["f"] for n in data["nodes"]], dtype=float),
                coords=np.array([n["center"] for n in data["nodes"]], dtype=float),
                edges={
                    (int(e["src"]), int(e["dst"])): float(e["weight"])
                    for e in data["edges"]
                },
                global_index=int(data["global_index"]),
                sample_count=int(data["sample_count"]),
                radius=float(data["radius"]),
                kind=str(data.get("kind", "escape")),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed LON record: {exc}") from exc


@dataclass(frozen=True)
class LonFeatures:
    """The eight LON summary statistics, in `FEATURE_COLUMNS` order.

    All path and strength statistics are computed on the monotonic LON;
    ``global_funnel_size`` alone uses the funnel LON. Path averages count the
    target node itself at zero hops and exclude nodes with no path to the
    target.
    """

    num_nodes: int
    edge_density: float
    num_sinks: int
    avg_path_opt: float
    avg_path_sinks: float
    in_strength_opt: float
    in_strength_sinks: float
    global_funnel_size: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValidationError(f"non-finite feature value in {vals}")
        if self.num_nodes < 1 or self.num_sinks < 1:
            raise ValidationError("a LON has at least one node and one sink")
        if not 0.0 <= self.global_funnel_size <= 1.0:
            raise ValidationError("global_funnel_size must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in FEATURE_COLUMNS], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {c: float(getattr(self, c)) for c in FEATURE_COLUMNS}


def build_basins(instance: MsgInstance) -> BasinAssignment:
    """Basin owner of every component, from one batched pass over the centers.

    Dominated components point at their strongest rival; pointer jumping
    collapses the chains to their fixed points. Chains strictly increase the
    objective at each hop, so the fixed points are exactly the local optima.
    """
    is_optimum, rival = ls.center_rivalry(instance)
    optima = ls.optimum_set(is_optimum, instance.weights)
    step = np.where(is_optimum, np.arange(instance.m), rival)
    owner = step.copy()
    while True:
        nxt = step[owner]
        if np.array_equal(nxt, owner):
            break
        owner = nxt
    return BasinAssignment(optima=optima, owner=owner)


def assign_points(instance: MsgInstance, basins: BasinAssignment,
                  points: np.ndarray) -> np.ndarray:
    """Basin optimum for each point: owner of the component attaining the max."""
    scores = ls.component_scores(instance, points)
    return basins.owner[np.argmax(scores, axis=1)]


def assign_point(instance: MsgInstance, basins: BasinAssignment, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=float).ravel()
    return int(assign_points(instance, basins, x[None, :])[0])


def ball_samples(rng: np.random.Generator, center: np.ndarray, radius: float,
                 count: int) -> np.ndarray:
    """Uniform samples from the ball around ``center``, clipped to the unit box."""
    d = center.shape[0]
    direction = rng.standard_normal((count, d))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random(count) ** (1.0 / d)
    points = center[None, :] + direction / norms * radii[:, None]
    return np.clip(points, 0.0, 1.0)


def build_lon(instance: MsgInstance, s: int | None = None, r: float | None = None,
              seed: int = 0, basins: BasinAssignment | None = None) -> Lon:
    """Escape-edge LON of an instance.

    For each local optimum, ``s`` points are drawn uniformly from the radius-r
    ball around its center (clipped to the box) and assigned to basins; the
    edge weight toward another optimum is the fraction of all ``s`` samples
    landing in that optimum's basin. Samples staying home create no edge.

    Each optimum consumes its own RNG stream keyed by (seed, component index),
    so the result does not depend on iteration order. Total cost is one
    m-row kernel pass for the basins plus s rows per optimum.
    """
    if s is None:
        s = ESCAPE_SAMPLES_PER_DIM * instance.dim
    if r is None:
        r = cell_side(instance.dim, instance.m)
    if s < 1:
        raise ValidationError("need at least one escape sample per optimum")
    if r <= 0.0:
        raise ValidationError("escape radius must be positive")
    if basins is None:
        basins = build_basins(instance)

    nodes = basins.optima.indices
    edges: dict[tuple[int, int], float] = {}
    for node in nodes:
        rng = stream(seed, "escape", node)
        pts = ball_samples(rng, instance.centers[node], r, s)
        landed = assign_points(instance, basins, pts)
        targets, counts = np.unique(landed, return_counts=True)
        for tgt, cnt in zip(targets, counts):
            if int(tgt) != node:
                edges[(node, int(tgt))] = cnt / s

    pos = np.asarray(nodes, dtype=np.int64)
    return Lon(
        nodes=nodes,
        f_values=instance.weights[pos].copy(),
        coords=instance.centers[pos].copy(),
        edges=edges,
        global_index=basins.optima.global_index,
        sample_count=s,
        radius=float(r),
        kind="escape",
    )


def monotonic_lon(lon: Lon) -> Lon:
    """Keep only improving edges: (i -> j) survives iff f(j) > f(i).

    The result is acyclic because every surviving edge strictly increases f.
    """
    f_of = dict(zip(lon.nodes, lon.f_values))
    edges = {
        (src, dst): w
        for (src, dst), w in lon.edges.items()
        if f_of[dst] > f_of[src]
    }
    return Lon(
        nodes=lon.nodes,
        f_values=lon.f_values,
        coords=lon.coords,
        edges=edges,
        global_index=lon.global_index,
        sample_count=lon.sample_count,
        radius=lon.radius,
        kind="monotonic",
    )


def funnel_lon(mono: Lon) -> Lon:
    """Prune a monotonic LON to each node's single strongest outgoing edge.

    Ties by weight break toward the higher-f target, then the lower index.
    """
    f_of = dict(zip(mono.nodes, mono.f_values))
    best: dict[int, tuple[tuple[float, float, int], int, float]] = {}
    for (src, dst), w in mono.edges.items():
        key = (w, f_of[dst], -dst)
        if src not in best or key > best[src][0]:
            best[src] = (key, dst, w)
    edges = {(src, dst): w for src, (_, dst, w) in best.items()}
    return Lon(
        nodes=mono.nodes,
        f_values=mono.f_values,
        coords=mono.coords,
        edges=edges,
        global_index=mono.global_index,
        sample_count=mono.sample_count,
        radius=mono.radius,
        kind="funnel",
    )


def _hops_to_targets(nodes: tuple[int, ...], edges: dict[tuple[int, int], float],
                     targets: list[int]) -> dict[int, int]:
    """BFS hop count from every node to its nearest target, following edges forward.

    Implemented as a multi-source BFS over reversed edges. Nodes with no path
    to any target are absent from the result; targets themselves map to 0.
    """
    back: dict[int, list[int]] = {node: [] for node in nodes}
    for src, dst in edges:
        back[dst].append(src)
    dist = {t: 0 for t in targets}
    queue = deque(targets)
    while queue:
        cur = queue.popleft()
        for prev in back[cur]:
            if prev not in dist:
                dist[prev] = dist[cur] + 1
                queue.append(prev)
    return dist


def _funnel_terminus(funnel: Lon) -> dict[int, int]:
    """Endpoint of each node's single-out-edge chain (memoized chase)."""
    succ = {src: dst for (src, dst) in funnel.edges}
    terminus: dict[int, int] = {}
    for node in funnel.nodes:
        trail = []
        cur = node
        while cur not in terminus and cur in succ:
            trail.append(cur)
            cur = succ[cur]
        end = terminus.get(cur, cur)
        for t in trail:
            terminus[t] = end
        terminus[node] = end
    return terminus


def compute_features(lon: Lon) -> LonFeatures:
    """The eight summary statistics of a raw escape LON.

    The monotonic and funnel prunings are derived internally; pass the
    unpruned LON.
    """
    mono = monotonic_lon(lon) if lon.kind == "escape" else lon
    funnel = funnel_lon(mono)
    n = mono.num_nodes
    opt = mono.global_index

    out_deg = {node: 0 for node in mono.nodes}
    in_strength = {node: 0.0 for node in mono.nodes}
    for (src, dst), w in mono.edges.items():
        out_deg[src] += 1
        in_strength[dst] += w
    sinks = [node for node in mono.nodes if out_deg[node] == 0]

    dist_opt = _hops_to_targets(mono.nodes, mono.edges, [opt])
    dist_sink = _hops_to_targets(mono.nodes, mono.edges, sinks)
    terminus = _funnel_terminus(funnel)

    return LonFeatures(
        num_nodes=n,
        edge_density=len(mono.edges) / (n * (n - 1)) if n > 1 else 0.0,
        num_sinks=len(sinks),
        avg_path_opt=float(np.mean(list(dist_opt.values()))),
        avg_path_sinks=float(np.mean(list(dist_sink.values()))),
        in_strength_opt=in_strength[opt],
        in_strength_sinks=float(np.mean([in_strength[s] for s in sinks])),
        global_funnel_size=sum(1 for node in funnel.nodes if terminus[node] == opt) / n,
    )


def analyze_instance(instance: MsgInstance, s: int | None = None,
                     r: float | None = None, seed: int = 0) -> tuple[Lon, LonFeatures]:
    """Build the escape LON and its feature vector in one call."""
    lon = build_lon(instance, s=s, r=r, seed=seed)
    return lon, compute_features(lon)
