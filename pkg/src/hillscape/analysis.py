"""Exhaustive landscape analytics over frozen views.

Everything here is defined with respect to the deterministic successor map
``succ[v] = argmin-loss neighbor if it strictly improves, else v`` (the
full-neighborhood rule with ascending-id tie-break), so basins, preimages
and convergence statistics are reproducible functions of the view.
Fresh-noise views are rejected: their successor is not well-defined.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .landscape import LandscapeError, LandscapeView
from .seeding import spawn_rng
from .topology import TopologyError

__all__ = [
    "SuccessorMap",
    "LandscapeStats",
    "successor_map",
    "find_local_minima",
    "basins",
    "within_epsilon_curve",
    "preimage_sizes",
    "rwa",
    "export_search_tree",
    "tree_to_dot",
]

_WALK_STREAM = 0xC1


@dataclass
class SuccessorMap:
    """One hill-climbing step for every node of a frozen view."""

    succ: np.ndarray
    values: np.ndarray

    @property
    def n(self):
        return len(self.succ)

    def minima(self) -> np.ndarray:
        return np.flatnonzero(self.succ == np.arange(self.n))


@dataclass
class LandscapeStats:
    """Convergence statistics over all n starts.

    ``avg_iterations`` counts neighborhood sweeps until convergence,
    including the final sweep that certifies the minimum: a start already
    at a local minimum counts 1, a start one move away counts 2, and so on.
    """

    num_local_minima: int
    avg_iterations: float
    fraction_reaching_global_min: float
    basin_minima: np.ndarray
    basin_sizes: np.ndarray
    within_epsilon: list = field(default_factory=list)


def _frozen(view: LandscapeView) -> np.ndarray:
    if not view.noise.frozen:
        raise LandscapeError("analysis requires a frozen view (fresh noise rejected)")
    return view.frozen_values()


def successor_map(view: LandscapeView) -> SuccessorMap:
    """Full n-length successor map with ascending-id tie-breaking."""
    cached = getattr(view, "_successor_map", None)
    if cached is not None:
        return cached
    values = _frozen(view)
    t = view.landscape.topology
    n = t.n
    ids = np.arange(n)
    block, mask = t.padded_neighbors()
    if block.shape[1] == 0:
        succ = ids.copy()
    else:
        gathered = values[block]
        gathered = np.where(mask, gathered, np.inf)
        k = np.argmin(gathered, axis=1)
        best = gathered[ids, k]
        succ = np.where(best < values, block[ids, k], ids)
    smap = SuccessorMap(succ, values)
    view._successor_map = smap
    return smap


def find_local_minima(view: LandscapeView) -> np.ndarray:
    """Ids of nodes strictly below their whole neighborhood, ascending."""
    return successor_map(view).minima()


def _fixed_points_and_depth(succ: np.ndarray):
    """(terminal node, step count) for every start, by iterating the map."""
    cur = succ.copy()
    depth = (cur != np.arange(len(succ))).astype(np.int64)
    while True:
        nxt = succ[cur]
        moving = nxt != cur
        if not moving.any():
            return cur, depth
        depth[moving] += 1
        cur = nxt


def basins(view: LandscapeView, use_base_loss_for_global: bool = False):
    """Basin assignment (node -> its minimum) and convergence statistics.

    The global minimum is the argmin of observed values; set
    ``use_base_loss_for_global`` to measure against the base landscape
    instead.
    """
    smap = successor_map(view)
    assignment, depth = _fixed_points_and_depth(smap.succ)
    minima = smap.minima()
    sizes = np.bincount(assignment, minlength=smap.n)[minima]
    ref = view.landscape.val_loss if use_base_loss_for_global else smap.values
    global_node = int(np.argmin(ref))
    stats = LandscapeStats(
        num_local_minima=int(minima.size),
        avg_iterations=float(depth.mean()) + 1.0,  # moves + the certifying sweep
        fraction_reaching_global_min=float((assignment == global_node).mean()),
        basin_minima=minima,
        basin_sizes=sizes,
    )
    return assignment, stats


def within_epsilon_curve(view: LandscapeView, eps_grid) -> list[tuple[float, float]]:
    """Fraction of starts whose terminal minimum lies within eps of the best."""
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or len(eps) == 0:
        raise ValueError("eps grid must be a non-empty 1-d sequence")
    if (eps < 0).any() or (np.diff(eps) < 0).any():
        raise ValueError("eps grid must be ascending and non-negative")
    smap = successor_map(view)
    assignment, _ = _fixed_points_and_depth(smap.succ)
    terminal = smap.values[assignment]
    gmin = smap.values.min()
    return [(float(e), float((terminal - gmin <= e).mean())) for e in eps]


def _predecessor_lists(succ: np.ndarray):
    order = np.argsort(succ, kind="stable")
    sorted_succ = succ[order]
    starts = np.searchsorted(sorted_succ, np.arange(len(succ)), side="left")
    ends = np.searchsorted(sorted_succ, np.arange(len(succ)), side="right")
    return order, starts, ends


def preimage_sizes(view: LandscapeView, v: int, max_k: int):
    """([|LS^-1(v)|, ..., |LS^-max_k(v)|], |LS^-*(v)|) by reverse BFS.

    The full preimage counts every level until exhaustion (not just max_k)
    and excludes ``v`` itself.
    """
    smap = successor_map(view)
    if not 0 <= v < smap.n:
        raise LandscapeError(f"node id {v} out of range")
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    order, starts, ends = _predecessor_lists(smap.succ)
    per_level = []
    total = 0
    level = order[starts[v]:ends[v]]
    level = level[level != v]
    while level.size:
        per_level.append(int(level.size))
        total += int(level.size)
        nxt = [order[starts[u]:ends[u]] for u in level]
        level = np.concatenate(nxt) if nxt else np.empty(0, dtype=np.int64)
    counts = per_level[:max_k] + [0] * max(0, max_k - len(per_level))
    return counts, total


def rwa(view: LandscapeView, walk_len: int, max_lag: int, seed: int):
    """Random-walk autocorrelation rows ``(lag, sqrt(lag), rho)``.

    Uniform-neighbor walk of ``walk_len`` steps; rho is the biased sample
    autocorrelation (lag-0 normalized, so |rho| <= 1).  The sqrt column
    follows the convention that a walk reaches mean distance sqrt(N) after
    N steps.
    """
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if walk_len < 2 * max_lag:
        raise ValueError("walk_len must be at least 2 * max_lag")
    t = view.landscape.topology
    if not t.is_connected():
        raise LandscapeError("random walk requires a connected topology")
    rng = spawn_rng(seed, _WALK_STREAM)
    pos = int(rng.integers(t.n))
    frozen = view.noise.frozen
    values = view.frozen_values() if frozen else None
    xs = np.empty(walk_len)
    try:
        block, mask = t.padded_neighbors()
        degs = mask.sum(axis=1)
        draws = rng.random(walk_len)
        for i in range(walk_len):
            pos = int(block[pos, int(draws[i] * degs[pos])])
            xs[i] = values[pos] if frozen else view.observe(pos)
    except TopologyError:
        # graph too large to materialize: per-step neighbor generation
        for i in range(walk_len):
            nbrs = t.neighbors(pos)
            pos = int(nbrs[int(rng.random() * len(nbrs))])
            xs[i] = values[pos] if frozen else view.observe(pos)
    xs = xs - xs.mean()
    c0 = float(np.dot(xs, xs)) / walk_len
    if c0 == 0.0:
        raise LandscapeError("constant walk values; autocorrelation undefined")
    rows = []
    for lag in range(max_lag + 1):
        ct = float(np.dot(xs[: walk_len - lag], xs[lag:])) / walk_len
        rows.append((lag, float(np.sqrt(lag)), ct / c0))
    return rows


def export_search_tree(view: LandscapeView, top_k: int) -> list[dict]:
    """Preimage trees of the ``top_k`` lowest-loss minima, JSON-ready.

    Each tree node is ``{"min_id", "loss", "depth", "children"}``; edges
    child -> parent correspond to one search iteration.  ``top_k`` beyond
    the number of minima is capped with a warning.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    smap = successor_map(view)
    minima = smap.minima()
    if top_k > minima.size:
        warnings.warn(
            f"top_k={top_k} exceeds the {minima.size} local minima; exporting all"
        )
        top_k = minima.size
    ranked = minima[np.argsort(smap.values[minima], kind="stable")][:top_k]
    order, starts, ends = _predecessor_lists(smap.succ)

    def build(node: int, depth: int) -> dict:
        preds = order[starts[node]:ends[node]]
        preds = preds[preds != node]
        return {
            "min_id": int(node),
            "loss": float(smap.values[node]),
            "depth": depth,
            "children": [build(int(u), depth + 1) for u in preds],
        }

    return [build(int(v), 0) for v in ranked]


def tree_to_dot(tree: dict) -> str:
    """Graphviz DOT for one exported preimage tree (edges child -> parent)."""
    lines = [f"digraph preimage_tree_{tree['min_id']} {{"]

    def walk(node):
        lines.append(
            f'  n{node["min_id"]} [label="{node["min_id"]}\\n{node["loss"]:.6f}"];'
        )
        for child in node["children"]:
            lines.append(f'  n{child["min_id"]} -> n{node["min_id"]};')
            walk(child)

    walk(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"
