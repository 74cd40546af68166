"""Hill-climbing local search, its variants, and budgeted multi-restart runs.

The basic algorithm evaluates the full neighborhood of the current node in
ascending id order and moves to the strictly-improving argmin; it stops at
a local minimum.  Variants:

* ``query_until_lower`` -- neighbors are evaluated in an order shuffled by
  the view's RNG and the walk moves as soon as any strictly lower neighbor
  appears.
* ``continue_at_min`` -- at a local minimum, continue from the best
  evaluated-but-not-yet-expanded node until the budget runs out.
* ``num_initial`` -- draw k random nodes up front and start from the best.

Budget accounting lives in the view: the first observation of a node costs
one evaluation, repeats are free, and a run never observes a new node once
``budget`` distinct nodes have been charged.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field

import numpy as np

from .landscape import Landscape, LandscapeView, NoiseSpec
from .seeding import mix64, spawn_rng
from .topology import Topology

__all__ = [
    "SearchConfig",
    "SearchTrace",
    "RunHistory",
    "local_search",
    "run_budgeted",
    "random_search",
    "run_trials",
]

_START_STREAM = 0xB1


@dataclass(frozen=True)
class SearchConfig:
    budget: int
    num_initial: int = 1
    query_until_lower: bool = False
    continue_at_min: bool = False
    restart_on_convergence: bool = False

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.num_initial < 1:
            raise ValueError("num_initial must be >= 1")
        if self.budget < self.num_initial:
            raise ValueError("budget must cover the initial random draws")


@dataclass
class SearchTrace:
    """Evaluation record of one local-search run.

    ``visited`` lists (node, observed loss) in first-evaluation order within
    this run; ``path`` is the sequence of occupied nodes; ``iterations``
    counts accepted strict-descent moves (continue-at-min jumps excluded).
    """

    visited: list = field(default_factory=list)
    path: list = field(default_factory=list)
    final: int = -1
    iterations: int = 0
    converged: bool = False


@dataclass
class RunHistory:
    """Per-query best-so-far trajectory of a budgeted run."""

    nodes: np.ndarray
    val_loss: np.ndarray
    best_val: np.ndarray
    best_test: np.ndarray | None = None

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def from_view(cls, view: LandscapeView) -> "RunHistory":
        order = view.observation_log()
        nodes = np.asarray(order, dtype=np.int64)
        vals = np.empty(len(order))
        for i, v in enumerate(order):
            vals[i] = view.observe(v)  # cached, free
        best_val = np.minimum.accumulate(vals) if len(vals) else vals.copy()
        test = view.landscape.test_loss
        best_test = None
        if test is not None and len(order):
            best_test = np.empty(len(order))
            best_node = nodes[0]
            best = vals[0]
            for i, v in enumerate(order):
                if vals[i] < best:
                    best = vals[i]
                    best_node = v
                best_test[i] = test[best_node]
        return cls(nodes, vals, best_val, best_test)


class _Budget:
    """Observation helper enforcing the distinct-evaluation budget."""

    def __init__(self, view: LandscapeView, budget: int):
        self.view = view
        self.budget = budget

    def observe(self, v):
        """Returns (value, charged) or (None, False) when the budget is spent."""
        if self.view.seen(v):
            return self.view.observe(v), True
        if self.view.query_count >= self.budget:
            return None, False
        return self.view.observe(v), True

    @property
    def exhausted(self):
        return self.view.query_count >= self.budget


def local_search(view: LandscapeView, start: int, cfg: SearchConfig) -> SearchTrace:
    """Run one local search from ``start`` under the view's noise and budget."""
    t = view.landscape.topology
    if not 0 <= start < t.n:
        raise ValueError(f"start node {start} out of range [0, {t.n})")
    budget = _Budget(view, cfg.budget)
    trace = SearchTrace()
    seen_in_trace = set()

    def record(v, value):
        if v not in seen_in_trace:
            seen_in_trace.add(v)
            trace.visited.append((v, value))

    value, ok = budget.observe(start)
    if not ok:
        trace.final = start
        return trace
    record(start, value)

    # pool of evaluated-but-unexpanded nodes for continue_at_min
    pool: list[tuple[float, int]] = []
    expanded = set()
    if cfg.continue_at_min:
        heapq.heappush(pool, (value, start))

    v, lv = start, value
    trace.path.append(v)
    while True:
        nbrs = t.neighbors(v)
        if cfg.query_until_lower:
            nbrs = view.shuffle_rng.permutation(nbrs)
        best_u, best_val = -1, np.inf
        moved = out_of_budget = False
        full_neighborhood = True
        for u in nbrs:
            u = int(u)
            val, ok = budget.observe(u)
            if not ok:
                out_of_budget = True
                full_neighborhood = False
                break
            record(u, val)
            if cfg.continue_at_min and u not in expanded:
                heapq.heappush(pool, (val, u))
            if cfg.query_until_lower and val < lv:
                v, lv = u, val
                trace.path.append(v)
                trace.iterations += 1
                moved = True
                full_neighborhood = False
                break
            if val < best_val:
                best_u, best_val = u, val
        if moved:
            continue
        if full_neighborhood:
            expanded.add(v)
        if out_of_budget:
            break
        if best_val < lv:  # strict improvement only; ties do not move
            v, lv = best_u, best_val
            trace.path.append(v)
            trace.iterations += 1
            continue
        # local minimum of the observed landscape
        if cfg.continue_at_min and not budget.exhausted:
            nxt = None
            while pool:
                val, u = heapq.heappop(pool)
                if u not in expanded:
                    nxt = (u, val)
                    break
            if nxt is not None:
                v, lv = nxt
                trace.path.append(v)
                continue
        trace.converged = True
        break

    trace.final = v
    return trace


def random_search(view: LandscapeView, t: Topology, budget: int, seed: int) -> RunHistory:
    """Evaluate ``budget`` distinct uniform-random nodes (rejection on repeats)."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > t.n:
        warnings.warn(f"budget {budget} exceeds node count {t.n}; capped")
        budget = t.n
    rng = spawn_rng(seed, _START_STREAM)
    while view.query_count < budget:
        v = int(rng.integers(t.n))
        if not view.seen(v):
            view.observe(v)
    return RunHistory.from_view(view)


def run_budgeted(view: LandscapeView, cfg: SearchConfig, seed: int) -> RunHistory:
    """Budgeted local search with random initialization and optional restarts.

    Draws ``cfg.num_initial`` random starts, seeds local search from the best,
    and (with ``restart_on_convergence``) keeps starting fresh runs while
    budget remains.  Restarts share the view's observation cache, so nodes
    re-encountered across runs cost nothing.
    """
    t = view.landscape.topology
    rng = spawn_rng(seed, _START_STREAM)
    budget = _Budget(view, cfg.budget)
    while True:
        starts = []
        for _ in range(cfg.num_initial):
            v = int(rng.integers(t.n))
            val, ok = budget.observe(v)
            if not ok:
                break
            starts.append((val, v))
        if not starts:
            break
        val, v0 = min(starts)
        trace = local_search(view, v0, cfg)
        if budget.exhausted or not cfg.restart_on_convergence:
            break
        if view.query_count >= t.n:
            break  # everything already evaluated; nothing left to charge
    return RunHistory.from_view(view)


_ALGOS = ("local", "local-qul", "local-cam", "random")


def _search_config(algo: str, budget: int, num_initial: int, restart: bool) -> SearchConfig:
    return SearchConfig(
        budget=budget,
        num_initial=num_initial,
        query_until_lower=(algo == "local-qul"),
        continue_at_min=(algo == "local-cam"),
        restart_on_convergence=restart,
    )


def _run_one_trial(landscape, noise, algo, budget, num_initial, restart, root_seed, trial):
    trial_seed = mix64(root_seed, trial)
    view = LandscapeView(landscape, noise, seed=mix64(trial_seed, 0))
    algo_seed = mix64(trial_seed, 1)
    if algo == "random":
        return random_search(view, landscape.topology, budget, algo_seed)
    cfg = _search_config(algo, budget, num_initial, restart)
    return run_budgeted(view, cfg, algo_seed)


def run_trials(landscape: Landscape, noise: NoiseSpec, algo: str, budget: int,
               trials: int, root_seed: int, num_initial: int = 1,
               restart: bool = True, jobs: int = 1) -> list[RunHistory]:
    """Independent seeded trials of one algorithm, merged by trial index.

    Each trial gets its own view with ``seed = mix64(root_seed, trial)``;
    results are deterministic and independent of ``jobs``.
    """
    if algo not in _ALGOS:
        raise ValueError(f"unknown algo {algo!r}; expected one of {_ALGOS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    args = [(landscape, noise, algo, budget, num_initial, restart, root_seed, i)
            for i in range(trials)]
    if jobs <= 1 or trials <= 1:
        return [_run_one_trial(*a) for a in args]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one_trial_star, args, chunksize=max(1, trials // (4 * jobs))))


def _run_one_trial_star(args):
    return _run_one_trial(*args)
