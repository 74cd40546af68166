"""Loss assignment, observation noise, and landscape persistence.

A :class:`Landscape` pins a base loss to every node of a topology.  A
:class:`LandscapeView` mediates noisy access to it under a
:class:`NoiseSpec` and enforces the cache contract: every node is charged
at most one evaluation no matter how often it is re-queried, and under all
frozen modes the value observed for a node does not depend on query order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field


import numpy as np
from scipy.special import ndtr, ndtri

from .seeding import spawn_rng
from .topology import Topology

__all__ = [
    "Landscape",
    "LandscapeError",
    "LandscapeView",
    "NoiseSpec",
    "sample_uniform",
    "sample_markov_truncnorm",
    "truncnorm_pdf",
    "sample_truncnorm",
    "load_tabular",
    "save_landscape",
    "load_landscape",
]

_FORMAT = "hillscape-landscape/v1"
_NOISE_STREAM = 0xA1
_SHUFFLE_STREAM = 0xA2


class LandscapeError(ValueError):
    """Malformed landscape data or an invalid observation request."""


# -- truncated normal on [0, 1] --------------------------------------------


def truncnorm_pdf(u, center, sigma):
    """Density at ``u`` of a normal(center, sigma) renormalized to [0, 1].

    Zero outside [0, 1].  Vectorized over ``u``.
    """
    if sigma <= 0:
        raise LandscapeError("sigma must be positive")
    u = np.asarray(u, dtype=float)
    z = ndtr((1.0 - center) / sigma) - ndtr((0.0 - center) / sigma)
    phi = np.exp(-0.5 * ((u - center) / sigma) ** 2) / np.sqrt(2.0 * np.pi)
    dens = phi / (sigma * z)
    dens = np.where((u < 0.0) | (u > 1.0), 0.0, dens)
    return dens if dens.ndim else float(dens)


def _truncnorm_ppf(q, center, sigma):
    a = ndtr((0.0 - center) / sigma)
    b = ndtr((1.0 - center) / sigma)
    x = center + sigma * ndtri(a + q * (b - a))
    return np.clip(x, 0.0, 1.0)


def sample_truncnorm(center, sigma, rng, size=None):
    """Inverse-CDF sample(s) from the [0, 1]-truncated normal."""
    if sigma <= 0:
        raise LandscapeError("sigma must be positive")
    q = rng.random(size)
    return _truncnorm_ppf(q, center, sigma)


# -- landscape container ----------------------------------------------------


@dataclass
class Landscape:
    """Base losses on a topology, with optional test losses and provenance."""

    topology: Topology
    val_loss: np.ndarray
    test_loss: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.val_loss = np.asarray(self.val_loss, dtype=np.float64)
        if self.val_loss.shape != (self.topology.n,):
            raise LandscapeError(
                f"val_loss must have length {self.topology.n}, got {self.val_loss.shape}"
            )
        if not np.isfinite(self.val_loss).all():
            raise LandscapeError("val_loss contains non-finite values")
        self.val_loss.setflags(write=False)
        if self.test_loss is not None:
            self.test_loss = np.asarray(self.test_loss, dtype=np.float64)
            if self.test_loss.shape != (self.topology.n,):
                raise LandscapeError("test_loss length mismatch")
            if not np.isfinite(self.test_loss).all():
                raise LandscapeError("test_loss contains non-finite values")
            self.test_loss.setflags(write=False)

    @property
    def n(self) -> int:
        return self.topology.n


# -- noise models ------------------------------------------------------------

_MODES = ("none", "gaussian_frozen", "gaussian_fresh", "seed_average",
          "uniform_replace", "scaled")


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """How observed losses deviate from base losses.

    Use the constructors (``NoiseSpec.none()`` etc.) rather than the raw
    dataclass.  Every mode except ``gaussian_fresh`` is *frozen*: the value a
    view reports for a node is a pure function of (view seed, node id).
    """

    mode: str
    sigma: float = 0.0
    k: int = 1
    x: float = 0.0
    sigma_base: object = None  # scalar or per-node array for "scaled"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise LandscapeError(f"unknown noise mode {self.mode!r}")
        if self.sigma < 0:
            raise LandscapeError("sigma must be >= 0")
        if self.k < 1:
            raise LandscapeError("seed-average k must be >= 1")
        if self.x < 0:
            raise LandscapeError("scale factor x must be >= 0")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def gaussian_frozen(cls, sigma):
        return cls("gaussian_frozen", sigma=float(sigma))

    @classmethod
    def gaussian_fresh(cls, sigma):
        return cls("gaussian_fresh", sigma=float(sigma))

    @classmethod
    def seed_average(cls, sigma, k):
        return cls("seed_average", sigma=float(sigma), k=int(k))

    @classmethod
    def uniform_replace(cls):
        return cls("uniform_replace")

    @classmethod
    def scaled(cls, sigma_base, x):
        base = np.asarray(sigma_base, dtype=float)
        if np.any(base < 0) or not np.isfinite(base).all():
            raise LandscapeError("sigma_base must be finite and >= 0")
        return cls("scaled", x=float(x), sigma_base=sigma_base)

    @property
    def frozen(self) -> bool:
        return self.mode != "gaussian_fresh"

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Parse CLI-style specs: ``none``, ``gaussian:0.1``, ``gaussian-fresh:0.1``,
        ``seed-average:0.1,3``, ``uniform-replace``, ``scaled:1.0,0.02``
        (x, sigma_base)."""
        name, _, params = text.partition(":")
        try:
            if name == "none":
                return cls.none()
            if name == "gaussian":
                return cls.gaussian_frozen(float(params))
            if name == "gaussian-fresh":
                return cls.gaussian_fresh(float(params))
            if name == "seed-average":
                sigma, k = params.split(",")
                return cls.seed_average(float(sigma), int(k))
            if name == "uniform-replace":
                return cls.uniform_replace()
            if name == "scaled":
                parts = params.split(",")
                x = float(parts[0])
                sigma_base = float(parts[1]) if len(parts) > 1 else 1.0
                return cls.scaled(sigma_base, x)
        except (ValueError, IndexError) as exc:
            raise LandscapeError(f"bad noise spec {text!r}: {exc}") from None
        raise LandscapeError(f"unknown noise mode {name!r}")

    def describe(self) -> str:
        if self.mode == "none":
            return "none"
        if self.mode == "gaussian_frozen":
            return f"gaussian:{self.sigma}"
        if self.mode == "gaussian_fresh":
            return f"gaussian-fresh:{self.sigma}"
        if self.mode == "seed_average":
            return f"seed-average:{self.sigma},{self.k}"
        if self.mode == "uniform_replace":
            return "uniform-replace"
        base = self.sigma_base
        base_txt = repr(float(base)) if np.ndim(base) == 0 else "<array>"
        return f"scaled:{self.x},{base_txt}"


class LandscapeView:
    """Single-owner noisy access to a landscape.

    Tracks a query counter for budget accounting: the first observation of a
    node increments it, repeats are free (cache contract).  ``shuffle_rng``
    is the view's dedicated stream for search-side randomization.
    """

    def __init__(self, landscape: Landscape, noise: NoiseSpec | None = None, seed: int = 0):
        self.landscape = landscape
        self.noise = noise if noise is not None else NoiseSpec.none()
        self.seed = int(seed)
        self.shuffle_rng = spawn_rng(self.seed, _SHUFFLE_STREAM)
        n = landscape.n
        self._values: np.ndarray | None = None
        self._fresh_rng = spawn_rng(self.seed, _NOISE_STREAM)
        self._queried = np.zeros(n, dtype=bool)
        self._count = 0
        self._log: list[int] = []

    # -- observation ------------------------------------------------------

    def observe(self, v: int) -> float:
        n = self.landscape.n
        if not 0 <= v < n:
            raise LandscapeError(f"node id {v} out of range [0, {n})")
        if self.noise.frozen:
            vals = self._materialize()
            value = float(vals[v])
        else:
            if self._values is None:
                self._values = np.full(n, np.nan)
            if self._queried[v]:
                return float(self._values[v])
            value = float(
                self.landscape.val_loss[v]
                + self.noise.sigma * self._fresh_rng.standard_normal()
            )
            self._values[v] = value
        if not self._queried[v]:
            self._queried[v] = True
            self._count += 1
            self._log.append(v)
        return value

    def seen(self, v: int) -> bool:
        return bool(self._queried[v])

    @property
    def query_count(self) -> int:
        return self._count

    def observation_log(self) -> list[int]:
        """Node ids in first-observation order."""
        return list(self._log)

    def frozen_values(self) -> np.ndarray:
        """The full observation vector (frozen modes only; read-only).

        Exhaustive analytics read this directly; it does not touch the
        query counter, which accounts for search budgets only.
        """
        if not self.noise.frozen:
            raise LandscapeError(
                "fresh-noise views have no frozen observation vector"
            )
        return self._materialize()

    def _materialize(self) -> np.ndarray:
        if self._values is not None:
            return self._values
        base = self.landscape.val_loss
        n = base.shape[0]
        spec = self.noise
        rng = spawn_rng(self.seed, _NOISE_STREAM)
        if spec.mode == "none":
            vals = base.copy()
        elif spec.mode == "gaussian_frozen":
            vals = base + spec.sigma * rng.standard_normal(n)
        elif spec.mode == "seed_average":
            vals = base.copy()
            if spec.sigma > 0:
                chunk = max(1, int(1e7) // spec.k)
                for lo in range(0, n, chunk):
                    hi = min(lo + chunk, n)
                    draws = rng.standard_normal((hi - lo, spec.k))
                    vals[lo:hi] += spec.sigma * draws.mean(axis=1)
        elif spec.mode == "uniform_replace":
            vals = rng.random(n)
        elif spec.mode == "scaled":
            sigma_base = np.broadcast_to(
                np.asarray(spec.sigma_base, dtype=float), (n,)
            )
            vals = base + spec.x * sigma_base * rng.standard_normal(n)
        else:  # pragma: no cover - guarded by NoiseSpec validation
            raise LandscapeError(f"unhandled mode {spec.mode}")
        vals.setflags(write=False)
        self._values = vals
        return vals


# -- generators --------------------------------------------------------------


def sample_uniform(t: Topology, seed: int) -> Landscape:
    """I.i.d. uniform [0, 1] losses; deterministic for a fixed seed."""
    rng = np.random.default_rng(int(seed))
    vals = rng.random(t.n)
    meta = {"generator": "uniform", "params": {}, "seed": int(seed)}
    return Landscape(t, vals, meta=meta)


def sample_markov_truncnorm(t: Topology, sigma_local: float, root_center: float,
                            root_sigma: float, seed: int) -> Landscape:
    """Correlated losses: BFS from node 0, each node drawn around its parent.

    The root loss is truncnorm(root_center, root_sigma); every other node is
    truncnorm(parent_loss, sigma_local) where the parent is its BFS
    discoverer (frontier processed in ascending id order, so the structure
    and draw order are deterministic for a fixed seed).
    """
    if sigma_local <= 0 or root_sigma <= 0:
        raise LandscapeError("sigma must be positive")
    rng = np.random.default_rng(int(seed))
    n = t.n
    vals = np.full(n, np.nan)
    vals[0] = _truncnorm_ppf(rng.random(), root_center, root_sigma)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = np.asarray([0], dtype=np.int64)
    while frontier.size:
        block, mask = t.neighbors_block(frontier)
        parents = np.repeat(frontier, block.shape[1])
        flat = block.ravel()
        keep = mask.ravel() & ~seen[flat]
        flat, parents = flat[keep], parents[keep]
        uniq, first = np.unique(flat, return_index=True)
        if uniq.size == 0:
            break
        centers = vals[parents[first]]
        vals[uniq] = _truncnorm_ppf(rng.random(uniq.size), centers, sigma_local)
        seen[uniq] = True
        frontier = uniq
    if not seen.all():
        raise LandscapeError("topology is disconnected")
    meta = {
        "generator": "markov-truncnorm",
        "params": {
            "sigma_local": float(sigma_local),
            "root_center": float(root_center),
            "root_sigma": float(root_sigma),
        },
        "seed": int(seed),
    }
    return Landscape(t, vals, meta=meta)


# -- tabular ingestion and persistence ----------------------------------------


def _open_text(source, mode="r"):
    if hasattr(source, "read") or hasattr(source, "write"):
        return source, False
    return open(source, mode, encoding="utf-8", newline=""), True


def load_tabular(source, t: Topology) -> Landscape:
    """Load losses from ``id,val_loss[,test_loss]`` CSV (one row per node)."""
    fh, owned = _open_text(source)
    try:
        text = fh.read()
    finally:
        if owned:
            fh.close()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise LandscapeError("empty landscape file")
    header = [c.strip() for c in lines[0].split(",")]
    if header == ["id", "val_loss"]:
        has_test = False
    elif header == ["id", "val_loss", "test_loss"]:
        has_test = True
    else:
        raise LandscapeError(
            f"unsupported landscape header/version: {lines[0]!r}"
        )
    rows = lines[1:]
    if len(rows) != t.n:
        raise LandscapeError(f"expected {t.n} rows, found {len(rows)}")
    ids = np.empty(t.n, dtype=np.int64)
    val = np.empty(t.n)
    test = np.empty(t.n) if has_test else None
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != len(header):
            raise LandscapeError(f"row {i + 2}: expected {len(header)} columns")
        try:
            ids[i] = int(parts[0])
            val[i] = float(parts[1])
            if has_test:
                test[i] = float(parts[2])
        except ValueError:
            raise LandscapeError(f"row {i + 2}: malformed value") from None
    if ids.min() < 0 or ids.max() >= t.n or len(np.unique(ids)) != t.n:
        raise LandscapeError("duplicate or missing id")
    order = np.argsort(ids)
    val = val[order]
    if has_test:
        test = test[order]
    if not np.isfinite(val).all() or (has_test and not np.isfinite(test).all()):
        raise LandscapeError("non-finite loss values")
    src = getattr(source, "name", None) or (source if isinstance(source, str) else "<stream>")
    meta = {"source": str(src), "columns": header}
    return Landscape(t, val, test_loss=test, meta=meta)


def _meta_path(path: str) -> str:
    stem, ext = os.path.splitext(path)
    return stem + ".meta.json"


def save_landscape(landscape: Landscape, path: str) -> None:
    """Write the CSV (rows sorted by id) plus the ``<name>.meta.json`` sidecar.

    Floats are written with repr, so a save/load round trip is bit-exact.
    """
    has_test = landscape.test_loss is not None
    header = "id,val_loss,test_loss" if has_test else "id,val_loss"
    out = [header]
    for i in range(landscape.n):
        row = f"{i},{float(landscape.val_loss[i])!r}"
        if has_test:
            row += f",{float(landscape.test_loss[i])!r}"
        out.append(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(out) + "\n")
    sidecar = {
        "format": _FORMAT,
        "topology": landscape.topology.to_spec(),
        "n": landscape.n,
        "meta": landscape.meta,
    }
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_landscape(path: str, topology: Topology | None = None) -> Landscape:
    """Load a landscape saved by :func:`save_landscape`.

    The topology is rebuilt from the sidecar for generated kinds; custom
    topologies must be supplied explicitly.
    """
    meta_file = _meta_path(path)
    sidecar = None
    if os.path.exists(meta_file):
        with open(meta_file, encoding="utf-8") as fh:
            sidecar = json.load(fh)
        if sidecar.get("format") != _FORMAT:
            raise LandscapeError(
                f"unsupported landscape file header/version: {sidecar.get('format')!r}"
            )
    if topology is None:
        if sidecar is None:
            raise LandscapeError(f"missing sidecar {meta_file}; pass a topology explicitly")
        spec = sidecar.get("topology", "")
        if spec.startswith("custom"):
            raise LandscapeError("custom topology cannot be rebuilt from metadata; pass one")
        topology = Topology.from_spec(spec)
    landscape = load_tabular(path, topology)
    if sidecar is not None:
        landscape.meta = dict(sidecar.get("meta", {}))
    return landscape
