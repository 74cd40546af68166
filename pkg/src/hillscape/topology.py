"""Neighborhood graphs for discrete search spaces.

Nodes are dense integer ids ``0..n-1`` and every neighbor list is returned
in ascending id order -- the tie-breaking contract everything downstream
(successor maps, search traces) relies on.

Generated kinds:

* ``clique_power`` -- the Cartesian product (K_m)^d.  Nodes are length-d
  strings over m symbols in little-endian mixed radix
  (id = sum_i digit_i * m^i); two nodes are adjacent iff they differ in
  exactly one digit.  Neighbors are generated arithmetically, adjacency is
  never materialized.
* ``complete`` -- K_n.
* ``regular_tree`` -- rooted tree where the root has ``arity`` children and
  every internal non-root node has ``arity - 1`` children, so every
  internal node has degree ``arity``; leaves sit at ``depth``.  Ids are
  assigned level by level.
* ``custom`` -- adjacency loaded from the text format described in
  :func:`load_adjacency`; input edges are symmetrized.
"""

from __future__ import annotations

import io


import numpy as np

__all__ = [
    "Topology",
    "TopologyError",
    "make_clique_power",
    "make_complete",
    "make_regular_tree",
    "load_adjacency",
    "neighbors",
    "shell_sizes",
    "branching_fraction",
    "branching_fractions",
]

# ids must stay comfortably inside int64 for array indexing
_MAX_NODES = 1 << 62
# padded neighbor matrices larger than this are refused (entries)
_MAX_DENSE_ENTRIES = 1 << 28


class TopologyError(ValueError):
    """Invalid construction parameters or malformed adjacency input."""


def _tree_level_offsets(arity: int, depth: int) -> np.ndarray:
    sizes = [1, arity] + [0] * (depth - 1)
    for k in range(2, depth + 1):
        sizes[k] = sizes[k - 1] * (arity - 1)
    return np.concatenate([[0], np.cumsum(sizes)])


class Topology:
    """A finite undirected neighborhood graph.

    Immutable after construction; safe to share across threads.  Use the
    ``make_*`` constructors or :func:`load_adjacency` rather than
    instantiating directly.
    """

    def __init__(self, kind, n, degree, *, m=None, d=None, arity=None,
                 depth=None, indptr=None, indices=None):
        self.kind = kind
        self.n = int(n)
        self.degree = None if degree is None else int(degree)
        self.m = m
        self.d = d
        self.arity = arity
        self.depth = depth
        self._indptr = indptr
        self._indices = indices
        if kind == "regular_tree" and arity is not None:
            self._level_offsets = _tree_level_offsets(arity, depth)
        else:
            self._level_offsets = None
        self._padded = None  # lazy (matrix, mask) cache

    def __reduce__(self):
        return (Topology, (self.kind, self.n, self.degree), {
            "m": self.m, "d": self.d, "arity": self.arity, "depth": self.depth,
            "_indptr": self._indptr, "_indices": self._indices,
        })

    def __setstate__(self, state):
        self.m = state["m"]
        self.d = state["d"]
        self.arity = state["arity"]
        self.depth = state["depth"]
        self._indptr = state["_indptr"]
        self._indices = state["_indices"]
        if self.kind == "regular_tree":
            self._level_offsets = _tree_level_offsets(self.arity, self.depth)
        else:
            self._level_offsets = None
        self._padded = None

    def __repr__(self):
        return f"Topology({self.to_spec()!r}, n={self.n})"

    # -- neighbor access ------------------------------------------------

    def neighbors(self, v: int) -> np.ndarray:
        """Neighbor ids of ``v`` in ascending order."""
        self._check_id(v)
        v = int(v)
        if self.kind == "clique_power":
            m, d = self.m, self.d
            out = np.empty(self.degree, dtype=np.int64)
            idx = 0
            stride = 1
            for _ in range(d):
                digit = (v // stride) % m
                base = v - digit * stride
                for q in range(m):
                    if q != digit:
                        out[idx] = base + q * stride
                        idx += 1
                stride *= m
            out.sort()
            return out
        if self.kind == "complete":
            return np.concatenate([np.arange(v, dtype=np.int64),
                                   np.arange(v + 1, self.n, dtype=np.int64)])
        if self.kind == "custom":
            return self._indices[self._indptr[v]:self._indptr[v + 1]]
        block, mask = self.neighbors_block(np.asarray([v], dtype=np.int64))
        return block[0][mask[0]]

    def neighbors_block(self, vs: np.ndarray):
        """Neighbors for a batch of nodes.

        Returns ``(block, mask)`` where ``block`` has shape
        ``(len(vs), max_degree)`` with rows sorted ascending and padded with
        the node's own id, and ``mask`` marks real neighbors.
        """
        vs = np.asarray(vs, dtype=np.int64)
        if self.kind == "clique_power":
            return self._clique_block(vs)
        if self.kind == "complete":
            return self._complete_block(vs)
        if self.kind == "regular_tree":
            return self._tree_block(vs)
        return self._csr_block(vs)

    def _clique_block(self, vs):
        m, d = self.m, self.d
        cols = []
        for p in range(d):
            stride = m**p
            dig = (vs // stride) % m
            base = vs - dig * stride
            for q in range(m):
                col = base + q * stride
                cols.append(np.where(q == dig, vs, col))
        block = np.sort(np.stack(cols, axis=1), axis=1)
        # each row contains the node itself d times (once per position)
        mask = block != vs[:, None]
        s = self.degree
        out = np.empty((len(vs), s), dtype=np.int64)
        out[:] = block[mask].reshape(len(vs), s)
        return out, np.ones_like(out, dtype=bool)

    def _complete_block(self, vs):
        n = self.n
        if n == 1:
            return np.zeros((len(vs), 0), dtype=np.int64), np.zeros((len(vs), 0), dtype=bool)
        all_ids = np.broadcast_to(np.arange(n, dtype=np.int64), (len(vs), n))
        mask = all_ids != vs[:, None]
        out = all_ids[mask].reshape(len(vs), n - 1)
        return out, np.ones_like(out, dtype=bool)

    def _tree_block(self, vs):
        a, depth = self.arity, self.depth
        off = self._level_offsets
        lev = np.searchsorted(off, vs, side="right") - 1
        pos = vs - off[lev]
        maxdeg = a
        block = np.full((len(vs), maxdeg), -1, dtype=np.int64)
        # parent first (always the smallest neighbor id)
        root = lev == 0
        l1 = lev == 1
        deeper = lev >= 2
        block[l1, 0] = 0
        block[deeper, 0] = off[lev[deeper] - 1] + pos[deeper] // (a - 1)
        # children
        internal = lev < depth
        nch = np.where(root, a, a - 1)
        start = np.where(
            lev == 0,
            off[1],
            off[np.minimum(lev + 1, depth)] + pos * (a - 1),
        )
        for j in range(a):
            take = internal & (j < nch)
            col = np.where(root, j, j + 1)  # children go after the parent slot
            block[take, col[take]] = start[take] + j
        mask = block >= 0
        block = np.where(mask, block, vs[:, None])
        return block, mask

    def _csr_block(self, vs):
        degs = self._indptr[vs + 1] - self._indptr[vs]
        maxdeg = int(degs.max()) if len(vs) else 0
        block = np.repeat(vs[:, None], max(maxdeg, 1), axis=1)
        mask = np.zeros_like(block, dtype=bool)
        for i, v in enumerate(vs):
            lo, hi = self._indptr[v], self._indptr[v + 1]
            block[i, : hi - lo] = self._indices[lo:hi]
            mask[i, : hi - lo] = True
        return block, mask

    def padded_neighbors(self):
        """Full ``(n, max_degree)`` neighbor matrix padded with self ids.

        Pad entries sit after the real (ascending) neighbors, so a row-wise
        ``argmin`` over gathered values honors the lowest-id tie-break.
        Cached on the topology; refused for graphs too large to hold.
        """
        if self._padded is None:
            maxdeg = self.max_degree()
            if self.n * max(maxdeg, 1) > _MAX_DENSE_ENTRIES:
                raise TopologyError(
                    f"neighbor matrix with {self.n} x {maxdeg} entries is too large"
                )
            self._padded = self.neighbors_block(np.arange(self.n, dtype=np.int64))
        return self._padded

    # -- structure queries ----------------------------------------------

    def degree_of(self, v: int) -> int:
        self._check_id(v)
        if self.kind == "clique_power":
            return self.degree
        if self.kind == "complete":
            return self.n - 1
        if self.kind == "regular_tree":
            lev = int(np.searchsorted(self._level_offsets, v, side="right") - 1)
            if lev == self.depth:
                return 1
            return self.arity
        return int(self._indptr[v + 1] - self._indptr[v])

    def max_degree(self) -> int:
        if self.kind == "custom":
            return int((self._indptr[1:] - self._indptr[:-1]).max())
        if self.kind == "regular_tree":
            return self.arity
        return self.degree

    def diameter(self) -> int:
        if self.kind == "clique_power":
            return self.d
        if self.kind == "complete":
            return 0 if self.n == 1 else 1
        if self.kind == "regular_tree":
            return 2 * self.depth
        ecc = 0
        for v in range(self.n):
            shells = shell_sizes(self, v)
            if sum(shells) != self.n:
                raise TopologyError("graph is disconnected; diameter undefined")
            ecc = max(ecc, len(shells) - 1)
        return ecc

    def is_connected(self) -> bool:
        return sum(shell_sizes(self, 0)) == self.n

    def to_spec(self) -> str:
        if self.kind == "clique_power":
            return f"clique-power:{self.m},{self.d}"
        if self.kind == "complete":
            return f"complete:{self.n}"
        if self.kind == "regular_tree":
            return f"tree:{self.arity},{self.depth}"
        return f"custom:{self.n}"

    @classmethod
    def from_spec(cls, text: str) -> "Topology":
        """Parse ``clique-power:m,d`` / ``complete:n`` / ``tree:arity,depth``."""
        name, _, params = text.partition(":")
        try:
            if name == "clique-power":
                m, d = (int(p) for p in params.split(","))
                return make_clique_power(m, d)
            if name == "complete":
                return make_complete(int(params))
            if name == "tree":
                arity, depth = (int(p) for p in params.split(","))
                return make_regular_tree(arity, depth)
        except ValueError as exc:
            raise TopologyError(f"bad topology spec {text!r}: {exc}") from None
        raise TopologyError(f"unknown topology kind {name!r} (custom graphs load from file)")

    def _check_id(self, v):
        if not 0 <= int(v) < self.n:
            raise TopologyError(f"node id {v} out of range [0, {self.n})")


# -- constructors ---------------------------------------------------------


def make_clique_power(m: int, d: int) -> Topology:
    """(K_m)^d: nodes are d-digit base-m strings, adjacent iff they differ in one digit."""
    if m < 2:
        raise TopologyError("clique power needs m >= 2")
    if d < 1:
        raise TopologyError("clique power needs d >= 1")
    n = m**d
    if n > _MAX_NODES:
        raise TopologyError(f"m**d = {n} exceeds the supported node-id range")
    return Topology("clique_power", n, d * (m - 1), m=m, d=d)


def make_complete(n: int) -> Topology:
    if n < 1:
        raise TopologyError("complete graph needs n >= 1")
    return Topology("complete", n, n - 1)


def make_regular_tree(arity: int, depth: int) -> Topology:
    if arity < 2:
        raise TopologyError("regular tree needs arity >= 2")
    if depth < 1:
        raise TopologyError("regular tree needs depth >= 1")
    n = 1 + arity
    width = arity
    for _ in range(2, depth + 1):
        width *= arity - 1
        n += width
        if n > _MAX_NODES:
            raise TopologyError("tree node count exceeds the supported id range")
    return Topology("regular_tree", n, None, arity=arity, depth=depth)


def load_adjacency(source) -> Topology:
    """Load a custom topology from the adjacency text format.

    UTF-8 text; first line ``n <node_count>``, then one edge per line
    ``<u> <v>`` with 0-based ids; ``#`` starts a comment.  Directed input is
    accepted and symmetrized (documented behavior); duplicate edges are
    merged; self-loops are rejected.
    """
    if hasattr(source, "read"):
        data = source.read()
    elif isinstance(source, str) and not (
        "\n" in source or not source.strip() or source.lstrip().startswith(("n ", "#"))
    ):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    n = None
    edges = []
    for lineno, raw in enumerate(io.StringIO(data), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if parts[0] != "n" or len(parts) != 2:
                raise TopologyError(f"line {lineno}: expected header 'n <count>'")
            try:
                n = int(parts[1])
            except ValueError:
                raise TopologyError(f"line {lineno}: bad node count {parts[1]!r}") from None
            if n < 1:
                raise TopologyError("empty graph: node count must be >= 1")
            continue
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected '<u> <v>'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer node id") from None
        if not (0 <= u < n and 0 <= v < n):
            raise TopologyError(f"line {lineno}: node id out of range [0, {n})")
        if u == v:
            raise TopologyError(f"line {lineno}: self-loop {u}-{v} not allowed")
        edges.append((u, v))
        edges.append((v, u))
    if n is None:
        raise TopologyError("empty graph: missing 'n <count>' header")

    if edges:
        arr = np.unique(np.asarray(edges, dtype=np.int64), axis=0)
        us, vs = arr[:, 0], arr[:, 1]
    else:
        us = vs = np.zeros(0, dtype=np.int64)
    counts = np.bincount(us, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = vs.copy()  # np.unique sorted by (u, v): per-u runs are ascending
    degs = indptr[1:] - indptr[:-1]
    degree = int(degs[0]) if n > 0 and (degs == degs[0]).all() else None
    return Topology("custom", n, degree, indptr=indptr, indices=indices)


# -- module-level operations ----------------------------------------------


def neighbors(t: Topology, v: int) -> np.ndarray:
    return t.neighbors(v)


def shell_sizes(t: Topology, v: int) -> list[int]:
    """[|N_0(v)|, |N_1(v)|, ...] by breadth-first search from ``v``."""
    t._check_id(v)
    visited = np.zeros(t.n, dtype=bool)
    visited[v] = True
    frontier = np.asarray([v], dtype=np.int64)
    sizes = [1]
    while True:
        block, mask = t.neighbors_block(frontier)
        nxt = np.unique(block[mask])
        nxt = nxt[~visited[nxt]]
        if nxt.size == 0:
            return sizes
        visited[nxt] = True
        sizes.append(int(nxt.size))
        frontier = nxt


def branching_fraction(t: Topology, k: int, reference: int = 0) -> float:
    """b_k = |N_k(v)| / (|N_{k-1}(v)| * |N(v)|) from a reference node.

    Generated kinds return closed forms: clique powers give
    ``(d - k + 1) / (d k)``; complete graphs give 1 at k=1 and 0 beyond;
    regular trees measured from the root give the idealized value 1 for
    k <= depth (each step treated as spawning degree-many new nodes).
    Custom graphs, and trees from a non-root reference, are BFS-derived.
    Any k beyond the reference's eccentricity yields 0.0.
    """
    if k < 1:
        raise ValueError("branching fraction needs k >= 1")
    t._check_id(reference)
    if t.kind == "clique_power":
        return (t.d - k + 1) / (t.d * k) if k <= t.d else 0.0
    if t.kind == "complete":
        if t.n == 1:
            raise TopologyError("degree undefined on a single-node graph")
        return 1.0 if k == 1 else 0.0
    if t.kind == "regular_tree" and reference == 0:
        return 1.0 if k <= t.depth else 0.0
    deg = t.degree_of(reference)
    if deg == 0:
        raise TopologyError(f"degree undefined at node {reference}")
    shells = shell_sizes(t, reference)
    if k >= len(shells):
        return 0.0
    return shells[k] / (shells[k - 1] * deg)


def branching_fractions(t: Topology, reference: int = 0) -> np.ndarray:
    """b_1..b_D from ``reference`` (D = eccentricity, closed forms where defined)."""
    if t.kind == "clique_power":
        ks = np.arange(1, t.d + 1)
        return (t.d - ks + 1) / (t.d * ks)
    if t.kind == "complete":
        return np.asarray([1.0])
    if t.kind == "regular_tree" and reference == 0:
        return np.ones(t.depth)
    shells = np.asarray(shell_sizes(t, reference), dtype=float)
    deg = t.degree_of(reference)
    return shells[1:] / (shells[:-1] * deg)
