"""Closed-form and quadrature evaluation of local-search performance.

Predictions are driven by two densities on [0, 1]: a global one for node
losses (``PdfSpec``) and a local one for a neighbor's loss given a node's
loss (``LocalPdfSpec``), together with the graph parameters (degree ``s``
and branching fractions ``b_k``, with ``b_0 = 1`` by convention).

All integrals run on a shared uniform grid (default 2049 points).  Plain
integrals use composite Simpson; cumulative ones use an endpoint-corrected
trapezoid (the Euler-Maclaurin h^2/12 term with second-order numerical
derivatives), which matches Simpson-class accuracy while vectorizing
cheaply over matrices.  The preimage recursion is memoized on the grid, so
evaluating depth ``max_k`` costs O(max_k * grid^2) for center-dependent
local pdfs and O(max_k * grid) for center-independent ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import simpson
from scipy.special import ndtr

from . import analysis
from .landscape import (LandscapeView, NoiseSpec, sample_markov_truncnorm,
                        truncnorm_pdf)
from .seeding import mix64
from .topology import Topology, branching_fractions

__all__ = [
    "PdfSpec",
    "LocalPdfSpec",
    "TheoryParams",
    "DEFAULT_GRID_POINTS",
    "expected_minima_fraction",
    "preimage_recursion",
    "independent_closed_form",
    "full_preimage_series",
    "full_preimage_bounds",
    "success_curve",
    "uniform_closed_form_minima",
    "uniform_closed_form_curve",
    "chebyshev_minima_bound",
    "fit_global_truncnorm",
    "fit_local_sigma_via_rwa",
    "GlobalFit",
    "RwaFit",
]

DEFAULT_GRID_POINTS = 2049  # even interval count for Simpson
_PDF_TOL = 1e-6


def _grid(points: int) -> np.ndarray:
    if points < 9:
        raise ValueError("grid needs at least 9 points")
    return np.linspace(0.0, 1.0, points)


def _prefix(y, x, axis=-1):
    """Cumulative integral of samples ``y`` along the uniform grid ``x``.

    Endpoint-corrected trapezoid: the h^2/12 Euler-Maclaurin term is removed
    using second-order numerical derivatives, leaving O(h^4) error for
    smooth integrands.  Zero at the left edge.
    """
    y = np.asarray(y, dtype=float)
    h = float(x[1] - x[0])
    yc = np.moveaxis(y, axis, -1)
    cells = 0.5 * h * (yc[..., 1:] + yc[..., :-1])
    zeros = np.zeros(yc.shape[:-1] + (1,))
    trap = np.concatenate([zeros, np.cumsum(cells, axis=-1)], axis=-1)
    dy = np.gradient(yc, h, axis=-1, edge_order=2)
    out = trap - (h * h / 12.0) * (dy - dy[..., :1])
    return np.moveaxis(out, -1, axis)


# -- global pdf ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PdfSpec:
    """A probability density on [0, 1]: uniform, truncated normal, or tabulated."""

    kind: str
    center: float = 0.0
    sigma: float = 0.0
    xs: np.ndarray | None = None
    ys: np.ndarray | None = None

    @classmethod
    def uniform01(cls):
        return cls("uniform")

    @classmethod
    def truncnorm(cls, center: float, sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls("truncnorm", center=float(center), sigma=float(sigma))

    @classmethod
    def tabulated(cls, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ValueError("tabulated pdf needs matching 1-d grids")
        if (np.diff(xs) <= 0).any() or xs[0] < 0 or xs[-1] > 1:
            raise ValueError("tabulated grid must be ascending within [0, 1]")
        if (ys < 0).any():
            raise ValueError("density must be non-negative")
        total = np.trapezoid(ys, xs)
        if abs(total - 1.0) > _PDF_TOL:
            raise ValueError(f"tabulated density integrates to {total}, not 1")
        return cls("tabulated", xs=xs, ys=ys)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0)
        elif self.kind == "truncnorm":
            out = np.asarray(truncnorm_pdf(x, self.center, self.sigma))
        else:
            out = np.interp(x, self.xs, self.ys, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def survival(self, x):
        """P(X > x) for x in [0, 1] (1 below 0, 0 above 1)."""
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, 0.0, 1.0)
        if self.kind == "uniform":
            out = 1.0 - xc
        elif self.kind == "truncnorm":
            z = ndtr((1.0 - self.center) / self.sigma) - ndtr((0.0 - self.center) / self.sigma)
            out = (ndtr((1.0 - self.center) / self.sigma)
                   - ndtr((xc - self.center) / self.sigma)) / z
            out = np.clip(out, 0.0, 1.0)
        else:
            cum = np.concatenate([[0.0], np.cumsum(
                0.5 * (self.ys[1:] + self.ys[:-1]) * np.diff(self.xs))])
            total = cum[-1]
            out = total - np.interp(xc, self.xs, cum, left=0.0, right=total)
            out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def describe(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        if self.kind == "truncnorm":
            return f"truncnorm:{self.center},{self.sigma}"
        return f"tabulated[{len(self.xs)}]"


# -- local pdf ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LocalPdfSpec:
    """Neighbor-loss density pdf_e(center, y) on [0, 1].

    ``independent`` ignores the center entirely (pdf_e(x, y) = g(y));
    ``truncnorm_centered`` re-centers a [0,1]-truncated normal at the
    current loss.  Construction spot-checks that rows integrate to 1.
    """

    kind: str
    g: PdfSpec | None = None
    sigma: float = 0.0

    @classmethod
    def independent(cls, g: PdfSpec):
        return cls("independent", g=g)

    @classmethod
    def truncnorm_centered(cls, sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        spec = cls("truncnorm_centered", sigma=float(sigma))
        xs = _grid(513)
        for c in (0.0, 0.25, 0.5, 0.75, 1.0):
            total = simpson(spec.density(c, xs), x=xs)
            if abs(total - 1.0) > _PDF_TOL:  # pragma: no cover - analytic form
                raise ValueError(f"row at center {c} integrates to {total}")
        return spec

    def density(self, center, y):
        """pdf_e(center, y); ``center`` and ``y`` broadcast elementwise."""
        center = np.asarray(center, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "independent":
            dens = np.asarray(self.g.density(y))
            out = np.broadcast_to(dens, np.broadcast_shapes(center.shape, y.shape))
            return out if out.ndim else float(out)
        out = np.asarray(truncnorm_pdf(y, center, self.sigma))
        return out if out.ndim else float(out)

    def survival(self, center, lower):
        """Integral of pdf_e(center, z) for z from ``lower`` to 1 (broadcasts)."""
        center = np.asarray(center, dtype=float)
        lower = np.asarray(lower, dtype=float)
        if self.kind == "independent":
            out = np.asarray(self.g.survival(lower))
            out = np.broadcast_to(out, np.broadcast_shapes(center.shape, lower.shape))
            return out if out.ndim else float(out)
        lo = np.clip(lower, 0.0, 1.0)
        z = ndtr((1.0 - center) / self.sigma) - ndtr((0.0 - center) / self.sigma)
        out = (ndtr((1.0 - center) / self.sigma) - ndtr((lo - center) / self.sigma)) / z
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def describe(self) -> str:
        if self.kind == "independent":
            return f"independent({self.g.describe()})"
        return f"truncnorm-local:{self.sigma}"


@dataclass(frozen=True, eq=False)
class TheoryParams:
    """Graph-side inputs: node count, degree, branching fractions, loss floor."""

    n: int
    s: int
    b: np.ndarray
    ell_star: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.n < 1 or self.s < 1:
            raise ValueError("n and s must be >= 1")
        if self.b.size and not np.isclose(self.b[0], 1.0):
            raise ValueError("b_1 must be 1")
        if ((self.b < 0) | (self.b > 1.0 + 1e-12)).any():
            raise ValueError("branching fractions must lie in [0, 1]")
        if not 0.0 <= self.ell_star < 1.0:
            raise ValueError("ell_star must lie in [0, 1)")

    @classmethod
    def from_topology(cls, t: Topology, reference: int = 0, ell_star: float = 0.0):
        if t.degree is None or t.degree < 1:
            raise ValueError("theory parameters need a regular topology with degree >= 1")
        return cls(n=t.n, s=t.degree, b=branching_fractions(t, reference),
                   ell_star=ell_star)

    def b_at(self, j: int) -> float:
        """b_j with the b_0 = 1 convention and 0 beyond the diameter."""
        if j == 0:
            return 1.0
        if j - 1 < self.b.size:
            return float(self.b[j - 1])
        return 0.0


def _series_prods(s: int, params: TheoryParams, max_i: int):
    """prod_{j=0}^{i-1} b_j / (j s + 1) for i = 0..max_i (index by i)."""
    prods = np.zeros(max_i + 1)
    prods[0] = 1.0
    for i in range(1, max_i + 1):
        prods[i] = prods[i - 1] * params.b_at(i - 1) / ((i - 1) * s + 1)
        if prods[i] == 0.0:
            break
    return prods


# -- expected minima fraction ---------------------------------------------------


def expected_minima_fraction(pdf_n: PdfSpec, pdf_e: LocalPdfSpec, s: int,
                             grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Expected fraction of nodes that are local minima.

    Quadrature of  integral pdf_n(x) * (integral_x^1 pdf_e(x, y) dy)^s dx.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    xs = _grid(grid_points)
    integrand = pdf_n.density(xs) * pdf_e.survival(xs, xs) ** s
    out = float(simpson(integrand, x=xs))
    if not np.isfinite(out):
        raise ValueError("quadrature failed (non-finite integrand)")
    return out


# -- preimage machinery ---------------------------------------------------------


def _preimage_table(pdf_e: LocalPdfSpec, params: TheoryParams, max_k: int,
                    grid_points: int) -> tuple[np.ndarray, np.ndarray]:
    """E[|LS^-k|](x) for k = 1..max_k on the shared grid."""
    xs = _grid(grid_points)
    s = params.s
    n_pts = len(xs)
    E = np.zeros((max_k, n_pts))

    if pdf_e.kind == "independent":
        g = pdf_e.g
        gy = g.density(xs)
        G = g.survival(xs)
        E[0] = s * G ** (s - 1) * G  # e1 with Tail(y, x) = G(x) for every y
        for k in range(2, max_k + 1):
            b = params.b_at(k - 1)
            if b == 0.0:
                break
            inner = gy * E[k - 2]
            pre = _prefix(inner, xs)
            suffix = pre[-1] - pre
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(G > 1e-300, suffix / G, 0.0)
            E[k - 1] = b * E[0] * ratio
        return xs, E

    # center-dependent local pdf: full grid-by-grid quadrature
    P = pdf_e.density(xs[:, None], xs[None, :])       # P[i, j] = pdf_e(x_i, y_j)
    tail = pdf_e.survival(xs[None, :], xs[:, None])   # tail[i, j] = int_{x_i}^1 pdf_e(y_j, .)
    integrand = P * tail ** (s - 1)
    pre = _prefix(integrand, xs, axis=1)
    suffix = pre[:, -1][:, None] - pre
    E[0] = s * np.diagonal(suffix).copy()
    denom = pdf_e.survival(xs, xs)
    for k in range(2, max_k + 1):
        b = params.b_at(k - 1)
        if b == 0.0:
            break
        numer_int = P * E[k - 2][None, :]
        pre = _prefix(numer_int, xs, axis=1)
        suffix = pre[:, -1][:, None] - pre
        numer = np.diagonal(suffix).copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(denom > 1e-300, numer / denom, 0.0)
        E[k - 1] = b * E[0] * ratio
    if not np.isfinite(E).all():
        raise ValueError("quadrature failed (non-finite preimage table)")
    return xs, E


def preimage_recursion(pdf_e: LocalPdfSpec, params: TheoryParams, x, k: int,
                       max_k: int = 5,
                       grid_points: int = DEFAULT_GRID_POINTS):
    """Expected size of the k-th preimage of a node with loss ``x``.

    Evaluated by the general recursion on the shared grid (linear
    interpolation between grid points).  ``k`` beyond ``max_k`` raises.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > max_k:
        raise ValueError(f"k={k} exceeds the configured maximum {max_k}")
    xs, E = _preimage_table(pdf_e, params, k, grid_points)
    out = np.interp(np.asarray(x, dtype=float), xs, E[k - 1])
    return out if out.ndim else float(out)


def independent_closed_form(g: PdfSpec, params: TheoryParams, x, k: int):
    """s^k G(x)^{sk} prod_{i=0}^{k-1} b_i/(i s + 1) for center-independent pdfs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    s = params.s
    prods = _series_prods(s, params, k)
    G = g.survival(np.asarray(x, dtype=float))
    out = float(s) ** k * G ** (s * k) * prods[k]
    return out if np.ndim(out) else float(out)


def full_preimage_series(g: PdfSpec, params: TheoryParams, x,
                         rel_tol: float = 1e-12, max_terms: int = 512):
    """E[|LS^-*|](x) = sum over depths of the closed-form terms.

    Terminates when the branching product hits zero (graph diameter) or a
    term falls below ``rel_tol`` of the running sum.
    """
    s = params.s
    G = np.asarray(g.survival(np.asarray(x, dtype=float)), dtype=float)
    total = np.zeros_like(G)
    prod = 1.0
    for m in range(1, max_terms + 1):
        prod *= params.b_at(m - 1) / ((m - 1) * s + 1)
        if prod == 0.0:
            break
        term = float(s) ** m * G ** (s * m) * prod
        total = total + term
        if np.max(term) < rel_tol * max(np.max(total), 1e-300):
            break
    return total if total.ndim else float(total)


def full_preimage_bounds(G_val: float, s: int) -> tuple[float, float]:
    """(lower, upper) on the expected full-preimage size, preimage-only part.

    lower = s G^s exp(s G^s / (s+1));  upper = s G^s exp(G^s).
    """
    if not 0.0 <= G_val <= 1.0:
        raise ValueError("G_val must lie in [0, 1]")
    if s < 1:
        raise ValueError("s must be >= 1")
    core = s * G_val**s
    return core * np.exp(core / (s + 1)), core * np.exp(G_val**s)


# -- within-eps success curve ----------------------------------------------------


def success_curve(pdf_n: PdfSpec, pdf_e: LocalPdfSpec, params: TheoryParams,
                  eps_grid, max_k: int = 5,
                  grid_points: int = DEFAULT_GRID_POINTS) -> list[tuple[float, float]]:
    """Expected fraction of starts converging within eps of the optimum.

    integral from ell* to ell*+eps of
    pdf_n(x) * survival(x)^s * (1 + sum_k E[|LS^-k|](x)) dx,
    with preimage depth capped at ``max_k``.
    """
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or len(eps) == 0 or (np.diff(eps) < 0).any() or (eps < 0).any():
        raise ValueError("eps grid must be ascending and non-negative")
    xs, E = _preimage_table(pdf_e, params, max_k, grid_points)
    weight = 1.0 + E.sum(axis=0)
    integrand = pdf_n.density(xs) * pdf_e.survival(xs, xs) ** params.s * weight
    integrand = np.where(xs >= params.ell_star, integrand, 0.0)
    pre = _prefix(integrand, xs)
    if not np.isfinite(pre).all():
        raise ValueError("quadrature failed (non-finite success curve)")
    base = float(np.interp(params.ell_star, xs, pre))
    vals = np.interp(np.minimum(params.ell_star + eps, 1.0), xs, pre) - base
    return [(float(e), float(v)) for e, v in zip(eps, vals)]


# -- uniform closed forms ----------------------------------------------------------


def uniform_closed_form_minima(n: int, s: int) -> float:
    """Expected number of local minima under fully uniform losses: n / (s + 1)."""
    if n < 1 or s < 1:
        raise ValueError("n and s must be >= 1")
    return n / (s + 1)


def uniform_closed_form_curve(n: int, s: int, b, eps_grid,
                              rel_tol: float = 1e-15) -> list[tuple[float, float]]:
    """Expected within-eps fraction under fully uniform losses.

    fraction(eps) = sum_i s^i (1 - (1-eps)^{(i+1)s+1}) / ((i+1)s+1)
                    * prod_{j=0}^{i-1} b_j/(js+1),
    the series terminating where the branching product reaches zero.
    """
    params = TheoryParams(n=n, s=s, b=np.asarray(b, dtype=float))
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or (eps < 0).any():
        raise ValueError("eps grid must be non-negative")
    total = np.zeros_like(eps)
    prod = 1.0
    for i in range(0, 512):
        coeff = float(s) ** i * prod / ((i + 1) * s + 1)
        term = coeff * (1.0 - (1.0 - eps) ** ((i + 1) * s + 1))
        total += term
        if coeff < rel_tol * max(float(np.max(total)), 1e-300):
            break
        prod *= params.b_at(i) / (i * s + 1)
        if prod == 0.0:
            break
    return [(float(e), float(v)) for e, v in zip(eps, total)]


# -- noise corollary -----------------------------------------------------------------


def chebyshev_minima_bound(pdf_n: PdfSpec, pdf_e: LocalPdfSpec, s: int,
                           sigma: float, n: int, delta: float = 1e-3,
                           grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Upper bound sigma^{2s} * n * double-integral of pdfs / (2(x-y)^2)^s.

    A band |x - y| < ``delta`` around the singular diagonal is excluded and
    should be reported alongside the value; a ``delta`` below the grid
    spacing cannot be resolved more finely than one cell.  Returns ``inf``
    when the integral overflows float range (bound vacuous).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return 0.0
    xs = _grid(grid_points)
    diff = xs[:, None] - xs[None, :]
    dens = pdf_n.density(xs)[:, None] * pdf_e.density(xs, xs)
    mask = (np.abs(diff) >= delta) & (dens > 0.0)
    integrand = np.zeros_like(dens)
    with np.errstate(over="ignore", divide="ignore"):
        core = (2.0 * diff[mask] ** 2) ** (-float(s))
        integrand[mask] = dens[mask] * core
    if not np.isfinite(integrand).all():
        return float("inf")
    inner = np.trapezoid(integrand, xs, axis=1)
    value = float(np.trapezoid(inner, xs))
    with np.errstate(over="ignore"):
        bound = float(sigma) ** (2 * s) * n * value
    return bound if np.isfinite(bound) else float("inf")


# -- fitting procedures ----------------------------------------------------------------


class GlobalFit(NamedTuple):
    sigma: float
    center: float
    objective: float


class RwaFit(NamedTuple):
    sigma: float
    objective: float


def fit_global_truncnorm(losses) -> GlobalFit:
    """Grid-search truncated-normal fit to a 50-bin loss histogram.

    sigma over [0.02, 1.0] step 0.01 and center over [0, 1] step 0.05,
    minimizing the L2 distance between the density-normalized histogram and
    the model density at bin centers.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.size < 100:
        raise ValueError("insufficient data: need at least 100 losses")
    if (losses < 0).any() or (losses > 1).any():
        raise ValueError("losses must lie in [0, 1]")
    hist, edges = np.histogram(losses, bins=50, range=(0.0, 1.0), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    sigmas = np.round(np.arange(0.02, 1.0 + 1e-9, 0.01), 2)
    vs = np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 2)
    best = None
    for sig in sigmas:
        for v in vs:
            model = truncnorm_pdf(centers, v, sig)
            obj = float(np.sqrt(np.sum((hist - model) ** 2)))
            if best is None or obj < best[0]:
                best = (obj, float(sig), float(v))
    return GlobalFit(sigma=best[1], center=best[2], objective=best[0])


def fit_local_sigma_via_rwa(observed_rwa, t: Topology, candidates, seed: int,
                            walk_len: int = 100_000,
                            root_center: float = 0.25,
                            root_sigma: float = 0.18) -> RwaFit:
    """Pick the local sigma whose model RWA curve best matches an observed one.

    For each candidate sigma a correlated landscape is generated on ``t``
    and its RWA computed with the same walk length; the L2 distance is taken
    over lags where the observed correlation exceeds 0.05 (all lags when
    none do, so a white-noise input selects the flattest curve).  Exact ties
    go to the smallest sigma.
    """
    obs = np.asarray(observed_rwa, dtype=float)
    if obs.ndim != 2 or obs.shape[1] < 3 or obs.shape[0] < 2:
        raise ValueError("observed curve must be rows of (lag, sqrt_lag, rho)")
    cand = sorted(float(c) for c in candidates)
    if not cand or min(cand) <= 0:
        raise ValueError("candidates must be positive")
    max_lag = int(obs[-1, 0])
    rho_obs = obs[1:, 2]
    lag_mask = rho_obs > 0.05
    if not lag_mask.any():
        lag_mask = np.ones_like(lag_mask, dtype=bool)
    best = None
    for i, sig in enumerate(cand):
        scape = sample_markov_truncnorm(t, sig, root_center, root_sigma,
                                        seed=mix64(seed, 2 * i))
        view = LandscapeView(scape, NoiseSpec.none(), seed=0)
        rows = analysis.rwa(view, walk_len, max_lag, seed=mix64(seed, 2 * i + 1))
        rho_model = np.asarray([r[2] for r in rows[1:]])
        obj = float(np.sqrt(np.sum((rho_obs[lag_mask] - rho_model[lag_mask]) ** 2)))
        if best is None or obj < best[0]:
            best = (obj, sig)
    return RwaFit(sigma=best[1], objective=best[0])
