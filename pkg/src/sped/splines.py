"""Cubic B-spline space with vanishing end conditions and its Gram objects.

The basis is built from the cardinal cubic B-spline N on [0, 4] with knots
xi_j = a + (j - 1) Delta, Delta = (b - a) / (q + 3), j = 1..q+4, and

    b_i(x) = N((x - xi_i) / Delta) / Delta,   i = 1..q,

so every b_i integrates to one and every spline in the span vanishes with its
first two derivatives at both ends.  Indices in the public API are 1-based to
match that notation; arrays are 0-based as usual.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg

from .errors import BadDimensions, IndexOutOfRange, InvalidParameter, SingularSystem
from .estimator import DensityCurve
from .fourier import ErrorModel, FrequencyQuadrature, PilotEstimate, gl_quadrature, omega_cutoff

# local cubic pieces of N on [r, r+1] in u = t - r, highest power first
_PIECES = (
    np.array([1.0, 0.0, 0.0, 0.0]) / 6.0,
    np.array([-3.0, 3.0, 3.0, 1.0]) / 6.0,
    np.array([3.0, -6.0, 0.0, 4.0]) / 6.0,
    np.array([-1.0, 3.0, -3.0, 1.0]) / 6.0,
)


def _piece_coeffs(deriv):
    return [np.polyder(c, deriv) if deriv else c for c in _PIECES]


def cardinal_cubic(t, deriv=0):
    """N^(deriv)(t) for the cardinal cubic B-spline supported on [0, 4]."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    coeffs = _piece_coeffs(deriv)
    r = np.floor(t)
    u = t - r
    for piece, c in enumerate(coeffs):
        mask = r == piece
        if np.any(mask):
            out[mask] = np.polyval(c, u[mask])
    return out


def _sinc(t):
    return np.sinc(t / np.pi)


@dataclass(frozen=True)
class SplineSpace:
    a: float
    b: float
    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 4:
            raise BadDimensions(f"need q >= 4 basis functions, got {self.q}")
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.b > self.a):
            raise BadDimensions(f"need a < b, got [{self.a}, {self.b}]")

    degree = 3

    @property
    def spacing(self):
        return (self.b - self.a) / (self.q + 3)

    @property
    def knots(self):
        return self.a + self.spacing * np.arange(self.q + 4)

    @property
    def centres(self):
        """Centre of each basis function, xi_i + 2 Delta."""
        return self.knots[: self.q] + 2.0 * self.spacing

    def _check_index(self, i):
        if int(i) != i or not 1 <= i <= self.q:
            raise IndexOutOfRange(f"basis index {i} outside 1..{self.q}")

    def basis(self, i, xs, deriv=0):
        """b_i^(deriv) on xs (1-based i)."""
        self._check_index(i)
        h = self.spacing
        t = (np.asarray(xs, dtype=float) - self.knots[i - 1]) / h
        return cardinal_cubic(t, deriv) / h ** (deriv + 1)

    def design(self, xs, deriv=0):
        """Dense matrix of b_j^(deriv)(x_i), filled by local support lookup."""
        xs = np.asarray(xs, dtype=float)
        h = self.spacing
        out = np.zeros((xs.size, self.q))
        pos = (xs - self.a) / h
        span = np.floor(pos).astype(int)
        # the right end point belongs to the last span
        span = np.where(pos == self.q + 3, self.q + 2, span)
        u = pos - span
        inside = (span >= 0) & (span <= self.q + 2)
        coeffs = _piece_coeffs(deriv)
        rows = np.arange(xs.size)
        for piece in range(4):
            col = span - piece
            ok = inside & (col >= 0) & (col < self.q)
            out[rows[ok], col[ok]] = np.polyval(coeffs[piece], u[ok])
        return out / h ** (deriv + 1)


def build_space(a, b, q):
    return SplineSpace(float(a), float(b), int(q) if int(q) == q else q)


def bspline_ft(space: SplineSpace, i, omega):
    """Transform of b_i: exp(-i omega (xi_i + 2 Delta)) sinc(omega Delta / 2)^4."""
    space._check_index(i)
    w = np.asarray(omega, dtype=float)
    centre = space.centres[i - 1]
    return np.exp(-1j * w * centre) * _sinc(0.5 * w * space.spacing) ** 4


def _span_gauss(space: SplineSpace, points=4):
    """Gauss-Legendre nodes and weights on every knot span."""
    x, w = leggauss(points)
    h = space.spacing
    left = space.knots[:-1, None]
    nodes = (left + 0.5 * h * (x + 1.0)).ravel()
    weights = np.tile(0.5 * h * w, space.q + 3)
    return nodes, weights


def gram_matrices(space: SplineSpace):
    """Exact G = int b_i b_j and P = int b_i'' b_j'' (4-point rule is exact per span)."""
    nodes, weights = _span_gauss(space)
    B = space.design(nodes)
    B2 = space.design(nodes, deriv=2)
    G = B.T @ (weights[:, None] * B)
    P = B2.T @ (weights[:, None] * B2)
    return 0.5 * (G + G.T), 0.5 * (P + P.T)


@dataclass(frozen=True)
class GramSet:
    space: SplineSpace
    M: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    d: np.ndarray = field(repr=False)
    B_x: np.ndarray = field(repr=False)
    x_grid: np.ndarray = field(repr=False)
    warnings: tuple = ()

    @property
    def q(self):
        return self.space.q


def _m_lags(space: SplineSpace, error: ErrorModel, quad=None):
    """M is Toeplitz: entry (i, j) depends on (i - j) Delta only."""
    h = space.spacing
    lags = h * np.arange(space.q)

    def weight(w):
        return _sinc(0.5 * w * h) ** 8 * error.cf(w) ** 2

    if quad is None:
        omega_max = omega_cutoff(lambda w: (1.0 + (0.5 * w * h) ** 2) ** -4 * error.cf(w) ** 2, 8.0 / h)
        panels = max(32, math.ceil(omega_max * max(lags[-1], h) / math.pi))
        quad = gl_quadrature(omega_max, panels)
    nodes, weights = quad.positive
    vals = weights * weight(nodes)
    return np.cos(np.outer(lags, nodes)) @ vals / np.pi


def _d_vector(space: SplineSpace, error: ErrorModel, pilot: PilotEstimate, quad=None):
    h = space.spacing
    if quad is None:
        def env(w):
            return (1.0 + (0.5 * w * h) ** 2) ** -2 * np.abs(error.cf(w)) * pilot.envelope(w)

        omega_max = omega_cutoff(env, 8.0 / h)
        if pilot.band is not None:
            omega_max = min(omega_max, pilot.band)
        lo, hi = space.a, space.b
        if hasattr(pilot, "sample"):
            lo, hi = min(lo, pilot.sample.min()), max(hi, pilot.sample.max())
        elif hasattr(pilot, "edges"):
            lo, hi = min(lo, pilot.edges[0]), max(hi, pilot.edges[-1])
        panels = max(32, math.ceil(omega_max * (hi - lo) / math.pi))
        breaks = () if pilot.band is None else (pilot.band,)
        quad = gl_quadrature(omega_max, panels, breaks)
    nodes, weights = quad.positive
    core = weights * error.cf(nodes) * _sinc(0.5 * nodes * h) ** 4 * np.conj(pilot.ft(nodes))
    out = np.empty(space.q)
    centres = space.centres
    step = max(1, int(2_000_000 // max(nodes.size, 1)))
    for start in range(0, space.q, step):
        phase = np.outer(centres[start : start + step], nodes)
        out[start : start + step] = np.cos(phase) @ core.real + np.sin(phase) @ core.imag
    return out / np.pi


def default_nx(q):
    return max(4 * q, 200)


def assemble(space: SplineSpace, error: ErrorModel, pilot: PilotEstimate, quad: FrequencyQuadrature | None = None, n_x=None):
    """M and d by frequency quadrature, G and P exactly, B_x on a uniform grid."""
    n_x = default_nx(space.q) if n_x is None else int(n_x)
    if n_x < 2:
        raise BadDimensions("the nonnegativity grid needs at least two points")
    lags = _m_lags(space, error, quad)
    M = linalg.toeplitz(lags)
    G, P = gram_matrices(space)
    d = _d_vector(space, error, pilot, quad)
    x_grid = np.linspace(space.knots[0], space.knots[-1], n_x)
    B_x = space.design(x_grid)
    notes = []
    if np.max(np.abs(d)) < 1e-12 * max(1.0, np.max(np.abs(M))):
        notes.append("pilot mass lies outside [a, b]; coefficient vector is ~0")
        warnings.warn(notes[-1], stacklevel=2)
    return GramSet(space, M, P, G, d, B_x, x_grid, tuple(notes))


def solve_theta(gram: GramSet, alpha):
    """theta = (M + alpha P)^-1 d by Cholesky, with one step of iterative refinement."""
    if not alpha > 0:
        raise SingularSystem(f"alpha must be positive, got {alpha}")
    A = gram.M + alpha * gram.P
    try:
        factor = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularSystem("M + alpha P is not positive definite") from exc
    theta = linalg.cho_solve(factor, gram.d)
    resid = gram.d - A @ theta
    theta = theta + linalg.cho_solve(factor, resid)
    scale = np.linalg.norm(gram.d)
    if np.linalg.norm(A @ theta - gram.d) > 1e-10 * max(scale, 1e-300) and scale > 0:
        raise SingularSystem("ridge system is too ill-conditioned to solve accurately")
    return theta


def evaluate_spline(space: SplineSpace, theta, xs):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (space.q,):
        raise BadDimensions(f"theta has shape {theta.shape}, expected ({space.q},)")
    xs = np.asarray(xs, dtype=float)
    values = space.design(xs) @ theta
    return DensityCurve(xs, values, {"estimator": "spline", "q": space.q, "interval": [space.a, space.b]})


def default_interval(sample, error: ErrorModel, width=4.0):
    """Sample range widened by ``width`` error spreads on each side."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise InvalidParameter("empty sample")
    pad = width * error.spread
    return float(sample.min() - pad), float(sample.max() + pad)


__all__ = [
    "SplineSpace",
    "GramSet",
    "build_space",
    "bspline_ft",
    "cardinal_cubic",
    "gram_matrices",
    "assemble",
    "solve_theta",
    "evaluate_spline",
    "default_interval",
    "default_nx",
]
