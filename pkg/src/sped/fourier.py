"""Characteristic functions, pilot Fourier transforms and quadrature inversion.

Every transform in the package uses the convention

    ft(u)(omega) = integral exp(-i omega x) u(x) dx,
    u(x) = (2 pi)^-1 integral exp(i omega x) ft(u)(omega) d omega,

and this module is the only place that fixes it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats

from .errors import BadResolution, InvalidParameter, NonHermitianSpectrum, TailTooFat

DEFAULT_RESOLUTION = 4096
MAX_NODES = 2**20
IMAG_TOL = 1e-8
GL_ORDER = 8

_GL_X, _GL_W = leggauss(GL_ORDER)
# largest gap between consecutive nodes, as a fraction of the panel width
_GL_GAP = max(np.max(np.diff(_GL_X)) / 2.0, 1.0 + _GL_X[0])


def default_resolution():
    """Quadrature resolution, overridable through ``SPED_QUAD_RESOLUTION``."""
    raw = os.environ.get("SPED_QUAD_RESOLUTION")
    if raw is None:
        return DEFAULT_RESOLUTION
    try:
        value = int(raw)
    except ValueError as exc:
        raise BadResolution(f"SPED_QUAD_RESOLUTION={raw!r} is not an integer") from exc
    if value < 16:
        raise BadResolution(f"SPED_QUAD_RESOLUTION={value} is below the floor of 16")
    return value


# ---------------------------------------------------------------------------
# Error laws
# ---------------------------------------------------------------------------

ERROR_KINDS = ("gaussian", "laplace", "cauchy", "uniform")


@dataclass(frozen=True)
class ErrorModel:
    """Known, symmetric measurement-error density.

    ``scale`` is sigma (gaussian), b (laplace), gamma (cauchy) or the half
    width a (uniform).
    """

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise InvalidParameter(f"unknown error kind {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidParameter(f"error scale must be positive, got {self.scale}")

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", float(sigma))

    @classmethod
    def laplace(cls, b):
        return cls("laplace", float(b))

    @classmethod
    def cauchy(cls, gamma):
        return cls("cauchy", float(gamma))

    @classmethod
    def uniform(cls, a):
        return cls("uniform", float(a))

    @classmethod
    def from_variance(cls, kind, variance):
        """Error law of the given family with the requested variance."""
        if variance <= 0:
            raise InvalidParameter("error variance must be positive")
        if kind == "gaussian":
            return cls.gaussian(math.sqrt(variance))
        if kind == "laplace":
            return cls.laplace(math.sqrt(variance / 2.0))
        if kind == "uniform":
            return cls.uniform(math.sqrt(3.0 * variance))
        raise InvalidParameter(f"{kind} errors have no finite variance")

    @property
    def variance(self):
        s = self.scale
        return {"gaussian": s**2, "laplace": 2 * s**2, "cauchy": math.inf, "uniform": s**2 / 3}[
            self.kind
        ]

    @property
    def spread(self):
        """Standard deviation, or the scale for the Cauchy law."""
        if self.kind == "cauchy":
            return self.scale
        return math.sqrt(self.variance)

    @property
    def first_zero(self):
        """Smallest positive zero of the characteristic function (inf if none)."""
        return math.pi / self.scale if self.kind == "uniform" else math.inf

    def cf(self, omega):
        w = np.asarray(omega, dtype=float)
        s = self.scale
        if self.kind == "gaussian":
            return np.exp(-0.5 * (s * w) ** 2)
        if self.kind == "laplace":
            return 1.0 / (1.0 + (s * w) ** 2)
        if self.kind == "cauchy":
            return np.exp(-s * np.abs(w))
        # np.sinc(t) = sin(pi t) / (pi t)
        return np.sinc(s * w / np.pi)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "gaussian":
            return stats.norm.pdf(x, scale=s)
        if self.kind == "laplace":
            return stats.laplace.pdf(x, scale=s)
        if self.kind == "cauchy":
            return stats.cauchy.pdf(x, scale=s)
        return np.where(np.abs(x) <= s, 0.5 / s, 0.0)

    def sample(self, rng, n):
        s = self.scale
        if self.kind == "gaussian":
            return rng.normal(0.0, s, size=n)
        if self.kind == "laplace":
            return rng.laplace(0.0, s, size=n)
        if self.kind == "cauchy":
            return s * rng.standard_cauchy(size=n)
        return rng.uniform(-s, s, size=n)


def cf_error(model: ErrorModel, omega):
    """Characteristic function of the error law (real, since the law is even)."""
    return model.cf(omega)


# ---------------------------------------------------------------------------
# Target densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    weight: float
    family: str  # "normal" (mean, sd) or "gamma" (shape, rate)
    a: float
    b: float


@dataclass(frozen=True)
class TargetDensity:
    """Finite mixture of normal and gamma densities."""

    components: tuple
    name: str = "custom"

    def __post_init__(self):
        if not self.components:
            raise InvalidParameter("a target needs at least one component")
        total = 0.0
        for c in self.components:
            if not (0 < c.weight <= 1):
                raise InvalidParameter(f"mixture weight {c.weight} outside (0, 1]")
            if c.family == "normal" and not c.b > 0:
                raise InvalidParameter("normal sd must be positive")
            if c.family == "gamma" and not (c.a > 0 and c.b > 0):
                raise InvalidParameter("gamma shape and rate must be positive")
            if c.family not in ("normal", "gamma"):
                raise InvalidParameter(f"unknown component family {c.family!r}")
            total += c.weight
        if abs(total - 1.0) > 1e-12:
            raise InvalidParameter(f"mixture weights sum to {total}, not 1")

    @classmethod
    def std_normal(cls):
        return cls((Component(1.0, "normal", 0.0, 1.0),), "std_normal")

    @classmethod
    def normal_mixture(cls, weights, means, sds, name="normal_mixture"):
        comps = tuple(Component(float(w), "normal", float(m), float(s)) for w, m, s in zip(weights, means, sds))
        return cls(comps, name)

    @classmethod
    def gamma(cls, shape, rate):
        return cls((Component(1.0, "gamma", float(shape), float(rate)),), f"gamma({shape},{rate})")

    @classmethod
    def gamma_mixture(cls, weights, shapes, rates, name="gamma_mixture"):
        comps = tuple(Component(float(w), "gamma", float(k), float(r)) for w, k, r in zip(weights, shapes, rates))
        return cls(comps, name)

    @classmethod
    def normal_variance_case(cls, variance):
        if variance <= 0:
            raise InvalidParameter("variance must be positive")
        return cls((Component(1.0, "normal", 0.0, math.sqrt(variance)),), f"normal(var={variance})")

    @classmethod
    def benchmark(cls, setting):
        """The four benchmark targets, keyed ``"i"`` to ``"iv"``."""
        key = str(setting).lower()
        if key == "i":
            return cls.std_normal()
        if key == "ii":
            return cls.normal_mixture([2 / 3, 1 / 3], [0.0, 0.0], [1.0, 0.2], "normal_mixture")
        if key == "iii":
            return cls.gamma(4.0, 1.0)
        if key == "iv":
            return cls.gamma_mixture([0.4, 0.6], [5.0, 13.0], [1.0, 1.0], "gamma_mixture")
        raise InvalidParameter(f"unknown benchmark setting {setting!r}")

    @property
    def mean(self):
        return sum(c.weight * (c.a if c.family == "normal" else c.a / c.b) for c in self.components)

    @property
    def variance(self):
        second = 0.0
        for c in self.components:
            if c.family == "normal":
                second += c.weight * (c.b**2 + c.a**2)
            else:
                second += c.weight * c.a * (c.a + 1) / c.b**2
        return second - self.mean**2

    @property
    def nonnegative_support(self):
        return all(c.family == "gamma" for c in self.components)

    def support(self, width=8.0):
        """Interval holding essentially all of the mass (mean +- width sd)."""
        lo = self.mean - width * math.sqrt(self.variance)
        hi = self.mean + width * math.sqrt(self.variance)
        if self.nonnegative_support:
            lo = max(lo, 0.0)
        return lo, hi

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in self.components:
            if c.family == "normal":
                out = out + c.weight * stats.norm.pdf(x, loc=c.a, scale=c.b)
            else:
                out = out + c.weight * stats.gamma.pdf(x, c.a, scale=1.0 / c.b)
        return out

    def cf(self, omega):
        w = np.asarray(omega, dtype=float)
        out = np.zeros(w.shape, dtype=complex)
        for c in self.components:
            if c.family == "normal":
                out = out + c.weight * np.exp(-1j * w * c.a - 0.5 * (c.b * w) ** 2)
            else:
                # principal log of 1 + i w / rate never crosses the branch cut
                out = out + c.weight * np.exp(-c.a * np.log(1.0 + 1j * w / c.b))
        return out

    def cf_abs_sq(self, omega):
        """|cf|^2, in closed form for single components."""
        w = np.asarray(omega, dtype=float)
        if len(self.components) == 1:
            c = self.components[0]
            if c.family == "normal":
                return np.exp(-((c.b * w) ** 2))
            return (1.0 + (w / c.b) ** 2) ** (-c.a)
        return np.abs(self.cf(w)) ** 2

    def sample(self, rng, n):
        weights = np.array([c.weight for c in self.components])
        labels = rng.choice(len(weights), size=n, p=weights / weights.sum())
        out = np.empty(n)
        for j, c in enumerate(self.components):
            idx = labels == j
            k = int(idx.sum())
            if k == 0:
                continue
            if c.family == "normal":
                out[idx] = rng.normal(c.a, c.b, size=k)
            else:
                out[idx] = rng.gamma(c.a, 1.0 / c.b, size=k)
        return out


def cf_target(target: TargetDensity, omega):
    """Characteristic function of the target (complex)."""
    return target.cf(omega)


def error_for_proportion(target: TargetDensity, p, kind="gaussian"):
    """Error law with Var(E) = p Var(Y), Y = X + E, X independent of E."""
    if not 0 < p < 1:
        raise InvalidParameter(f"error proportion must lie in (0, 1), got {p}")
    return ErrorModel.from_variance(kind, p / (1.0 - p) * target.variance)


# ---------------------------------------------------------------------------
# Kernels and pilot estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NamedKernel:
    """Kernel specified by its Fourier transform; ``band`` is the cutoff if band-limited."""

    kind: str
    band: Optional[float] = None
    custom_ft: Optional[Callable] = None  # compared by identity, so distinct custom kernels never share a cache entry

    @classmethod
    def custom(cls, ft, band=None):
        return cls("custom", band, ft)

    def ft(self, omega):
        w = np.asarray(omega, dtype=float)
        if self.kind == "dke":
            return np.where(np.abs(w) < 1.0, (1.0 - np.minimum(w * w, 1.0)) ** 3, 0.0)
        if self.kind == "ef":
            return 1.0 / (1.0 + w**4)
        if self.kind == "sincsq":
            return np.where(np.abs(w) <= 2.0, 1.0 - np.abs(w) / 2.0, 0.0)
        if self.kind == "custom":
            return np.asarray(self.custom_ft(w), dtype=float)
        raise InvalidParameter(f"unknown kernel kind {self.kind!r}")


DKE_DEFAULT = NamedKernel("dke", 1.0)
ERROR_FREE = NamedKernel("ef", None)
SINC_SQ = NamedKernel("sincsq", 2.0)
GAUSSIAN_KERNEL = NamedKernel.custom(lambda w: np.exp(-0.5 * w * w))

KERNELS = {"dke": DKE_DEFAULT, "ef": ERROR_FREE, "sincsq": SINC_SQ, "gauss": GAUSSIAN_KERNEL}


def _ecf(sample, omega):
    """(1/n) sum_j exp(-i omega Y_j), chunked to bound memory."""
    w = np.asarray(omega, dtype=float)
    flat = w.ravel()
    out = np.empty(flat.shape, dtype=complex)
    n = sample.size
    step = max(1, int(4_000_000 // max(n, 1)))
    for start in range(0, flat.size, step):
        block = flat[start : start + step]
        phase = np.outer(block, sample)
        out[start : start + step] = np.cos(phase).mean(axis=1) - 1j * np.sin(phase).mean(axis=1)
    return out.reshape(w.shape)


class PilotEstimate:
    """Density estimate of the contaminated law; exposes its Fourier transform."""

    kind = "abstract"

    @property
    def n(self):
        return int(self.sample.size)

    @property
    def span(self):
        """Width of the region carrying the pilot's mass, used to size quadratures."""
        return float(np.ptp(self.sample)) + 1.0

    #: frequency beyond which ft vanishes identically, if any
    band = None

    def ft(self, omega):
        raise NotImplementedError

    def envelope(self, omega):
        """Even, nonincreasing bound on |ft|, used to size quadratures."""
        return np.ones_like(np.asarray(omega, dtype=float))

    def describe(self):
        return {"kind": self.kind, "n": self.n}


class EmpiricalCF(PilotEstimate):
    kind = "ecf"

    def __init__(self, sample):
        self.sample = np.asarray(sample, dtype=float).ravel()
        if self.sample.size == 0:
            raise InvalidParameter("empty sample")

    def ft(self, omega):
        return _ecf(self.sample, omega)


class KDE(PilotEstimate):
    kind = "kde"

    def __init__(self, sample, kernel: NamedKernel, bandwidth):
        self.sample = np.asarray(sample, dtype=float).ravel()
        if self.sample.size == 0:
            raise InvalidParameter("empty sample")
        if not bandwidth > 0:
            raise InvalidParameter("bandwidth must be positive")
        self.kernel = kernel
        self.bandwidth = float(bandwidth)

    @property
    def band(self):
        return None if self.kernel.band is None else self.kernel.band / self.bandwidth

    def ft(self, omega):
        w = np.asarray(omega, dtype=float)
        return _ecf(self.sample, w) * self.kernel.ft(self.bandwidth * w)

    def envelope(self, omega):
        return np.abs(self.kernel.ft(self.bandwidth * np.asarray(omega, dtype=float)))

    def describe(self):
        return {"kind": self.kind, "n": self.n, "kernel": self.kernel.kind, "bandwidth": self.bandwidth}


class Histogram(PilotEstimate):
    kind = "hist"

    def __init__(self, edges, counts):
        self.edges = np.asarray(edges, dtype=float)
        self.counts = np.asarray(counts, dtype=float)
        if self.edges.ndim != 1 or self.edges.size != self.counts.size + 1:
            raise InvalidParameter("need len(edges) == len(counts) + 1")
        if np.any(np.diff(self.edges) <= 0):
            raise InvalidParameter("histogram edges must be strictly increasing")
        if np.any(self.counts < 0) or np.any(self.counts != np.round(self.counts)):
            raise InvalidParameter("histogram counts must be nonnegative integers")
        if self.counts.sum() <= 0:
            raise InvalidParameter("histogram is empty")

    @classmethod
    def from_sample(cls, sample, bins="auto"):
        counts, edges = np.histogram(np.asarray(sample, dtype=float), bins=bins)
        return cls(edges, counts)

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def span(self):
        return float(self.edges[-1] - self.edges[0]) + 1.0

    def envelope(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        with np.errstate(divide="ignore"):
            return np.minimum(1.0, 2.0 / (w * np.min(np.diff(self.edges))))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        widths = np.diff(self.edges)
        heights = self.counts / (self.n * widths)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < heights.size)
        return np.where(inside, heights[np.clip(idx, 0, heights.size - 1)], 0.0)

    def ft(self, omega):
        # exact transform of the step function: sum_k p_k exp(-i w mid_k) sinc(w width_k / 2)
        w = np.asarray(omega, dtype=float)
        widths = np.diff(self.edges)
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        probs = self.counts / self.n
        flat = w.ravel()
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, int(4_000_000 // probs.size))
        for start in range(0, flat.size, step):
            block = flat[start : start + step, None]
            env = np.sinc(block * widths / (2.0 * np.pi))
            out[start : start + step] = (probs * env * np.exp(-1j * block * mids)).sum(axis=1)
        return out.reshape(w.shape)

    def describe(self):
        return {"kind": self.kind, "n": self.n, "bins": int(self.counts.size)}


def ft_pilot(pilot: PilotEstimate, omega):
    """Fourier transform of the pilot estimate, evaluated in closed form."""
    return pilot.ft(omega)


def silverman_bandwidth(sample):
    sample = np.asarray(sample, dtype=float)
    sd = sample.std(ddof=1) if sample.size > 1 else 1.0
    iqr = np.subtract(*np.percentile(sample, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * (spread if spread > 0 else 1.0) * sample.size ** (-0.2)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyQuadrature:
    """Symmetric rule on [-omega_max, omega_max]."""

    omega_max: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    rule_kind: str = "gauss_legendre_panels"

    def integrate(self, values):
        return np.sum(self.weights * values)

    def integrate_even(self, fn):
        """Integral of an even function, evaluating it on the nonnegative nodes only."""
        pos = self.nodes > 0
        total = 2.0 * np.sum(self.weights[pos] * fn(self.nodes[pos]))
        zero = self.nodes == 0
        if np.any(zero):
            total += np.sum(self.weights[zero] * fn(self.nodes[zero]))
        return total

    @property
    def positive(self):
        pos = self.nodes > 0
        return self.nodes[pos], self.weights[pos]

    def tail_check(self, bound, tol):
        """Raise TailTooFat unless ``bound`` is below ``tol`` at both ends."""
        ends = np.array([-self.omega_max, self.omega_max])
        vals = np.abs(np.asarray(bound(ends)))
        if np.any(~np.isfinite(vals)) or np.max(vals) > tol:
            raise TailTooFat(
                f"integrand bound {np.max(vals):.3e} at |omega|={self.omega_max:.4g} exceeds {tol:.1e}"
            )


def _panel_rule(edges):
    """Gauss-Legendre panels on consecutive ``edges`` (ascending, nonnegative)."""
    a = edges[:-1, None]
    b = edges[1:, None]
    half = (b - a) / 2.0
    nodes = (half * _GL_X + (a + b) / 2.0).ravel()
    weights = (half * _GL_W).ravel()
    return nodes, weights


def _mirror(omega_max, nodes, weights, kind):
    full_nodes = np.concatenate([-nodes[::-1], nodes])
    full_weights = np.concatenate([weights[::-1], weights])
    return FrequencyQuadrature(float(omega_max), full_nodes, full_weights, kind)


def gl_quadrature(omega_max, panels_per_side, breakpoints=()):
    """Uniform Gauss-Legendre panels, with optional extra panel edges."""
    edges = np.linspace(0.0, omega_max, int(panels_per_side) + 1)
    if len(breakpoints):
        extra = [b for b in breakpoints if 0 < b < omega_max]
        edges = np.unique(np.concatenate([edges, extra]))
    nodes, weights = _panel_rule(edges)
    if 2 * nodes.size > MAX_NODES:
        raise TailTooFat(f"quadrature would need {2 * nodes.size} nodes (cap {MAX_NODES})")
    return _mirror(omega_max, nodes, weights, "gauss_legendre_panels")


def build_quadrature(omega_max, resolution=None, rule_kind="gauss_legendre_panels"):
    """Symmetric rule with node spacing at most ``omega_max / resolution``.

    >>> q = build_quadrature(8.0, 4096, "trapezoid")
    >>> round(float(q.integrate(np.ones_like(q.nodes))), 12)
    16.0
    """
    if resolution is None:
        resolution = default_resolution()
    if not omega_max > 0:
        raise BadResolution("omega_max must be positive")
    if resolution < 16 or int(resolution) != resolution:
        raise BadResolution(f"resolution {resolution} below the floor of 16")
    resolution = int(resolution)
    if rule_kind == "trapezoid":
        nodes = np.linspace(-omega_max, omega_max, 2 * resolution + 1)
        weights = np.full(nodes.size, omega_max / resolution)
        weights[0] = weights[-1] = 0.5 * omega_max / resolution
        return FrequencyQuadrature(float(omega_max), nodes, weights, "trapezoid")
    if rule_kind == "gauss_legendre_panels":
        panels = math.ceil(_GL_GAP * resolution)
        return gl_quadrature(omega_max, panels)
    raise BadResolution(f"unknown rule kind {rule_kind!r}")


def graded_quadrature(omega_max, omega_min=1e-4, panels_per_decade=40, breakpoints=()):
    """Panels on a geometric partition of [omega_min, omega_max] plus [0, omega_min].

    Suited to smooth, non-oscillating integrands with features on many scales,
    such as the MISE integrands.
    """
    if not 0 < omega_min < omega_max:
        raise BadResolution("need 0 < omega_min < omega_max")
    decades = math.log10(omega_max / omega_min)
    count = max(2, int(math.ceil(decades * panels_per_decade)) + 1)
    edges = np.concatenate([[0.0], np.geomspace(omega_min, omega_max, count)])
    extra = [b for b in breakpoints if 0 < b < omega_max]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    nodes, weights = _panel_rule(edges)
    return _mirror(omega_max, nodes, weights, "gauss_legendre_panels")


def omega_cutoff(envelope, start, rel_tol=1e-12, limit=1e7):
    """Double ``start`` until ``envelope`` at the cutoff is below ``rel_tol`` of its peak.

    ``envelope`` must be vectorised and even.  The test looks at the whole last
    sixteenth of the window, so integrands with isolated zeros do not stop the
    search early.
    """
    omega = float(start)
    while True:
        grid = np.linspace(0.0, omega, 1025)
        vals = np.abs(envelope(grid))
        peak = np.max(vals)
        if not np.isfinite(peak):
            raise TailTooFat("integrand envelope is not finite")
        if peak == 0 or np.max(vals[-64:]) <= rel_tol * peak:
            return omega
        omega *= 2.0
        if omega > limit:
            raise TailTooFat(f"integrand still {np.max(vals[-64:]) / peak:.2e} of peak at omega={omega / 2:.3g}")


def inversion_quadrature(omega_max, span, breakpoints=()):
    """Panels narrow enough to resolve exp(i omega x) for |x| up to ``span``."""
    panels = max(16, math.ceil(omega_max * max(span, 1e-12) / math.pi))
    return gl_quadrature(omega_max, panels, breakpoints)


def invert_on_grid(spectrum, quad: FrequencyQuadrature, xs, tail_tol=None):
    """(2 pi)^-1 sum_k w_k exp(i omega_k x) spectrum(omega_k) on each x.

    ``spectrum`` is a callable or an array already evaluated on ``quad.nodes``.
    """
    xs = np.asarray(xs, dtype=float)
    vals = spectrum(quad.nodes) if callable(spectrum) else np.asarray(spectrum)
    vals = np.asarray(vals, dtype=complex)
    if vals.shape != quad.nodes.shape:
        raise InvalidParameter("spectrum values do not match the quadrature nodes")
    if not np.all(np.isfinite(vals)):
        raise TailTooFat("spectrum is not finite on the quadrature nodes")
    scale = np.max(np.abs(vals)) if vals.size else 0.0
    asym = np.max(np.abs(vals[::-1] - np.conj(vals))) if vals.size else 0.0
    if asym > 1e-10 * scale + 1e-14:
        raise NonHermitianSpectrum(f"spectrum(-w) differs from conj(spectrum(w)) by {asym:.3e}")
    if tail_tol is not None:
        edge = max(abs(vals[0]), abs(vals[-1]))
        if edge > tail_tol:
            raise TailTooFat(f"spectrum is {edge:.3e} at |omega|={quad.omega_max:.4g}")
    # pair +w with -w: S(w) = H + K with H Hermitian, K anti-Hermitian; the real
    # part of the inverse comes from H alone and |imag| <= sum w |K| / pi
    pos = quad.nodes > 0
    mirror = pos[::-1]
    a, b = vals[pos], vals[mirror][::-1]
    herm, anti = 0.5 * (a + np.conj(b)), 0.5 * (a - np.conj(b))
    w_pos, nodes_pos = quad.weights[pos], quad.nodes[pos]
    zero = quad.nodes == 0
    centre = float(np.sum(quad.weights[zero] * vals[zero].real))
    imag_bound = (np.sum(w_pos * np.abs(anti)) + np.sum(quad.weights[zero] * np.abs(vals[zero].imag))) / np.pi
    hw = w_pos * herm
    flat_x = xs.ravel()
    out = np.empty(flat_x.shape)
    step = max(1, int(2_000_000 // max(nodes_pos.size, 1)))
    for start in range(0, flat_x.size, step):
        phase = np.outer(flat_x[start : start + step], nodes_pos)
        out[start : start + step] = np.cos(phase) @ hw.real - np.sin(phase) @ hw.imag
    out = (2.0 * out + centre) / (2.0 * np.pi)
    if imag_bound > IMAG_TOL:
        kw = w_pos * anti
        resid = 0.0
        for start in range(0, flat_x.size, step):
            phase = np.outer(flat_x[start : start + step], nodes_pos)
            im = np.sin(phase) @ kw.real + np.cos(phase) @ kw.imag
            resid = max(resid, float(np.max(np.abs(im))) / np.pi if im.size else 0.0)
        if resid > IMAG_TOL:
            raise NonHermitianSpectrum(f"inverse transform has imaginary residue {resid:.3e}")
    return out.reshape(xs.shape)


def hermitian_values(fn, quad: FrequencyQuadrature):
    """Evaluate a Hermitian spectrum on the nonnegative nodes and mirror the rest."""
    nodes = quad.nodes
    pos = nodes >= 0
    half = np.asarray(fn(nodes[pos]), dtype=complex)
    out = np.empty(nodes.shape, dtype=complex)
    out[pos] = half
    neg = ~pos
    # negative nodes are the mirror images of the positive ones, in reverse order
    out[neg] = np.conj(half[nodes[pos] > 0][::-1])
    return out


__all__ = [
    "ErrorModel",
    "TargetDensity",
    "Component",
    "NamedKernel",
    "PilotEstimate",
    "EmpiricalCF",
    "KDE",
    "Histogram",
    "FrequencyQuadrature",
    "DKE_DEFAULT",
    "ERROR_FREE",
    "SINC_SQ",
    "GAUSSIAN_KERNEL",
    "KERNELS",
    "cf_error",
    "cf_target",
    "ft_pilot",
    "build_quadrature",
    "graded_quadrature",
    "gl_quadrature",
    "inversion_quadrature",
    "omega_cutoff",
    "invert_on_grid",
    "hermitian_values",
    "error_for_proportion",
    "silverman_bandwidth",
    "default_resolution",
]
