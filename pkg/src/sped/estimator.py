"""Exact estimators by Fourier inversion, and the discretized Tikhonov objective.

The smoothness-penalized estimate of f from a pilot h_n has transform
phi_alpha * ft(h_n); the alpha-smoothed truth f^alpha has transform
phi_alpha * g * f; the deconvoluting kernel estimator has transform
ft(P_n) kappa(lambda omega) / g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ErrorCFVanishesOnBand, GridMismatch, InvalidParameter, UnsupportedPilot
from .fourier import (
    KDE,
    EmpiricalCF,
    ErrorModel,
    FrequencyQuadrature,
    PilotEstimate,
    TargetDensity,
    hermitian_values,
    inversion_quadrature,
    invert_on_grid,
    omega_cutoff,
)
from .multiplier import Multiplier

TAIL_REL_TOL = 1e-12


@dataclass
class DensityCurve:
    """A density sampled on a uniform grid."""

    xs: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.xs.ndim != 1 or self.xs.shape != self.values.shape:
            raise GridMismatch("xs and values must be 1-d arrays of equal length")
        if self.xs.size < 2:
            raise GridMismatch("a curve needs at least two grid points")
        steps = np.diff(self.xs)
        if np.any(steps <= 0):
            raise GridMismatch("xs must be strictly increasing")
        if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, abs(steps.mean())):
            raise GridMismatch("xs must be uniformly spaced")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("curve values must be finite")

    @property
    def dx(self):
        return float(self.xs[1] - self.xs[0])

    def integral(self):
        return float(np.trapezoid(self.values, self.xs))

    def l2_norm_sq(self):
        return float(np.trapezoid(self.values**2, self.xs))

    def same_grid(self, other):
        return self.xs.shape == other.xs.shape and np.allclose(self.xs, other.xs, rtol=0, atol=1e-12)

    def __add__(self, other):
        if isinstance(other, DensityCurve):
            if not self.same_grid(other):
                raise GridMismatch("curves live on different grids")
            other = other.values
        return DensityCurve(self.xs, self.values + other, dict(self.meta))

    def __sub__(self, other):
        if isinstance(other, DensityCurve):
            if not self.same_grid(other):
                raise GridMismatch("curves live on different grids")
            other = other.values
        return DensityCurve(self.xs, self.values - other, dict(self.meta))


def uniform_grid(lo, hi, size=1024):
    if not hi > lo:
        raise GridMismatch("grid needs hi > lo")
    return np.linspace(lo, hi, int(size))


def _error_start(error: ErrorModel):
    """First guess of the frequency window for spectra carrying a factor g."""
    if error.kind == "gaussian":
        return 12.0 / error.scale
    return 16.0 / error.scale


def _span(xs, pilot=None, target=None):
    """Largest |x - y| the inversion must resolve, with y in the pilot's or target's mass.

    The integrand oscillates like exp(i omega (x - y)), so this sets the panel width.
    """
    xs = np.asarray(xs, dtype=float)
    lo, hi = float(xs.min()), float(xs.max())
    if pilot is not None and hasattr(pilot, "sample"):
        lo, hi = min(lo, pilot.sample.min()), max(hi, pilot.sample.max())
    elif pilot is not None and hasattr(pilot, "edges"):
        lo, hi = min(lo, pilot.edges[0]), max(hi, pilot.edges[-1])
    if target is not None:
        tlo, thi = target.support()
        lo, hi = min(lo, tlo), max(hi, thi)
    return hi - lo


def _multiplier_window(mult: Multiplier, pilot_envelope, band=None):
    start = max(_error_start(mult.error), 4.0 * mult.alpha ** (-1.0 / (2 * mult.m)))
    if band is not None:
        return band
    env = lambda w: np.abs(mult.value(w)) * pilot_envelope(w)  # noqa: E731
    return omega_cutoff(env, start, TAIL_REL_TOL)


def sped_estimate(pilot: PilotEstimate, mult: Multiplier, xs, quad: FrequencyQuadrature | None = None):
    """Smoothness-penalized deconvolution of ``pilot`` evaluated on ``xs``.

    With an empirical-CF pilot the transform decays only like |phi_alpha|, so
    the inversion is absolutely convergent only for m >= 2.
    """
    if isinstance(pilot, EmpiricalCF) and mult.m < 2:
        raise UnsupportedPilot("an empirical-CF pilot needs penalty order m >= 2")
    xs = np.asarray(xs, dtype=float)
    if quad is None:
        omega_max = _multiplier_window(mult, pilot.envelope, pilot.band)
        breaks = () if pilot.band is None else (pilot.band,)
        quad = inversion_quadrature(omega_max, _span(xs, pilot), breaks)
    spectrum = hermitian_values(lambda w: mult.value(w) * pilot.ft(w), quad)
    values = invert_on_grid(spectrum, quad, xs)
    meta = {"estimator": "sped", "alpha": mult.alpha, "m": mult.m, "pilot": pilot.describe()}
    return DensityCurve(xs, values, meta)


def alpha_smoothed(target: TargetDensity, error: ErrorModel, mult: Multiplier | None, xs, quad=None):
    """The alpha-smoothed truth f^alpha; ``mult=None`` is the alpha = 0 limit f itself."""
    xs = np.asarray(xs, dtype=float)
    if mult is not None and mult.error != error:
        raise InvalidParameter("multiplier was built for a different error law")

    def spectrum(w):
        f = target.cf(w)
        if mult is None:
            return f
        return mult.value(w) * error.cf(w) * f

    if quad is None:
        env = lambda w: np.abs(spectrum(w))  # noqa: E731
        omega_max = omega_cutoff(env, 8.0, TAIL_REL_TOL)
        quad = inversion_quadrature(omega_max, _span(xs, target=target))
    values = invert_on_grid(spectrum(quad.nodes), quad, xs)
    meta = {"estimator": "alpha_smoothed", "alpha": 0.0 if mult is None else mult.alpha, "target": target.name}
    return DensityCurve(xs, values, meta)


def dke_estimate(pilot: KDE, error: ErrorModel, xs, quad=None):
    """Deconvoluting kernel estimator: inverse transform of ft(P_n) kappa(lambda omega) / g."""
    if not isinstance(pilot, KDE):
        raise UnsupportedPilot("the deconvoluting kernel estimator needs a KDE pilot")
    xs = np.asarray(xs, dtype=float)
    band = pilot.band
    if band is not None and error.first_zero <= band:
        raise ErrorCFVanishesOnBand(
            f"g vanishes at omega={error.first_zero:.4g}, inside the kernel band {band:.4g}"
        )
    if quad is None:
        if band is not None:
            omega_max = band
        else:
            if error.kind == "uniform":
                raise ErrorCFVanishesOnBand("uniform errors need a band-limited kernel")
            env = lambda w: pilot.envelope(w) / error.cf(w)  # noqa: E731
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                omega_max = omega_cutoff(env, 8.0 / pilot.bandwidth, TAIL_REL_TOL)
        quad = inversion_quadrature(omega_max, _span(xs, pilot))

    def ratio(w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(pilot.envelope(w) > 0, pilot.ft(w) / error.cf(w), 0.0)

    values = invert_on_grid(hermitian_values(ratio, quad), quad, xs)
    meta = {"estimator": "dke", "bandwidth": pilot.bandwidth, "pilot": pilot.describe()}
    return DensityCurve(xs, values, meta)


def pilot_curve(pilot: PilotEstimate, xs, quad=None):
    """The pilot density h_n itself on ``xs`` (KDE or histogram pilots)."""
    xs = np.asarray(xs, dtype=float)
    if hasattr(pilot, "density"):
        return DensityCurve(xs, pilot.density(xs), {"estimator": "pilot", "pilot": pilot.describe()})
    if isinstance(pilot, EmpiricalCF):
        raise UnsupportedPilot("the empirical distribution has no density")
    if quad is None:
        omega_max = pilot.band if pilot.band is not None else omega_cutoff(pilot.envelope, 8.0, TAIL_REL_TOL)
        quad = inversion_quadrature(omega_max, _span(xs, pilot))
    values = invert_on_grid(pilot.ft, quad, xs)
    return DensityCurve(xs, values, {"estimator": "pilot", "pilot": pilot.describe()})


# ---------------------------------------------------------------------------
# Discretized Tikhonov objective
# ---------------------------------------------------------------------------


def central_difference_weights(order, half_width):
    """Weights of the symmetric stencil for the ``order``-th derivative."""
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    size = offsets.size
    A = np.vander(offsets, size, increasing=True).T / np.array([math.factorial(i) for i in range(size)])[:, None]
    rhs = np.zeros(size)
    rhs[order] = 1.0
    return np.linalg.solve(A, rhs)


def derivative(values, dx, order):
    """``order``-th derivative by fourth-order central differences, zero outside the grid."""
    half = (order + 1) // 2 + 1
    weights = central_difference_weights(order, half)
    padded = np.concatenate([np.zeros(half), values, np.zeros(half)])
    return np.convolve(padded, weights[::-1], mode="valid") / dx**order


def convolve_error(values, dx, error: ErrorModel):
    """g * v on the same grid by zero-padded FFT, using the exact transform of g."""
    n = values.size
    size = 1 << int(math.ceil(math.log2(4 * n)))
    omega = 2.0 * np.pi * np.fft.rfftfreq(size, d=dx)
    spec = np.fft.rfft(values, size) * error.cf(omega)
    return np.fft.irfft(spec, size)[:n]


def tikhonov_objective(candidate: DensityCurve, pilot: DensityCurve, error: ErrorModel, alpha, m=2):
    """||g * v - u||^2 + alpha ||v^(m)||^2 for v = candidate, u = pilot, on their common grid."""
    if not candidate.same_grid(pilot):
        raise GridMismatch("candidate and pilot curves must share a grid")
    dx = candidate.dx
    resid = convolve_error(candidate.values, dx, error) - pilot.values
    deriv = derivative(candidate.values, dx, m)
    return float(np.trapezoid(resid**2, dx=dx) + alpha * np.trapezoid(deriv**2, dx=dx))


__all__ = [
    "DensityCurve",
    "uniform_grid",
    "sped_estimate",
    "alpha_smoothed",
    "dke_estimate",
    "pilot_curve",
    "tikhonov_objective",
    "central_difference_weights",
    "derivative",
    "convolve_error",
]
