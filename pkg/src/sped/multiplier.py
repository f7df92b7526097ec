"""The regularizing multiplier, the Lambert W function and the bias bounds.

The multiplier is

    phi_alpha(omega) = conj(g(omega)) / (|g(omega)|^2 + alpha omega^(2m)),

and for the symmetric error laws used here g is real, so the conjugate is the
identity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InvalidParameter, MaximizerAtBoundary, NegativeArgument
from .fourier import ErrorModel

RATE_KINDS = ("normal", "cauchy", "laplace")
_UNIT_ERRORS = {
    "normal": ErrorModel.gaussian(1.0),
    "cauchy": ErrorModel.cauchy(1.0),
    "laplace": ErrorModel.laplace(1.0),
}


@dataclass(frozen=True)
class Multiplier:
    alpha: float
    error: ErrorModel
    m: int = 2

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidParameter(f"alpha must be positive and finite, got {self.alpha}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidParameter(f"penalty order m must be a positive integer, got {self.m}")

    def value(self, omega):
        w = np.asarray(omega, dtype=float)
        g = self.error.cf(w)
        return g / (g * g + self.alpha * w ** (2 * self.m))

    __call__ = value


def phi_tilde(mult: Multiplier, omega):
    return mult.value(omega)


def _grid_sup(fn, omega_max, points=4000, lo_frac=1e-7):
    """Supremum of a nonnegative function on [0, omega_max].

    A log-spaced grid locates the peak, then golden-section search on log omega
    refines it.  Returns (value, argmax, on_edge) where ``on_edge`` reports a
    maximizer in the final 5% of the grid.
    """
    t = np.linspace(math.log(omega_max * lo_frac), math.log(omega_max), points)
    grid = np.concatenate([[0.0], np.exp(t)])
    vals = fn(grid)
    i = int(np.argmax(vals))
    on_edge = i >= int(0.95 * grid.size)
    best, arg = float(vals[i]), float(grid[i])
    if 1 < i < grid.size - 1:
        # bracket in log omega: the grid point beats both neighbours
        res = optimize.minimize_scalar(
            lambda s: -float(fn(np.array([math.exp(s)]))[0]),
            bracket=(t[i - 2], t[i - 1], t[i]),
            method="golden",
            tol=1e-12,
        )
        if -res.fun > best:
            best, arg = float(-res.fun), math.exp(res.x)
    return best, arg, on_edge


def _sup_with_doubling(fn, omega_max):
    value, arg, edge = _grid_sup(fn, omega_max)
    if edge:
        value, arg, edge = _grid_sup(fn, 2.0 * omega_max)
        if edge:
            raise MaximizerAtBoundary(f"maximizer {arg:.4g} sits at the end of [0, {2 * omega_max:.4g}]")
    return value


def sup_phi(mult: Multiplier, omega_max=None):
    """Numeric supremum of |phi_alpha| over the real line.

    By AM-GM, |phi| <= 1 / (2 sqrt(alpha) |omega|^m), which falls below
    phi(0) = 1 once |omega|^m > 1 / (2 sqrt(alpha)), so the default window
    always contains the maximizer.
    """
    if omega_max is None:
        omega_max = 2.0 * (2.0 * math.sqrt(mult.alpha)) ** (-1.0 / mult.m) + 1.0
    return _sup_with_doubling(lambda w: np.abs(mult.value(w)), omega_max)


def sup_phi_constructive_bound(error: ErrorModel, m, eps=1.0):
    """max(sqrt(M) / c, eps^-m / 2) with M = sup g = 1 and c = g(eps).

    This bounds sqrt(alpha) * sup |phi_alpha|.
    """
    c = float(error.cf(eps))
    if c <= 0:
        raise InvalidParameter("need g(eps) > 0")
    return max(1.0 / c, eps ** (-m) / 2.0)


def laplace_sharpened_bound(alpha, m):
    """2 (16 alpha)^(-1/(m+2)), valid for unit Laplace errors and alpha < 1/16."""
    return 2.0 * (16.0 * alpha) ** (-1.0 / (m + 2))


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------


def lambert_w(x):
    """Principal branch of the Lambert W function on x >= 0.

    Halley's iteration from Winitzki's log-based starting value; converges in a
    handful of steps over the whole nonnegative axis.

    >>> round(float(lambert_w(math.e)), 12)
    1.0
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise NegativeArgument("lambert_w is only defined here for x >= 0")
    scalar = arr.ndim == 0
    xv = np.atleast_1d(arr).astype(float)
    out = np.zeros_like(xv)
    finite = np.isfinite(xv) & (xv > 0)
    out[np.isinf(xv)] = np.inf
    xs = xv[finite]
    if xs.size:
        lx = np.log1p(xs)
        w = lx * (1.0 - np.log1p(lx) / (2.0 + lx))
        for _ in range(60):
            ew = np.exp(w)
            f = w * ew - xs
            wp1 = w + 1.0
            step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
            w = w - step
            if np.all(np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(w))):
                break
        out[finite] = w
    return float(out[0]) if scalar else out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSpec:
    """Smoothness order ``k`` of f, penalty order ``m`` and pilot MISE ``delta_sq``."""

    error_kind: str
    k: int
    m: int = 2
    delta_sq: float = 0.01

    def __post_init__(self):
        if self.error_kind not in RATE_KINDS:
            raise InvalidParameter(f"rate theory covers {RATE_KINDS}, not {self.error_kind!r}")
        if self.m < 1 or not 1 <= self.k <= 2 * self.m:
            raise InvalidParameter(f"need 1 <= k <= 2m, got k={self.k}, m={self.m}")
        if not self.delta_sq > 0:
            raise InvalidParameter("delta_sq must be positive")
        if self.delta_sq >= 1:
            warnings.warn("delta_sq >= 1: the asymptotic alpha rules are not meaningful", stacklevel=2)

    @property
    def unit_error(self):
        return _UNIT_ERRORS[self.error_kind]


def systematic_bound(spec: RateSpec, alpha, C=1.0):
    """Upper bound on ||f^alpha - f||^2 for unit-scale errors.

    ``C`` is (2 pi)^-1 int |omega^k f(omega)|^2 d omega.  Returns ``inf`` when
    alpha is too large for the bound to apply (Lambert argument below 1 for
    normal and Cauchy errors, 4 alpha > 1 for Laplace errors).
    """
    m, k = spec.m, spec.k
    if not alpha > 0:
        raise InvalidParameter("alpha must be positive")
    if spec.error_kind == "normal":
        arg = 1.0 / (m * alpha ** (1.0 / m))
        if arg < 1:
            return math.inf
        return C / (m**k * lambert_w(arg) ** k)
    if spec.error_kind == "cauchy":
        arg = alpha ** (-1.0 / (2 * m)) / m
        if arg < 1:
            return math.inf
        return C / (m ** (2 * k) * lambert_w(arg) ** (2 * k))
    if 4.0 * alpha > 1.0:
        return math.inf
    return C * (4.0 * alpha) ** (k / (m + 2))


def theta_sup_numeric(spec: RateSpec, alpha, error: ErrorModel | None = None):
    """sup over omega > 0 of theta(omega)^2, theta = alpha omega^(2m-k) / (g^2 + alpha omega^(2m))."""
    err = spec.unit_error if error is None else error
    m, k = spec.m, spec.k

    def theta_sq(w):
        g = err.cf(w)
        th = alpha * w ** (2 * m - k) / (g * g + alpha * w ** (2 * m))
        return th * th

    # beyond the crossing g^2 = alpha omega^(2m), theta^2 <= omega^(-2k) decreases
    omega_max = 4.0 * alpha ** (-1.0 / (2 * m)) + 4.0
    return _sup_with_doubling(theta_sq, omega_max)


def rate_alpha(spec: RateSpec):
    """alpha_n prescribed by the rate theory for the spec's error law."""
    d2, k, m = spec.delta_sq, spec.k, spec.m
    if spec.error_kind == "normal":
        return d2 * lambert_w(d2 ** (-1.0 / k)) ** k
    if spec.error_kind == "cauchy":
        return d2 * lambert_w(math.sqrt(d2) ** (-1.0 / k)) ** (2 * k)
    return d2 ** ((m + 2) / (k + 2))


def laplace_two_term(delta_sq, alpha, k, m):
    """delta^2 alpha^(-2/(m+2)) + alpha^(k/(m+2)): the Laplace variance/bias tradeoff."""
    return delta_sq * alpha ** (-2.0 / (m + 2)) + alpha ** (k / (m + 2))


__all__ = [
    "Multiplier",
    "RateSpec",
    "phi_tilde",
    "sup_phi",
    "sup_phi_constructive_bound",
    "laplace_sharpened_bound",
    "lambert_w",
    "systematic_bound",
    "theta_sup_numeric",
    "rate_alpha",
    "laplace_two_term",
]
