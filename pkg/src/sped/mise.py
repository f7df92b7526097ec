"""Exact MISE formulas, minimum-MISE search and equivalent sample sizes.

For an empirical-CF pilot every estimator considered here is a Fourier
multiplier k(omega) applied to the empirical characteristic function, and

    MISE = (2 pi)^-1 [ int |k g - 1|^2 |f|^2 + n^-1 int |k|^2 (1 - |g f|^2) ],

with k = phi_alpha for the penalized estimator, k = kappa(lambda omega) / g for
the deconvoluting kernel estimator and k = kappa(lambda omega), g = 1 for the
error-free kernel estimator.  All integrands are even, so the integrals run
over omega >= 0 and are doubled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import optimize

from .errors import ErrorCFVanishesOnBand, InvalidParameter, NoBracket
from .fourier import (
    DKE_DEFAULT,
    ERROR_FREE,
    ErrorModel,
    NamedKernel,
    TargetDensity,
    default_resolution,
    error_for_proportion,
    graded_quadrature,
    omega_cutoff,
)

ALPHA_RANGE = (1e-10, 1e4)
LAMBDA_RANGE = (1e-3, 10.0)
GRID_POINTS = 60
N_CAP = 10**6
_REL_TAIL = 1e-14


def panels_per_decade(resolution=None):
    resolution = default_resolution() if resolution is None else resolution
    return max(8, int(resolution) // 128)


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str  # "sped", "dke" or "kde" (error-free kernel estimator on the X's)
    m: int = 2
    kernel: NamedKernel | None = None

    @classmethod
    def sped(cls, m=2):
        return cls("sped", m=m)

    @classmethod
    def dke(cls, kernel=DKE_DEFAULT):
        return cls("dke", kernel=kernel)

    @classmethod
    def error_free(cls, kernel=ERROR_FREE):
        return cls("kde", kernel=kernel)

    def __post_init__(self):
        if self.kind not in ("sped", "dke", "kde"):
            raise InvalidParameter(f"unknown estimator kind {self.kind!r}")
        if self.kind != "sped" and self.kernel is None:
            raise InvalidParameter("kernel estimators need a kernel")
        if self.kind == "sped" and (int(self.m) != self.m or self.m < 1):
            raise InvalidParameter("penalty order m must be a positive integer")

    @property
    def label(self):
        if self.kind == "sped":
            return f"sped(m={self.m})"
        return f"{self.kind}({self.kernel.kind})"

    @property
    def param_range(self):
        return ALPHA_RANGE if self.kind == "sped" else LAMBDA_RANGE


@dataclass(frozen=True)
class MiseSetting:
    """Target, error proportion p = Var(E) / Var(Y), sample size and estimator."""

    target: TargetDensity
    p: float
    n: int
    estimator: EstimatorSpec
    error_family: str = "gaussian"
    resolution: int | None = field(default=None, compare=False)
    error_model: ErrorModel | None = None  # overrides (p, error_family) when given

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise InvalidParameter(f"error proportion must lie in [0, 1), got {self.p}")
        if not self.n >= 1:
            raise InvalidParameter(f"sample size must be positive, got {self.n}")
        if self.estimator.kind == "kde" and self.p != 0:
            raise InvalidParameter("the error-free estimator sees uncontaminated data (p = 0)")

    @classmethod
    def for_error(cls, target: TargetDensity, error: ErrorModel, n, estimator, resolution=None):
        """Setting with a given error law; p is derived from its variance when finite."""
        var = error.variance
        p = var / (var + target.variance) if math.isfinite(var) else 0.5
        return cls(target, p, n, estimator, error.kind, resolution, error)

    @property
    def error(self) -> ErrorModel | None:
        if self.error_model is not None:
            return self.error_model
        if self.p == 0:
            return None
        return error_for_proportion(self.target, self.p, self.error_family)

    def with_n(self, n):
        return replace(self, n=int(n))

    def g(self, omega):
        err = self.error
        w = np.asarray(omega, dtype=float)
        return np.ones_like(w) if err is None else err.cf(w)


class _Integrals:
    """Cached frequency-domain pieces for one setting (independent of n)."""

    def __init__(self, setting: MiseSetting):
        self.setting = setting
        self.target = setting.target
        self.error = setting.error
        self.ppd = panels_per_decade(setting.resolution)

    # shared pieces -----------------------------------------------------------
    def _f_cutoff(self):
        sd = math.sqrt(self.target.variance)
        return omega_cutoff(self.target.cf_abs_sq, 4.0 / sd, _REL_TAIL)

    @cached_property
    def f_norm_sq(self):
        """||f||^2 = (2 pi)^-1 int |f|^2."""
        omega_max = self._f_cutoff()
        quad = graded_quadrature(omega_max, omega_max * 1e-8, self.ppd)
        nodes, weights = quad.positive
        return float(np.sum(weights * self.target.cf_abs_sq(nodes))) / math.pi

    # penalized estimator -------------------------------------------------------
    def _sped_nodes(self, alpha_min):
        m = self.setting.estimator.m
        g = self.setting.g

        def env(w):
            gw = g(w)
            phi = gw / (gw * gw + alpha_min * w ** (2 * m))
            return phi * phi + self.target.cf_abs_sq(w)

        start = 4.0 * alpha_min ** (-1.0 / (2 * m))
        omega_max = max(omega_cutoff(env, start, _REL_TAIL), self._f_cutoff())
        quad = graded_quadrature(omega_max, omega_max * 1e-10, self.ppd)
        nodes, weights = quad.positive
        return nodes, weights, g(nodes), self.target.cf_abs_sq(nodes)

    def sped_terms(self, alpha, alpha_min=None):
        """(systematic, variance) with MISE = systematic + variance / n."""
        if not alpha > 0:
            raise InvalidParameter("alpha must be positive")
        lo = alpha if alpha_min is None else min(alpha, alpha_min)
        key = ("sped", lo)
        cache = self.__dict__.setdefault("_node_cache", {})
        if key not in cache:
            cache.clear()
            cache[key] = self._sped_nodes(lo)
        nodes, weights, g, f2 = cache[key]
        pen = alpha * nodes ** (2 * self.setting.estimator.m)
        den = g * g + pen
        bias = (pen / den) ** 2 * f2
        var = (g / den) ** 2 * (1.0 - g * g * f2)
        return float(np.sum(weights * bias)) / math.pi, float(np.sum(weights * var)) / math.pi

    # kernel estimators ---------------------------------------------------------
    @cached_property
    def _kernel_nodes(self):
        """Nodes in u = lambda omega over the kernel's effective band."""
        kernel = self.setting.estimator.kernel
        if kernel.band is not None:
            u_max, breaks = kernel.band, ()
        else:
            u_max = omega_cutoff(lambda u: np.abs(kernel.ft(u)), 4.0, 1e-11)
            breaks = ()
        quad = graded_quadrature(u_max, u_max * 1e-10, self.ppd, breaks)
        nodes, weights = quad.positive
        kap = kernel.ft(nodes)
        return nodes, weights, kap, u_max

    def kernel_terms(self, lam):
        if not lam > 0:
            raise InvalidParameter("bandwidth must be positive")
        u, w, kap, u_max = self._kernel_nodes
        err = self.error if self.setting.estimator.kind == "dke" else None
        if err is not None and err.first_zero <= u_max / lam:
            raise ErrorCFVanishesOnBand(
                f"g vanishes at {err.first_zero:.4g}, inside the band {u_max / lam:.4g}"
            )
        omega = u / lam
        f2 = self.target.cf_abs_sq(omega)
        # bias: int (kappa - 1)^2 |f|^2 = int |f|^2 + int (kappa^2 - 2 kappa) |f|^2, the second
        # integrand vanishing outside the band
        bias = self.f_norm_sq + float(np.sum(w * (kap * kap - 2.0 * kap) * f2)) / (math.pi * lam)
        if err is None:
            var_int = kap * kap * (1.0 - f2)
        else:
            g = err.cf(omega)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                var_int = np.where(kap != 0, kap * kap / (g * g) * (1.0 - g * g * f2), 0.0)
        var = float(np.sum(w * var_int)) / (math.pi * lam)
        if not math.isfinite(var) or np.isnan(var):
            var = math.inf
        return max(bias, 0.0), var


_CACHE: dict = {}


def _integrals(setting: MiseSetting) -> _Integrals:
    key = (setting.target, setting.p, setting.estimator, setting.error_family, setting.resolution, setting.error_model)
    if key not in _CACHE:
        if len(_CACHE) > 64:
            _CACHE.clear()
        _CACHE[key] = _Integrals(setting)
    return _CACHE[key]


def mise_terms(setting: MiseSetting, param):
    """(systematic, variance) of the estimator at tuning parameter ``param``."""
    integ = _integrals(setting)
    if setting.estimator.kind == "sped":
        return integ.sped_terms(param, alpha_min=ALPHA_RANGE[0] if param >= ALPHA_RANGE[0] else None)
    return integ.kernel_terms(param)


def mise(setting: MiseSetting, param):
    sys_term, var_term = mise_terms(setting, param)
    return sys_term + var_term / setting.n


def mise_sped(setting: MiseSetting, alpha):
    if setting.estimator.kind != "sped":
        raise InvalidParameter("setting does not describe the penalized estimator")
    return mise(setting, alpha)


def mise_dke(setting: MiseSetting, lam):
    if setting.estimator.kind == "sped":
        raise InvalidParameter("setting does not describe a kernel estimator")
    return mise(setting, lam)


def mise_error_free(target: TargetDensity, n, lam, kernel: NamedKernel = ERROR_FREE, resolution=None):
    setting = MiseSetting(target, 0.0, n, EstimatorSpec.error_free(kernel), resolution=resolution)
    return mise(setting, lam)


def norm_sq(target: TargetDensity):
    """||f||^2 via the same quadrature engine as the MISE formulas."""
    setting = MiseSetting(target, 0.0, 1, EstimatorSpec.error_free())
    return _integrals(setting).f_norm_sq


def mise_curve(setting: MiseSetting, points=GRID_POINTS, bounds=None):
    lo, hi = setting.estimator.param_range if bounds is None else bounds
    params = np.geomspace(lo, hi, points)
    values = np.array([mise(setting, float(t)) for t in params])
    return params, values


def minimize_log(fun, lo, hi, points=GRID_POINTS, label="objective"):
    """Minimise ``fun`` over [lo, hi] in log scale.

    A log-spaced grid brackets the minimum, golden-section search refines it.
    If the grid minimum sits on an end point the range is widened by 1e3 on
    that side once; a second failure raises NoBracket.
    """
    for attempt in range(2):
        params = np.geomspace(lo, hi, points)
        values = np.array([fun(float(t)) for t in params])
        i = int(np.argmin(values))
        if 0 < i < params.size - 1 and np.isfinite(values[i]):
            break
        if attempt == 1:
            raise NoBracket(f"{label} is monotone over [{lo:.3g}, {hi:.3g}]")
        if i == 0:
            lo = lo / 1e3
        else:
            hi = hi * 1e3
    t = np.log(params)
    res = optimize.minimize_scalar(
        lambda s: fun(math.exp(s)),
        bracket=(t[i - 1], t[i], t[i + 1]),
        method="golden",
        tol=1e-9,
    )
    if res.fun <= values[i]:
        return math.exp(float(res.x)), float(res.fun)
    return float(params[i]), float(values[i])


def min_mise(setting: MiseSetting):
    """(argmin, value) of the MISE over the tuning parameter."""
    lo, hi = setting.estimator.param_range
    return minimize_log(lambda t: mise(setting, t), lo, hi, label=f"MISE of {setting.estimator.label}")


class Exceeded:
    """Marker for equivalent sample sizes beyond the search cap."""

    def __init__(self, cap=N_CAP):
        self.cap = cap

    def __str__(self):
        return f">1e{int(round(math.log10(self.cap)))}"

    __repr__ = __str__

    def __eq__(self, other):
        return isinstance(other, Exceeded) and other.cap == self.cap

    def __hash__(self):
        return hash(("Exceeded", self.cap))


def reference_mise(target: TargetDensity, reference_n, reference_kernel: NamedKernel, resolution=None):
    """Minimum MISE of the error-free kernel estimator at ``reference_n``."""
    setting = MiseSetting(target, 0.0, int(reference_n), EstimatorSpec.error_free(reference_kernel), resolution=resolution)
    return min_mise(setting)[1]


def equivalent_n(setting: MiseSetting, reference_n, reference_kernel: NamedKernel = ERROR_FREE, cap=N_CAP):
    """Smallest n whose minimum MISE is no larger than the error-free reference.

    The search starts at ``reference_n``, doubles (or halves) until the answer
    is bracketed, then bisects on the integers; ``setting.n`` is ignored.
    """
    if int(reference_n) != reference_n or reference_n < 1:
        raise InvalidParameter(f"reference sample size must be a positive integer, got {reference_n}")
    target = setting.target
    ref = reference_mise(target, reference_n, reference_kernel, setting.resolution)

    def ok(n):
        return min_mise(setting.with_n(n))[1] <= ref

    n0 = int(reference_n)
    if ok(n0):
        hi = n0
        lo = n0 // 2
        while lo >= 1 and ok(lo):
            hi, lo = lo, lo // 2
        if lo < 1:
            return 1
    else:
        lo, hi = n0, min(2 * n0, cap)
        while not ok(hi):
            if hi >= cap:
                return Exceeded(cap)
            lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


__all__ = [
    "EstimatorSpec",
    "MiseSetting",
    "Exceeded",
    "mise",
    "mise_terms",
    "mise_sped",
    "mise_dke",
    "mise_error_free",
    "mise_curve",
    "min_mise",
    "minimize_log",
    "norm_sq",
    "reference_mise",
    "equivalent_n",
    "ALPHA_RANGE",
    "LAMBDA_RANGE",
]
