"""Seeded Monte-Carlo harness and the iterated choice of alpha.

Every replicate draws from its own counter-based stream keyed on
(seed, replicate index), so serial and threaded runs agree bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, InvalidParameter, NonDensityIterate, SpedError
from .estimator import DensityCurve, sped_estimate, uniform_grid
from .fourier import EmpiricalCF, ErrorModel, TargetDensity, graded_quadrature, omega_cutoff
from .mise import ALPHA_RANGE, MiseSetting, minimize_log, panels_per_decade
from .multiplier import Multiplier, RateSpec, rate_alpha
from .qp import project_to_pdf
from .splines import assemble, build_space, bspline_ft, default_interval, evaluate_spline, solve_theta

# ---------------------------------------------------------------------------
# Random streams and sampling
# ---------------------------------------------------------------------------


def make_rng(seed, stream=0):
    """Philox generator for the stream (seed, stream)."""
    if int(seed) != seed or int(stream) != stream or stream < 0:
        raise InvalidParameter("seed and stream must be integers, stream >= 0")
    seq = np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])
    return np.random.Generator(np.random.Philox(seq))


def sample_target(target: TargetDensity, n, rng):
    """n i.i.d. draws from the target: pick a component, then draw from it."""
    if int(n) != n or n < 1:
        raise InvalidParameter(f"sample size must be a positive integer, got {n}")
    return target.sample(rng, int(n))


def contaminate(xs, error: ErrorModel, rng):
    """Y = X + E with E drawn i.i.d. from ``error``."""
    xs = np.asarray(xs, dtype=float)
    return xs + error.sample(rng, xs.size).reshape(xs.shape)


def sample_curve(curve: DensityCurve, n, rng):
    """Inverse-CDF draws from a gridded curve; negative parts are clipped to zero."""
    vals = np.clip(curve.values, 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(curve.xs))])
    if not cdf[-1] > 0:
        raise InvalidParameter("curve carries no positive mass")
    cdf /= cdf[-1]
    u = rng.uniform(size=int(n))
    return np.interp(u, cdf, curve.xs)


def ise(curve: DensityCurve, truth):
    """Trapezoid integral of (curve - truth)^2 over the curve's grid.

    ``truth`` is a TargetDensity or a DensityCurve on the same grid.
    """
    if not isinstance(curve, DensityCurve):
        raise GridMismatch("ise needs a DensityCurve on a uniform grid")
    if isinstance(truth, DensityCurve):
        if not curve.same_grid(truth):
            raise GridMismatch("curve and truth live on different grids")
        ref = truth.values
    else:
        ref = truth.density(curve.xs)
    return float(np.trapezoid((curve.values - ref) ** 2, curve.xs))


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    points: int = 1024

    def __post_init__(self):
        if not self.hi > self.lo or self.points < 2:
            raise GridMismatch(f"bad grid [{self.lo}, {self.hi}] with {self.points} points")

    @property
    def xs(self):
        return uniform_grid(self.lo, self.hi, self.points)


def effective_support(target: TargetDensity, error: ErrorModel | None, width=4.0):
    """Target mean +- ``width`` sd, widened by ``width`` error spreads."""
    lo, hi = target.support(width)
    pad = 0.0 if error is None else width * error.spread
    return lo - pad, hi + pad


def default_grid(target, error, points=1024):
    return GridSpec(*effective_support(target, error), points)


@dataclass(frozen=True)
class TuningConfig:
    alpha0: float = 1e-2
    tol: float = 1e-3
    max_iter: int = 50

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise InvalidParameter("alpha0 must be positive")
        if not 0 < self.tol < 1:
            raise InvalidParameter("tol must lie in (0, 1)")
        if int(self.max_iter) != self.max_iter or not 0 <= self.max_iter <= 100:
            raise InvalidParameter("max_iter must be an integer in [0, 100]")


@dataclass(frozen=True)
class Fixed:
    alpha: float


@dataclass(frozen=True)
class RateRule:
    spec: RateSpec


@dataclass(frozen=True)
class Tuned:
    config: TuningConfig


@dataclass(frozen=True)
class SplineOptions:
    """Run the spline path instead of exact inversion."""

    q: int = 40
    project: bool = False
    width: float = 4.0


@dataclass(frozen=True)
class SimPlan:
    setting: MiseSetting
    n_sim: int
    seed: int
    alpha_rule: Fixed | RateRule | Tuned
    grid: GridSpec | None = None
    spline: SplineOptions | None = None

    def __post_init__(self):
        if int(self.n_sim) != self.n_sim or self.n_sim < 1:
            raise InvalidParameter("n_sim must be a positive integer")
        if self.setting.estimator.kind != "sped":
            raise InvalidParameter("the harness runs the penalized estimator")
        if self.setting.error is None:
            raise InvalidParameter("the harness needs contaminated data (p > 0)")
        if not isinstance(self.alpha_rule, (Fixed, RateRule, Tuned)):
            raise InvalidParameter("alpha_rule must be Fixed, RateRule or Tuned")
        if self.grid is not None:
            lo, hi = effective_support(self.setting.target, self.setting.error)
            if self.grid.lo > lo or self.grid.hi < hi:
                raise GridMismatch(f"grid [{self.grid.lo}, {self.grid.hi}] does not cover [{lo:.4g}, {hi:.4g}]")

    @property
    def xs(self):
        grid = self.grid or default_grid(self.setting.target, self.setting.error)
        return grid.xs


@dataclass
class SimResult:
    mean_ise: float
    se: float  # nan when n_sim = 1
    per_rep: np.ndarray
    alphas: np.ndarray
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Estimation for one sample
# ---------------------------------------------------------------------------


def _spline_fit(ys, error, alpha, m, opts: SplineOptions):
    if m != 2:
        raise InvalidParameter("the spline path uses the second-derivative penalty (m = 2)")
    a, b = default_interval(ys, error, opts.width)
    space = build_space(a, b, opts.q)
    gram = assemble(space, error, EmpiricalCF(ys))
    theta = solve_theta(gram, alpha)
    if opts.project:
        theta = project_to_pdf(theta, gram)
    return space, theta


def estimate(ys, error, alpha, m, xs, spline: SplineOptions | None = None):
    """The penalized estimate of one sample on ``xs`` (exact or spline path)."""
    if spline is None:
        return sped_estimate(EmpiricalCF(ys), Multiplier(alpha, error, m), xs)
    space, theta = _spline_fit(ys, error, alpha, m, spline)
    curve = evaluate_spline(space, theta, xs)
    curve.meta["projected"] = spline.project
    return curve


def _choose_alpha(rule, ys, error, m, spline):
    if isinstance(rule, Fixed):
        return float(rule.alpha)
    if isinstance(rule, RateRule):
        return rate_alpha(rule.spec)
    return tune_alpha(ys, error, rule.config, spline=spline, m=m)[0]


def _replicate(plan: SimPlan, index, xs):
    setting = plan.setting
    error = setting.error
    rng = make_rng(plan.seed, index)
    try:
        x = sample_target(setting.target, setting.n, rng)
        y = contaminate(x, error, rng)
        alpha = _choose_alpha(plan.alpha_rule, y, error, setting.estimator.m, plan.spline)
        curve = estimate(y, error, alpha, setting.estimator.m, xs, plan.spline)
        return ise(curve, setting.target), alpha
    except SpedError as exc:
        exc.replicate = index
        exc.args = (f"replicate {index}: {exc}",)
        raise


def run_mise_sim(plan: SimPlan, threads=1):
    """Mean ISE over ``plan.n_sim`` replicates and its Monte-Carlo standard error."""
    xs = plan.xs
    indices = range(plan.n_sim)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            out = list(pool.map(lambda i: _replicate(plan, i, xs), indices))
    else:
        out = [_replicate(plan, i, xs) for i in indices]
    per_rep = np.array([v for v, _ in out])
    alphas = np.array([a for _, a in out])
    # fsum is exactly rounded, hence independent of summation order
    mean = math.fsum(per_rep) / per_rep.size
    if per_rep.size > 1:
        var = math.fsum((per_rep - mean) ** 2) / (per_rep.size - 1)
        se = math.sqrt(var / per_rep.size)
    else:
        se = math.nan
    meta = {
        "seed": plan.seed,
        "n_sim": plan.n_sim,
        "n": plan.setting.n,
        "p": plan.setting.p,
        "path": "exact" if plan.spline is None else "spline",
        "projected": bool(plan.spline and plan.spline.project),
    }
    return SimResult(mean, se, per_rep, alphas, meta)


# ---------------------------------------------------------------------------
# Iterated choice of alpha
# ---------------------------------------------------------------------------


class SurrogateMise:
    """The exact-MISE formula with a stand-in transform f in place of the truth.

    ``f_ft`` maps frequencies to the stand-in transform.  Evaluating it once on
    fixed nodes makes each MISE evaluation a pair of weighted sums.
    """

    def __init__(self, f_ft, error: ErrorModel, n, m=2, resolution=None, alpha_min=ALPHA_RANGE[0]):
        self.error, self.n, self.m = error, int(n), m

        def env(w):
            g = error.cf(w)
            phi = g / (g * g + alpha_min * w ** (2 * m))
            return phi * phi

        start = 4.0 * alpha_min ** (-1.0 / (2 * m))
        omega_max = omega_cutoff(env, start, 1e-14)
        quad = graded_quadrature(omega_max, omega_max * 1e-10, panels_per_decade(resolution))
        self.nodes, self.weights = quad.positive
        self.g = error.cf(self.nodes)
        self.f2 = np.abs(f_ft(self.nodes)) ** 2

    def terms(self, alpha):
        pen = alpha * self.nodes ** (2 * self.m)
        den = self.g * self.g + pen
        bias = (pen / den) ** 2 * self.f2
        var = (self.g / den) ** 2 * np.clip(1.0 - self.g * self.g * self.f2, 0.0, None)
        return float(np.sum(self.weights * bias)) / math.pi, float(np.sum(self.weights * var)) / math.pi

    def __call__(self, alpha):
        bias, var = self.terms(alpha)
        return bias + var / self.n

    def argmin(self):
        return minimize_log(self, *ALPHA_RANGE, label="surrogate MISE")


def current_transform(ys, error, alpha, m=2, spline: SplineOptions | None = None):
    """Transform of the estimate at ``alpha``: exact multiplier or spline coefficients."""
    pilot = EmpiricalCF(ys)
    if spline is None:
        mult = Multiplier(alpha, error, m)
        return lambda w: mult.value(w) * pilot.ft(w)
    space, theta = _spline_fit(ys, error, alpha, m, spline)

    def ft(w):
        w = np.asarray(w, dtype=float)
        out = np.zeros(w.shape, dtype=complex)
        for i in range(1, space.q + 1):
            out += theta[i - 1] * bspline_ft(space, i, w)
        return out

    return ft


def tune_alpha(sample, error: ErrorModel, config: TuningConfig, spline: SplineOptions | None = None, m=2, resolution=None, history=None):
    """Iterate alpha_i = argmin of the MISE computed as if f were the estimate at alpha_{i-1}.

    Stops once the relative change is at most ``config.tol``.  When ``spline``
    asks for projection the projected estimate supplies the stand-in
    transform.  Returns (alpha, iterations); ``history``, if a list, receives
    every iterate.
    """
    ys = np.asarray(sample, dtype=float).ravel()
    if ys.size == 0:
        raise InvalidParameter("empty sample")
    alpha = float(config.alpha0)
    if history is not None:
        history.append(alpha)
    for it in range(1, config.max_iter + 1):
        ft = current_transform(ys, error, alpha, m, spline)
        mass = complex(ft(np.zeros(1))[0])
        if abs(mass - 1.0) > 0.05:
            raise NonDensityIterate(f"iterate at alpha={alpha:.4g} has total mass {mass.real:.4f}")
        new, _ = SurrogateMise(ft, error, ys.size, m, resolution).argmin()
        if history is not None:
            history.append(new)
        if abs(new - alpha) / alpha <= config.tol:
            return new, it
        alpha = new
    return alpha, config.max_iter


__all__ = [
    "make_rng",
    "sample_target",
    "contaminate",
    "sample_curve",
    "ise",
    "GridSpec",
    "effective_support",
    "default_grid",
    "TuningConfig",
    "Fixed",
    "RateRule",
    "Tuned",
    "SplineOptions",
    "SimPlan",
    "SimResult",
    "estimate",
    "run_mise_sim",
    "SurrogateMise",
    "current_transform",
    "tune_alpha",
]
