"""Acceptance gate.

Every test prints one line ``CRITERION <k> [<case>]: PASS|FAIL <detail>``
straight to the terminal (capture is bypassed), then asserts.
"""

import itertools
import math
import time

import numpy as np
import pytest

from sped.estimator import pilot_curve, sped_estimate, tikhonov_objective, uniform_grid
from sped.fourier import DKE_DEFAULT, ERROR_FREE, GAUSSIAN_KERNEL, KDE, EmpiricalCF, ErrorModel, TargetDensity, error_for_proportion
from sped.mise import EstimatorSpec, MiseSetting, equivalent_n, min_mise, mise
from sped.multiplier import Multiplier, RateSpec, lambert_w, systematic_bound, theta_sup_numeric
from sped.qp import project_to_pdf
from sped.sim import Fixed, SimPlan, run_mise_sim
from sped.splines import assemble, build_space, evaluate_spline, solve_theta
from sped.theory import (
    FAILS,
    HOLDS,
    case_outcome,
    check_bandlimited_pilot_rate,
    check_consistency_schedule,
    check_laplace_rate_slope,
    check_source_condition_rate,
)


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail="", case=None):
        tag = f"CRITERION {k}" + (f" [{case}]" if case else "")
        with capsys.disabled():
            print(f"\n{tag}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        return ok

    return emit


# -- 1: minimum sample sizes ------------------------------------------------

TABLE = [
    ("i", "sped", "ef", 146),
    ("i", "sped", "dke", 102),
    ("i", "dke", "ef", 243),
    ("i", "dke", "dke", 156),
    ("iii", "sped", "ef", 179),
    ("iii", "sped", "dke", 140),
    ("iii", "dke", "ef", 266),
    ("iii", "dke", "dke", 197),
]


@pytest.mark.parametrize("key, est, ref, expected", TABLE, ids=[f"{k}-{e}-{r}" for k, e, r, _ in TABLE])
def test_c1_equivalent_sample_size(verdict, key, est, ref, expected):
    spec = EstimatorSpec.sped() if est == "sped" else EstimatorSpec.dke()
    setting = MiseSetting(TargetDensity.benchmark(key), 0.1, 100, spec)
    t0 = time.perf_counter()
    got = equivalent_n(setting, 100, ERROR_FREE if ref == "ef" else DKE_DEFAULT)
    elapsed = time.perf_counter() - t0
    ok = isinstance(got, int) and abs(got - expected) <= max(5, 0.04 * expected) and elapsed < 120
    verdict(1, ok, f"n_equiv={got} expected={expected} time={elapsed:.1f}s", f"{key} {est} ref={ref}")
    assert ok


# -- 2: simulation against the MISE formula ---------------------------------


def test_c2_simulation_matches_formula(verdict):
    setting = MiseSetting(TargetDensity.benchmark("iv"), 0.1, 100, EstimatorSpec.sped())
    a_star, _ = min_mise(setting)
    t0 = time.perf_counter()
    zs = []
    for alpha in (a_star / 10, a_star, 10 * a_star):
        res = run_mise_sim(SimPlan(setting, 400, 12345, Fixed(alpha)))
        zs.append((res.mean_ise - mise(setting, alpha)) / res.se)
    elapsed = time.perf_counter() - t0
    ok = all(abs(z) < 3 for z in zs) and elapsed < 300
    verdict(2, ok, f"z={[round(z, 2) for z in zs]} time={elapsed:.0f}s")
    assert ok


# -- 3: variational oracle --------------------------------------------------


@pytest.mark.parametrize("kind", ["gaussian", "laplace"])
@pytest.mark.parametrize("alpha", [1e-3, 1e-1])
def test_c3_fourier_estimate_minimizes_objective(verdict, kind, alpha):
    rng = np.random.default_rng(2024)
    err = ErrorModel.from_variance(kind, 1 / 9)
    target = TargetDensity.std_normal()
    y = target.sample(rng, 200) + err.sample(rng, 200)
    pilot = KDE(y, GAUSSIAN_KERNEL, 0.3)
    xs = uniform_grid(-12, 12, 2401)
    u = pilot_curve(pilot, xs)
    est = sped_estimate(pilot, Multiplier(alpha, err), xs)
    base = tikhonov_objective(est, u, err, alpha)
    violations = 0
    for _ in range(50):
        c, w = rng.uniform(-4, 4), rng.uniform(0.3, 1.5)
        bump = 0.01 * rng.choice([-1, 1]) * np.exp(-0.5 * ((xs - c) / w) ** 2)
        violations += tikhonov_objective(est + bump, u, err, alpha) <= base
    verdict(3, violations == 0, f"violations={violations}/50", f"{kind} alpha={alpha:g}")
    assert violations == 0


# -- 4: spline path against the exact path ----------------------------------


def test_c4_spline_converges_to_exact(verdict):
    target = TargetDensity.benchmark("i")
    err = error_for_proportion(target, 0.1)
    rng = np.random.default_rng(5)
    pilot = EmpiricalCF(target.sample(rng, 100) + err.sample(rng, 100))
    xs = uniform_grid(-8, 8, 1601)
    exact = sped_estimate(pilot, Multiplier(1e-2, err), xs).values
    dists = []
    for q in (20, 40, 80, 160):
        space = build_space(-8, 8, q)
        theta = solve_theta(assemble(space, err, pilot), 1e-2)
        s = evaluate_spline(space, theta, xs).values
        dists.append(math.sqrt(np.trapezoid((s - exact) ** 2, xs) / np.trapezoid(exact**2, xs)))
    ok = dists[2] < 1e-2 and all(a > b for a, b in zip(dists, dists[1:]))
    verdict(4, ok, "rel L2 at q=20,40,80,160: " + ", ".join(f"{d:.2e}" for d in dists))
    assert ok


# -- 5: systematic bounds and Lambert W -------------------------------------


def test_c5_systematic_bounds_and_lambert(verdict):
    violations = []
    for kind, m, k, alpha in itertools.product(["normal", "cauchy", "laplace"], [1, 2], [1, 2], [1e-2, 1e-4, 1e-6]):
        spec = RateSpec(kind, k, m)
        if not theta_sup_numeric(spec, alpha) <= systematic_bound(spec, alpha):
            violations.append((kind, m, k, alpha))
    x = np.geomspace(1e-6, 1e6, 2001)
    w = lambert_w(x)
    worst = float(np.max(np.abs(w * np.exp(w) - x) / np.maximum(1.0, x)))
    ok = not violations and worst <= 1e-12
    verdict(5, ok, f"bound violations={len(violations)}/36 lambert max rel residual={worst:.1e}")
    assert ok


# -- 6: source-condition rate -----------------------------------------------


def test_c6_source_condition(verdict):
    reports = check_source_condition_rate(0.25, 0.1, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5], m=2)
    ok = all(r.satisfied for r in reports)
    worst = max(r.lhs / r.rhs for r in reports)
    verdict(6, ok, f"max lhs/rhs={worst:.3g} over 5 alphas")
    assert ok


# -- 7: rate slopes with negative controls ----------------------------------


def test_c7_rate_slopes(verdict):
    lap = check_laplace_rate_slope(np.geomspace(1e3, 1e6, 7))
    lap_ctl = check_laplace_rate_slope(np.geomspace(1e3, 1e6, 7), alpha_rule=lambda d2: d2, expect=FAILS)
    ns = np.geomspace(1e3, 1e7, 9)
    band = check_bandlimited_pilot_rate(0.25, ns)
    band_ctl = check_bandlimited_pilot_rate(0.25, ns, lam_exponent=0.5, expect=FAILS)
    ok = lap.satisfied and band.satisfied and not lap_ctl.satisfied and not band_ctl.satisfied
    verdict(7, ok, f"laplace slope={lap.context['slope']:.3f} control={lap_ctl.context['slope']:.3f}; "
                   f"band-limited slope={band.context['slope']:.3f} control={band_ctl.context['slope']:.3f}")
    assert ok


# -- 8: projection ----------------------------------------------------------


def test_c8_projection(verdict):
    space = build_space(-3, 3, 16)
    gram = assemble(space, ErrorModel.gaussian(0.5), EmpiricalCF([0.0, 0.4, -0.7]))
    G = gram.G
    rng = np.random.default_rng(8)
    failures = []
    for _ in range(100):
        a, b = rng.normal(scale=0.3, size=(2, 16))
        pa, pb = project_to_pdf(a, gram), project_to_pdf(b, gram)
        d_in, d_out = (a - b) @ G @ (a - b), (pa - pb) @ G @ (pa - pb)
        if d_out > d_in * (1 + 1e-9):
            failures.append("expansive")
        for p in (pa, pb):
            if abs(p.sum() - 1.0) > 1e-12:
                failures.append("mass")
            if np.min(gram.B_x @ p) < -1e-10:
                failures.append("negative")
            if np.max(np.abs(project_to_pdf(p, gram) - p)) > 1e-10:
                failures.append("idempotent")
    brute = _q4_brute_force_gap()
    ok = not failures and brute <= 1e-12
    verdict(8, ok, f"failures={len(failures)} over 100 pairs, q=4 brute-force gap={brute:.1e}")
    assert ok


def _q4_brute_force_gap():
    space = build_space(-3, 3, 4)
    gram = assemble(space, ErrorModel.gaussian(0.5), EmpiricalCF([0.0]), n_x=24)
    t0 = np.array([0.6, 0.6, 0.6, -0.8])
    proj = project_to_pdf(t0, gram)
    G, Bx = gram.G, gram.B_x
    rows = [i for i in range(Bx.shape[0]) if np.any(Bx[i] != 0)]
    best = None
    for k in range(4):
        for S in itertools.combinations(rows, k):
            Aw = np.vstack([np.ones((1, 4)), Bx[list(S)]])
            K = np.block([[G, Aw.T], [Aw, np.zeros((k + 1, k + 1))]])
            try:
                x = np.linalg.solve(K, np.concatenate([G @ t0, [1.0], np.zeros(k)]))[:4]
            except np.linalg.LinAlgError:
                continue
            if np.min(Bx @ x) < -1e-12:
                continue
            val = 0.5 * (x - t0) @ G @ (x - t0)
            if best is None or val < best[0] - 1e-15:
                best = (val, x)
    return float(np.max(np.abs(proj - best[1])))


# -- 9: consistency schedule ------------------------------------------------


def test_c9_consistency(verdict):
    target = TargetDensity.std_normal()
    err = error_for_proportion(target, 0.1)
    ns = [1e2, 1e3, 1e4, 1e5]
    positive = check_consistency_schedule(target, err, ns, lambda n: n**-0.5)
    constant = check_consistency_schedule(target, err, ns, lambda n: 1.0, expect=FAILS)
    overfast = check_consistency_schedule(target, err, ns, lambda n: n**-2.0, expect=FAILS)
    decreasing = all(r.satisfied for r in positive if r.name == "consistency:decrease")
    ok = case_outcome(positive, HOLDS) and decreasing and not case_outcome(constant, HOLDS) and not case_outcome(overfast, HOLDS)
    mises = [f"{r.lhs:.4g}" for r in positive if r.name == "consistency:decrease"]
    verdict(9, ok, f"positive={case_outcome(positive, HOLDS)} constant={case_outcome(constant, HOLDS)} "
                   f"n^-2={case_outcome(overfast, HOLDS)} MISE at n=1e3,1e4,1e5 with alpha=n^-1/2: {mises}")
    assert ok
