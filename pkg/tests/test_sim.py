import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sped.errors import GridMismatch, InvalidParameter
from sped.estimator import DensityCurve, pilot_curve, sped_estimate, uniform_grid
from sped.fourier import DKE_DEFAULT, KDE, EmpiricalCF, ErrorModel, TargetDensity, error_for_proportion
from sped.mise import EstimatorSpec, MiseSetting, min_mise, mise, mise_error_free
from sped.multiplier import Multiplier
from sped.sim import (
    Fixed,
    GridSpec,
    SimPlan,
    SplineOptions,
    SurrogateMise,
    TuningConfig,
    contaminate,
    current_transform,
    ise,
    make_rng,
    run_mise_sim,
    sample_curve,
    sample_target,
    tune_alpha,
)

STD = TargetDensity.std_normal()


def _setting(key="i", p=0.1, n=100):
    return MiseSetting(TargetDensity.benchmark(key), p, n, EstimatorSpec.sped())


# -- sampling ---------------------------------------------------------------


def test_normal_sample_moments():
    x = sample_target(STD, 10**5, make_rng(1))
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1) < 0.03


def test_gamma_sample_mean():
    x = sample_target(TargetDensity.gamma(4, 1), 10**5, make_rng(2))
    assert abs(x.mean() - 4) < 0.03


def test_sampling_is_deterministic():
    a = sample_target(TargetDensity.benchmark("iv"), 50, make_rng(9, 3))
    b = sample_target(TargetDensity.benchmark("iv"), 50, make_rng(9, 3))
    c = sample_target(TargetDensity.benchmark("iv"), 50, make_rng(9, 4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_tiny_error_leaves_data():
    x = np.linspace(-2, 2, 11)
    assert np.max(np.abs(contaminate(x, ErrorModel.gaussian(1e-12), make_rng(0)) - x)) < 1e-10


def test_make_rng_validation():
    with pytest.raises(InvalidParameter):
        make_rng(1.5)
    with pytest.raises(InvalidParameter):
        make_rng(1, -1)


def test_sample_curve_matches_density():
    xs = uniform_grid(-8, 8, 1601)
    draws = sample_curve(DensityCurve(xs, STD.density(xs)), 10**5, make_rng(4))
    assert abs(draws.mean()) < 0.02
    assert abs(draws.var() - 1) < 0.03


# -- ISE --------------------------------------------------------------------


def test_ise_of_truth_is_zero():
    xs = uniform_grid(-6, 6, 601)
    assert ise(DensityCurve(xs, STD.density(xs)), STD) < 1e-12


def test_ise_constant_offset():
    xs = uniform_grid(-1, 1, 201)
    assert ise(DensityCurve(xs, STD.density(xs) + 0.1), STD) == pytest.approx(0.02, rel=1e-12)


def test_ise_grid_checks():
    a = DensityCurve(uniform_grid(0, 1, 5), np.zeros(5))
    with pytest.raises(GridMismatch):
        ise(a, DensityCurve(uniform_grid(0, 2, 5), np.zeros(5)))


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_ise_symmetric_nonnegative(u, v):
    xs = uniform_grid(0, 1, 6)
    a, b = DensityCurve(xs, u), DensityCurve(xs, v)
    assert ise(a, b) >= 0
    assert ise(a, b) == pytest.approx(ise(b, a), rel=1e-15, abs=1e-300)


def test_kde_ise_matches_formula():
    # mean ISE of a plain KDE over replicates against the closed-form MISE
    lam, n, reps = 0.25, 10**4, 40
    xs = uniform_grid(-7, 7, 561)
    vals = []
    for r in range(reps):
        x = sample_target(STD, n, make_rng(77, r))
        vals.append(ise(pilot_curve(KDE(x, DKE_DEFAULT, lam), xs), STD))
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - mise_error_free(STD, n, lam, DKE_DEFAULT)) < 3 * se


# -- simulation harness -----------------------------------------------------


def test_single_replicate_has_no_se():
    res = run_mise_sim(SimPlan(_setting(), 1, 5, Fixed(0.03)))
    assert math.isnan(res.se)
    assert res.mean_ise == res.per_rep[0]


def test_same_seed_same_replicates():
    plan = SimPlan(_setting(), 6, 11, Fixed(0.03))
    a, b = run_mise_sim(plan), run_mise_sim(plan)
    c = run_mise_sim(plan, threads=3)
    assert np.array_equal(a.per_rep, b.per_rep)
    assert np.array_equal(a.per_rep, c.per_rep)
    assert a.mean_ise == c.mean_ise and a.se == c.se


def test_replicate_matches_manual_pipeline():
    st_ = _setting()
    plan = SimPlan(st_, 2, 8, Fixed(0.03))
    res = run_mise_sim(plan)
    rng = make_rng(8, 1)
    y = contaminate(sample_target(STD, 100, rng), st_.error, rng)
    manual = ise(sped_estimate(EmpiricalCF(y), Multiplier(0.03, st_.error), plan.xs), STD)
    assert res.per_rep[1] == manual


def test_sim_mean_near_formula_setting_i():
    st_ = _setting()
    alpha, _ = min_mise(st_)
    res = run_mise_sim(SimPlan(st_, 150, 2024, Fixed(alpha)))
    assert abs(res.mean_ise - mise(st_, alpha)) < 3 * res.se


def test_plan_validation():
    with pytest.raises(InvalidParameter):
        SimPlan(_setting(p=0.0), 5, 1, Fixed(0.1))
    with pytest.raises(InvalidParameter):
        SimPlan(MiseSetting(STD, 0.1, 100, EstimatorSpec.dke()), 5, 1, Fixed(0.1))
    with pytest.raises(InvalidParameter):
        SimPlan(_setting(), 0, 1, Fixed(0.1))
    with pytest.raises(GridMismatch):
        SimPlan(_setting(), 5, 1, Fixed(0.1), grid=GridSpec(-1, 1))


def test_spline_path_runs_and_projects():
    res = run_mise_sim(SimPlan(_setting(), 3, 5, Fixed(0.03), spline=SplineOptions(q=24, project=True)))
    assert res.meta["path"] == "spline" and res.meta["projected"]
    assert np.all(np.isfinite(res.per_rep))


# -- tuning -----------------------------------------------------------------


def _application_sample():
    err = error_for_proportion(STD, 0.045)
    rng = make_rng(7)
    return contaminate(sample_target(STD, 313, rng), err, rng), err


def test_tune_zero_iterations():
    y, err = _application_sample()
    assert tune_alpha(y, err, TuningConfig(0.3, 1e-3, 0)) == (0.3, 0)


def test_tune_config_validation():
    with pytest.raises(InvalidParameter):
        TuningConfig(0.1, 1.5)
    with pytest.raises(InvalidParameter):
        TuningConfig(-1.0)
    with pytest.raises(InvalidParameter):
        TuningConfig(0.1, 1e-3, 101)


def test_tune_initialization_robust():
    y, err = _application_sample()
    tol = 1e-3
    a1, it1 = tune_alpha(y, err, TuningConfig(1e-4, tol))
    a2, it2 = tune_alpha(y, err, TuningConfig(1e-1, tol))
    assert it1 < 50 and it2 < 50
    assert abs(a1 - a2) / a2 <= 2 * tol


def test_tune_history_records_iterates():
    y, err = _application_sample()
    history = []
    alpha, its = tune_alpha(y, err, TuningConfig(1e-2, 1e-3), history=history)
    assert len(history) == its + 1
    assert history[-1] == alpha


def test_tune_fixed_point_sanity():
    y, err = _application_sample()
    a_star, _ = tune_alpha(y, err, TuningConfig(1e-2, 1e-3))
    xs = uniform_grid(-9, 9, 1801)
    stored = sped_estimate(EmpiricalCF(y), Multiplier(a_star, err), xs)
    ref, _ = SurrogateMise(current_transform(y, err, a_star), err, 2000).argmin()
    rng = make_rng(99)
    synthetic = contaminate(sample_curve(stored, 2000, rng), err, rng)
    first, _ = tune_alpha(synthetic, err, TuningConfig(a_star, 1e-3, 1))
    assert 0.5 < first / ref < 2.0


def test_surrogate_with_truth_is_exact_mise():
    st_ = _setting()
    sur = SurrogateMise(STD.cf, st_.error, 100)
    for alpha in (1e-3, 3e-2, 1.0):
        assert sur(alpha) == pytest.approx(mise(st_, alpha), rel=1e-6)
