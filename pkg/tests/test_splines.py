import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, interpolate

from sped.errors import BadDimensions, IndexOutOfRange, Infeasible, SingularSystem
from sped.estimator import convolve_error, derivative
from sped.fourier import EmpiricalCF, ErrorModel, TargetDensity
from sped.qp import QPProblem, project_to_pdf, qp_solve
from sped.splines import (
    assemble,
    bspline_ft,
    build_space,
    default_interval,
    evaluate_spline,
    gram_matrices,
    solve_theta,
)

STD = TargetDensity.std_normal()


# -- space and basis --------------------------------------------------------


def test_space_knots():
    sp = build_space(0, 7, 4)
    assert np.allclose(sp.knots, np.arange(8))
    assert sp.q == 4
    assert sp.spacing == 1.0


def test_space_validation():
    with pytest.raises(BadDimensions):
        build_space(0, 7, 3)
    with pytest.raises(BadDimensions):
        build_space(1, 1, 6)
    with pytest.raises(IndexOutOfRange):
        build_space(0, 7, 4).basis(5, [0.0])


def test_basis_unit_mass():
    sp = build_space(-2, 3, 9)
    for i in range(1, 10):
        lo, hi = sp.knots[i - 1], sp.knots[i + 3]
        assert integrate.quad(lambda x: float(sp.basis(i, x)), lo, hi, points=sp.knots[i:i + 3])[0] == pytest.approx(1.0, abs=1e-12)


def test_bspline_ft_examples():
    sp = build_space(0, 7, 4)
    for i in range(1, 5):
        assert bspline_ft(sp, i, 0.0) == 1.0
    assert abs(bspline_ft(sp, 1, 2 * math.pi)) < 1e-15
    w = 0.73
    re = integrate.quad(lambda x: float(sp.basis(2, x)) * math.cos(w * x), 1, 5, points=[2, 3, 4], epsabs=1e-14)[0]
    im = integrate.quad(lambda x: -float(sp.basis(2, x)) * math.sin(w * x), 1, 5, points=[2, 3, 4], epsabs=1e-14)[0]
    assert abs(complex(bspline_ft(sp, 2, w)) - complex(re, im)) < 1e-10


def test_evaluate_spline_trivial_cases():
    sp = build_space(-1, 2, 6)
    xs = np.linspace(-1, 2, 61)
    assert np.all(evaluate_spline(sp, np.zeros(6), xs).values == 0)
    e3 = np.eye(6)[2]
    assert np.allclose(evaluate_spline(sp, e3, xs).values, sp.basis(3, xs), atol=0)


@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8), st.floats(-3, 3), st.floats(0.5, 10))
def test_evaluate_spline_matches_de_boor(theta, a, width):
    sp = build_space(a, a + width, 8)
    xs = np.linspace(sp.a, sp.b, 97)[:-1]
    # pad with three zero coefficients on each side so the base interval covers [a, b]
    knots = sp.a + sp.spacing * np.arange(-3, sp.q + 7)
    coef = np.concatenate([np.zeros(3), np.asarray(theta) / sp.spacing, np.zeros(3)])
    ref = interpolate.BSpline(knots, coef, 3)(xs)
    out = evaluate_spline(sp, theta, xs).values
    assert np.max(np.abs(out - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


# -- Gram objects -----------------------------------------------------------


def test_gram_row_sums_interior():
    sp = build_space(0, 13, 10)
    G, _ = gram_matrices(sp)
    # sum_j b_j = 1/Delta where four basis functions overlap, so interior rows sum to 1/Delta
    for i in range(4, sp.q - 2):
        assert G[i - 1].sum() == pytest.approx(1.0 / sp.spacing, rel=1e-13)


def test_gram_against_quadrature():
    sp = build_space(-1, 3, 5)
    G, P = gram_matrices(sp)
    g12 = integrate.quad(lambda x: float(sp.basis(1, x) * sp.basis(2, x)), sp.a, sp.b, points=sp.knots, epsabs=1e-14)[0]
    p23 = integrate.quad(lambda x: float(sp.basis(2, x, 2) * sp.basis(3, x, 2)), sp.a, sp.b, points=sp.knots, epsabs=1e-14)[0]
    assert G[0, 1] == pytest.approx(g12, rel=1e-12)
    assert P[1, 2] == pytest.approx(p23, rel=1e-12)


def test_m_tends_to_g_for_tiny_error():
    sp = build_space(-3, 3, 8)
    gram = assemble(sp, ErrorModel.gaussian(1e-6), EmpiricalCF([0.0]))
    assert np.max(np.abs(gram.M - gram.G)) < 1e-4


def test_penalty_kills_linear_reproduction():
    sp = build_space(0, 11, 8)
    theta = sp.spacing * (2.0 - 0.3 * sp.centres)
    xs = np.linspace(sp.knots[3], sp.knots[sp.q], 200)
    assert np.max(np.abs(sp.design(xs, 2) @ theta)) < 1e-8
    assert np.allclose(sp.design(xs) @ theta, 2.0 - 0.3 * xs, atol=1e-12)


def test_default_interval():
    lo, hi = default_interval([1.0, 3.0], ErrorModel.gaussian(0.5))
    assert (lo, hi) == (-1.0, 5.0)


def test_outside_mass_warns():
    with pytest.warns(UserWarning):
        gram = assemble(build_space(0, 1, 4), ErrorModel.gaussian(0.01), EmpiricalCF([50.0]))
    assert gram.warnings


# -- solve_theta ------------------------------------------------------------


def test_solve_theta_consistency():
    sp = build_space(-4, 4, 12)
    gram = assemble(sp, ErrorModel.laplace(0.3), EmpiricalCF([0.0, 0.5]))
    rng = np.random.default_rng(0)
    target = rng.normal(size=12)
    alpha = 1e-3
    gram2 = type(gram)(sp, gram.M, gram.P, gram.G, (gram.M + alpha * gram.P) @ target, gram.B_x, gram.x_grid)
    assert np.max(np.abs(solve_theta(gram2, alpha) - target)) < 1e-9


def test_solve_theta_rejects_nonpositive_alpha():
    gram = assemble(build_space(-1, 1, 4), ErrorModel.gaussian(0.2), EmpiricalCF([0.0]))
    with pytest.raises(SingularSystem):
        solve_theta(gram, 0.0)


def test_solve_theta_least_squares_oracle(exact_pilot):
    # minimize the discretized Tikhonov objective over the same six basis functions on a fine grid
    err = ErrorModel.gaussian(0.3)
    sp = build_space(-6, 6, 6)
    theta = solve_theta(assemble(sp, err, exact_pilot(STD, err)), 1e-3)
    xs = np.linspace(-20, 20, 2**14 + 1)
    dx = xs[1] - xs[0]
    h = np.exp(-xs**2 / (2 * 1.09)) / np.sqrt(2 * np.pi * 1.09)
    B = sp.design(xs)
    GB = np.stack([convolve_error(B[:, j], dx, err) for j in range(6)], 1)
    D = np.stack([derivative(B[:, j], dx, 2) for j in range(6)], 1)
    w = np.full(xs.size, dx)
    w[0] = w[-1] = dx / 2
    A = GB.T @ (w[:, None] * GB) + 1e-3 * D.T @ (w[:, None] * D)
    ref = np.linalg.solve(A, GB.T @ (w * h))
    assert np.max(np.abs(theta - ref)) <= 1e-4 * np.max(np.abs(ref))


# -- QP solver --------------------------------------------------------------


def test_qp_unconstrained_feasible():
    prob = QPProblem.from_lists(np.eye(2), np.array([-0.3, -0.2]), ineq=[(np.array([1.0, 0.0]), 0.0)])
    assert np.allclose(qp_solve(prob), [0.3, 0.2], atol=1e-14)


def test_qp_two_variable_geometry():
    # min |t - (2, 0)|^2  s.t. t1 + t2 = 1, t >= 0
    prob = QPProblem.from_lists(
        2 * np.eye(2),
        np.array([-4.0, 0.0]),
        eq=[(np.array([1.0, 1.0]), 1.0)],
        ineq=[(np.array([1.0, 0.0]), 0.0), (np.array([0.0, 1.0]), 0.0)],
    )
    assert np.allclose(qp_solve(prob), [1.0, 0.0], atol=1e-14)


def test_qp_infeasible_equalities():
    prob = QPProblem.from_lists(np.eye(2), np.zeros(2), eq=[(np.ones(2), 1.0), (np.ones(2), 2.0)])
    with pytest.raises(Infeasible):
        qp_solve(prob)


def test_qp_shape_checks():
    with pytest.raises(BadDimensions):
        QPProblem.from_lists(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_qp_kkt_random(n, seed):
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n, n))
    Q = L @ L.T + 0.1 * np.eye(n)
    c = rng.normal(size=n)
    A = rng.normal(size=(3, n))
    # feasible by construction: the barycentre satisfies every inequality
    b = A @ np.full(n, 1.0 / n) - np.abs(rng.normal(size=3))
    prob = QPProblem(Q, c, np.ones((1, n)), np.ones(1), A, b)
    res = qp_solve(prob, full_output=True)
    kkt = res.kkt_residuals(prob)
    scale = 1.0 + np.max(np.abs(Q)) + np.max(np.abs(c))
    assert max(kkt.values()) < 1e-8 * scale


# -- projection -------------------------------------------------------------


def _gram(q=12, n_x=None):
    sp = build_space(-3, 3, q)
    return assemble(sp, ErrorModel.gaussian(0.5), EmpiricalCF([0.0, 0.4, -0.7]), n_x=n_x)


def test_projection_keeps_feasible_point():
    gram = _gram()
    theta = np.full(gram.q, 1.0 / gram.q)
    assert np.allclose(project_to_pdf(theta, gram), theta, atol=1e-12)


def test_projection_q4_brute_force():
    sp = build_space(-3, 3, 4)
    gram = assemble(sp, ErrorModel.gaussian(0.5), EmpiricalCF([0.0]), n_x=24)
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
    assert np.allclose(proj, best[1], atol=1e-12)
    assert np.allclose(project_to_pdf(proj, gram), proj, atol=1e-12)


def test_projection_properties():
    gram = _gram(16)
    rng = np.random.default_rng(42)
    for _ in range(20):
        t = rng.normal(scale=0.3, size=16)
        p = project_to_pdf(t, gram)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.min(gram.B_x @ p) > -1e-10
        assert np.allclose(project_to_pdf(p, gram), p, atol=1e-10)
