"""Dense convex quadratic programming by a primal active-set method.

Solves  min 1/2 x'Qx + c'x  s.t.  A_eq x = b_eq,  A_in x >= b_in
for small dense problems (a few hundred unknowns), and uses it to project
spline coefficients onto densities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .errors import BadDimensions, Infeasible, MaxIterations

from .splines import GramSet


@dataclass(frozen=True)
class QPProblem:
    Q: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray = field(default=None)
    b_eq: np.ndarray = field(default=None)
    A_in: np.ndarray = field(default=None)
    b_in: np.ndarray = field(default=None)

    def __post_init__(self):
        n = np.asarray(self.c).size
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (n, n):
            raise BadDimensions(f"Q has shape {Q.shape}, expected ({n}, {n})")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(Q))):
            raise BadDimensions("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).ravel())
        for a_name, b_name in (("A_eq", "b_eq"), ("A_in", "b_in")):
            A, b = getattr(self, a_name), getattr(self, b_name)
            A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
            b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape[1] != n or A.shape[0] != b.size:
                raise BadDimensions(f"{a_name} / {b_name} shapes {A.shape} / {b.shape} do not match n={n}")
            object.__setattr__(self, a_name, A)
            object.__setattr__(self, b_name, b)

    @classmethod
    def from_lists(cls, Q, c, eq=(), ineq=()):
        """Build from (row, rhs) pairs; ``ineq`` rows mean row . x >= rhs."""
        n = np.asarray(c).size
        A_eq = np.array([r for r, _ in eq], dtype=float).reshape(-1, n)
        A_in = np.array([r for r, _ in ineq], dtype=float).reshape(-1, n)
        return cls(Q, c, A_eq, np.array([v for _, v in eq], dtype=float), A_in, np.array([v for _, v in ineq], dtype=float))

    @property
    def n(self):
        return self.c.size

    def objective(self, x):
        return 0.5 * x @ self.Q @ x + self.c @ x


@dataclass
class QPResult:
    x: np.ndarray
    lam_eq: np.ndarray
    lam_in: np.ndarray
    active: list
    iterations: int

    def kkt_residuals(self, problem: QPProblem):
        x = self.x
        stat = problem.Q @ x + problem.c - problem.A_eq.T @ self.lam_eq - problem.A_in.T @ self.lam_in
        slack = problem.A_in @ x - problem.b_in
        return {
            "stationarity": float(np.max(np.abs(stat), initial=0.0)),
            "equality": float(np.max(np.abs(problem.A_eq @ x - problem.b_eq), initial=0.0)),
            "inequality": float(max(0.0, -np.min(slack, initial=0.0))),
            "dual": float(max(0.0, -np.min(self.lam_in, initial=0.0))),
            "complementarity": float(np.max(np.abs(self.lam_in * slack), initial=0.0)),
        }


def _independent_rows(A, tol=1e-10):
    """Indices of a maximal linearly independent subset of the rows of A."""
    if A.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, R, piv = linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1e-300))) if diag.size else 0
    return np.sort(piv[:rank])


def _phase_one(problem: QPProblem):
    res = optimize.linprog(
        np.zeros(problem.n),
        A_ub=-problem.A_in if problem.A_in.shape[0] else None,
        b_ub=-problem.b_in if problem.A_in.shape[0] else None,
        A_eq=problem.A_eq if problem.A_eq.shape[0] else None,
        b_eq=problem.b_eq if problem.A_eq.shape[0] else None,
        bounds=[(None, None)] * problem.n,
        method="highs",
    )
    if res.status == 2:
        raise Infeasible("constraint set is empty")
    if res.status != 0:
        raise Infeasible(f"phase-one linear program failed: {res.message}")
    return res.x


def _eqp_step(Q, grad, A_w):
    """Step p minimising 1/2 p'Qp + grad'p on {A_w p = 0}, and multipliers lam.

    Null-space method: an SVD of A_w gives an orthonormal basis Z of its
    kernel, so nearly dependent working rows cannot spoil p.  The multipliers
    solve A_w' lam = Q p + grad in the least-squares sense.
    """
    n = Q.shape[0]
    if A_w.shape[0] == 0:
        Z = np.eye(n)
    else:
        _, sv, Vt = linalg.svd(A_w, full_matrices=True)
        rank = int(np.sum(sv > 1e-12 * sv[0])) if sv.size else 0
        Z = Vt[rank:].T
    if Z.shape[1]:
        reduced = Z.T @ Q @ Z
        try:
            u = linalg.solve(reduced, -Z.T @ grad, assume_a="pos")
        except linalg.LinAlgError:
            u = np.linalg.lstsq(reduced, -Z.T @ grad, rcond=None)[0]
        p = Z @ u
    else:
        p = np.zeros(n)
    lam = np.linalg.lstsq(A_w.T, Q @ p + grad, rcond=None)[0] if A_w.shape[0] else np.zeros(0)
    return p, lam


def qp_solve(problem: QPProblem, tol=1e-10, x0=None, max_iter=None, full_output=False):
    """Primal active-set method.

    ``x0`` must be feasible if given; otherwise a feasible point comes from a
    phase-one linear program.  Ties between constraints are broken by lowest
    index, so the iterates are deterministic.
    """
    n = problem.n
    A_eq, b_eq = problem.A_eq, problem.b_eq
    A_in, b_in = problem.A_in, problem.b_in
    scale = max(1.0, float(np.max(np.abs(problem.Q), initial=0.0)), float(np.max(np.abs(problem.c), initial=0.0)))

    # constant rows: 0 >= b is either vacuous or infeasible
    zero_in = ~np.any(A_in != 0.0, axis=1)
    if np.any(b_in[zero_in] > tol):
        raise Infeasible("an all-zero inequality row demands 0 >= positive")
    keep_in = np.flatnonzero(~zero_in)
    # unit rows: same feasible set, better conditioned working-set systems
    norms = np.linalg.norm(A_in[keep_in], axis=1)
    A_i, b_i = A_in[keep_in] / norms[:, None], b_in[keep_in] / norms

    if x0 is None:
        x = _phase_one(problem)
    else:
        x = np.asarray(x0, dtype=float).copy()
        if np.max(np.abs(A_eq @ x - b_eq), initial=0.0) > 1e-8 or np.min(A_i @ x - b_i, initial=0.0) < -1e-8:
            raise Infeasible("supplied starting point is not feasible")
    if A_eq.shape[0] and np.max(np.abs(A_eq @ x - b_eq)) > 1e-7 * max(1.0, np.max(np.abs(b_eq))):
        raise Infeasible("equality constraints are inconsistent")
    eq_rows = _independent_rows(A_eq)
    A_e = A_eq[eq_rows]

    working = []  # indices into A_i, kept linearly independent of each other and of A_e
    max_iter = max_iter if max_iter is not None else 50 * (n + A_i.shape[0] + 10)
    step_tol = 1e-12 * max(1.0, np.linalg.norm(x))
    for it in range(1, max_iter + 1):
        A_w = np.vstack([A_e, A_i[working]]) if working else A_e
        grad = problem.Q @ x + problem.c
        p, lam = _eqp_step(problem.Q, grad, A_w)
        if np.linalg.norm(p) <= step_tol:
            lam_w = lam[A_e.shape[0] :]
            if lam_w.size == 0 or np.min(lam_w) >= -tol * scale:
                lam_eq = np.zeros(A_eq.shape[0])
                lam_eq[eq_rows] = lam[: A_e.shape[0]]
                lam_in = np.zeros(A_in.shape[0])
                lam_in[keep_in[working]] = np.maximum(lam_w, 0.0) / norms[working]
                result = QPResult(x, lam_eq, lam_in, sorted(keep_in[working].tolist()), it)
                return result if full_output else x
            # drop the most negative multiplier; argmin returns the lowest index on ties
            order = np.argsort([working[j] for j in range(len(working))], kind="stable")
            lam_sorted = lam_w[order]
            drop = order[int(np.argmin(lam_sorted))]
            working.pop(int(drop))
            continue
        Ap = A_i @ p
        slack = A_i @ x - b_i
        # rows (nearly) in the span of the working set have A p ~ 0 and are skipped
        candidates = np.flatnonzero(Ap < -1e-11 * np.linalg.norm(p))
        candidates = np.setdiff1d(candidates, working, assume_unique=False)
        step, block = 1.0, None
        if candidates.size:
            ratios = np.maximum(slack[candidates], 0.0) / -Ap[candidates]
            j = int(np.argmin(ratios))  # lowest index among equal ratios
            if ratios[j] < 1.0:
                step, block = float(ratios[j]), int(candidates[j])
        x = x + step * p
        if block is not None:
            working.append(block)
    raise MaxIterations(f"active-set method did not converge in {max_iter} iterations")


def projection_problem(theta, gram: GramSet):
    """min 1/2 t'Gt - (G theta)'t  s.t.  1't = 1,  B_x t >= 0 (all-zero rows are skipped by the solver)."""
    q = gram.q
    return QPProblem(gram.G, -gram.G @ theta, np.ones((1, q)), np.ones(1), gram.B_x, np.zeros(gram.B_x.shape[0]))


def project_to_pdf(theta, gram: GramSet, tol=1e-10, full_output=False):
    """G-norm projection of ``theta`` onto {1'theta = 1, B_x theta >= 0}."""
    theta = np.asarray(theta, dtype=float)
    q = gram.q
    if theta.shape != (q,):
        raise BadDimensions(f"theta has shape {theta.shape}, expected ({q},)")
    problem = projection_problem(theta, gram)
    start = np.full(q, 1.0 / q)
    return qp_solve(problem, tol=tol, x0=start, full_output=full_output)


__all__ = ["QPProblem", "QPResult", "qp_solve", "projection_problem", "project_to_pdf"]
