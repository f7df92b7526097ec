"""Smoothness-penalized deconvolution of contaminated density samples.

Observations Y = X + E carry measurement error E with a known law g.  The
estimate of the density f of X minimizes ||g * v - h_n||^2 + alpha ||v^(m)||^2
for a pilot estimate h_n of the density of Y.  Modules:

fourier      error laws, targets, pilots, quadrature and Fourier inversion
multiplier   the regularizing multiplier, Lambert W, bias bounds, alpha rules
estimator    exact estimators by inversion and the discretized objective
splines      cubic B-spline space, Gram matrices and the ridge solve
qp           active-set quadratic programming and projection onto densities
mise         exact MISE, minimum MISE and equivalent sample sizes
sim          seeded Monte-Carlo harness and iterated tuning of alpha
theory       executable bound and rate checks
cli          command-line interface
"""

from .errors import *  # noqa: F401,F403
from .estimator import DensityCurve, alpha_smoothed, dke_estimate, sped_estimate, tikhonov_objective
from .fourier import KDE, EmpiricalCF, ErrorModel, Histogram, NamedKernel, TargetDensity
from .mise import EstimatorSpec, MiseSetting, equivalent_n, min_mise, mise
from .multiplier import Multiplier, RateSpec, lambert_w, rate_alpha, sup_phi, systematic_bound
from .qp import project_to_pdf, qp_solve
from .sim import SimPlan, TuningConfig, run_mise_sim, tune_alpha
from .splines import SplineSpace, assemble, solve_theta
from .theory import BoundReport

__version__ = "0.1.0"
