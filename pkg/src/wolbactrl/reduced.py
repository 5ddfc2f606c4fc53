"""Scalar limit model for the infected frequency and its closed-form optimum.

dp/dt = f(p) + u g(p) with f bistable (unstable threshold theta) and g >= 0.
A single saturated release of budget C crosses theta iff C exceeds the
threshold budget C*(M); the optimal schedule is then a single block at the
start of the horizon, otherwise a single block at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import _kernels
from .errors import HorizonTooShort, InsufficientFlux, NoCoexistence
from .integrator import ControlSignal, TimeGrid, Trajectory
from .slowfast import SlowFastParams, a_of_p

#: |C - C*(M)| below this is treated as the continuum (tie) case.
TIE_TOL = 1e-8

GM_QUAD_TOL = 1e-10
CSTAR_QUAD_TOL = 1e-8


@dataclass(frozen=True)
class ReducedModel:
    """Derived constants of the scalar equation (eps plays no role here)."""

    params: SlowFastParams
    theta: float
    xi: float
    p_star: float
    max_neg_fg: float


def f_of_p(p, model: ReducedModel):
    pr = model.params
    num = p * (1.0 - p) * (pr.d1 * pr.b2_0 - pr.d2 * pr.b1_0 * (1.0 - pr.s_h * p))
    return num / a_of_p(p, pr)


def g_of_p(p, model: ReducedModel):
    pr = model.params
    num = pr.b1_0 * (1.0 - p) * (1.0 - pr.s_h * p) / pr.K
    return num / a_of_p(p, pr)


def f_prime_of_p(p, model: ReducedModel):
    """Exact derivative of f (quotient rule)."""
    pr = model.params
    a = a_of_p(p, pr)
    ap = pr.b1_0 * (2.0 * pr.s_h * p - 1.0 - pr.s_h) + pr.b2_0
    num = p * (1.0 - p) * (pr.d1 * pr.b2_0 - pr.d2 * pr.b1_0 * (1.0 - pr.s_h * p))
    nump = ((1.0 - 2.0 * p)
            * (pr.d1 * pr.b2_0 - pr.d2 * pr.b1_0 + pr.d2 * pr.b1_0 * pr.s_h * p)
            + p * (1.0 - p) * pr.d2 * pr.b1_0 * pr.s_h)
    return (nump * a - num * ap) / (a * a)


def g_prime_of_p(p, model: ReducedModel):
    """Exact derivative of g (quotient rule)."""
    pr = model.params
    a = a_of_p(p, pr)
    ap = pr.b1_0 * (2.0 * pr.s_h * p - 1.0 - pr.s_h) + pr.b2_0
    num = pr.b1_0 * (1.0 - p) * (1.0 - pr.s_h * p) / pr.K
    nump = pr.b1_0 * (2.0 * pr.s_h * p - 1.0 - pr.s_h) / pr.K
    return (nump * a - num * ap) / (a * a)


def build_reduced_model(params: SlowFastParams) -> ReducedModel:
    """Compute (theta, xi, p*, max -f/g) in closed form.

    xi = d1 b2^0 / (d2 b1^0) must lie in (1 - s_h, 1) for the bistable
    structure; p* is the unique interior critical point of f/g and realizes
    the maximum of -f/g on (0, theta).
    """
    xi = params.d1 * params.b2_0 / (params.d2 * params.b1_0)
    if xi >= 1.0:
        raise NoCoexistence(
            f"xi = {xi} >= 1: no interior threshold and no singular point p*")
    if xi <= 1.0 - params.s_h:
        raise NoCoexistence(f"xi = {xi} <= 1 - s_h = {1.0 - params.s_h}")
    theta = (1.0 - xi) / params.s_h
    p_star = (1.0 - math.sqrt(xi)) / params.s_h
    model = ReducedModel(params=params, theta=theta, xi=xi, p_star=p_star,
                         max_neg_fg=0.0)
    max_neg_fg = -f_of_p(p_star, model) / g_of_p(p_star, model)
    return ReducedModel(params=params, theta=theta, xi=xi, p_star=p_star,
                        max_neg_fg=max_neg_fg)


def derived_constants(model: ReducedModel):
    return model.theta, model.xi, model.p_star, model.max_neg_fg


def _flux_integrand(M: float, model: ReducedModel):
    return lambda p: 1.0 / (f_of_p(p, model) + M * g_of_p(p, model))


def G_M(p: float, M: float, model: ReducedModel) -> float:
    """Time for a saturated release (u = M) to drive the frequency 0 -> p."""
    if M <= model.max_neg_fg:
        raise InsufficientFlux(
            f"M = {M} <= max(-f/g) = {model.max_neg_fg}; u = M cannot cross theta")
    integrand = _flux_integrand(M, model)
    for q in np.linspace(0.0, p, 256):
        if f_of_p(q, model) + M * g_of_p(q, model) <= 0.0:
            raise InsufficientFlux(f"f + M g <= 0 at p = {q}")
    value, _ = quad(integrand, 0.0, p, epsabs=GM_QUAD_TOL, limit=200)
    return value


def C_star(M: float, model: ReducedModel) -> float:
    """Exact budget for a single saturated release to reach theta."""
    if M <= model.max_neg_fg:
        raise InsufficientFlux(
            f"M = {M} <= max(-f/g) = {model.max_neg_fg}: threshold undefined")
    integrand = _flux_integrand(M, model)
    value, _ = quad(lambda p: M * integrand(p), 0.0, model.theta,
                    epsabs=CSTAR_QUAD_TOL, limit=200)
    return value


def integrate_reduced(model: ReducedModel, grid: TimeGrid,
                      control: ControlSignal | None = None,
                      p0: float = 0.0) -> Trajectory:
    """Kernel-backed Lobatto IIIC integration of the scalar equation."""
    pr = model.params
    values = control.values if control is not None else np.zeros(grid.N_d)
    states = _kernels.integrate_reduced(
        p0, values, grid.dt, pr.b1_0, pr.b2_0, pr.d1, pr.d2, pr.s_h, pr.K)
    return Trajectory(grid=grid, states=states)


def J0(control: ControlSignal, model: ReducedModel) -> float:
    """Limit cost K^2 (1 - p(T))^2 with p(0) = 0."""
    traj = integrate_reduced(model, control.grid, control)
    return model.params.K ** 2 * (1.0 - float(traj.final)) ** 2


@dataclass(frozen=True)
class AnalyticSolution:
    """Closed-form optimum of the reduced problem on a concrete grid.

    The symbolic solution is a single block of height M on [start, end];
    the grid control snaps both endpoints to the nearest node, so the
    discretized budget differs from min(C, T*M) by at most dt*M
    (recorded in ``snap_error``).
    """

    case_label: str  # late_release | early_release | continuum | saturated_all_on
    control: ControlSignal
    start: float
    end: float
    level: float
    predicted_cost: float
    theta: float
    c_star: float | None
    lambda_range: tuple[float, float] | None
    snap_error: float
    inequality_ok: bool


def _snap(t: float, dt: float) -> float:
    return round(t / dt) * dt


def solve_reduced_analytic(T: float, C: float, M: float, model: ReducedModel,
                           grid: TimeGrid | None = None,
                           tie_tol: float = TIE_TOL) -> AnalyticSolution:
    """Case analysis of the closed-form optimal release schedule.

    late_release:  M too weak, or budget below C*(M); block ends at T.
    early_release: budget above C*(M); block starts at 0.
    continuum:     budget exactly C*(M); any shift is optimal.
    saturated_all_on: T*M <= C, the box constraint alone binds.
    """
    if T <= C / M:
        raise HorizonTooShort(f"T = {T} <= C/M = {C / M}")
    if grid is None:
        grid = TimeGrid(T=T, N_d=2000)
    dt = grid.dt
    duration = min(C, T * M) / M
    c_star = None
    lambda_range = None

    if M <= model.max_neg_fg:
        case = "late_release"
        start, end = T - duration, T
    else:
        c_star = C_star(M, model)
        if abs(C - c_star) <= tie_tol:
            case = "continuum"
            start, end = 0.0, duration
            lambda_range = (0.0, T - duration)
        elif C < c_star:
            case = "late_release"
            start, end = T - duration, T
        else:
            case = "early_release"
            start, end = 0.0, duration

    snapped_start = _snap(start, dt)
    snapped_end = _snap(end, dt)
    values = np.zeros(grid.N_d)
    k0 = int(round(snapped_start / dt))
    k1 = int(round(snapped_end / dt))
    values[k0:k1] = M
    control = ControlSignal(grid, values)
    snap_error = abs(control.budget() - min(C, T * M))

    cost = J0(control, model)
    scaled = cost / model.params.K ** 2
    bar = (1.0 - model.theta) ** 2
    if case == "early_release":
        inequality_ok = scaled < bar
    elif case == "late_release":
        inequality_ok = scaled > bar
    else:
        inequality_ok = abs(scaled - bar) < 1e-3

    return AnalyticSolution(
        case_label=case, control=control, start=snapped_start,
        end=snapped_end, level=M, predicted_cost=cost, theta=model.theta,
        c_star=c_star, lambda_range=lambda_range, snap_error=snap_error,
        inequality_ok=inequality_ok)
