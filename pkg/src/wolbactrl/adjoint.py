"""Adjoint states, cost gradients and switching-function diagnostics.

Continuous adjoints (differentiate-then-discretize), integrated backward
with the same Lobatto IIIC scheme as the forward pass; the agreement with
central finite differences is bounded by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .integrator import ControlSignal, TimeGrid, Trajectory
from .reduced import ReducedModel, g_of_p, f_of_p, integrate_reduced
from .slowfast import SlowFastParams, integrate_full_fast, integrate_slowfast


@dataclass(frozen=True)
class AdjointTrajectory:
    grid: TimeGrid
    costates: np.ndarray  # (N_d+1,) reduced, (N_d+1, 2) otherwise


@dataclass(frozen=True)
class GradientSignal:
    """Per-interval derivative of the cost w.r.t. the control value."""

    grid: TimeGrid
    values: np.ndarray


@dataclass(frozen=True)
class SwitchingReport:
    grid: TimeGrid
    w: np.ndarray  # per-interval switching values q * g(p)
    lambda_estimate: float
    violation_count: int
    on_set: np.ndarray      # indices with u >= M - kappa
    off_set: np.ndarray     # indices with u <= kappa
    interior_set: np.ndarray
    singular_value: float   # -f(p*)/g(p*), a non-bang-bang optimum's level

    def to_csv(self, path, control: ControlSignal) -> None:
        t = self.grid.nodes()[:-1]
        with open(path, "w") as fh:
            fh.write("t,u,w,lambda_est\n")
            for k in range(self.grid.N_d):
                fh.write(f"{t[k]:.17g},{control.values[k]:.17g},"
                         f"{self.w[k]:.17g},{self.lambda_estimate:.17g}\n")


# ---------------------------------------------------------------------------
# reduced problem

def adjoint_reduced(p_traj: Trajectory, control: ControlSignal,
                    model: ReducedModel) -> AdjointTrajectory:
    """Backward linear adjoint with terminal value -2(1 - p(T))."""
    pr = model.params
    qT = -2.0 * (1.0 - float(p_traj.states[-1]))
    costates = _kernels.adjoint_reduced(
        p_traj.states, control.values, p_traj.grid.dt,
        pr.b1_0, pr.b2_0, pr.d1, pr.d2, pr.s_h, pr.K, qT)
    return AdjointTrajectory(grid=p_traj.grid, costates=costates)


def _interval_average(node_values: np.ndarray) -> np.ndarray:
    return 0.5 * (node_values[:-1] + node_values[1:])


def gradient_reduced(control: ControlSignal, model: ReducedModel
                     ) -> GradientSignal:
    """Per-interval kernel q*g(p), trapezoidal in the nodes, times dt.

    Components are always <= 0: the adjoint is negative whenever the target
    is not fully reached, and g >= 0, so extra release never hurts.
    """
    traj = integrate_reduced(model, control.grid, control)
    adj = adjoint_reduced(traj, control, model)
    kernel = adj.costates * g_of_p(traj.states, model)
    values = _interval_average(kernel) * control.grid.dt
    return GradientSignal(grid=control.grid, values=values)


# ---------------------------------------------------------------------------
# full problem, densities form

def adjoint_full(traj: Trajectory, control: ControlSignal,
                 params: SlowFastParams) -> AdjointTrajectory:
    """Adjoint of the (n1, n2) system with the terminal cost gradient.

    At the kink n2(T) = n2* the flat-side derivative 0 is used.
    """
    mp = params.to_model_params()
    n1T, n2T = traj.states[-1]
    n2_star = mp.K * (1.0 - mp.d2 / mp.b2)
    qT = np.array([n1T, -max(n2_star - n2T, 0.0)])
    costates = _kernels.adjoint_full(
        traj.states, control.values, traj.grid.dt,
        mp.b1, mp.b2, mp.d1, mp.d2, mp.s_h, mp.K, qT)
    return AdjointTrajectory(grid=traj.grid, costates=costates)


def gradient_full(control: ControlSignal, params: SlowFastParams,
                  initial_state=None) -> GradientSignal:
    """Gradient of the terminal cost of the (n1, n2) integration.

    The control enters the n2 equation additively, so the integrand of the
    directional derivative is just the second costate.
    """
    traj = integrate_full_fast(params, control.grid, control, initial_state)
    adj = adjoint_full(traj, control, params)
    values = _interval_average(adj.costates[:, 1]) * control.grid.dt
    return GradientSignal(grid=control.grid, values=values)


def cost_full(control: ControlSignal, params: SlowFastParams,
              initial_state=None) -> float:
    """Terminal cost evaluated on the (n1, n2) integration (pairs with
    :func:`gradient_full` in finite-difference checks)."""
    mp = params.to_model_params()
    traj = integrate_full_fast(params, control.grid, control, initial_state)
    n1, n2 = traj.final
    n2_star = mp.K * (1.0 - mp.d2 / mp.b2)
    return 0.5 * n1 * n1 + 0.5 * max(n2_star - n2, 0.0) ** 2


# ---------------------------------------------------------------------------
# full problem, slow-fast form (the optimizer's oracle for the eps sweep)

def adjoint_slowfast(traj: Trajectory, control: ControlSignal,
                     params: SlowFastParams) -> AdjointTrajectory:
    """Adjoint of the (n, p) system for the terminal density cost."""
    eps, K = params.eps, params.K
    nT, pT = traj.states[-1]
    pop = 1.0 - eps * nT
    n1T = K * (1.0 - pT) * pop
    n2T = K * pT * pop
    shortfall = max(params.n2_star() - n2T, 0.0)
    qT = np.array([
        -eps * K * (1.0 - pT) * n1T + eps * K * pT * shortfall,
        -K * pop * (n1T + shortfall),
    ])
    costates = _kernels.adjoint_slowfast(
        traj.states, control.values, traj.grid.dt,
        params.b1_0, params.b2_0, params.d1, params.d2, params.s_h, K,
        eps, qT)
    return AdjointTrajectory(grid=traj.grid, costates=costates)


def gradient_slowfast(control: ControlSignal, params: SlowFastParams
                      ) -> GradientSignal:
    """Gradient of J_eps with respect to the per-interval release rates."""
    traj = integrate_slowfast(params, control.grid, control)
    adj = adjoint_slowfast(traj, control, params)
    n = traj.states[:, 0]
    p = traj.states[:, 1]
    pop = 1.0 - params.eps * n
    kernel = (adj.costates[:, 0] * (-1.0 / (params.K * params.eps))
              + adj.costates[:, 1] * (1.0 - p) / (params.K * pop))
    values = _interval_average(kernel) * control.grid.dt
    return GradientSignal(grid=control.grid, values=values)


# ---------------------------------------------------------------------------
# switching diagnostics

def switching_analysis(control: ControlSignal, model: ReducedModel,
                       M: float | None = None,
                       kappa: float | None = None) -> SwitchingReport:
    """First-order (multiplier) diagnostics of a candidate reduced control.

    Classifies intervals into u ~ M / u ~ 0 / interior with threshold kappa
    (default 1e-3*M), estimates the budget multiplier as the midpoint
    between the switching values on the two saturated classes, and counts
    violations of the three optimality implications.
    """
    if M is None:
        M = float(np.max(control.values))
    if kappa is None:
        kappa = 1e-3 * M

    traj = integrate_reduced(model, control.grid, control)
    adj = adjoint_reduced(traj, control, model)
    w_nodes = adj.costates * g_of_p(traj.states, model)
    w = _interval_average(w_nodes)

    u = control.values
    on = np.flatnonzero(u >= M - kappa)
    off = np.flatnonzero(u <= kappa)
    interior = np.flatnonzero((u > kappa) & (u < M - kappa))

    if on.size and off.size:
        lam = 0.5 * (float(np.max(w[on])) + float(np.min(w[off])))
    elif on.size:
        lam = float(np.max(w[on]))
    elif off.size:
        lam = float(np.min(w[off]))
    else:
        lam = float(np.mean(w[interior]))

    tol = 1e-6 * abs(lam) if lam != 0.0 else 1e-12
    violations = int(np.sum(w[on] > lam + tol)) \
        + int(np.sum(w[off] < lam - tol)) \
        + int(np.sum(np.abs(w[interior] - lam) > tol))

    singular = -f_of_p(model.p_star, model) / g_of_p(model.p_star, model)
    return SwitchingReport(
        grid=control.grid, w=w, lambda_estimate=lam,
        violation_count=violations, on_set=on, off_set=off,
        interior_set=interior, singular_value=singular)
