"""Two-stage Lobatto IIIC integration for controlled ODEs.

The scheme is L-stable and order 2, which keeps the stiff slow-fast system
well behaved for time steps much larger than the fast scale. This module is
the generic (arbitrary right-hand side) driver; the named systems of the
package also have compiled fast paths in ``wolbactrl._kernels``.

Butcher arrays: c = [0, 1], A = [[1/2, -1/2], [1/2, 1/2]], b = [1/2, 1/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NewtonDivergence, WolbactrlError

BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with N_d steps on [0, T]."""

    T: float
    N_d: int

    def __post_init__(self):
        if not (self.T > 0 and self.N_d >= 1):
            raise WolbactrlError(f"invalid grid: T={self.T}, N_d={self.N_d}")

    @property
    def dt(self) -> float:
        return self.T / self.N_d

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N_d + 1)

    def cell_midpoints(self) -> np.ndarray:
        return (np.arange(self.N_d) + 0.5) * self.dt


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant release rate; value k is active on [k*dt, (k+1)*dt)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.N_d,):
            raise WolbactrlError(
                f"control needs {self.grid.N_d} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise WolbactrlError("control values must be finite and >= 0")
        object.__setattr__(self, "values", values)

    def budget(self) -> float:
        return self.grid.dt * float(np.sum(self.values))

    def check_admissible(self, M: float, C: float) -> None:
        if np.any(self.values > M + BUDGET_SLACK):
            raise WolbactrlError(f"control exceeds flux cap M={M}")
        if self.budget() > C + BUDGET_SLACK:
            raise WolbactrlError(f"control budget {self.budget()} exceeds C={C}")

    @staticmethod
    def zero(grid: TimeGrid) -> "ControlSignal":
        return ControlSignal(grid, np.zeros(grid.N_d))

    @staticmethod
    def from_interval(grid: TimeGrid, start: float, end: float, level: float
                      ) -> "ControlSignal":
        """Cell-average discretization of level * 1_[start, end]."""
        edges = np.arange(grid.N_d + 1) * grid.dt
        overlap = np.minimum(edges[1:], end) - np.maximum(edges[:-1], start)
        frac = np.clip(overlap, 0.0, None) / grid.dt
        return ControlSignal(grid, level * frac)


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (N_d+1, dim) or (N_d+1,) for scalar systems
    stage_states: np.ndarray | None = None  # (N_d, 2, dim), for adjoint cross-checks

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Write `t,x1[,x2]` rows at 17 significant digits."""
        states = np.atleast_2d(self.states.T).T
        dim = states.shape[1]
        header = "t," + ",".join(f"x{i + 1}" for i in range(dim))
        t = self.grid.nodes()
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for k in range(states.shape[0]):
                row = [f"{t[k]:.17g}"] + [f"{states[k, i]:.17g}" for i in range(dim)]
                fh.write(",".join(row) + "\n")


@dataclass(frozen=True)
class NewtonOpts:
    tol: float = 1e-12
    max_iter: int = 50
    jac: object = None  # optional callable (state, u, t) -> Jacobian matrix


def _fd_jacobian(rhs, state, u, t):
    """Central-difference Jacobian, h = 1e-7 * (1 + |x_i|) per component."""
    state = np.asarray(state, dtype=float)
    dim = state.size
    jac = np.empty((dim, dim))
    for i in range(dim):
        h = 1e-7 * (1.0 + abs(state[i]))
        hi = state.copy()
        lo = state.copy()
        hi[i] += h
        lo[i] -= h
        jac[:, i] = (np.asarray(rhs(hi, u, t)) - np.asarray(rhs(lo, u, t))) / (2 * h)
    return jac


def lobatto_iiic_step(rhs, state, u_k: float, t: float, dt: float,
                      newton_opts: NewtonOpts | None = None,
                      return_stages: bool = False):
    """One implicit step; control held constant over the step.

    Solves the stacked two-stage equations by Newton iteration. The residual
    tolerance is scaled by the stage magnitude, since for stiff systems the
    stage derivatives can exceed 1/eps and the absolute residual floor is
    then limited by floating-point cancellation.
    """
    opts = newton_opts or NewtonOpts()
    x = np.asarray(state, dtype=float)
    dim = x.size
    jac_fn = opts.jac or (lambda s, u, tt: _fd_jacobian(rhs, s, u, tt))

    k0 = np.asarray(rhs(x, u_k, t), dtype=float)
    k = np.concatenate([k0, k0])  # stacked stage slopes (k1, k2)
    identity = np.eye(2 * dim)

    residual = math.inf
    jnorm = 0.0
    for _ in range(opts.max_iter):
        y1 = x + dt * (0.5 * k[:dim] - 0.5 * k[dim:])
        y2 = x + dt * (0.5 * k[:dim] + 0.5 * k[dim:])
        f1 = np.asarray(rhs(y1, u_k, t), dtype=float)
        f2 = np.asarray(rhs(y2, u_k, t + dt), dtype=float)
        res = np.concatenate([k[:dim] - f1, k[dim:] - f2])
        residual = float(np.max(np.abs(res)))
        scale = 1.0 + float(np.max(np.abs(k)))
        # Cancellation floor: evaluating f at x + dt*A*k loses
        # ||J|| * eps * (||x|| + dt ||k||) to rounding, so demanding a
        # smaller residual on very stiff steps can never succeed.
        floor = 64.0 * np.finfo(float).eps * jnorm * (
            float(np.max(np.abs(x))) + dt * float(np.max(np.abs(k))))
        if residual < opts.tol * scale + floor:
            next_state = x + dt * 0.5 * (k[:dim] + k[dim:])
            if return_stages:
                return next_state, np.stack([y1, y2])
            return next_state
        j1 = np.atleast_2d(jac_fn(y1, u_k, t))
        j2 = np.atleast_2d(jac_fn(y2, u_k, t + dt))
        jnorm = max(float(np.max(np.abs(j1))), float(np.max(np.abs(j2))))
        newton_mat = identity.copy()
        newton_mat[:dim, :dim] -= 0.5 * dt * j1
        newton_mat[:dim, dim:] += 0.5 * dt * j1
        newton_mat[dim:, :dim] -= 0.5 * dt * j2
        newton_mat[dim:, dim:] -= 0.5 * dt * j2
        k = k - np.linalg.solve(newton_mat, res)
    raise NewtonDivergence(step_index=-1, residual=residual)


def integrate(rhs, initial_state, grid: TimeGrid,
              control: ControlSignal | None = None,
              newton_opts: NewtonOpts | None = None,
              keep_stages: bool = False) -> Trajectory:
    """Drive N_d Lobatto IIIC steps, recording every node."""
    x0 = np.atleast_1d(np.asarray(initial_state, dtype=float))
    scalar = np.asarray(initial_state).ndim == 0
    dim = x0.size
    values = control.values if control is not None else np.zeros(grid.N_d)
    if control is not None and control.grid != grid:
        raise WolbactrlError("control grid does not match integration grid")

    states = np.empty((grid.N_d + 1, dim))
    states[0] = x0
    stages = np.empty((grid.N_d, 2, dim)) if keep_stages else None
    dt = grid.dt
    x = x0
    for k in range(grid.N_d):
        try:
            if keep_stages:
                x, stage = lobatto_iiic_step(
                    rhs, x, values[k], k * dt, dt, newton_opts, return_stages=True)
                stages[k] = stage
            else:
                x = lobatto_iiic_step(rhs, x, values[k], k * dt, dt, newton_opts)
        except NewtonDivergence as err:
            raise NewtonDivergence(step_index=k, residual=err.residual) from None
        states[k + 1] = x
    if scalar:
        states = states[:, 0]
    return Trajectory(grid=grid, states=states, stage_states=stages)


def convergence_order(rhs, initial, T: float, dts,
                      control_fn=None, newton_opts: NewtonOpts | None = None
                      ) -> float:
    """Least-squares slope of log(error) vs log(dt).

    The reference solution uses a grid four times finer than the smallest dt.
    A smooth control is sampled at cell midpoints so the piecewise-constant
    discretization does not cap the measured order below 2.
    """
    dts = sorted(float(dt) for dt in dts)
    if len(dts) < 3:
        raise WolbactrlError("need at least 3 dt values")

    def run(dt):
        n = int(round(T / dt))
        grid = TimeGrid(T=T, N_d=n)
        control = None
        if control_fn is not None:
            control = ControlSignal(grid, np.array(
                [max(control_fn(t), 0.0) for t in grid.cell_midpoints()]))
        return integrate(rhs, initial, grid, control, newton_opts).final

    reference = run(dts[0] / 4.0)
    errors = [float(np.max(np.abs(run(dt) - reference))) for dt in dts]
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)


def default_dt(eps: float) -> float:
    """Step-size rule for the eps sweep, inside the documented range."""
    return min(0.0015, max(0.0004, eps / 2.0))
