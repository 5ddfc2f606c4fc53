"""The scaled (n, p) system: total-population deficit and infected frequency.

When birth rates scale like b_i^0/eps the two-population dynamics become a
slow-fast system; n = (1 - N/K)/eps relaxes on the fast O(eps) scale while
the frequency p evolves slowly. All cost evaluations of the eps-dependent
problem go through this form so the whole eps sweep is treated uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import PopulationCollapse, WolbactrlError
from .integrator import ControlSignal, TimeGrid, Trajectory
from .model import ModelParams

COLLAPSE_FLOOR = 1e-12

#: Grid sizes for the double minimization in :func:`bounds`.
_P_SAMPLES = 2001
_EPS_SAMPLES = 201


@dataclass(frozen=True)
class SlowFastParams:
    """Normalized rates; the induced full model has b_i = b_i^0 / eps."""

    b1_0: float
    b2_0: float
    d1: float
    d2: float
    s_h: float
    K: float
    eps: float

    def __post_init__(self):
        problems = []
        for name in ("b1_0", "b2_0", "d1", "d2", "K", "eps"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                problems.append(f"{name} must be finite and > 0, got {v!r}")
        if not 0.0 <= self.s_h <= 1.0:
            problems.append(f"s_h must lie in [0, 1], got {self.s_h!r}")
        if problems:
            raise WolbactrlError("; ".join(problems))

    def to_model_params(self) -> ModelParams:
        return ModelParams(
            b1=self.b1_0 / self.eps,
            b2=self.b2_0 / self.eps,
            d1=self.d1,
            d2=self.d2,
            s_h=self.s_h,
            K=self.K,
        )

    def with_eps(self, eps: float) -> "SlowFastParams":
        return SlowFastParams(self.b1_0, self.b2_0, self.d1, self.d2,
                              self.s_h, self.K, eps)

    def initial_state(self) -> np.ndarray:
        """Scaled image of the wild-only equilibrium: (d1/b1^0, 0)."""
        return np.array([self.d1 / self.b1_0, 0.0])

    def n2_star(self) -> float:
        return self.K * (1.0 - self.eps * self.d2 / self.b2_0)


# Table-1 values at eps = 1; the eps sweep rescales via with_eps().
TABLE1_PARAMS = SlowFastParams(b1_0=1.0, b2_0=0.9, d1=0.27, d2=0.3,
                               s_h=0.9, K=1.0, eps=1.0)


@dataclass(frozen=True)
class UniformBounds:
    n_minus: float
    n_plus: float
    eps0: float


def a_of_p(p: float, params: SlowFastParams) -> float:
    """Frequency-weighted effective birth rate; strictly positive on [0, 1]."""
    return (params.b1_0 * (1.0 - p) * (1.0 - params.s_h * p)
            + params.b2_0 * p)


def Z_of_p(p: float, params: SlowFastParams) -> float:
    """Equilibrium deficit of the fast equation at frequency p."""
    return (params.d1 * (1.0 - p) + params.d2 * p) / a_of_p(p, params)


def rhs_slowfast(state, u: float, params: SlowFastParams) -> np.ndarray:
    n, p = float(state[0]), float(state[1])
    pop = 1.0 - params.eps * n
    if pop <= COLLAPSE_FLOOR:
        raise PopulationCollapse(step_index=-1)
    a = a_of_p(p, params)
    zn = params.d1 * (1.0 - p) + params.d2 * p
    dn = (pop * (zn - a * n) - u / params.K) / params.eps
    dp = (p * (1.0 - p)
          * (n * (params.b2_0 - params.b1_0 * (1.0 - params.s_h * p))
             + params.d1 - params.d2)
          + u * (1.0 - p) / (params.K * pop))
    return np.array([dn, dp])


def jacobian_slowfast(state, u: float, params: SlowFastParams) -> np.ndarray:
    """State Jacobian of :func:`rhs_slowfast` (used by Newton and the adjoint)."""
    n, p = float(state[0]), float(state[1])
    b10, b20 = params.b1_0, params.b2_0
    d1, d2, sh, K, eps = params.d1, params.d2, params.s_h, params.K, params.eps
    pop = 1.0 - eps * n
    a = a_of_p(p, params)
    ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    zn = d1 * (1.0 - p) + d2 * p
    j11 = -(zn - a * n) - pop * a / eps
    j12 = pop * ((d2 - d1) - ap * n) / eps
    j21 = (p * (1.0 - p) * (b20 - b10 * (1.0 - sh * p))
           + u * (1.0 - p) * eps / (K * pop * pop))
    j22 = ((1.0 - 2.0 * p) * (n * (b20 - b10 * (1.0 - sh * p)) + d1 - d2)
           + p * (1.0 - p) * n * b10 * sh - u / (K * pop))
    return np.array([[j11, j12], [j21, j22]])


def to_slowfast(state, eps: float, K: float) -> np.ndarray:
    """(n1, n2) -> (n, p). Rejects the empty population."""
    n1, n2 = float(state[0]), float(state[1])
    total = n1 + n2
    if total <= 0.0:
        raise WolbactrlError("change of variables undefined at N = 0")
    return np.array([(1.0 - total / K) / eps, n2 / total])


def from_slowfast(state, eps: float, K: float) -> np.ndarray:
    """(n, p) -> (n1, n2). Requires a nonnegative population 1 - eps*n."""
    n, p = float(state[0]), float(state[1])
    pop = 1.0 - eps * n
    if pop < 0.0:
        raise WolbactrlError(f"1 - eps*n = {pop} < 0")
    total = K * pop
    return np.array([(1.0 - p) * total, p * total])


def integrate_slowfast(params: SlowFastParams, grid: TimeGrid,
                       control: ControlSignal | None = None,
                       initial_state=None) -> Trajectory:
    """Kernel-backed Lobatto IIIC integration of the (n, p) system."""
    x0 = params.initial_state() if initial_state is None else \
        np.asarray(initial_state, dtype=float)
    values = control.values if control is not None else np.zeros(grid.N_d)
    states = _kernels.integrate_slowfast(
        x0, values, grid.dt, params.b1_0, params.b2_0, params.d1, params.d2,
        params.s_h, params.K, params.eps)
    return Trajectory(grid=grid, states=states)


def integrate_full_fast(params: SlowFastParams, grid: TimeGrid,
                        control: ControlSignal | None = None,
                        initial_state=None) -> Trajectory:
    """Kernel-backed integration of the unscaled (n1, n2) system."""
    mp = params.to_model_params()
    if initial_state is None:
        initial_state = np.array([mp.K * (1.0 - mp.d1 / mp.b1), 0.0])
    values = control.values if control is not None else np.zeros(grid.N_d)
    states = _kernels.integrate_full(
        np.asarray(initial_state, dtype=float), values, grid.dt,
        mp.b1, mp.b2, mp.d1, mp.d2, mp.s_h, mp.K)
    return Trajectory(grid=grid, states=states)


def eps0_default(params: SlowFastParams) -> float:
    """Largest scale at which the uniform deficit bounds are certified."""
    z_max = _max_Z(params)
    return 0.99 * min(params.b1_0 / params.d1, 1.0 / z_max)


def _max_Z(params: SlowFastParams) -> float:
    ps = np.linspace(0.0, 1.0, _P_SAMPLES)
    z = np.array([Z_of_p(p, params) for p in ps])
    best = int(np.argmax(z))
    lo = ps[max(best - 1, 0)]
    hi = ps[min(best + 1, len(ps) - 1)]
    res = minimize_scalar(lambda p: -Z_of_p(p, params),
                          bounds=(lo, hi), method="bounded")
    return max(float(z[best]), float(-res.fun))


def _phi(eps: float, p, params: SlowFastParams, M: float):
    """Smallest root of the fast equation's lower bound; Z - M/(K a) at eps=0."""
    a = params.b1_0 * (1.0 - p) * (1.0 - params.s_h * p) + params.b2_0 * p
    z = (params.d1 * (1.0 - p) + params.d2 * p) / a
    if eps == 0.0:
        return z - M / (params.K * a)
    rad = (1.0 - eps * z) ** 2 + 4.0 * eps * M / (params.K * a)
    return (1.0 + eps * z - np.sqrt(rad)) / (2.0 * eps)


def bounds(params: SlowFastParams, M: float,
           eps0: float | None = None) -> UniformBounds:
    """Uniform confinement interval [n_minus, n_plus] for the deficit.

    Valid for all admissible controls with flux cap M and all eps <= eps0.
    The double minimum over (eps, p) is taken on a dense grid and refined
    by bounded golden-section searches around the grid minimizer.
    """
    z_max = _max_Z(params)
    if eps0 is None:
        eps0 = eps0_default(params)
    if params.d1 / params.b1_0 >= 1.0 / eps0 or z_max >= 1.0 / eps0:
        raise WolbactrlError(
            f"eps0={eps0} violates d1/b1_0 < 1/eps0 and max Z < 1/eps0")

    n_init = params.d1 / params.b1_0
    n_plus = max(n_init, z_max)

    ps = np.linspace(0.0, 1.0, _P_SAMPLES)
    eps_grid = np.linspace(0.0, eps0, _EPS_SAMPLES)
    values = np.stack([_phi(e, ps, params, M) for e in eps_grid])
    i_eps, i_p = np.unravel_index(int(np.argmin(values)), values.shape)
    best = float(values[i_eps, i_p])

    p_lo = ps[max(i_p - 1, 0)]
    p_hi = ps[min(i_p + 1, len(ps) - 1)]
    res_p = minimize_scalar(
        lambda p: float(_phi(eps_grid[i_eps], p, params, M)),
        bounds=(p_lo, p_hi), method="bounded")
    e_lo = eps_grid[max(i_eps - 1, 0)]
    e_hi = eps_grid[min(i_eps + 1, len(eps_grid) - 1)]
    res_e = minimize_scalar(
        lambda e: float(_phi(e, ps[i_p], params, M)),
        bounds=(e_lo, e_hi), method="bounded")
    best = min(best, float(res_p.fun), float(res_e.fun))

    return UniformBounds(n_minus=min(n_init, best), n_plus=n_plus, eps0=eps0)


def J_eps(control: ControlSignal, params: SlowFastParams) -> float:
    """Terminal least-square cost of the eps-dependent problem.

    Integrates the slow-fast form from the wild equilibrium and maps the
    final state back to densities.
    """
    traj = integrate_slowfast(params, control.grid, control)
    n1, n2 = from_slowfast(traj.final, params.eps, params.K)
    shortfall = max(params.n2_star() - n2, 0.0)
    return 0.5 * n1 * n1 + 0.5 * shortfall * shortfall
