"""Two-population competitive dynamics with cytoplasmic incompatibility.

Wild (n1) and infected (n2) mosquito densities, a release control acting
additively on n2, closed-form steady states, Jacobian and linear stability.
All functions are pure; all types are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import WolbactrlError

#: Eigenvalue real parts within this band are labelled "marginal".
MARGINAL_BAND = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Biological constants of the two-population system."""

    b1: float  # wild birth rate (1/time)
    b2: float  # infected birth rate (1/time)
    d1: float  # wild death rate (1/time)
    d2: float  # infected death rate (1/time)
    s_h: float  # cytoplasmic incompatibility level, in [0, 1]
    K: float  # carrying capacity

    def __post_init__(self):
        problems = []
        for name in ("b1", "b2", "d1", "d2", "K"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                problems.append(f"{name} must be finite and > 0, got {v!r}")
        if not (math.isfinite(self.s_h) and 0.0 <= self.s_h <= 1.0):
            problems.append(f"s_h must lie in [0, 1], got {self.s_h!r}")
        if problems:
            raise WolbactrlError("; ".join(problems))


# Figure-1 style defaults used throughout the tests.
FIG1_PARAMS = ModelParams(b1=0.8, b2=0.6, d1=0.27, d2=0.3, s_h=0.8, K=1.0)


@dataclass(frozen=True)
class SteadyStates:
    extinction: np.ndarray
    wild_only: np.ndarray | None
    infected_only: np.ndarray | None
    coexistence: np.ndarray | None

    def all_present(self):
        out = [("extinction", self.extinction)]
        if self.wild_only is not None:
            out.append(("wild_only", self.wild_only))
        if self.infected_only is not None:
            out.append(("infected_only", self.infected_only))
        if self.coexistence is not None:
            out.append(("coexistence", self.coexistence))
        return out


@dataclass(frozen=True)
class StabilityEntry:
    eigenvalues: tuple[complex, complex]
    label: str  # "stable" | "unstable" | "marginal"


@dataclass(frozen=True)
class StabilityReport:
    entries: dict = field(default_factory=dict)  # name -> StabilityEntry

    def label(self, name: str) -> str:
        return self.entries[name].label


def _frequency(n1: float, n2: float) -> float:
    """Infected frequency n2/(n1+n2), with the 0/0 := 0 convention."""
    total = n1 + n2
    if total == 0.0:
        return 0.0
    return n2 / total


def rhs_full(state, u: float, params: ModelParams) -> np.ndarray:
    """Right-hand side of the controlled two-population system."""
    n1, n2 = float(state[0]), float(state[1])
    if not (math.isfinite(n1) and math.isfinite(n2) and math.isfinite(u)):
        raise WolbactrlError(f"non-finite rhs input: state=({n1}, {n2}), u={u}")
    p = _frequency(n1, n2)
    crowd = 1.0 - (n1 + n2) / params.K
    f1 = params.b1 * n1 * (1.0 - params.s_h * p) * crowd - params.d1 * n1
    f2 = params.b2 * n2 * crowd - params.d2 * n2
    return np.array([f1, f2 + u])


def check_viability(params: ModelParams) -> bool:
    """True iff each population can sustain itself (b_i > d_i)."""
    return params.b1 > params.d1 and params.b2 > params.d2


def coexistence_ratio(params: ModelParams) -> float:
    return (params.d1 * params.b2) / (params.d2 * params.b1)


def check_coexistence(params: ModelParams) -> bool:
    """True iff a fourth strictly positive steady state exists."""
    ratio = coexistence_ratio(params)
    return 1.0 - params.s_h < ratio < 1.0


def steady_states(params: ModelParams) -> SteadyStates:
    """Closed-form steady states of the uncontrolled system."""
    wild = None
    infected = None
    if params.b1 > params.d1:
        wild = np.array([params.K * (1.0 - params.d1 / params.b1), 0.0])
    if params.b2 > params.d2:
        infected = np.array([0.0, params.K * (1.0 - params.d2 / params.b2)])
    coexistence = None
    if check_coexistence(params):
        ratio = coexistence_ratio(params)
        share = (1.0 - ratio) / params.s_h  # infected share of the total
        scale = params.K * (1.0 - params.d2 / params.b2)
        coexistence = np.array([(1.0 - share) * scale, share * scale])
    return SteadyStates(
        extinction=np.zeros(2),
        wild_only=wild,
        infected_only=infected,
        coexistence=coexistence,
    )


def jacobian(state, params: ModelParams) -> np.ndarray:
    """Jacobian of the uncontrolled field, via N = (n1+n2)/K and p = n2/(n1+n2).

    Both off-diagonal entries are <= 0 (the system is competitive).
    Rejects the total-extinction state, where the field is not differentiable.
    """
    n1, n2 = float(state[0]), float(state[1])
    if n1 + n2 <= 0.0:
        raise WolbactrlError("Jacobian undefined at total extinction (n1+n2 = 0)")
    b1, b2, d1, d2, sh, K = (
        params.b1,
        params.b2,
        params.d1,
        params.d2,
        params.s_h,
        params.K,
    )
    N = (n1 + n2) / K
    p = n2 / (n1 + n2)
    j11 = b1 * ((1 - sh * p) * (1 - (2 - p) * N) + sh * p * (1 - p) * (1 - N)) - d1
    j12 = -b1 * (1 - p) * (sh * (1 - p) + N * (1 - sh))
    j21 = -b2 * p * N
    j22 = b2 * (1 - (1 + p) * N) - d2
    return np.array([[j11, j12], [j21, j22]])


def eigenvalues_2x2(mat) -> tuple[complex, complex]:
    """Closed-form eigenvalues of a real 2x2 matrix (quadratic formula)."""
    a, b = float(mat[0][0]), float(mat[0][1])
    c, d = float(mat[1][0]), float(mat[1][1])
    half_trace = 0.5 * (a + d)
    disc = 0.25 * (a - d) ** 2 + b * c
    if disc >= 0.0:
        root = math.sqrt(disc)
        return (complex(half_trace - root), complex(half_trace + root))
    root = math.sqrt(-disc)
    return (complex(half_trace, -root), complex(half_trace, root))


def _label_from_eigs(eigs) -> str:
    worst = max(e.real for e in eigs)
    if worst > MARGINAL_BAND:
        return "unstable"
    if worst < -MARGINAL_BAND:
        return "stable"
    return "marginal"


def classify_stability(params: ModelParams) -> StabilityReport:
    """Stability labels for every steady state.

    The origin is classified through the directional-derivative rule: the
    field is not differentiable there, but the direction (0, 1) grows at
    rate b2 - d2, so the state is unstable under viability.
    """
    if not check_viability(params):
        raise WolbactrlError("classify_stability requires b1 > d1 and b2 > d2")
    ss = steady_states(params)
    entries = {}

    # Directional rates at the origin: (b1 - d1) along (1,0) with the CI
    # factor evaluating to 1, and (b2 - d2) along (0,1).
    origin_rates = (complex(params.b1 - params.d1), complex(params.b2 - params.d2))
    entries["extinction"] = StabilityEntry(origin_rates, _label_from_eigs(origin_rates))

    for name, state in ss.all_present():
        if name == "extinction":
            continue
        eigs = eigenvalues_2x2(jacobian(state, params))
        entries[name] = StabilityEntry(eigs, _label_from_eigs(eigs))
    return StabilityReport(entries=entries)


def objective_J(traj_final, params: ModelParams) -> float:
    """Least-square distance of the final state from the replacement target.

    Overshooting the infected equilibrium is not penalised (positive part).
    """
    n1, n2 = float(traj_final[0]), float(traj_final[1])
    n2_star = params.K * (1.0 - params.d2 / params.b2)
    return 0.5 * n1 * n1 + 0.5 * max(n2_star - n2, 0.0) ** 2
