import numpy as np
import pytest

from wolbactrl.errors import WolbactrlError
from wolbactrl.integrator import ControlSignal, TimeGrid
from wolbactrl.slowfast import (TABLE1_PARAMS, J_eps, SlowFastParams, Z_of_p,
                                a_of_p, bounds, eps0_default, from_slowfast,
                                integrate_full_fast, integrate_slowfast,
                                rhs_slowfast, to_slowfast)


def test_a_of_p_endpoints_and_midpoint():
    assert a_of_p(0.0, TABLE1_PARAMS) == pytest.approx(1.0)
    assert a_of_p(1.0, TABLE1_PARAMS) == pytest.approx(0.9)
    assert a_of_p(0.5, TABLE1_PARAMS) == pytest.approx(0.725)
    grid = np.linspace(0.0, 1.0, 101)
    assert all(a_of_p(p, TABLE1_PARAMS) > 0.0 for p in grid)


def test_Z_of_p_endpoints():
    assert Z_of_p(0.0, TABLE1_PARAMS) == pytest.approx(0.27)
    assert Z_of_p(1.0, TABLE1_PARAMS) == pytest.approx(0.3 / 0.9)


def test_scaled_birth_rates():
    sp = TABLE1_PARAMS.with_eps(0.1)
    mp = sp.to_model_params()
    assert mp.b1 == pytest.approx(10.0)
    assert mp.b2 == pytest.approx(9.0)
    assert mp.d1 == sp.d1 and mp.d2 == sp.d2


def test_change_of_variables_round_trip():
    state = np.array([0.3, 0.2])
    back = from_slowfast(to_slowfast(state, 1.0, 1.0), 1.0, 1.0)
    assert back == pytest.approx(state, abs=1e-14)
    with pytest.raises(WolbactrlError):
        to_slowfast(np.array([0.0, 0.0]), 1.0, 1.0)


def test_wild_equilibrium_maps_to_initial_state():
    for eps in (1.0, 0.1):
        sp = TABLE1_PARAMS.with_eps(eps)
        n1_star = sp.K * (1.0 - eps * sp.d1 / sp.b1_0)
        n, p = to_slowfast(np.array([n1_star, 0.0]), eps, sp.K)
        assert (n, p) == pytest.approx((sp.d1 / sp.b1_0, 0.0), abs=1e-14)


def test_infected_equilibrium_in_scaled_variables():
    sp = TABLE1_PARAMS
    n, p = to_slowfast(np.array([0.0, sp.n2_star()]), sp.eps, sp.K)
    assert p == pytest.approx(1.0)
    assert n == pytest.approx(sp.d2 / sp.b2_0)


def test_slowfast_matches_full_system_through_change_of_variables():
    grid = TimeGrid(T=4.0, N_d=800)
    u = ControlSignal.from_interval(grid, 0.5, 1.0, 4.0)
    for eps in (1.0, 0.1):
        sp = TABLE1_PARAMS.with_eps(eps)
        full = integrate_full_fast(sp, grid, u)
        sf = integrate_slowfast(sp, grid, u)
        mapped = np.array([from_slowfast(s, eps, sp.K) for s in sf.states])
        # the two parameterizations discretize the same flow in
        # different variables, so they agree only to O(dt^2)
        assert np.max(np.abs(mapped - full.states)) < 2e-5


def test_uniform_bounds_contain_trajectory_and_initial_value():
    sp = TABLE1_PARAMS
    ub = bounds(sp, 10.0)
    assert ub.n_minus <= sp.d1 / sp.b1_0 <= ub.n_plus
    grid = TimeGrid(T=10.0, N_d=1000)
    u = ControlSignal.from_interval(grid, 0.0, 0.075, 10.0)
    n = integrate_slowfast(sp, grid, u).states[:, 0]
    assert np.all(n >= ub.n_minus - 1e-6)
    assert np.all(n <= ub.n_plus + 1e-6)


def test_bounds_zero_release_reduces_to_Z_extrema():
    sp = TABLE1_PARAMS
    ub = bounds(sp, 0.0)
    ps = np.linspace(0.0, 1.0, 2001)
    z = np.array([Z_of_p(p, sp) for p in ps])
    assert ub.n_plus == pytest.approx(max(sp.d1 / sp.b1_0, z.max()), abs=1e-6)
    assert ub.n_minus == pytest.approx(min(sp.d1 / sp.b1_0, z.min()),
                                       abs=1e-6)


def test_eps0_default_satisfies_preconditions():
    sp = TABLE1_PARAMS
    eps0 = eps0_default(sp)
    ps = np.linspace(0.0, 1.0, 2001)
    max_z = max(Z_of_p(p, sp) for p in ps)
    assert sp.d1 / sp.b1_0 < 1.0 / eps0
    assert max_z < 1.0 / eps0


def test_frequency_confinement_random_controls():
    rng = np.random.default_rng(3)
    grid = TimeGrid(T=5.0, N_d=500)
    for eps in (1.0, 0.01):
        sp = TABLE1_PARAMS.with_eps(eps)
        for _ in range(5):
            u = ControlSignal(grid, rng.uniform(0.0, 10.0, grid.N_d))
            p = integrate_slowfast(sp, grid, u).states[:, 1]
            assert np.all(p >= -1e-10) and np.all(p <= 1.0 + 1e-10)


def test_J_eps_release_beats_no_release():
    sp = TABLE1_PARAMS
    grid = TimeGrid(T=10.0, N_d=1000)
    released = ControlSignal.from_interval(grid, 0.0, 0.075, 10.0)
    assert J_eps(released, sp) < J_eps(ControlSignal.zero(grid), sp)


def test_rhs_slowfast_initial_direction():
    # From (d1/b1_0, 0) with u = 0 nothing moves: it is an equilibrium of
    # the uncontrolled limit dynamics in these variables.
    sp = TABLE1_PARAMS
    rate = rhs_slowfast(np.array([sp.d1 / sp.b1_0, 0.0]), 0.0, sp)
    assert np.max(np.abs(rate)) < 1e-14
    # positive release pushes the frequency up
    rate = rhs_slowfast(np.array([sp.d1 / sp.b1_0, 0.0]), 1.0, sp)
    assert rate[1] > 0.0
