import numpy as np
import pytest

from wolbactrl.errors import NewtonDivergence, WolbactrlError
from wolbactrl.integrator import (ControlSignal, NewtonOpts, TimeGrid,
                                  convergence_order, integrate,
                                  lobatto_iiic_step)
from wolbactrl.slowfast import TABLE1_PARAMS, bounds, integrate_slowfast


def test_grid_basics():
    grid = TimeGrid(T=10.0, N_d=2000)
    assert grid.dt == pytest.approx(0.005)
    nodes = grid.nodes()
    assert len(nodes) == 2001
    assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(10.0)
    mids = grid.cell_midpoints()
    assert mids[0] == pytest.approx(0.0025)
    with pytest.raises(WolbactrlError):
        TimeGrid(T=-1.0, N_d=10)


def test_control_budget_and_admissibility():
    grid = TimeGrid(T=10.0, N_d=200)
    u = ControlSignal.from_interval(grid, 0.0, 0.075, 10.0)
    assert u.budget() == pytest.approx(0.75, abs=1e-12)
    u.check_admissible(M=10.0, C=0.75)
    with pytest.raises(WolbactrlError):
        u.check_admissible(M=10.0, C=0.5)
    with pytest.raises(WolbactrlError):
        u.check_admissible(M=1.0, C=10.0)
    with pytest.raises(WolbactrlError):
        ControlSignal(grid, -np.ones(grid.N_d))


def test_from_interval_cell_averages_partial_cells():
    grid = TimeGrid(T=1.0, N_d=10)
    u = ControlSignal.from_interval(grid, 0.0, 0.15, 2.0)
    assert u.values[0] == pytest.approx(2.0)
    assert u.values[1] == pytest.approx(1.0)  # half-covered cell
    assert np.all(u.values[2:] == 0.0)


def test_one_step_matches_stability_function():
    # For y' = lam*y one Lobatto IIIC step equals R(z)*y with
    # R(z) = 1/(1 - z + z^2/2), the scheme's stability function.
    lam, dt, y0 = -3.0, 0.1, 1.7
    z = lam * dt
    y1 = lobatto_iiic_step(lambda y, u, t: lam * y, np.array([y0]),
                           0.0, 0.0, dt)
    assert y1[0] == pytest.approx(y0 / (1.0 - z + 0.5 * z * z), rel=1e-12)


def test_l_stability_damps_stiff_mode():
    # |R(z)| -> 0 as z -> -inf: a huge stiff step must not oscillate.
    y1 = lobatto_iiic_step(lambda y, u, t: -1e8 * y, np.array([1.0]),
                           0.0, 0.0, 1.0)
    assert abs(y1[0]) < 1e-7


def test_integration_determinism_and_exactness():
    grid = TimeGrid(T=1.0, N_d=50)
    traj1 = integrate(lambda y, u, t: -y, np.array([1.0]), grid)
    traj2 = integrate(lambda y, u, t: -y, np.array([1.0]), grid)
    assert np.array_equal(traj1.states, traj2.states)
    assert traj1.final == pytest.approx(np.exp(-1.0), abs=1e-4)


def test_convergence_order_smooth():
    order = convergence_order(lambda y, u, t: -y + np.sin(t),
                              np.array([1.0]), 2.0, [0.1, 0.05, 0.025])
    assert 1.8 <= order <= 2.2


def test_newton_divergence_carries_step_index():
    opts = NewtonOpts(tol=1e-16, max_iter=1)
    grid = TimeGrid(T=1.0, N_d=4)
    with pytest.raises(NewtonDivergence) as exc:
        integrate(lambda y, u, t: y * y + 1.0, np.array([1.0]), grid,
                  newton_opts=opts)
    assert exc.value.step_index == 0


def test_stiff_slowfast_stays_within_bounds():
    # dt up to 10*eps must not blow up (L-stable damping of the fast mode)
    eps = 1e-3
    sp = TABLE1_PARAMS.with_eps(eps)
    grid = TimeGrid(T=2.0, N_d=200)  # dt = 0.01 = 10*eps
    u = ControlSignal.from_interval(grid, 0.0, 0.075, 10.0)
    traj = integrate_slowfast(sp, grid, u)
    ub = bounds(sp, 10.0)
    n = traj.states[:, 0]
    assert np.all(n >= ub.n_minus - 1e-6)
    assert np.all(n <= ub.n_plus + 1e-6)


def test_trajectory_csv_format(tmp_path):
    grid = TimeGrid(T=1.0, N_d=2)
    traj = integrate(lambda y, u, t: -y, np.array([1.0, 2.0]), grid)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,x1,x2"
    assert len(lines) == 4
    re_read = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(re_read[:, 1:], traj.states, rtol=0, atol=0)
