import numpy as np
import pytest

from wolbactrl import _kernels
from wolbactrl.adjoint import (adjoint_full, adjoint_reduced,
                               adjoint_slowfast, cost_full, gradient_full,
                               gradient_reduced, gradient_slowfast,
                               switching_analysis)
from wolbactrl.integrator import ControlSignal, TimeGrid, Trajectory
from wolbactrl.reduced import (J0, build_reduced_model, f_prime_of_p,
                               integrate_reduced, solve_reduced_analytic)
from wolbactrl.slowfast import TABLE1_PARAMS, J_eps

MODEL = build_reduced_model(TABLE1_PARAMS)
GRID = TimeGrid(T=10.0, N_d=2000)


def _fd_pair(cost, uv, h, delta=1e-6):
    up = ControlSignal(GRID, uv + delta * h)
    um = ControlSignal(GRID, uv - delta * h)
    return (cost(up) - cost(um)) / (2.0 * delta)


def test_reduced_adjoint_negative_when_target_missed():
    u = ControlSignal.from_interval(GRID, 0.0, 0.075, 10.0)
    traj = integrate_reduced(MODEL, GRID, u)
    assert float(traj.final) < 1.0
    q = adjoint_reduced(traj, u, MODEL).costates
    assert np.all(q < 0.0)


def test_reduced_adjoint_zero_for_reached_target():
    # p(T) = 1 gives a zero terminal condition, hence q identically 0
    synth = Trajectory(grid=GRID, states=np.ones(GRID.N_d + 1),
                       stage_states=None)
    u = ControlSignal.zero(GRID)
    q = adjoint_reduced(synth, u, MODEL).costates
    assert np.max(np.abs(q)) == 0.0


def test_reduced_adjoint_closed_form_along_zero_control():
    # with u = 0 the frequency stays at 0 and the adjoint is a pure
    # exponential with rate f'(0)
    u = ControlSignal.zero(GRID)
    traj = integrate_reduced(MODEL, GRID, u)
    assert np.max(np.abs(traj.states)) == 0.0
    q = adjoint_reduced(traj, u, MODEL).costates
    t = GRID.nodes()
    fp0 = f_prime_of_p(0.0, MODEL)
    assert fp0 < 0.0
    exact = q[-1] * np.exp(fp0 * (10.0 - t))
    assert np.max(np.abs(q - exact)) < 1e-6


def test_gradient_reduced_sign_and_fd():
    rng = np.random.default_rng(11)
    uv = rng.uniform(0.01, 0.25, GRID.N_d)
    u = ControlSignal(GRID, uv)
    grad = gradient_reduced(u, MODEL).values
    assert np.all(grad <= 1e-12)
    h = rng.standard_normal(GRID.N_d)
    fd = _fd_pair(lambda c: J0(c, MODEL), uv, h)
    assert float(grad @ h) == pytest.approx(fd, rel=1e-4)


def test_gradient_full_fd_both_eps():
    rng = np.random.default_rng(12)
    uv = rng.uniform(0.01, 0.25, GRID.N_d)
    h = rng.standard_normal(GRID.N_d)
    u = ControlSignal(GRID, uv)
    for eps in (1.0, 0.1):
        sp = TABLE1_PARAMS.with_eps(eps)
        grad = gradient_full(u, sp).values
        fd = _fd_pair(lambda c: cost_full(c, sp), uv, h)
        assert float(grad @ h) == pytest.approx(fd, rel=2e-3)


def test_gradient_slowfast_fd():
    rng = np.random.default_rng(13)
    uv = rng.uniform(0.01, 0.25, GRID.N_d)
    h = rng.standard_normal(GRID.N_d)
    u = ControlSignal(GRID, uv)
    sp = TABLE1_PARAMS
    grad = gradient_slowfast(u, sp).values
    fd = _fd_pair(lambda c: J_eps(c, sp), uv, h)
    assert float(grad @ h) == pytest.approx(fd, rel=1e-4)


def test_zero_control_full_gradient_strictly_negative():
    u = ControlSignal.zero(GRID)
    grad = gradient_full(u, TABLE1_PARAMS).values
    assert np.all(grad < 0.0)


def test_adjoint_linearity_in_terminal_condition():
    sp = TABLE1_PARAMS
    mp = sp.to_model_params()
    rng = np.random.default_rng(5)
    states = np.column_stack([rng.uniform(0.1, 0.7, 101),
                              rng.uniform(0.1, 0.7, 101)])
    uv = rng.uniform(0.0, 1.0, 100)
    qT = np.array([0.3, -0.2])
    args = (states, uv, 0.01, mp.b1, mp.b2, mp.d1, mp.d2, mp.s_h, mp.K)
    q1 = _kernels.adjoint_full(*args, qT)
    q2 = _kernels.adjoint_full(*args, 2.0 * qT)
    assert np.max(np.abs(q2 - 2.0 * q1)) < 1e-12


def test_switching_analysis_analytic_optimum():
    for C in (0.15, 0.75):
        sol = solve_reduced_analytic(10.0, C, 10.0, MODEL, GRID)
        report = switching_analysis(sol.control, MODEL, M=10.0)
        assert report.violation_count == 0
        assert report.lambda_estimate < 0.0  # active budget constraint
        # separation: w on the release block below w off the block
        assert np.max(report.w[report.on_set]) <= \
            np.min(report.w[report.off_set]) + 1e-12


def test_switching_monotone_around_interior_root():
    sol = solve_reduced_analytic(10.0, 0.75, 10.0, MODEL, GRID)
    traj = integrate_reduced(MODEL, GRID, sol.control)
    q = adjoint_reduced(traj, sol.control, MODEL).costates
    from wolbactrl.reduced import g_of_p
    w = q * g_of_p(traj.states, MODEL)
    p = traj.states[:-1]
    dw = np.diff(w)
    below = p < MODEL.p_star - 1e-9
    above = p > MODEL.p_star + 1e-9
    assert np.all(dw[below] <= 1e-5)
    assert np.all(dw[above] >= -1e-5)


def test_switching_flags_constant_control():
    u = ControlSignal(GRID, np.full(GRID.N_d, 0.075))
    report = switching_analysis(u, MODEL, M=10.0)
    assert report.violation_count > 0
    assert len(report.interior_set) == GRID.N_d


def test_switching_report_csv(tmp_path):
    sol = solve_reduced_analytic(10.0, 0.75, 10.0, MODEL, GRID)
    report = switching_analysis(sol.control, MODEL, M=10.0)
    path = tmp_path / "switching.csv"
    report.to_csv(path, sol.control)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,u,w,lambda_est"
    assert len(lines) == GRID.N_d + 1


def test_adjoint_slowfast_matches_full_gradient_through_variables():
    # the two parameterizations of the same problem must agree on the cost
    # derivative for interior controls
    rng = np.random.default_rng(17)
    uv = rng.uniform(0.01, 0.25, GRID.N_d)
    h = rng.standard_normal(GRID.N_d)
    u = ControlSignal(GRID, uv)
    sp = TABLE1_PARAMS
    d_full = float(gradient_full(u, sp).values @ h)
    d_sf = float(gradient_slowfast(u, sp).values @ h)
    # same derivative through two discretizations: O(dt^2) agreement
    assert d_sf == pytest.approx(d_full, rel=1e-5)
