"""Batch command-line interface and experiment harness.

Subcommands: steady-states, simulate, solve-reduced, optimize-full,
sweep-eps, sweep-c, check. Every run writes the resolved configuration into
the output directory; all CSV floats carry 17 significant digits.
Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time

import numpy as np

from . import config as cfgmod
from .adjoint import cost_full, gradient_slowfast, switching_analysis
from .config import RunConfig
from .errors import ConfigError, WolbactrlError
from .integrator import ControlSignal, TimeGrid
from .model import (FIG1_PARAMS, classify_stability, rhs_full, steady_states)
from .optimizer import (AdmissibleSet, OptimOpts, Problem, default_inits,
                        l1_distance, optimize)
from .reduced import (C_star, J0, build_reduced_model, integrate_reduced,
                      solve_reduced_analytic)
from .slowfast import (SlowFastParams, bounds, integrate_full_fast,
                       integrate_slowfast, J_eps)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _sf_params(cfg: RunConfig, eps: float | None = None) -> SlowFastParams:
    return SlowFastParams(b1_0=cfg.b1_0, b2_0=cfg.b2_0, d1=cfg.d1,
                          d2=cfg.d2, s_h=cfg.s_h, K=cfg.K,
                          eps=cfg.eps if eps is None else eps)


def _grid(cfg: RunConfig, dt: float | None = None) -> TimeGrid:
    dt = cfg.dt if dt is None else dt
    return TimeGrid(T=cfg.T, N_d=int(round(cfg.T / dt)))


def _prepare_out(cfg: RunConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfgmod.dump_resolved(cfg, os.path.join(out_dir, "resolved_config.json"))


def _write_control_csv(path, control: ControlSignal, M: float, C: float
                       ) -> None:
    control.check_admissible(M, C)
    t = control.grid.nodes()[:-1]
    with open(path, "w") as fh:
        fh.write("t,u\n")
        for k in range(control.grid.N_d):
            fh.write(f"{_fmt(t[k])},{_fmt(control.values[k])}\n")


def _json_dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands

def cmd_steady_states(cfg: RunConfig, out_dir: str) -> int:
    mp = _sf_params(cfg).to_model_params()
    report = {}
    for name, params in (("config", mp), ("two_stable_regime", FIG1_PARAMS)):
        states = steady_states(params)
        stability = classify_stability(params)
        entry = {"conditions": {
            "viability": params.d1 < params.b1 and params.d2 < params.b2,
            "coexistence": states.coexistence is not None,
        }, "states": {}}
        for sname, state in states.all_present():
            st = stability.entries[sname]
            entry["states"][sname] = {
                "state": [float(v) for v in state],
                "residual_inf": float(np.max(np.abs(
                    rhs_full(state, 0.0, params)))),
                "eigenvalues": [[ev.real, ev.imag] for ev in st.eigenvalues],
                "label": st.label,
            }
        report[name] = entry
    _json_dump(report, os.path.join(out_dir, "steady_states.json"))
    return 0


def _load_control_file(path, grid: TimeGrid) -> ControlSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    data = np.atleast_2d(data)
    if data.shape[0] != grid.N_d:
        raise ConfigError(
            f"control file has {data.shape[0]} rows, grid needs {grid.N_d}")
    return ControlSignal(grid=grid, values=np.ascontiguousarray(data[:, 1]))


def _analytic_control(cfg: RunConfig, grid: TimeGrid) -> ControlSignal:
    model = build_reduced_model(_sf_params(cfg))
    return solve_reduced_analytic(cfg.T, cfg.C, cfg.M, model, grid).control


def cmd_simulate(cfg: RunConfig, out_dir: str, source: str,
                 control_file: str | None, system: str) -> int:
    grid = _grid(cfg)
    if source == "zero":
        control = ControlSignal.zero(grid)
    elif source == "analytic":
        control = _analytic_control(cfg, grid)
    else:
        control = _load_control_file(control_file, grid)
    control.check_admissible(cfg.M, cfg.C + 1e-9)

    sp = _sf_params(cfg)
    if system == "reduced":
        model = build_reduced_model(sp)
        traj = integrate_reduced(model, grid, control)
        cost = J0(control, model)
    elif system == "slowfast":
        traj = integrate_slowfast(sp, grid, control)
        cost = J_eps(control, sp)
    else:
        ic = None
        if cfg.initial_condition is not None:
            ic = np.asarray(cfg.initial_condition, dtype=float)
        traj = integrate_full_fast(sp, grid, control, ic)
        cost = cost_full(control, sp, ic)

    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    final = traj.final
    _json_dump({
        "system": system,
        "control_source": source,
        "final_state": [float(v) for v in np.atleast_1d(final)],
        "cost": float(cost),
        "budget_used": control.budget(),
    }, os.path.join(out_dir, "summary.json"))
    return 0


def cmd_solve_reduced(cfg: RunConfig, out_dir: str) -> int:
    model = build_reduced_model(_sf_params(cfg))
    grid = _grid(cfg)
    sol = solve_reduced_analytic(cfg.T, cfg.C, cfg.M, model, grid)
    _write_control_csv(os.path.join(out_dir, "control.csv"),
                       sol.control, cfg.M, cfg.C + 1e-9)
    _json_dump({
        "case": sol.case_label,
        "c_star": sol.c_star,
        "theta": sol.theta,
        "p_star": model.p_star,
        "xi": model.xi,
        "max_neg_f_over_g": model.max_neg_fg,
        "release_start": sol.start,
        "release_end": sol.end,
        "release_level": sol.level,
        "predicted_cost": sol.predicted_cost,
        "cost_vs_threshold": ("below (1-theta)^2" if sol.inequality_ok
                              and sol.case_label == "early_release"
                              else "above (1-theta)^2"
                              if sol.inequality_ok else "violated"),
        "inequality_ok": sol.inequality_ok,
        "snap_error": sol.snap_error,
    }, os.path.join(out_dir, "report.json"))
    return 0


def _optimize_full(cfg: RunConfig, eps: float, C: float,
                   time_limit: float | None = None):
    """Shared core of optimize-full and the eps sweep."""
    sp = _sf_params(cfg, eps)
    grid = _grid(cfg)
    model = build_reduced_model(sp)
    sol = solve_reduced_analytic(cfg.T, C, cfg.M, model, grid)
    adm = AdmissibleSet(grid=grid, M=cfg.M, C=C)
    problem = Problem(cost=lambda u: J_eps(u, sp),
                      gradient=lambda u: gradient_slowfast(u, sp).values)
    inits = default_inits(adm, extra=[sol.control.values], seed=cfg.seed)
    opts = OptimOpts(max_iter=cfg.max_iter, time_limit_s=time_limit)
    result = optimize(problem, adm, opts, inits)
    return result, sol, sp, model


def cmd_optimize_full(cfg: RunConfig, out_dir: str) -> int:
    result, sol, sp, model = _optimize_full(cfg, cfg.eps, cfg.C,
                                            cfg.cell_timeout_s)
    result.control.check_admissible(cfg.M, cfg.C + 1e-9)
    result.export(out_dir, cfg.kappa_value(), cfg.M)
    report = switching_analysis(result.control, model, M=cfg.M,
                                kappa=cfg.kappa_value())
    report.to_csv(os.path.join(out_dir, "switching.csv"), result.control)
    _json_dump({
        "cost": result.cost,
        "analytic_reduced_cost_under_J_eps": J_eps(sol.control, sp),
        "kkt_residual": result.kkt_residual,
        "iterations": result.n_iterations,
        "converged": result.converged,
        "switching_violations": report.violation_count,
        "lambda_estimate": report.lambda_estimate,
    }, os.path.join(out_dir, "summary.json"))
    return 0


def _sweep_eps_cell(cfg: RunConfig, eps: float) -> dict:
    start = time.monotonic()
    result, sol, sp, model = _optimize_full(cfg, eps, cfg.C,
                                            cfg.cell_timeout_s)
    grid = result.control.grid
    j_hat = result.cost
    j_ustar = J_eps(sol.control, sp)
    p_hat = integrate_slowfast(sp, grid, result.control).states[:, 1]
    p_ref = integrate_reduced(model, grid, sol.control).states
    runtime = time.monotonic() - start
    return {
        "eps": eps,
        "J_hat": j_hat,
        "J_ustar": j_ustar,
        "rel_gap": (j_ustar - j_hat) / j_hat,
        "p_err_sup": float(np.max(np.abs(p_hat - p_ref))),
        "u_err_L1": l1_distance(result.control, sol.control),
        "runtime_s": runtime,
        "timed_out": (not result.converged
                      and runtime >= cfg.cell_timeout_s),
    }


_SWEEP_EPS_COLS = ("eps", "J_hat", "J_ustar", "rel_gap", "p_err_sup",
                   "u_err_L1", "runtime_s")


def run_sweep_eps(cfg: RunConfig) -> tuple[list[dict], list[str]]:
    """One record per eps in the configured (descending) list.

    Failed or timed-out cells still produce a record; errors are returned
    alongside so nothing is silently dropped.
    """
    eps_list = list(cfg.eps_list)
    records: list[dict | None] = [None] * len(eps_list)
    errors: list[str] = []

    def handle(idx, eps, outcome, exc):
        if exc is not None:
            records[idx] = {"eps": eps, **{c: math.nan
                                           for c in _SWEEP_EPS_COLS[1:]}}
            errors.append(f"eps={eps!r}: {exc}")
        else:
            records[idx] = outcome
            if outcome.get("timed_out"):
                errors.append(f"eps={eps!r}: timed out after "
                              f"{cfg.cell_timeout_s} s (best iterate kept)")

    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(cfg.jobs) as pool:
            futures = {pool.submit(_sweep_eps_cell, cfg, eps): (i, eps)
                       for i, eps in enumerate(eps_list)}
            for fut in concurrent.futures.as_completed(futures):
                i, eps = futures[fut]
                try:
                    handle(i, eps, fut.result(), None)
                except Exception as exc:  # recorded, sweep continues
                    handle(i, eps, None, exc)
    else:
        for i, eps in enumerate(eps_list):
            try:
                handle(i, eps, _sweep_eps_cell(cfg, eps), None)
            except Exception as exc:
                handle(i, eps, None, exc)
    return records, errors


def cmd_sweep_eps(cfg: RunConfig, out_dir: str) -> int:
    if list(cfg.eps_list) != sorted(cfg.eps_list, reverse=True):
        raise ConfigError("eps_list must be sorted in descending order")
    records, errors = run_sweep_eps(cfg)
    with open(os.path.join(out_dir, "sweep_eps.csv"), "w") as fh:
        fh.write(",".join(_SWEEP_EPS_COLS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(rec[c]) for c in _SWEEP_EPS_COLS) + "\n")
    if errors:
        with open(os.path.join(out_dir, "errors.txt"), "w") as fh:
            fh.write("\n".join(errors) + "\n")
    return 0


def _release_succeeds(C: float, cfg: RunConfig, model, grid,
                      c_star_val: float) -> tuple:
    """Case label, J0 and success flag of the optimal block for budget C.

    Uses an exact-budget cell-averaged block (partial cells averaged), so
    the success predicate varies continuously in C and the transition
    bisection is not quantized by the grid.
    """
    duration = min(C / cfg.M, cfg.T)
    if C > c_star_val:
        case = "early_release"
        control = ControlSignal.from_interval(grid, 0.0, duration, cfg.M)
    else:
        case = "late_release"
        control = ControlSignal.from_interval(grid, cfg.T - duration,
                                              cfg.T, cfg.M)
    pT = float(integrate_reduced(model, grid, control).final)
    return case, model.params.K ** 2 * (1.0 - pT) ** 2, pT > model.theta


def cmd_sweep_c(cfg: RunConfig, out_dir: str) -> int:
    model = build_reduced_model(_sf_params(cfg))
    grid = _grid(cfg)
    c_star_val = C_star(cfg.M, model)
    c_list = sorted(cfg.C_list)
    if not all(0.0 < c < cfg.T * cfg.M for c in c_list):
        raise ConfigError("every C in C_list must lie in (0, T*M)")

    rows = []
    for c in c_list:
        case, j0, ok = _release_succeeds(c, cfg, model, grid, c_star_val)
        rows.append((c, case, j0, ok))
    with open(os.path.join(out_dir, "sweep_c.csv"), "w") as fh:
        fh.write("C,case,J0,success\n")
        for c, case, j0, ok in rows:
            fh.write(f"{_fmt(c)},{case},{_fmt(j0)},{int(ok)}\n")

    # transition bracket by bisection between last failure and first success
    lo = hi = None
    for c, _, _, ok in rows:
        if ok and hi is None:
            hi = c
        if not ok:
            lo = c if hi is None else lo
    bracket = None
    if lo is not None and hi is not None and lo < hi:
        a, b = lo, hi
        while b - a > 1e-4:
            mid = 0.5 * (a + b)
            if _release_succeeds(mid, cfg, model, grid, c_star_val)[2]:
                b = mid
            else:
                a = mid
        bracket = (a, b)
    with open(os.path.join(out_dir, "transition.txt"), "w") as fh:
        fh.write(f"C_star_quadrature = {_fmt(c_star_val)}\n")
        if bracket is None:
            fh.write("transition bracket: not detected "
                     "(C list does not straddle the threshold)\n")
        else:
            fh.write(f"transition bracket: [{_fmt(bracket[0])}, "
                     f"{_fmt(bracket[1])}]\n")
    return 0


def run_check(cfg: RunConfig, n_pairs: int = 10, n_controls: int = 10
              ) -> list[tuple[str, bool, str]]:
    """Desk-scale invariant battery; returns (name, passed, detail) rows."""
    rng = np.random.default_rng(cfg.seed)
    sp = _sf_params(cfg)
    mp = sp.to_model_params()
    checks = []

    for name, params in (("config", mp), ("two_stable_regime", FIG1_PARAMS)):
        worst = max(float(np.max(np.abs(rhs_full(s, 0.0, params))))
                    for _, s in steady_states(params).all_present())
        checks.append((f"steady_state_residuals[{name}]", worst < 1e-12,
                       f"max residual {worst:.3e}"))

    stab = classify_stability(FIG1_PARAMS)
    expected = {"extinction": "unstable", "wild_only": "stable",
                "infected_only": "stable", "coexistence": "unstable"}
    ok = all(stab.label(k) == v for k, v in expected.items())
    checks.append(("stability_labels[two_stable_regime]", ok,
                   str({k: stab.label(k) for k in expected})))

    grid = TimeGrid(T=min(cfg.T, 5.0), N_d=500)
    n1s, n2s = steady_states(mp).wild_only[0], 0.5 * mp.K
    ok, detail = True, ""
    for _ in range(n_pairs):
        lo1, hi1 = np.sort(rng.uniform(0.05, 1.0, 2) * n1s)
        lo2, hi2 = np.sort(rng.uniform(0.05, 1.0, 2) * n2s)
        u = ControlSignal(grid=grid, values=rng.uniform(0.0, 1.0, grid.N_d))
        minus = integrate_full_fast(sp, grid, u, np.array([lo1, hi2])).states
        plus = integrate_full_fast(sp, grid, u, np.array([hi1, lo2])).states
        if not (np.all(minus[:, 0] < plus[:, 0])
                and np.all(minus[:, 1] > plus[:, 1])):
            ok, detail = False, "ordering broken"
            break
    checks.append(("comparison_principle", ok, detail or
                   f"{n_pairs} ordered pairs preserved"))

    ub = bounds(sp, cfg.M)
    adm = AdmissibleSet(grid=grid, M=cfg.M, C=cfg.C)
    ok, detail = True, ""
    from .optimizer import project
    for _ in range(n_controls):
        u = project(rng.uniform(0.0, cfg.M, grid.N_d), adm)
        states = integrate_slowfast(sp, grid, u).states
        p, n = states[:, 1], states[:, 0]
        if not (np.all(p >= -1e-10) and np.all(p <= 1.0 + 1e-10)):
            ok, detail = False, "frequency left [0, 1]"
            break
        if not (np.all(n >= ub.n_minus - 1e-6)
                and np.all(n <= ub.n_plus + 1e-6)):
            ok, detail = False, "scaled density left the uniform bounds"
            break
    checks.append(("confinement_and_bounds", ok, detail or
                   f"{n_controls} admissible controls confined"))
    return checks


def cmd_check(cfg: RunConfig, out_dir: str) -> int:
    checks = run_check(cfg)
    with open(os.path.join(out_dir, "check_report.txt"), "w") as fh:
        for name, passed, detail in checks:
            fh.write(f"{'PASS' if passed else 'FAIL'} {name}: {detail}\n")
    return 0 if all(p for _, p, _ in checks) else 2


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wolbactrl",
        description="Batch runs for the two-population release-control "
                    "model: simulation, analytic reduced solutions, "
                    "adjoint-gradient optimization, and parameter sweeps.")
    subs = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="JSON config path")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--eps", type=float, default=None)
        sp.add_argument("--c-budget", type=float, default=None,
                        dest="c_budget")
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--kappa", type=float, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        return sp

    common(subs.add_parser("steady-states"))
    sim = common(subs.add_parser("simulate"))
    sim.add_argument("--control", default="zero",
                     choices=("zero", "analytic", "file"))
    sim.add_argument("--control-file", default=None)
    sim.add_argument("--system", default="full",
                     choices=("full", "slowfast", "reduced"))
    common(subs.add_parser("solve-reduced"))
    common(subs.add_parser("optimize-full"))
    common(subs.add_parser("sweep-eps"))
    common(subs.add_parser("sweep-c"))
    common(subs.add_parser("check"))
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config, eps=args.eps, C=args.c_budget,
                          dt=args.dt, kappa=args.kappa, jobs=args.jobs,
                          seed=args.seed)
        if args.command == "simulate" and args.control == "file" \
                and not args.control_file:
            raise ConfigError("--control file requires --control-file PATH")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        _prepare_out(cfg, args.out)
        if args.command == "steady-states":
            return cmd_steady_states(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.control,
                                args.control_file, args.system)
        if args.command == "solve-reduced":
            return cmd_solve_reduced(cfg, args.out)
        if args.command == "optimize-full":
            return cmd_optimize_full(cfg, args.out)
        if args.command == "sweep-eps":
            return cmd_sweep_eps(cfg, args.out)
        if args.command == "sweep-c":
            return cmd_sweep_c(cfg, args.out)
        return cmd_check(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (WolbactrlError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
