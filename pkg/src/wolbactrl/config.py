"""Run configuration: JSON loading, defaults, and exhaustive validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

_DEFAULT_EPS_LIST = (1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.002, 0.001, 0.0005)
_DEFAULT_C_LIST = tuple(round(0.05 * k, 2) for k in range(3, 16))  # 0.15..0.75


@dataclass(frozen=True)
class RunConfig:
    # biology
    b1_0: float = 1.0
    b2_0: float = 0.9
    d1: float = 0.27
    d2: float = 0.3
    s_h: float = 0.9
    K: float = 1.0
    # scales and horizon
    eps: float = 1.0
    T: float = 10.0
    dt: float = 0.005
    # control resources
    M: float = 10.0
    C: float = 0.75
    # sweeps
    eps_list: tuple[float, ...] = _DEFAULT_EPS_LIST
    C_list: tuple[float, ...] = _DEFAULT_C_LIST
    # diagnostics and execution
    kappa: float | None = None       # default 1e-3 * M at use sites
    seed: int = 0
    jobs: int = 1
    max_iter: int = 2000
    cell_timeout_s: float = 120.0
    initial_condition: tuple[float, float] | None = None  # (n1, n2)

    def kappa_value(self) -> float:
        return self.kappa if self.kappa is not None else 1e-3 * self.M

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("eps_list", "C_list", "initial_condition"):
            if isinstance(d[key], tuple):
                d[key] = list(d[key])
        return d


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def validate(cfg: RunConfig) -> list[str]:
    """All violations at once, so a bad config is fixed in one round."""
    errs = []
    for name in ("b1_0", "b2_0", "d1", "d2", "K", "eps", "T", "dt", "M", "C"):
        v = getattr(cfg, name)
        if not isinstance(v, (int, float)) or not v > 0.0:
            errs.append(f"{name} must be a positive number, got {v!r}")
    if not (isinstance(cfg.s_h, (int, float)) and 0.0 < cfg.s_h <= 1.0):
        errs.append(f"s_h must lie in (0, 1], got {cfg.s_h!r}")
    if isinstance(cfg.d1, (int, float)) and isinstance(cfg.b1_0, (int, float)) \
            and 0 < cfg.b1_0 <= cfg.d1:
        errs.append("d1 < b1_0 required for a viable wild population")
    if isinstance(cfg.d2, (int, float)) and isinstance(cfg.b2_0, (int, float)) \
            and 0 < cfg.b2_0 <= cfg.d2:
        errs.append("d2 < b2_0 required for a viable infected population")
    if isinstance(cfg.T, (int, float)) and isinstance(cfg.dt, (int, float)) \
            and cfg.dt > 0 and cfg.T > 0:
        n = cfg.T / cfg.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            errs.append(f"T/dt = {n!r} is not an integer number of cells")
    if isinstance(cfg.C, (int, float)) and isinstance(cfg.M, (int, float)) \
            and isinstance(cfg.T, (int, float)) and min(cfg.C, cfg.M) > 0 \
            and cfg.T > 0 and cfg.T <= cfg.C / cfg.M:
        errs.append("T > C/M required: the budget must not force u = M "
                    "on the whole horizon")
    if cfg.kappa is not None and not (
            isinstance(cfg.kappa, (int, float))
            and 0.0 < cfg.kappa < 0.5 * cfg.M):
        errs.append(f"kappa must lie in (0, M/2), got {cfg.kappa!r}")
    for name, lst in (("eps_list", cfg.eps_list), ("C_list", cfg.C_list)):
        if not (isinstance(lst, (list, tuple)) and len(lst) > 0
                and all(isinstance(v, (int, float)) and v > 0 for v in lst)):
            errs.append(f"{name} must be a non-empty list of positive numbers")
    if not (isinstance(cfg.jobs, int) and cfg.jobs >= 1):
        errs.append(f"jobs must be a positive integer, got {cfg.jobs!r}")
    if not (isinstance(cfg.max_iter, int) and cfg.max_iter >= 1):
        errs.append(f"max_iter must be a positive integer, got {cfg.max_iter!r}")
    if not (isinstance(cfg.seed, int) and cfg.seed >= 0):
        errs.append(f"seed must be a non-negative integer, got {cfg.seed!r}")
    if not (isinstance(cfg.cell_timeout_s, (int, float))
            and cfg.cell_timeout_s > 0):
        errs.append("cell_timeout_s must be a positive number")
    ic = cfg.initial_condition
    if ic is not None and not (
            isinstance(ic, (list, tuple)) and len(ic) == 2
            and all(isinstance(v, (int, float)) and v >= 0 for v in ic)):
        errs.append("initial_condition must be null or a pair of "
                    "non-negative numbers [n1, n2]")
    return errs


def from_dict(data: dict, **overrides) -> RunConfig:
    unknown = sorted(set(data) - _FIELDS)
    merged = {k: v for k, v in data.items() if k in _FIELDS}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("eps_list", "C_list", "initial_condition"):
        if isinstance(merged.get(key), list):
            merged[key] = tuple(merged[key])
    cfg = RunConfig(**merged)
    errs = ([f"unknown config key: {k}" for k in unknown]) + validate(cfg)
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
    return cfg


def load(path: str | None, **overrides) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
    return from_dict(data, **overrides)


def dump_resolved(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
