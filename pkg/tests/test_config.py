import json

import pytest

from wolbactrl import config as cfgmod
from wolbactrl.config import RunConfig, validate
from wolbactrl.errors import ConfigError


def test_defaults_are_valid():
    cfg = RunConfig()
    assert validate(cfg) == []
    assert cfg.b1_0 == 1.0 and cfg.b2_0 == 0.9
    assert cfg.d1 == 0.27 and cfg.d2 == 0.3
    assert cfg.s_h == 0.9 and cfg.K == 1.0
    assert cfg.M == 10.0 and cfg.T == 10.0
    assert cfg.kappa_value() == pytest.approx(0.01)


def test_all_violations_reported_at_once():
    cfg = RunConfig(b1_0=-1.0, s_h=2.0, dt=0.003, jobs=0)
    errs = validate(cfg)
    text = "\n".join(errs)
    assert "b1_0" in text
    assert "s_h" in text
    assert "integer number of cells" in text
    assert "jobs" in text
    assert len(errs) >= 4


def test_unviable_populations_rejected():
    assert any("d1 < b1_0" in e for e in validate(RunConfig(d1=1.5)))
    assert any("d2 < b2_0" in e for e in validate(RunConfig(d2=0.95)))


def test_horizon_budget_interplay():
    errs = validate(RunConfig(T=0.05, C=0.75, M=10.0, dt=0.005))
    assert any("T > C/M" in e for e in errs)


def test_load_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"C": 0.4, "eps": 0.5}))
    cfg = cfgmod.load(str(path), C=0.15, seed=7)
    assert cfg.C == 0.15       # CLI override wins
    assert cfg.eps == 0.5      # file value kept
    assert cfg.seed == 7


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError, match="unknown config key"):
        cfgmod.load(str(path))


def test_malformed_json_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        cfgmod.load(str(path))


def test_resolved_dump_round_trips(tmp_path):
    cfg = RunConfig(C=0.4)
    out = tmp_path / "resolved.json"
    cfgmod.dump_resolved(cfg, out)
    again = cfgmod.from_dict(json.loads(out.read_text()))
    assert again == cfg
