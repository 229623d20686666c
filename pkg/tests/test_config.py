import json

import pytest
import yaml

from vortexwave.config import (ConfigError, RunConfig, config_from_dict, default_config_path, dump_config,
                               emit_report, load_config, load_report)
from vortexwave.diagnostics import ConvergenceReport, MetricResult


def test_default_config_loads():
    cfg = load_config(default_config_path())
    assert cfg.grid.N == 512 and cfg.grid.L == 16.0
    assert cfg.nus == [4e-3, 2e-3, 1e-3, 5e-4]
    assert cfg.T == 0.5
    assert cfg.to_dict() == RunConfig().validate().to_dict()


def base_dict():
    return yaml.safe_load(default_config_path().read_text())


@pytest.mark.parametrize("key", ["nus", "grid", "T"])
def test_missing_required_field_named(key):
    d = base_dict()
    del d[key]
    with pytest.raises(ConfigError, match=key):
        config_from_dict(d)


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"nus": []}, "nus"),
        ({"nus": [1e-3, -1e-3, 2e-3]}, "nus[1]"),
        ({"nus": [1e-3, 1e-3, 2e-3]}, "nus"),
        ({"grid": {"L": 16.0, "N": 500}}, "grid.N"),
        ({"T": 1e-5}, "T"),
        ({"cfl": 1.5}, "cfl"),
        ({"initial": {"c": [0.5, 0.0]}}, "initial"),
        ({"initial": {"c": [7.0, 0.0]}}, "initial.c"),
        ({"thresholds": {"R_cut": 20.0}}, "thresholds.R_cut"),
        ({"bogus": 1}, "bogus"),
        ({"grid": {"L": 16.0, "N": 512, "M": 3}}, "grid.M"),
    ],
)
def test_schema_errors_name_the_field(patch, field):
    d = base_dict()
    d.update(patch)
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    assert str(exc.value).startswith(field)


def test_config_round_trip_bit_exact(tmp_path):
    d = base_dict()
    d["nus"] = [0.1 + 0.2, 1 / 3, 7e-4]
    d["t0"] = 1 / 7
    cfg = config_from_dict(d)
    p = tmp_path / "c.yaml"
    text = dump_config(cfg, p)
    back = load_config(p)
    assert back.to_dict() == cfg.to_dict()
    assert dump_config(back) == text


def test_report_round_trip(tmp_path):
    rep = ConvergenceReport()
    rep.add(MetricResult("regular_rate", [4e-3, 2e-3, 1e-3], [4.0, 2.0, 1.0], "slope", 0.8))
    rep.errors[5e-4] = "SupportError: boom"
    rep.extra["dt"] = 0.01
    p = tmp_path / "r.json"
    emit_report(rep, p)
    d = load_report(p)
    assert d == json.loads(json.dumps(rep.to_dict()))
    assert ConvergenceReport.from_dict(d).to_dict() == d
