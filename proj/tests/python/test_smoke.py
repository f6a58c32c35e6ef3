import json

import numpy as np
import pytest

import dcmg


def test_presets_listed():
    assert dcmg.preset_names() == [
        "rse_base",
        "rse_scenario1a",
        "rse_scenario1b",
        "rse_scenario2a",
        "rse_scenario2b",
    ]


def test_duty_reference():
    assert dcmg.duty_reference(278.0, 380.0) == pytest.approx(1 - 278 / 380, rel=1e-15)
    with pytest.raises(Exception):
        dcmg.duty_reference(278.0, 200.0)


def test_equilibrium_at_reference():
    eq = dcmg.equilibrium("rse_base")
    assert eq["feasible"] and eq["in_zip_region"]
    assert abs(eq["V_bar"][1] - 380.0) < 1e-9
    assert abs(eq["V_bar"][3] - 380.0) < 1e-9
    assert eq["current_balance"] < 1e-9


def test_config_dict_round_trip():
    cfg = dcmg.config("rse_scenario2a")
    again = json.loads(json.dumps(cfg))
    assert dcmg.equilibrium(again) == dcmg.equilibrium(cfg)
    assert cfg["events"][0]["V_d_star_volt"] == 375.0


def test_bad_config_raises():
    cfg = dcmg.config("rse_base")
    cfg["lines"][0]["R_ohm"] = -1.0
    with pytest.raises(dcmg.ConfigError, match="resistance"):
        dcmg.equilibrium(cfg)
    cfg = dcmg.config("rse_base")
    cfg["typo"] = 1
    with pytest.raises(dcmg.ConfigError, match=r"\$\.typo"):
        dcmg.run(cfg)


def test_run_shape_and_columns():
    out = dcmg.run("rse_scenario1a", duration=0.05)
    assert out["completed"]
    data = out["data"]
    assert data.shape == (51, len(out["columns"]))
    assert len(out["columns"]) == 21
    assert np.all(np.diff(data[:, 0]) > 0)
    v2 = data[:, out["columns"].index("V[2]")]
    assert np.allclose(v2, 380.0, atol=1e-9)


def test_run_matches_csv():
    out = dcmg.run("rse_scenario2b", duration=0.02)
    text = dcmg.csv("rse_scenario2b", duration=0.02)
    rows = [line for line in text.splitlines() if not line.startswith("#")]
    assert rows[0].split(",") == out["columns"]
    parsed = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    np.testing.assert_array_equal(parsed, out["data"])


def test_csv_deterministic():
    assert dcmg.csv("rse_scenario1b", duration=0.1) == dcmg.csv("rse_scenario1b", duration=0.1)


def test_verify_base():
    checks = dcmg.verify("rse_base")
    assert all(c["passed"] for c in checks), checks
