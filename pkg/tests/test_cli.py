import json
from pathlib import Path

import numpy as np
import pytest

from hopfarray.cli import ConfigError, main, parse_config, run_experiment

BASE = {
    "geometry": {"n": 2, "first_radius": 1.0, "s": 1.0, "gap_ratio": 0.5, "source_x": -5.0},
    "material": {"v": 1.0, "v_b": 1.0, "delta": 1e-3, "beta": 5.0e5},
    "numerics": {"ext_order": 6, "disk_radial": 10, "disk_angular": 24,
                 "ring_radial": 8, "ring_angular": 10},
    "experiment": {"type": "resonances"},
}


def _config(**overrides):
    cfg = json.loads(json.dumps(BASE))
    for key, val in overrides.items():
        if isinstance(val, dict) and key in cfg:
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


def test_parse_minimal_config_applies_defaults():
    cfg = _config()
    del cfg["numerics"]
    parsed = parse_config(json.dumps(cfg))
    assert parsed.numerics["multipole_order"] == 5
    assert parsed.numerics["resonance_tolerance"] == 1e-10
    assert parsed.numerics["newton_tolerance"] == 1e-10
    assert parsed.beta == 5.0e5


def test_parse_rejects_zero_delta():
    cfg = _config(material={"delta": 0.0})
    with pytest.raises(ConfigError, match="delta must be positive"):
        parse_config(json.dumps(cfg))


def test_parse_rejects_unknown_key():
    cfg = _config()
    cfg["material"]["betaa"] = 1.0
    with pytest.raises(ConfigError, match="betaa"):
        parse_config(json.dumps(cfg))


def test_parse_rejects_inconsistent_tau():
    cfg = _config(material={"tau": 0.5})
    with pytest.raises(ConfigError, match="tau"):
        parse_config(json.dumps(cfg))


def test_parse_rejects_bad_json():
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{not json")


def test_parse_rejects_missing_block():
    cfg = _config()
    del cfg["material"]
    with pytest.raises(ConfigError, match="material"):
        parse_config(json.dumps(cfg))


def test_parse_rejects_bad_experiment_type():
    cfg = _config(experiment={"type": "wibble"})
    with pytest.raises(ConfigError, match="experiment.type"):
        parse_config(json.dumps(cfg))


def test_parse_validates_experiment_fields():
    cfg = _config(experiment={"type": "sweep", "num_points": 1})
    with pytest.raises(ConfigError, match="num_points"):
        parse_config(json.dumps(cfg))
    cfg = _config(experiment={"type": "sweep", "F_values": []})
    with pytest.raises(ConfigError, match="F_values"):
        parse_config(json.dumps(cfg))


def test_resonances_experiment(tmp_path):
    parsed = parse_config(json.dumps(_config()))
    status = run_experiment(parsed, tmp_path)
    assert status == 0
    lines = (tmp_path / "resonances.csv").read_text().splitlines()
    assert lines[0] == "n,re_omega,im_omega,residual"
    assert len(lines) == 3  # header + one row per resonator
    manifest = json.loads((tmp_path / "run.json").read_text())
    assert manifest["versions"]["hopfarray"]
    assert "resonances.csv" in manifest["outputs"]
    assert manifest["cache"]["hit"] is False


def test_sweep_schema_and_determinism(tmp_path):
    cfg = _config(experiment={"type": "sweep", "mode_ref": 2, "num_points": 12,
                              "F_values": [1e-6, 1e-4]})
    parsed = parse_config(json.dumps(cfg))
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_experiment(parsed, out1, n_threads=1) == 0
    assert run_experiment(parsed, out2, n_threads=3) == 0
    head = (out1 / "sweep.csv").read_text().splitlines()[0]
    assert head == "Omega,F,mode,abs_X_over_F,re_X,im_X,residual,flag"
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
    assert (out1 / "resonances.csv").read_bytes() == (out2 / "resonances.csv").read_bytes()


def test_cache_round_trip_identical(tmp_path):
    cfg = _config(experiment={"type": "sweep", "mode_ref": 1, "num_points": 8,
                              "F_values": [1e-5]})
    parsed = parse_config(json.dumps(cfg))
    out = tmp_path / "warm"
    run_experiment(parsed, out, n_threads=1)
    first = (out / "sweep.csv").read_bytes()
    manifest1 = json.loads((out / "run.json").read_text())
    assert manifest1["cache"]["hit"] is False
    run_experiment(parsed, out, n_threads=1)
    manifest2 = json.loads((out / "run.json").read_text())
    assert manifest2["cache"]["hit"] is True
    assert (out / "sweep.csv").read_bytes() == first
    # bypassing the cache still reproduces the same bytes
    out_nc = tmp_path / "nocache"
    run_experiment(parsed, out_nc, n_threads=1, use_cache=False)
    assert (out_nc / "sweep.csv").read_bytes() == first


def test_twotone_schema(tmp_path):
    cfg = _config(experiment={"type": "twotone", "Omega1_mode": 2, "num_points": 7,
                              "F1": 1e-5, "F2": 1e-5})
    parsed = parse_config(json.dumps(cfg))
    assert run_experiment(parsed, tmp_path) == 0
    lines = (tmp_path / "twotone.csv").read_text().splitlines()
    assert lines[0] == "Omega2,abs_X10,abs_X01,abs_X21,abs_X12,abs_X01_passive"
    manifest = json.loads((tmp_path / "run.json").read_text())
    assert manifest["solver_stats"]["collision_dropped"] == [
        pytest.approx(manifest["solver_stats"]["Omega1"])
    ]


def test_phase_experiment_and_sign_flags(tmp_path):
    cfg = _config(experiment={"type": "phase", "num_points": 60, "F": 1e-6})
    parsed = parse_config(json.dumps(cfg))
    assert run_experiment(parsed, tmp_path) == 0
    lines = (tmp_path / "phase.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,Omega,R,phi_rad,phase_delay_cycles,group_delay_cycles"
    manifest = json.loads((tmp_path / "run.json").read_text())
    assert manifest["sign_flags"]["phase_reference"] == "velocity"
    assert manifest["sign_flags"]["phase_sign_flipped"] in (True, False)


def test_oracle_experiment(tmp_path):
    cfg = _config(experiment={"type": "oracle", "mu": 0.0, "omega0": 1.0,
                              "Omega": 1.0, "F_values": [1e-6, 1e-3]})
    parsed = parse_config(json.dumps(cfg))
    assert run_experiment(parsed, tmp_path) == 0
    lines = (tmp_path / "oracle.csv").read_text().splitlines()
    assert lines[0] == "mu,omega0,Omega,F,steady_amplitude"
    amp = float(lines[1].split(",")[-1])
    assert amp == pytest.approx((1e-6) ** (1 / 3), rel=1e-6)


def test_flagged_points_exit_code(tmp_path, monkeypatch):
    import hopfarray.analysis as analysis
    from hopfarray.hopf import ConvergenceError

    real_solver = analysis.solve_pure_tone
    cfg = _config(experiment={"type": "sweep", "mode_ref": 1, "num_points": 6,
                              "F_values": [1e-5]})
    parsed = parse_config(json.dumps(cfg))
    run_experiment(parsed, tmp_path / "probe", n_threads=1)
    grid_omega = float(
        (tmp_path / "probe" / "sweep.csv").read_text().splitlines()[1].split(",")[0]
    )

    def failing(system, omega, F, beta, start=None):
        if abs(omega - grid_omega) < 1e-15:
            raise ConvergenceError("forced failure for the flag-path test")
        return real_solver(system, omega, F, beta, start=start)

    monkeypatch.setattr(analysis, "solve_pure_tone", failing)
    status = run_experiment(parsed, tmp_path / "flagged", n_threads=1)
    assert status == 2
    manifest = json.loads((tmp_path / "flagged" / "run.json").read_text())
    assert manifest["solver_stats"]["n_flagged"] == 1
    assert "forced failure" in manifest["solver_stats"]["flagged"][0]["message"]
    rows = (tmp_path / "flagged" / "sweep.csv").read_text().splitlines()[1:]
    flagged_rows = [r for r in rows if r.endswith("test")]
    assert len(flagged_rows) == 2  # one per mode at the failed point


def test_main_validate_and_mismatch(tmp_path, capsys):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(_config()))
    assert main(["validate", "--config", str(cfg_path)]) == 0
    assert "config OK" in capsys.readouterr().out
    # experiment type must match the subcommand
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "does not match" in err


def test_main_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"geometry": {}}')
    assert main(["validate", "--config", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_csv_floats_round_trip(tmp_path):
    parsed = parse_config(json.dumps(_config()))
    run_experiment(parsed, tmp_path)
    lines = (tmp_path / "resonances.csv").read_text().splitlines()[1:]
    manifest = json.loads((tmp_path / "run.json").read_text())
    # shortest round-trip decimals: parsing back and re-rendering is identity
    for line in lines:
        for field in line.split(",")[1:]:
            assert repr(float(field)) == field
