"""Config validation and the command line front end."""

import json

import numpy as np
import pytest

from spde_lab.cli import main, parse_test_function
from spde_lab.config import ConfigError, build_model, load_config, parse_state, validate_config
from spde_lab.models import HypothesisError
from spde_lab.reporting import CSV_HEADER_COMMENT


def small_config(**overrides):
    cfg = {
        "model": {"kind": "linear", "M": 8, "N": 2, "drift_scale": 0.5,
                  "sigma": {"rank": 4, "value": 1.0}},
        "grid": {"t_end": 1.0, "steps": 200, "checkpoints": [0.5, 1.0]},
        "mc": {"paths": 400, "master_seed": 21, "batch_size": 128},
        "x0": [0.5],
        "y0": [],
        "suites": {
            "contraction": True,
            "moment_t1": {"lambda": 0.1},
            "girsanov_martingale": True,
            "variational": {"paths": 3, "probes": 10},
        },
        "output": {},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------------------
# Config layer
# ---------------------------------------------------------------------------


def test_validate_collects_all_problems():
    with pytest.raises(ConfigError) as err:
        validate_config({"model": {"kind": "nope"}, "grid": {}, "mc": {}})
    msgs = err.value.problems
    # kind, t_end, steps, paths, master_seed all reported at once.
    assert len(msgs) >= 5


def test_validate_rejects_off_grid_checkpoint():
    cfg = small_config()
    cfg["grid"]["checkpoints"] = [0.333]
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_validate_rejects_bad_beta_factor():
    cfg = small_config(coupling={"beta_factor": 0.7})
    with pytest.raises(ConfigError):
        validate_config(cfg)
    ok = validate_config(small_config(coupling={"beta_factor": 1.0}))
    assert ok.beta_factor == 1.0


def test_build_linear_model_from_config():
    m = build_model(small_config()["model"])
    assert m.kind == "linear"
    assert m.dim == 8
    np.testing.assert_array_equal(m.spectrum.eigenvalues, np.arange(1.0, 9.0))
    np.testing.assert_array_equal(m.sigma_diag, np.where(np.arange(8) < 4, 1.0, 0.0))


def test_sigma_power_rule():
    m = build_model({"kind": "linear", "M": 4, "N": 2,
                     "sigma": {"alpha": 0.5, "rank": 3, "scale": 2.0}})
    lam = np.arange(1.0, 5.0)
    want = 2.0 * lam**-0.5
    want[3] = 0.0
    np.testing.assert_allclose(m.sigma_diag, want, rtol=1e-14)


def test_parse_state_variants():
    np.testing.assert_array_equal(parse_state([0.5, 0.1], 4), [0.5, 0.1, 0.0, 0.0])
    np.testing.assert_array_equal(parse_state({"coords": {"3": 0.7}}, 4), [0.0, 0.0, 0.7, 0.0])
    np.testing.assert_array_equal(parse_state([], 3), np.zeros(3))
    with pytest.raises(ConfigError):
        parse_state([1.0] * 5, 3)
    with pytest.raises(HypothesisError):
        parse_state([0.9, 0.9], 3)


def test_parse_test_function_specs():
    f = parse_test_function({"kind": "exp_linear", "c": 0.5, "direction": "e2"}, 4)
    assert f.scale == 0.5
    np.testing.assert_array_equal(f.direction, [0.0, 1.0, 0.0, 0.0])
    g = parse_test_function({"kind": "constant", "value": 2.0}, 4)
    assert g.value(np.zeros((1, 4)))[0] == 2.0
    h = parse_test_function({"kind": "exp_linear", "c": 1.0, "direction": [0.6, 0.8]}, 4)
    np.testing.assert_array_equal(h.direction, [0.6, 0.8, 0.0, 0.0])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def test_cmd_constants(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    out = tmp_path / "out"
    assert main(["constants", "--config", path, "--out", str(out)]) == 0
    payload = json.loads((out / "constants.json").read_text())
    assert payload["min_N"] == 1
    assert payload["constants"]["K_b"] == 0.5
    text = capsys.readouterr().out
    assert "min_N = 1" in text


def test_cmd_verify_pass_and_artifacts(tmp_path):
    path = write_config(tmp_path, small_config())
    out = tmp_path / "out"
    assert main(["verify", "--config", path, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert set(report["suites"]) == {"contraction", "moment_t1", "girsanov_martingale", "variational"}
    csv_text = (out / "contraction_0.5.csv").read_text().splitlines()
    assert csv_text[0] == CSV_HEADER_COMMENT
    assert csv_text[1] == "checkpoint,estimate,std_error,bound,pass"


def test_cmd_verify_thread_invariance(tmp_path):
    path = write_config(tmp_path, small_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", path, "--out", str(out1), "--threads", "1"]) == 0
    assert main(["verify", "--config", path, "--out", str(out2), "--threads", "4"]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_cmd_verify_seed_override_changes_report(tmp_path):
    path = write_config(tmp_path, small_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["verify", "--config", path, "--out", str(out1)])
    main(["verify", "--config", path, "--out", str(out2), "--seed", "99"])
    r1 = json.loads((out1 / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    assert r2["master_seed"] == 99
    assert r1["suites"]["contraction"]["rows"] != r2["suites"]["contraction"]["rows"]


def test_cmd_simulate_writes_paths(tmp_path):
    cfg = small_config(simulate={"paths": 2})
    cfg["grid"]["steps"] = 50
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["simulate", "--config", path, "--out", str(out)]) == 0
    lines = (out / "path_0.csv").read_text().splitlines()
    assert lines[1] == "t,h_norm,v_norm_integral,var_L"
    assert len(lines) == 2 + 51
    assert (out / "path_1.csv").exists()


def test_cmd_couple_identical_starts_zero_distance(tmp_path):
    cfg = small_config(y0=[0.5])
    cfg["grid"]["steps"] = 50
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["couple", "--config", path, "--out", str(out)]) == 0
    lines = (out / "couple.csv").read_text().splitlines()
    assert lines[1] == "t,dist_h,beta_sq_integral,beta_dw_integral,girsanov_weight"
    dist = [float(line.split(",")[1]) for line in lines[2:]]
    assert all(d == 0.0 for d in dist)


def test_cmd_verify_plots(tmp_path):
    cfg = small_config()
    cfg["mc"]["paths"] = 128
    cfg["grid"]["steps"] = 50
    cfg["grid"]["checkpoints"] = [0.5, 1.0]
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["verify", "--config", path, "--out", str(out), "--plots"]) == 0
    assert (out / "contraction.png").exists()
    assert (out / "moment_t1.png").exists()


def test_invalid_config_exits_two(tmp_path):
    cfg = small_config()
    del cfg["mc"]["paths"]
    path = write_config(tmp_path, cfg)
    assert main(["verify", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_hypothesis_violation_exits_two(tmp_path):
    cfg = {
        "model": {"kind": "navier_stokes", "d": 3, "cutoff": 1, "nu": 1.0, "theta": 1.0, "N": 2},
        "grid": {"t_end": 1.0, "steps": 10},
        "mc": {"paths": 4, "master_seed": 0},
        "x0": [], "y0": [], "suites": {}, "output": {},
    }
    path = write_config(tmp_path, cfg)
    assert main(["constants", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_cmd_sweep_monotone_rates(tmp_path):
    cfg = small_config(sweep={"N": [1, 2, 4]})
    cfg["grid"] = {"t_end": 2.0, "steps": 400, "checkpoints": [0.5, 1.0, 2.0]}
    cfg["mc"]["paths"] = 512
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["sweep", "--config", path, "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    rates = [float(line.split(",")[2]) for line in lines[2:]]
    # Larger N means a larger spectral gap and faster measured decay.
    assert rates[0] > rates[1] > rates[2]
