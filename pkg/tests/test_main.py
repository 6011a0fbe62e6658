import json

from config import parse_experiment_config
from main import EXIT_BUDGET, EXIT_CONFIG, EXIT_IO, EXIT_OK, build_parser, config_from_args, run


def write_model(path, sequence):
    path.write_text(json.dumps({"alphabet_x": 2, "alphabet_y": 2, "alphabet_xhat": 2,
                                "channel": [[0.8, 0.2], [0.2, 0.8]], "sequence": sequence}))
    return str(path)


def test_growth_sweep_command(tmp_path):
    code = run(["--out-dir", str(tmp_path), "growth", "sweep", "--theta", "0.5", "--ns", "1000,10000"])
    assert code == EXIT_OK
    assert (tmp_path / "growth_sweep.csv").exists()


def test_fsm_opt_command(tmp_path):
    model = write_model(tmp_path / "model.json", [0] * 8 + [1] * 8)
    code = run(["--out-dir", str(tmp_path / "out"), "fsm-opt", "--input", model, "--rate", "0"])
    assert code == EXIT_OK
    result = json.loads((tmp_path / "out" / "fsm_opt.json").read_text())
    assert abs(result["distortion"] - 0.2) < 1e-9


def test_budget_exit_code(tmp_path):
    model = write_model(tmp_path / "model.json", [0, 1, 1, 0])
    code = run(["--out-dir", str(tmp_path), "--budget", "1", "fsm-opt", "--input", model])
    assert code == EXIT_BUDGET


def test_missing_input_exit_code(tmp_path):
    code = run(["--out-dir", str(tmp_path), "fsm-opt", "--input", str(tmp_path / "missing.json")])
    assert code == EXIT_IO


def test_invalid_config_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "fsm-opt"}))
    assert run(["--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text("{not json")
    assert run(["--config", str(cfg)]) == EXIT_CONFIG


def test_config_file_run(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "gen", "gen": {"action": "dms", "n": 10}}))
    assert run(["--config", str(cfg), "--out-dir", str(tmp_path / "gen"), "--seed", "3"]) == EXIT_OK
    assert len(json.loads((tmp_path / "gen" / "dms_model.json").read_text())["sequence"]) == 10


def test_check_theorem1_command_builds_config():
    args = build_parser().parse_args(["check", "theorem1", "--sample", "8", "--length", "6"])
    cfg = parse_experiment_config(config_from_args(args))
    assert cfg.kind == "theorem1-check"
    assert cfg.theorem1.sample == 8
    assert cfg.theorem1.length == 6


def test_check_theorem1_command_runs(tmp_path):
    config = tmp_path / "check.json"
    config.write_text(json.dumps({"kind": "theorem1-check", "theorem1": {
        "sample": None, "length": 2, "crossovers": [0.0], "rates": [0.0, 1.0], "blocks": [2],
        "states": 1, "delay": 0, "lmax": 1}}))
    code = run(["--config", str(config), "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_OK
    assert (tmp_path / "out" / "theorem1.csv").exists()
