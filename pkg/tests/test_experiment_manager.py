import json

import pytest

from artifact_store import ArtifactStore
from config import ConfigError, Settings, load_model_document_file, parse_experiment_config
from experiment_manager import CURVE_COLUMNS, ExperimentManager

BSC_02 = [[0.8, 0.2], [0.2, 0.8]]


def model(sequence=None, channel=BSC_02):
    doc = {"alphabet_x": 2, "alphabet_y": 2, "alphabet_xhat": 2, "channel": channel, "distortion": "hamming"}
    if sequence is not None:
        doc["sequence"] = sequence
    return doc


def run(tmp_path, data, name="out"):
    data = dict(data, out_dir=str(tmp_path / name), seed=data.get("seed", 7))
    manager = ExperimentManager(Settings(out_dir=str(tmp_path / name)))
    return manager.run_experiment(parse_experiment_config(data))


def test_artifact_store_formats(tmp_path):
    store = ArtifactStore(tmp_path)
    store.write_csv("t.csv", ["a", "b", "c"], [{"a": 0.1, "b": True, "c": "x"}, {"a": 2}])
    assert (tmp_path / "t.csv").read_text() == "a,b,c\n0.1,1,x\n2,,\n"
    store.write_json("t.json", {"b": 1, "a": [1.5]})
    assert store.read_json("t.json") == {"a": [1.5], "b": 1}
    with pytest.raises(ValueError):
        store.write_json("bad.json", {"a": float("nan")})
    assert [p.name for p in store.written][:2] == ["t.csv", "t.json"]


def test_drf_from_dms_writes_curve(tmp_path):
    summary = run(tmp_path, {"kind": "drf", "model": model(),
                             "drf": {"dms": [0.5, 0.5], "lambda_count": 4, "restarts": 2}})
    lines = (tmp_path / "out" / "drf.csv").read_text().splitlines()
    assert lines[0] == ",".join(CURVE_COLUMNS)
    assert len(summary["hull"]) >= 2
    assert summary["hull"][0] == [0.0, pytest.approx(0.2)]
    assert (tmp_path / "out" / "summary.json").exists()


def test_runs_are_byte_identical(tmp_path):
    data = {"kind": "drf", "model": model([0, 1, 1, 0, 1, 0, 0, 0]),
            "drf": {"block": 2, "lambda_count": 4, "restarts": 2}}
    run(tmp_path, data, "a")
    run(tmp_path, data, "b")
    for name in ("drf.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_drf_needs_a_source(tmp_path):
    with pytest.raises(ConfigError):
        run(tmp_path, {"kind": "drf", "model": model()})


def test_config_requires_model_block():
    with pytest.raises(ConfigError):
        parse_experiment_config({"kind": "fsm-opt"})


def test_fsm_opt_zero_rate(tmp_path):
    summary = run(tmp_path, {"kind": "fsm-opt", "model": model([0] * 8 + [1] * 8),
                             "fsm_opt": {"states": 1, "delay": 0, "lmax": 1, "rate": 0.0}})
    assert summary["distortion"] == pytest.approx(0.2)
    result = json.loads((tmp_path / "out" / "fsm_opt.json").read_text())
    assert result["bits"] == 0
    assert result["decoder"]["states"] == 1


def test_codec_encode_then_decode(tmp_path):
    x = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0]
    y = [0, 1, 0, 0, 1, 0, 1, 1, 1, 1, 0, 1, 0, 0, 0, 0]
    codec = {"block": 2, "rate": 1.0, "lambda_count": 8, "restarts": 4}
    encoded = run(tmp_path, {"kind": "codec", "model": model(x), "codec": dict(codec, action="encode")}, "enc")
    assert (tmp_path / "enc" / "codec.bin").stat().st_size == (encoded["total_bits"] + 7) // 8
    decoded = run(tmp_path, {"kind": "codec", "model": model(),
                             "codec": dict(codec, action="decode", stream=str(tmp_path / "enc" / "codec.bin"),
                                           sideinfo=y)}, "dec")
    assert decoded["fingerprint"] == encoded["fingerprint"]
    assert json.loads((tmp_path / "dec" / "decoded.json").read_text())["sequence"] == x


def test_growth_sweep_without_model(tmp_path):
    summary = run(tmp_path, {"kind": "growth", "growth": {"action": "sweep", "theta": 0.5, "ns": [1000, 10000]}})
    lines = (tmp_path / "out" / "growth_sweep.csv").read_text().splitlines()
    assert lines[0] == "n,M_n,header_bits,header_bits_per_n"
    assert lines[1].startswith("1000,31,")
    assert summary["rows"] == 2


def test_growth_wrap(tmp_path):
    summary = run(tmp_path, {"kind": "growth", "model": model([0, 1, 1, 0], [[1.0, 0.0], [0.0, 1.0]]),
                             "growth": {"action": "wrap", "states": 1, "delay": 0, "lmax": 1}})
    assert summary["total_bits"] == 5


def test_sr_region(tmp_path):
    channel3 = [[[0.72, 0.08], [0.18, 0.02]], [[0.02, 0.18], [0.08, 0.72]]]
    summary = run(tmp_path, {"kind": "sr", "model": model([0, 1, 1, 0, 0, 0, 1, 1]),
                             "sr": {"block": 2, "rate": 0.5, "delta_rate": 0.5, "channel3": channel3}})
    lines = (tmp_path / "out" / "sr_region.csv").read_text().splitlines()
    assert lines[0] == "D1,D2,HU,HVgU"
    assert summary["frontier"] == len(lines) - 1


def test_gen_documents_load_back(tmp_path):
    run(tmp_path, {"kind": "gen", "gen": {"action": "dms", "p": [0.7, 0.3], "n": 40}})
    doc = load_model_document_file(tmp_path / "out" / "dms_model.json")
    assert len(doc.sequence) == 40
    summary = run(tmp_path, {"kind": "gen", "gen": {"action": "converse", "m": 4, "blocks": 3, "rate": 0.5,
                                                    "delta": 0.0}}, "conv")
    doc = load_model_document_file(tmp_path / "conv" / "converse_model.json")
    assert len(doc.sequence) == 12
    assert summary["codebook_size"] == 4


def test_lower_bound_check_passes_on_small_sweep(tmp_path):
    summary = run(tmp_path, {"kind": "theorem1-check", "theorem1": {
        "sample": None, "length": 4, "crossovers": [0.0, 0.2], "rates": [0.0, 0.5, 1.0], "blocks": [2],
        "states": 1, "delay": 0, "lmax": 1}})
    assert summary["instances"] == 16 * 2 * 3
    assert summary["zero_rate_mismatches"] == 0
    assert summary["violations"] == 0
    assert summary["passed"]


def test_lower_bound_check_covers_long_blocks_and_delay(tmp_path):
    summary = run(tmp_path, {"kind": "theorem1-check", "theorem1": {
        "sample": 12, "length": 8, "crossovers": [0.1], "rates": [0.0, 0.25, 0.5], "blocks": [2, 4],
        "states": 1, "delay": 1, "lmax": 1}})
    assert summary["instances"] == 12 * 2 * 3 * 2
    assert summary["zero_rate_mismatches"] == 0
    assert summary["violations"] == 0
