import pytest
from rich.panel import Panel
from rich.table import Table

from config import ConfigError, get_settings, parse_experiment_config, parse_model_document
from reports import format_number, render


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("WZ_BUDGET", "1000")
    monkeypatch.setenv("WZ_SEED", "5")
    settings = get_settings()
    assert settings.budget == 1000
    assert settings.seed == 5


def test_bad_environment_value(monkeypatch):
    monkeypatch.setenv("WZ_TABLE_CAP", "lots")
    with pytest.raises(ConfigError):
        get_settings()


def test_model_document_shapes():
    with pytest.raises(ConfigError):
        parse_model_document({"alphabet_x": 2, "alphabet_y": 2, "alphabet_xhat": 2, "channel": [[1.0, 0.0]]})
    with pytest.raises(ConfigError):
        parse_model_document({"alphabet_x": 2, "alphabet_y": 1, "alphabet_xhat": 3, "channel": [[1.0], [1.0]]})
    doc = parse_model_document({"alphabet_x": 2, "alphabet_y": 1, "alphabet_xhat": 1, "channel": [[1.0], [1.0]],
                                "distortion": [[0.0], [1.0]], "sequence": [0, 1]})
    assert doc.sequence == [0, 1]


def test_sr_needs_its_block():
    model = {"alphabet_x": 2, "alphabet_y": 2, "alphabet_xhat": 2, "channel": [[1.0, 0.0], [0.0, 1.0]]}
    with pytest.raises(ConfigError):
        parse_experiment_config({"kind": "sr", "model": model})


def test_render_by_kind():
    assert format_number(None) == "-"
    assert format_number(0.5) == "0.500000"
    drf = render({"kind": "drf", "points": 3, "hull": [[0.0, 0.2], [1.0, 0.0]], "artifacts": ["drf.csv"]})
    assert isinstance(drf[0], Panel) and isinstance(drf[1], Table)
    check = render({"kind": "theorem1-check", "instances": 4, "violations": 0, "passed": True})
    assert len(check) == 1
