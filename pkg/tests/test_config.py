import json

import pytest
from pydantic import ValidationError

from app.config.settings import AuditSettings


def test_defaults():
    config = AuditSettings()
    assert config.grid_size == 2 ** 20
    assert config.quad_nodes == 4097
    assert config.significance == 0.05
    assert config.tail_method == "chernoff"


def test_load_precedence(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"grid_size": 2 ** 12, "workers": 2, "significance": 0.01}), encoding="utf-8")
    config = AuditSettings.load(str(path), {"workers": 8, "significance": None})
    assert config.grid_size == 2 ** 12
    assert config.workers == 8
    assert config.significance == 0.01


def test_unknown_field_rejected():
    with pytest.raises(ValidationError):
        AuditSettings(grid_sise=1024)


@pytest.mark.parametrize(
    "field, value",
    [("grid_size", 100), ("quad_nodes", 1000), ("tail_method", "hoeffding"), ("cache_type", "redis"), ("significance", 1.0)],
)
def test_invalid_values(field, value):
    with pytest.raises(ValidationError):
        AuditSettings(**{field: value})


def test_environment_ignored(monkeypatch):
    monkeypatch.setenv("GRID_SIZE", "4096")
    monkeypatch.setenv("WORKERS", "16")
    config = AuditSettings()
    assert config.grid_size == 2 ** 20
    assert config.workers == 4
