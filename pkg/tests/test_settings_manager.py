import json

from modules.settings_manager import SettingsManager


def test_defaults_without_a_config_file(tmp_path, monkeypatch):
    monkeypatch.delenv("MMS_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("LOG_LEVEL", raising=False)
    settings = SettingsManager(str(tmp_path / "missing.json"))
    assert settings.get("modulus", "max_cuts_per_round") == 32
    assert settings.get("regularity", "fit_radius_fraction") == 0.125
    assert settings.get("output", "output_dir") == "outputs"
    assert settings.get("nope", "key", "fallback") == "fallback"


def test_file_values_merge_over_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"modulus": {"tol": 1e-8}, "extra": 3}), encoding="utf-8")
    settings = SettingsManager(str(path))
    assert settings.get("modulus", "tol") == 1e-8
    assert settings.get("modulus", "iteration_factor") == 10
    assert settings.config["extra"] == 3


def test_broken_file_falls_back_to_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json", encoding="utf-8")
    assert SettingsManager(str(path)).get("strong", "stability_factor") == 2.0


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("MMS_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.setenv("LOG_LEVEL", "DEBUG")
    settings = SettingsManager(str(tmp_path / "missing.json"))
    assert settings.get("output", "output_dir") == str(tmp_path / "out")
    assert settings.get("logging", "level") == "DEBUG"


def test_set_and_save(tmp_path):
    path = tmp_path / "config.json"
    settings = SettingsManager(str(path))
    settings.set("mollify", "gehring_factor", 5.0, persist=True)
    assert json.loads(path.read_text(encoding="utf-8"))["mollify"]["gehring_factor"] == 5.0
    section = settings.get_section("mollify")
    section["gehring_factor"] = 1.0
    assert settings.get("mollify", "gehring_factor") == 5.0
