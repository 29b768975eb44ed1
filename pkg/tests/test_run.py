import json
import os
import shutil

import pytest

from modules.file_manager import FileManager
from run import main

TEMPLATES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "templates")


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("MMS_OUTPUT_DIR", "LOG_LEVEL", "LOG_FILE", "MMS_CONFIG_FILE"):
        monkeypatch.delenv(name, raising=False)
    return tmp_path


def _load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def test_classify_constant_weight_is_reproducible(workdir):
    out = str(workdir / "constant.json")
    argv = ["classify", "--example", "constant-1d", "--scales", "21", "--out", out]
    assert main(argv) == 0
    first = open(out, "rb").read()
    assert main(argv) == 0
    assert open(out, "rb").read() == first
    report = _load(out)
    assert report["tool"] == "mms-weights"
    assert report["command"] == "classify"
    assert report["result"]["violations"] == 0
    assert report["result"]["witness_replay"]["holds"] is True
    assert report["config"]["effective"]["witness_tol"] == 1e-12
    assert (workdir / "constant.tsv").exists()


def test_classify_segment_pair_reports_failed_conditions(workdir):
    out = str(workdir / "pair.json")
    assert main(["classify", "--example", "segment-pair", "--scales", "8", "--out", out]) == 0
    verdicts = _load(out)["result"]["verdicts"]
    assert verdicts["(2)"]["holds"]
    assert not verdicts["(4)"]["holds"]
    assert not verdicts["(5)"]["holds"]
    assert verdicts["nu_doubling"]["constant"] == "UNBOUNDED"


def test_malformed_input_exits_with_one(workdir, capsys):
    broken = workdir / "broken.json"
    broken.write_text('{"Q": 1,\n "points": {"ids": [0, 1]}\n', encoding="utf-8")
    assert main(["classify", "--input", str(broken)]) == 1
    assert "SpaceFileError" in capsys.readouterr().err


def test_bad_arguments_exit_with_one():
    assert main(["no-such-command"]) == 1
    assert main(["classify", "--example", "grid1d", "--p-grid", "0.5"]) == 1
    assert main(["classify", "--example", "unknown"]) == 1


def test_metrize_reports_unbounded_distortion(workdir):
    out = str(workdir / "metrize.json")
    assert main(["metrize", "--example", "segment-pair", "--scales", "8", "--out", out]) == 0
    result = _load(out)["result"]
    assert result["distortion"] == "UNBOUNDED"
    assert "error" in result["comparison"]
    assert FileManager.load_report(out)["result"]["distortion"] == float("inf")


def test_modulus_on_a_line(workdir):
    out = str(workdir / "modulus.json")
    assert main(["modulus", "--example", "grid1d", "--scales", "21", "--r", "0.25", "--out", out]) == 0
    result = _load(out)["result"]
    assert result["ratio"] == pytest.approx(1.0, abs=1e-6)
    assert result["mod_1"] == pytest.approx(2.0, abs=1e-6)


def test_mollify_writes_scales(workdir):
    out = str(workdir / "mollify.json")
    argv = ["mollify", "--example", "power-alpha1", "--scales", "41", "--t-grid", "0.2,0.1", "--out", out]
    assert main(argv) == 0
    result = _load(out)["result"]
    assert [row["t"] for row in result["scales"]] == [0.2, 0.1]
    assert all(row["partition_error"] < 1e-12 for row in result["scales"])
    assert all(row["partition_ok"] for row in result["scales"])
    assert result["uniform_rhi"]["informative"] is False
    assert _load(out)["config"]["effective"]["partition_tol"] == 1e-12
    assert len(result["weak_convergence"]["rows"]) == 2


def test_examples_writes_a_space_file(workdir, capsys):
    assert main(["examples", "--example", "grid1d", "--scales", "11", "--out", str(workdir / "spaces")]) == 0
    space, weight = FileManager().load_space(str(workdir / "spaces" / "grid1d.json"))
    assert space.n == 11 and weight is None
    assert "grid1d.json" in capsys.readouterr().out


def test_suite_on_segment_pair_is_a_finding(workdir):
    out = str(workdir / "suite.json")
    assert main(["suite", "--family", "segment-pair", "--scales", "8,16", "--out", out]) == 2
    assert _load(out)["result"]["verdict"] == "NOT-STRONG"


@pytest.mark.slow
def test_suite_on_power_weight_is_stable(workdir):
    out = str(workdir / "suite.json")
    assert main(["suite", "--family", "power-alpha1", "--scales", "101,201", "--out", out]) == 0
    assert _load(out)["result"]["verdict"] == "STABLE"
    assert _load(out)["result"]["a1_stable"] is None


def test_suite_tracks_a1_for_a1_families(workdir):
    out = str(workdir / "suite.json")
    assert main(["suite", "--family", "a1-1d", "--scales", "21,41", "--out", out]) == 0
    report = _load(out)
    assert report["result"]["a1_stable"] is True
    assert report["config"]["effective"]["check_a1"] is True
    assert all(s["a1"] >= 1.0 for s in report["result"]["scales"])
    assert "a1\t" in (workdir / "suite.tsv").read_text(encoding="utf-8")


def test_metrize_report_matches_golden_template(workdir):
    shutil.copy(os.path.join(TEMPLATES, "two_point_space.json"), workdir / "two_point_space.json")
    argv = ["metrize", "--input", "two_point_space.json", "--out", "report_example.json"]
    assert main(argv) == 0
    with open(os.path.join(TEMPLATES, "report_example.json"), "rb") as f:
        assert (workdir / "outputs" / "report_example.json").read_bytes() == f.read()
