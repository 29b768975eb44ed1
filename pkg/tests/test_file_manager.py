import json
import math
import os

import numpy as np
import pytest

from modules.file_manager import FileManager, dumps, format_number, parse_space_document
from modules.space_builder import grid_space, random_weight, sphere_plane_space
from modules.utils import SpaceFileError, SpaceValidationError

TEMPLATES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "templates")


def test_space_file_matches_golden_template(tmp_path):
    path = tmp_path / "grid.json"
    FileManager(str(tmp_path)).save_space(str(path), grid_space(1, 3))
    with open(os.path.join(TEMPLATES, "space_template.json"), "rb") as f:
        assert path.read_bytes() == f.read()


def test_space_and_weight_survive_a_save_bit_for_bit(tmp_path):
    space = sphere_plane_space(16)
    weight = random_weight(space, 7, 10.0)
    manager = FileManager(str(tmp_path))
    path = manager.save_space(str(tmp_path / "sp.json"), space, weight)
    loaded, loaded_weight = manager.load_space(path)
    assert np.array_equal(loaded.dist, space.dist)
    assert np.array_equal(loaded.mu, space.mu)
    assert np.array_equal(loaded_weight, weight)
    assert loaded.skeleton == space.skeleton
    assert loaded.name == space.name


def test_graph_mode_file():
    space, weight = FileManager().load_space(os.path.join(TEMPLATES, "graph_space_example.json"))
    assert space.n == 6
    assert space.dist[0, 5] == 3.0
    assert len(space.skeleton) == 6
    assert weight.tolist() == [1, 2, 1, 1, 2, 1]


def test_euclidean_mode_document():
    doc = {"Q": 1, "points": {"ids": [0, 1, 2], "coords": [[0, 0], [3, 4], [6, 8]]},
           "metric": {"mode": "euclidean"}, "measure": [1, 1, 1]}
    space, weight = parse_space_document(doc)
    assert space.dist[0, 2] == 10.0
    assert weight is None


def test_missing_field_is_reported_with_line():
    text = '{\n  "Q": 1,\n  "points": {"ids": [0, 1]},\n  "metric": {"mode": "matrix", "matrix": [[0, 1], [1, 0]]}\n}\n'
    with pytest.raises(SpaceFileError) as info:
        parse_space_document(json.loads(text), text)
    assert info.value.field == "measure"


def test_bad_measure_length_points_at_its_line():
    text = ('{\n  "Q": 1,\n  "points": {"ids": [0, 1]},\n'
            '  "metric": {"mode": "matrix", "matrix": [[0, 1], [1, 0]]},\n  "measure": [1]\n}\n')
    with pytest.raises(SpaceFileError) as info:
        parse_space_document(json.loads(text), text)
    assert info.value.field == "measure"
    assert info.value.line == 5


def test_invalid_json_carries_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "Q": 1,\n  "points": \n}\n', encoding="utf-8")
    with pytest.raises(SpaceFileError) as info:
        FileManager().load_space(str(path))
    assert info.value.line == 4


def test_invalid_metric_is_rejected():
    doc = {"Q": 1, "points": {"ids": [0, 1]}, "metric": {"mode": "matrix", "matrix": [[0, 1], [2, 0]]},
           "measure": [1, 1]}
    with pytest.raises(SpaceValidationError):
        parse_space_document(doc)


def test_unknown_metric_mode():
    doc = {"Q": 1, "points": {"ids": [0]}, "metric": {"mode": "taxicab"}, "measure": [1]}
    with pytest.raises(SpaceFileError) as info:
        parse_space_document(doc)
    assert info.value.field == "mode"


def test_number_formatting():
    assert format_number(math.inf, 15) == '"UNBOUNDED"'
    assert format_number(math.nan, 15) == "null"
    assert format_number(True, 15) == "true"
    assert format_number(0.1, 15) == "0.1"
    assert format_number(3, 15) == "3"


def test_reports_are_deterministic_and_decode_unbounded(tmp_path):
    manager = FileManager(str(tmp_path))
    report = {"tool": "t", "result": {"distortion": math.inf, "curve": [[1.0, 2.0], [2.0, math.inf]]}}
    path = manager.save_report(manager.resolve("r.json"), report)
    first = open(path, "rb").read()
    manager.save_report(path, report)
    assert open(path, "rb").read() == first
    assert first == dumps(report, 15).encode("utf-8")
    loaded = FileManager.load_report(path)
    assert loaded["result"]["distortion"] == math.inf


def test_plot_data_is_tab_separated(tmp_path):
    manager = FileManager(str(tmp_path))
    path = manager.save_plot_data(str(tmp_path / "r.tsv"), {"c2": [(1.0, 2.0), (2.0, math.inf)]})
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines == ["curve\tx\ty", "c2\t1\t2", "c2\t2\tUNBOUNDED"]


def test_resolve_places_bare_names_in_output_dir(tmp_path):
    manager = FileManager(str(tmp_path))
    assert manager.resolve("a.json") == os.path.join(str(tmp_path), "a.json")
    assert manager.resolve(os.path.join("sub", "a.json")) == os.path.join("sub", "a.json")


@pytest.mark.parametrize("matrix, invariant", [
    ([[0, 1, 2.0000000001], [1, 0, 1], [2.0000000001, 1, 0]], "triangle"),
    ([[0, 1.0000000001, 2], [1, 0, 1], [2, 1, 0]], "symmetry"),
])
def test_metric_tolerance_comes_from_the_file_manager(tmp_path, matrix, invariant):
    path = tmp_path / "near.json"
    doc = {"format": "mmspace-1", "name": "near", "Q": 1, "points": {"ids": [0, 1, 2]},
           "metric": {"mode": "matrix", "matrix": matrix}, "measure": [1, 1, 1]}
    path.write_text(json.dumps(doc), encoding="utf-8")
    space, _ = FileManager(str(tmp_path)).load_space(str(path))
    assert space.n == 3
    with pytest.raises(SpaceValidationError) as excinfo:
        FileManager(str(tmp_path), metric_tol=1e-12).load_space(str(path))
    assert excinfo.value.invariant == invariant
