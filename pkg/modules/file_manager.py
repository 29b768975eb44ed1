"""
File Manager Module
Load and save space files, write reports and plot data atomically
"""

import os
import json
import math
import logging
import tempfile
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .metric_space import METRIC_TOL, Space, graph_metric, validate_space, validate_weight
from .utils import SpaceFileError, SpaceValidationError

logger = logging.getLogger(__name__)

SPACE_FORMAT = "mmspace-1"
METRIC_MODES = ("matrix", "euclidean", "graph")


def format_number(value: Any, digits: int) -> str:
    """Fixed-precision JSON number; inf becomes the string "UNBOUNDED" and nan becomes null"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "null"
    if math.isinf(value):
        return '"UNBOUNDED"' if value > 0 else '"-UNBOUNDED"'
    return format(value, f".{digits}g")


def _is_scalar(value: Any) -> bool:
    return value is None or isinstance(value, (str, bool, int, float, np.generic))


def _encode(value: Any, digits: int, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, tuple):
        value = list(value)
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (bool, int, float, np.generic)):
        return format_number(value, digits)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, digits, indent + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(_is_scalar(v) for v in value):
            return "[" + ", ".join(_encode(v, digits, 0) for v in value) + "]"
        items = [f"{inner}{_encode(v, digits, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(document: Any, digits: int) -> str:
    """Deterministic JSON text (indent 2, scalar lists on one line, trailing newline)"""
    return _encode(document, digits, 0) + "\n"


def _decode_unbounded(value: Any) -> Any:
    if value == "UNBOUNDED":
        return float("inf")
    if value == "-UNBOUNDED":
        return float("-inf")
    return value


class FileManager:
    """Quản lý file: space file, report và plot data"""

    def __init__(self, output_dir: str = "outputs", space_digits: int = 17, report_digits: int = 15,
                 metric_tol: float = METRIC_TOL):
        self.output_dir = output_dir
        self.metric_tol = metric_tol
        self.space_digits = space_digits
        self.report_digits = report_digits

    @staticmethod
    def ensure_dir(path: str) -> str:
        if path:
            os.makedirs(path, exist_ok=True)
        return path

    def resolve(self, path: str) -> str:
        """Relative bare file names land in the output directory"""
        if os.path.isabs(path) or os.path.dirname(path):
            return path
        return os.path.join(self.output_dir, path)

    def write_atomic(self, path: str, text: str) -> str:
        """Write via a temp file in the same directory, then os.replace"""
        directory = os.path.dirname(os.path.abspath(path))
        self.ensure_dir(directory)
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
        logger.info(f"Wrote {path}")
        return path

    # ------------------------------------------------------------------ spaces

    def space_document(self, space: Space, weight: Optional[np.ndarray] = None) -> Dict[str, Any]:
        points: Dict[str, Any] = {"ids": list(range(space.n))}
        if space.coords is not None:
            points["coords"] = space.coords.tolist()
        doc: Dict[str, Any] = {
            "format": SPACE_FORMAT,
            "name": space.name,
            "Q": space.Q,
            "points": points,
            "metric": {"mode": "matrix", "matrix": space.dist.tolist()},
            "measure": space.mu.tolist(),
        }
        if space.skeleton is not None:
            doc["skeleton"] = [[i, j, length] for i, j, length in space.skeleton]
        if weight is not None:
            doc["weight"] = np.asarray(weight, dtype=float).tolist()
        return doc

    def save_space(self, path: str, space: Space, weight: Optional[np.ndarray] = None) -> str:
        return self.write_atomic(path, dumps(self.space_document(space, weight), self.space_digits))

    def load_space(self, path: str) -> Tuple[Space, Optional[np.ndarray]]:
        """
        Tải space file

        Args:
            path: Đường dẫn space file JSON (format mmspace-1)

        Returns:
            (space, weight hoặc None); báo SpaceFileError / SpaceValidationError nếu file lỗi
        """
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SpaceFileError("<document>", e.msg, line=e.lineno) from e
        space, weight = parse_space_document(doc, text, self.metric_tol)
        logger.info(f"Loaded space '{space.name}' ({space.n} points) from {path}")
        return space, weight

    # ----------------------------------------------------------------- reports

    def save_report(self, path: str, report: Dict[str, Any]) -> str:
        return self.write_atomic(path, dumps(report, self.report_digits))

    def save_plot_data(self, path: str, curves: Dict[str, Sequence[Tuple[float, float]]]) -> str:
        lines = ["curve\tx\ty"]
        for name, points in curves.items():
            for x, y in points:
                lines.append(f"{name}\t{self._plain(x)}\t{self._plain(y)}")
        return self.write_atomic(path, "\n".join(lines) + "\n")

    def _plain(self, value: Any) -> str:
        return format_number(value, self.report_digits).strip('"')

    @staticmethod
    def load_report(path: str) -> Dict[str, Any]:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f, object_hook=lambda d: {k: _decode_unbounded(v) for k, v in d.items()})


def _line_of(text: Optional[str], field: str) -> Optional[int]:
    if not text:
        return None
    needle = f'"{field}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def _require(doc: Dict[str, Any], field: str, text: Optional[str]) -> Any:
    if field not in doc:
        raise SpaceFileError(field, "missing required field", line=_line_of(text, field))
    return doc[field]


def _float_array(value: Any, field: str, text: Optional[str], ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise SpaceFileError(field, f"expected numbers: {e}", line=_line_of(text, field)) from e
    if arr.ndim != ndim:
        raise SpaceFileError(field, f"expected a {ndim}-dimensional array", line=_line_of(text, field))
    return arr


def _graph_metric(n: int, edges: Iterable[Any], text: Optional[str]) -> Tuple[np.ndarray, List[Tuple[int, int, float]]]:
    parsed = []
    for k, edge in enumerate(edges):
        try:
            i, j, length = int(edge[0]), int(edge[1]), float(edge[2])
        except (TypeError, ValueError, IndexError) as e:
            raise SpaceFileError("edges", f"edge {k} is not [i, j, length]", line=_line_of(text, "edges")) from e
        if not (0 <= i < n and 0 <= j < n) or i == j or not length > 0:
            raise SpaceFileError("edges", f"edge {k} = {edge!r} is invalid", line=_line_of(text, "edges"))
        parsed.append((i, j, length))
    dist = graph_metric(n, parsed)
    if np.any(np.isinf(dist)):
        raise SpaceValidationError("connectivity", "graph metric is disconnected")
    return dist, parsed


def parse_space_document(doc: Any, text: Optional[str] = None,
                         metric_tol: float = METRIC_TOL) -> Tuple[Space, Optional[np.ndarray]]:
    if not isinstance(doc, dict):
        raise SpaceFileError("<document>", "top level must be an object", line=1)
    fmt = doc.get("format", SPACE_FORMAT)
    if fmt != SPACE_FORMAT:
        raise SpaceFileError("format", f"unsupported format {fmt!r}", line=_line_of(text, "format"))

    points = _require(doc, "points", text)
    if not isinstance(points, dict) or "ids" not in points:
        raise SpaceFileError("points", "expected an object with 'ids'", line=_line_of(text, "points"))
    ids = list(points["ids"])
    n = len(ids)
    if ids != list(range(n)):
        raise SpaceFileError("ids", "point ids must be 0..n-1 in order", line=_line_of(text, "ids"))
    coords = None
    if points.get("coords") is not None:
        coords = _float_array(points["coords"], "coords", text, 2)
        if coords.shape[0] != n:
            raise SpaceFileError("coords", f"{coords.shape[0]} coordinates for {n} points",
                                 line=_line_of(text, "coords"))

    metric = _require(doc, "metric", text)
    if not isinstance(metric, dict):
        raise SpaceFileError("metric", "expected an object", line=_line_of(text, "metric"))
    mode = metric.get("mode")
    if mode not in METRIC_MODES:
        raise SpaceFileError("mode", f"metric mode must be one of {METRIC_MODES}, got {mode!r}",
                             line=_line_of(text, "mode"))
    payloads = [key for key in ("matrix", "edges") if key in metric]
    skeleton = None
    if mode == "matrix":
        if payloads != ["matrix"]:
            raise SpaceFileError("metric", "matrix mode needs exactly the 'matrix' payload",
                                 line=_line_of(text, "metric"))
        dist = _float_array(metric["matrix"], "matrix", text, 2)
        if dist.shape != (n, n):
            raise SpaceFileError("matrix", f"expected {n}x{n}, got {dist.shape}", line=_line_of(text, "matrix"))
    elif mode == "euclidean":
        if payloads:
            raise SpaceFileError("metric", "euclidean mode takes no payload", line=_line_of(text, "metric"))
        if coords is None:
            raise SpaceFileError("coords", "euclidean mode needs point coordinates", line=_line_of(text, "points"))
        dist = cdist(coords, coords)
    else:
        if payloads != ["edges"]:
            raise SpaceFileError("metric", "graph mode needs exactly the 'edges' payload",
                                 line=_line_of(text, "metric"))
        dist, skeleton = _graph_metric(n, metric["edges"], text)

    mu = _float_array(_require(doc, "measure", text), "measure", text, 1)
    if mu.shape[0] != n:
        raise SpaceFileError("measure", f"{mu.shape[0]} masses for {n} points", line=_line_of(text, "measure"))
    Q = _require(doc, "Q", text)
    if isinstance(Q, bool) or not isinstance(Q, (int, float)):
        raise SpaceFileError("Q", "expected a number", line=_line_of(text, "Q"))

    if doc.get("skeleton") is not None:
        skel = doc["skeleton"]
        try:
            skeleton = [(int(e[0]), int(e[1]), float(e[2])) for e in skel]
        except (TypeError, ValueError, IndexError) as e:
            raise SpaceFileError("skeleton", "entries must be [i, j, length]", line=_line_of(text, "skeleton")) from e

    space = Space(dist, mu, float(Q), skeleton=tuple(skeleton) if skeleton is not None else None,
                  coords=coords, name=str(doc.get("name", "space")))
    validate_space(space, metric_tol)

    weight = None
    if doc.get("weight") is not None:
        weight = validate_weight(space, _float_array(doc["weight"], "weight", text, 1))
    return space, weight
