"""
Metric Space Module
Finite metric measure spaces: balls, discrete integration, doubling and Ahlfors diagnostics
"""

import math
import logging
from enum import Enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, floyd_warshall

from .utils import UNBOUNDED, InvalidPointError, SpaceValidationError

logger = logging.getLogger(__name__)

METRIC_TOL = 1e-9

Edge = Tuple[int, int, float]


class Convention(str, Enum):
    CLOSED = "closed"
    OPEN = "open"


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float
    members: FrozenSet[int]
    convention: Convention = Convention.CLOSED

    @property
    def ids(self) -> np.ndarray:
        return np.array(sorted(self.members), dtype=int)

    def describe(self) -> Dict[str, Any]:
        return {"center": self.center, "radius": self.radius, "convention": self.convention.value,
                "size": len(self.members)}


@dataclass(frozen=True)
class DoublingResult:
    value: float
    witness: Tuple[int, float]

    @property
    def bounded(self) -> bool:
        return not math.isinf(self.value)


@dataclass(frozen=True)
class RegularityFit:
    c_A: float
    Q_fit: float
    witness: Tuple[int, float]
    sample_size: int


@dataclass(frozen=True, eq=False)
class Space:
    """
    Không gian metric có độ đo, hữu hạn điểm

    Args:
        dist: Ma trận khoảng cách n×n, đối xứng
        mu: Khối lượng từng điểm (đều dương)
        Q: Số chiều thuần nhất
        skeleton: Danh sách cạnh (i, j, length) cho modulus solver (tùy chọn)
        coords: Tọa độ (tùy chọn), dùng khi ghi file và dựng example
    """
    dist: np.ndarray
    mu: np.ndarray
    Q: float
    skeleton: Optional[Tuple[Edge, ...]] = None
    coords: Optional[np.ndarray] = None
    name: str = "space"
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise SpaceValidationError("square-metric", f"distance matrix has shape {dist.shape}")
        if mu.shape[0] != dist.shape[0]:
            raise SpaceValidationError("measure-length", f"{mu.shape[0]} masses for {dist.shape[0]} points")
        dist.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Q", float(self.Q))
        if self.skeleton is not None:
            object.__setattr__(self, "skeleton", tuple((int(i), int(j), float(l)) for i, j, l in self.skeleton))
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords.reshape(-1, 1)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diam(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0

    @property
    def min_spacing(self) -> float:
        if self.n < 2:
            return 0.0
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    @cached_property
    def order(self) -> np.ndarray:
        """Row x lists point ids by increasing distance from x (stable, so ties keep id order)"""
        return np.argsort(self.dist, axis=1, kind="stable")

    @cached_property
    def sorted_dist(self) -> np.ndarray:
        return np.take_along_axis(self.dist, self.order, axis=1)

    def check_point(self, point: int) -> int:
        if not isinstance(point, (int, np.integer)) or point < 0 or point >= self.n:
            raise InvalidPointError(f"invalid point id {point!r} (space has {self.n} points)")
        return int(point)

    def closed_prefixes(self, center: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Mọi closed ball khác nhau quanh `center`, mỗi ball là một prefix của `order[center]`

        Returns:
            (radii, sizes): bán kính 0 trước (singleton), sau đó từng candidate radius
        """
        row = self.sorted_dist[center]
        ends = np.flatnonzero(np.diff(row) != 0)
        sizes = np.append(ends + 1, self.n)
        return row[sizes - 1].copy(), sizes

    def weighted_masses(self, weight: Optional[np.ndarray] = None) -> np.ndarray:
        if weight is None:
            return self.mu
        return np.asarray(weight, dtype=float) * self.mu


def validate_weight(space: Space, weight: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if weight is None:
        return None
    w = np.asarray(weight, dtype=float).reshape(-1)
    if w.shape[0] != space.n:
        raise SpaceValidationError("weight-length", f"{w.shape[0]} weight values for {space.n} points")
    if not np.all(np.isfinite(w)):
        raise SpaceValidationError("weight-finite", "weight has non-finite values")
    if np.any(w < 0):
        raise SpaceValidationError("weight-nonnegative", f"negative weight at point {int(np.argmax(w < 0))}")
    return w


def validate_space(space: Space, tol: float = METRIC_TOL) -> Space:
    """Raise SpaceValidationError naming the first violated invariant"""
    d = space.dist
    n = space.n
    if n == 0:
        raise SpaceValidationError("nonempty", "space has no points")
    if not np.all(np.isfinite(d)):
        raise SpaceValidationError("finite-metric", "distance matrix has non-finite entries")
    if np.any(np.diag(d) != 0):
        raise SpaceValidationError("zero-diagonal", f"dist(i,i) != 0 at i={int(np.argmax(np.diag(d) != 0))}")
    if np.any(np.abs(d - d.T) > tol):
        i, j = np.unravel_index(np.argmax(np.abs(d - d.T)), d.shape)
        raise SpaceValidationError("symmetry", f"dist({i},{j}) != dist({j},{i})")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] <= 0):
        i, j = np.argwhere((d <= 0) & off)[0]
        raise SpaceValidationError("positive-distance", f"dist({i},{j}) = {d[i, j]!r}")
    if not np.all(np.isfinite(space.mu)) or np.any(space.mu <= 0):
        raise SpaceValidationError("positive-mass", f"mu_{int(np.argmax(~(space.mu > 0)))} is not positive")
    if not space.Q > 0:
        raise SpaceValidationError("positive-dimension", f"Q = {space.Q!r}")
    if n > 1:
        shortest = floyd_warshall(d, directed=False)
        if np.any(shortest < d - tol):
            i, j = np.argwhere(shortest < d - tol)[0]
            raise SpaceValidationError(
                "triangle", f"dist({i},{j}) = {d[i, j]!r} exceeds a chain of length {shortest[i, j]!r}")
    if space.skeleton is not None:
        for i, j, length in space.skeleton:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise SpaceValidationError("skeleton-edge", f"bad skeleton edge ({i}, {j})")
            if abs(length - d[i, j]) > tol:
                raise SpaceValidationError(
                    "skeleton-edge-length", f"edge ({i}, {j}) has length {length!r}, metric says {d[i, j]!r}")
    return space


def graph_metric(n: int, edges: Iterable[Edge]) -> np.ndarray:
    """Shortest-path distances over weighted edges (inf where disconnected)"""
    dense = np.full((n, n), np.inf)
    for i, j, length in edges:
        dense[i, j] = dense[j, i] = min(dense[i, j], length)
    graph = csgraph_from_dense(dense, null_value=np.inf)
    return floyd_warshall(graph, directed=False)


def skeleton_distances(space: Space) -> np.ndarray:
    """All-pairs shortest paths over the skeleton edges (inf where disconnected)"""
    if space.skeleton is None:
        raise SpaceValidationError("skeleton", f"space '{space.name}' has no skeleton")
    return graph_metric(space.n, space.skeleton)


def skeleton_is_geodesic(space: Space, tol: float = METRIC_TOL) -> bool:
    """True when shortest paths along the skeleton reproduce the metric everywhere"""
    return bool(np.all(np.abs(skeleton_distances(space) - space.dist) <= tol))


def ball(space: Space, center: int, radius: float, convention: Convention = Convention.CLOSED) -> Ball:
    center = space.check_point(center)
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius!r}")
    convention = Convention(convention)
    row = space.dist[center]
    mask = row <= radius if convention is Convention.CLOSED else row < radius
    return Ball(center, float(radius), frozenset(np.flatnonzero(mask).tolist()), convention)


def measure_of(space: Space, points: Iterable[int], weight: Optional[np.ndarray] = None) -> float:
    ids = np.fromiter((int(p) for p in points), dtype=int)
    if ids.size == 0:
        return 0.0
    return float(np.sum(space.weighted_masses(weight)[ids]))


def candidate_radii(space: Space, center: int) -> List[float]:
    center = space.check_point(center)
    values = np.unique(space.dist[center])
    return [float(v) for v in values if v > 0]


def _prefix_masses(space: Space, masses: np.ndarray, center: int) -> np.ndarray:
    """cum[k] = mass of the first k points around center (cum[0] = 0)"""
    return np.concatenate(([0.0], np.cumsum(masses[space.order[center]])))


def mass_profile(space: Space, center: int, weight: Optional[np.ndarray] = None,
                 convention: Convention = Convention.CLOSED) -> List[Tuple[float, float]]:
    """Step function r -> measure(B(center, r)) sampled at 0 and every candidate radius"""
    center = space.check_point(center)
    cum = _prefix_masses(space, space.weighted_masses(weight), center)
    row = space.sorted_dist[center]
    radii = np.concatenate(([0.0], np.array(candidate_radii(space, center))))
    side = "right" if Convention(convention) is Convention.CLOSED else "left"
    idx = np.searchsorted(row, radii, side=side)
    return [(float(r), float(cum[k])) for r, k in zip(radii, idx)]


def doubling_constant(space: Space, weight: Optional[np.ndarray] = None,
                      convention: Convention = Convention.CLOSED) -> DoublingResult:
    """
    sup over centers and radii of measure(B(x,2r)) / measure(B(x,r))

    The ratio only changes where B(x,r) or B(x,2r) changes, so r runs over
    0, every distance d from x and every d/2.
    """
    masses = space.weighted_masses(weight)
    side = "right" if Convention(convention) is Convention.CLOSED else "left"
    best, witness = 1.0, (0, 0.0)
    for x in range(space.n):
        row = space.sorted_dist[x]
        cum = _prefix_masses(space, masses, x)
        distinct = np.unique(row)
        radii = np.unique(np.concatenate((distinct, distinct / 2.0)))
        inner = cum[np.searchsorted(row, radii, side=side)]
        outer = cum[np.searchsorted(row, 2.0 * radii, side=side)]
        blowup = (inner <= 0) & (outer > 0)
        if np.any(blowup):
            k = int(np.argmax(blowup))
            logger.debug(f"Doubling unbounded at center {x}, radius {radii[k]!r}")
            return DoublingResult(UNBOUNDED, (x, float(radii[k])))
        valid = inner > 0
        if not np.any(valid):
            continue
        ratios = np.where(valid, outer / np.where(valid, inner, 1.0), 0.0)
        k = int(np.argmax(ratios))
        if ratios[k] > best:
            best, witness = float(ratios[k]), (x, float(radii[k]))
    return DoublingResult(best, witness)


def regularity_fit(space: Space, fit_radius_fraction: float = 0.125) -> RegularityFit:
    """
    Ahlfors constant c_A for the declared Q and a log-log slope Q_fit

    c_A uses closed balls over candidate radii in [r_min, diam]. Q_fit is fitted
    on the radii r <= fit_radius_fraction * diam, where balls are not yet saturated
    by the finite domain; each ball mass is taken at the midpoint of its jump
    (average of the open and closed masses).
    """
    if space.n < 2:
        raise ValueError("regularity_fit needs at least two points")
    r_min, diam = space.min_spacing, space.diam
    c_A, witness = 1.0, (0, r_min)
    radii_all, masses_all = [], []
    for x in range(space.n):
        row = space.sorted_dist[x]
        cum = _prefix_masses(space, space.mu, x)
        radii = np.unique(row)
        radii = radii[(radii >= r_min) & (radii <= diam)]
        closed = cum[np.searchsorted(row, radii, side="right")]
        opened = cum[np.searchsorted(row, radii, side="left")]
        scale = radii ** space.Q
        ratios = np.maximum(closed / scale, scale / closed)
        k = int(np.argmax(ratios))
        if ratios[k] > c_A:
            c_A, witness = float(ratios[k]), (x, float(radii[k]))
        radii_all.append(radii)
        masses_all.append(0.5 * (closed + opened))
    r = np.concatenate(radii_all)
    m = np.concatenate(masses_all)
    keep = r <= fit_radius_fraction * diam
    if np.unique(r[keep]).size < 2:
        keep = np.ones_like(r, dtype=bool)
    if np.unique(r[keep]).size < 2:
        return RegularityFit(c_A, float("nan"), witness, int(keep.sum()))
    slope = float(np.polyfit(np.log(r[keep]), np.log(m[keep]), 1)[0])
    return RegularityFit(c_A, slope, witness, int(keep.sum()))
