"""
Space Builder Module
Example spaces and weights: grids, the two-segment space, circle plus line,
power / Jacobian / random weights and the named example registry
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .metric_space import Space, ball, candidate_radii, graph_metric
from .utils import ConfigError, DegenerateImageError, SpaceValidationError

logger = logging.getLogger(__name__)

SpaceWithWeight = Tuple[Space, Optional[np.ndarray]]


def _grid_indices(dim: int, n: int) -> np.ndarray:
    if dim == 1:
        return np.arange(n).reshape(-1, 1)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.column_stack((ii.ravel(), jj.ravel()))


def grid_space(dim: int, n: int, extent: float = 1.0, offset: float = 0.0) -> Space:
    """
    Uniform grid on [offset-extent, offset+extent]^dim with cell masses h^dim

    Distances are computed from integer index offsets so the matrix is exactly symmetric.
    """
    if dim not in (1, 2):
        raise ConfigError(f"grid dimension must be 1 or 2, got {dim}")
    if n < 2:
        raise ConfigError(f"grid needs n >= 2 points per axis, got {n}")
    h = 2.0 * extent / (n - 1)
    idx = _grid_indices(dim, n)
    delta = np.abs(idx[:, None, :] - idx[None, :, :]).astype(float)
    if dim == 1:
        dist = delta[:, :, 0] * h
    else:
        dist = np.hypot(delta[:, :, 0], delta[:, :, 1]) * h
    coords = offset - extent + idx * h
    mu = np.full(idx.shape[0], h ** dim)

    skeleton = []
    for a, b in zip(*np.nonzero(np.triu(np.abs(delta).sum(axis=2) == 1))):
        skeleton.append((int(a), int(b), float(dist[a, b])))

    centre = (n - 1) // 2
    origin = centre if dim == 1 else centre * n + centre
    space = Space(dist, mu, float(dim), skeleton=tuple(skeleton), coords=coords,
                  name=f"grid{dim}d-n{n}",
                  meta={"kind": "grid", "dim": dim, "n": n, "extent": extent, "offset": offset,
                        "spacing": h, "origin": origin})
    logger.debug(f"Built {space.name} with {space.n} points, spacing {h:.6g}")
    return space


def segment_pair_space(n: int) -> SpaceWithWeight:
    """Two unit segments at mutual distance 2, weight 0 on the first and 1 on the second"""
    if n < 2:
        raise ConfigError(f"segment pair needs n >= 2 points per segment, got {n}")
    k = np.arange(n)
    intra = np.abs(k[:, None] - k[None, :]) / n
    dist = np.full((2 * n, 2 * n), 2.0)
    dist[:n, :n] = intra
    dist[n:, n:] = intra
    x2 = (k + 0.5) / n
    coords = np.vstack((np.column_stack((np.ones(n), x2)), np.column_stack((np.full(n, 2.0), x2))))
    mu = np.full(2 * n, 1.0 / n)
    weight = np.concatenate((np.zeros(n), np.ones(n)))
    space = Space(dist, mu, 1.0, coords=coords, name=f"segment-pair-n{n}",
                  meta={"kind": "segment-pair", "n": n, "origin": 0,
                        "segments": [list(range(n)), list(range(n, 2 * n))]})
    return space, weight


def sphere_plane_space(n: int) -> Space:
    """
    Unit circle together with a line through its centre, both with 1-D cell masses

    Line points come first (ids ordered along the line) and meta["origin"] is the
    line point at the centre; the circle sits at distance exactly 1 from it.
    """
    if n < 8:
        raise ConfigError(f"sphere-plane space needs n >= 8, got {n}")
    h = 2.0 * math.pi / n
    K = int(math.floor(2.0 / h))
    line_k = np.arange(-K, K + 1)
    s = line_k * h
    theta = 2.0 * math.pi * (np.arange(n) + 0.25) / n
    m = line_k.size

    dist = np.zeros((m + n, m + n))
    dist[:m, :m] = np.abs(line_k[:, None] - line_k[None, :]) * h
    dk = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    dist[m:, m:] = 2.0 * np.sin(math.pi * dk / n)
    cross = np.sqrt(1.0 + s[:, None] ** 2 - 2.0 * s[:, None] * np.cos(theta)[None, :])
    dist[:m, m:] = cross
    dist[m:, :m] = cross.T

    coords = np.vstack((np.column_stack((s, np.zeros(m))),
                        np.column_stack((np.cos(theta), np.sin(theta)))))
    mu = np.full(m + n, h)
    skeleton = [(i, i + 1, float(dist[i, i + 1])) for i in range(m - 1)]
    skeleton += [(m + i, m + (i + 1) % n, float(dist[m + i, m + (i + 1) % n])) for i in range(n)]
    return Space(dist, mu, 1.0, skeleton=tuple(skeleton), coords=coords, name=f"sphere-plane-n{n}",
                 meta={"kind": "sphere-plane", "n": n, "origin": K, "spacing": h,
                       "line": list(range(m)), "circle": list(range(m, m + n))})


def graph_space(n: int, edges: Sequence[Tuple[int, int, float]], mu: Optional[Sequence[float]] = None,
                Q: float = 1.0, name: str = "graph") -> Space:
    """Connected weighted graph with its shortest-path metric; the edges become the skeleton"""
    dist = graph_metric(n, edges)
    if np.any(np.isinf(dist)):
        raise SpaceValidationError("connectivity", f"graph '{name}' is disconnected")
    mu = np.ones(n) if mu is None else mu
    return Space(dist, mu, Q, skeleton=tuple(edges), name=name, meta={"kind": "graph", "origin": 0})


def power_weight(space: Space, alpha: float, basepoint: Optional[int] = None) -> np.ndarray:
    """ω_i = max(d(basepoint, i), d_min)^alpha, regularized at the basepoint"""
    if basepoint is None:
        basepoint = space.meta.get("origin", 0)
    basepoint = space.check_point(basepoint)
    row = space.dist[basepoint]
    if space.n == 1:
        return np.ones(1)
    d_min = float(np.min(row[np.arange(space.n) != basepoint]))
    return np.maximum(row, d_min) ** alpha


@dataclass(frozen=True)
class RadialStretch:
    """x -> |x|^(beta-1) x, a quasisymmetric self-map of the line or the plane"""
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"radial stretch needs beta > 0, got {self.beta!r}")

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        norms = np.linalg.norm(coords, axis=-1, keepdims=True)
        scale = np.zeros_like(norms)
        positive = norms > 0
        scale[positive] = norms[positive] ** (self.beta - 1.0)
        return coords * scale


CELL_SUBDIVISIONS = 8


def _cell_outline(dim: int, subdivisions: int) -> np.ndarray:
    """Counter-clockwise boundary of the unit cell centred at 0, each side cut into `subdivisions` pieces"""
    if dim == 1:
        return np.array([[-0.5], [0.5]])
    t = np.arange(subdivisions) / subdivisions
    half = np.full_like(t, 0.5)
    return np.concatenate([
        np.column_stack((t - 0.5, -half)),
        np.column_stack((half, t - 0.5)),
        np.column_stack((0.5 - t, half)),
        np.column_stack((-half, 0.5 - t)),
    ])


def _outline_measure(outlines: np.ndarray) -> np.ndarray:
    """Length (1-D) or shoelace area (2-D) enclosed by mapped outlines of shape (..., m, dim)"""
    if outlines.shape[-1] == 1:
        return np.abs(outlines[..., -1, 0] - outlines[..., 0, 0])
    x, y = outlines[..., 0], outlines[..., 1]
    return 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1))


def _grid_cells(space: Space) -> Tuple[float, int]:
    if space.meta.get("kind") != "grid" or space.coords is None:
        raise ConfigError(f"Jacobian weights need a grid space, got '{space.name}'")
    return float(space.meta["spacing"]), int(space.meta["dim"])


def cell_image_measures(space: Space, stretch: RadialStretch,
                        subdivisions: int = CELL_SUBDIVISIONS) -> np.ndarray:
    """μ_Y(f(C_i)) for the grid cell C_i of side h centred at each point"""
    h, dim = _grid_cells(space)
    outline = _cell_outline(dim, subdivisions) * h
    corners = space.coords[:, None, :] + outline[None, :, :]
    image = stretch(corners.reshape(-1, dim)).reshape(corners.shape)
    return _outline_measure(image)


def image_measure(space: Space, stretch: RadialStretch, subdivisions: int = CELL_SUBDIVISIONS) -> float:
    """
    μ_Y(f(X)) for X the union of the grid cells, measured on the image of its outer boundary

    The outer boundary is cut at the same spacing as the cell outlines, so
    the cell images tile this region exactly.
    """
    h, dim = _grid_cells(space)
    n = int(space.meta["n"])
    side = n * h
    outline = _cell_outline(dim, subdivisions * n) * side + float(space.meta.get("offset", 0.0))
    return float(_outline_measure(stretch(outline)))


def jacobian_weight(space: Space, stretch: RadialStretch) -> np.ndarray:
    """
    Discrete Jacobian ω_i = μ_Y(f(B_i)) / μ_X(B_i)

    B_i is the closed ball at the smallest positive candidate radius of x_i;
    f(B_i) is the union of the images of the grid cells of its points.
    """
    cells = cell_image_measures(space, stretch)
    weight = np.empty(space.n)
    for i in range(space.n):
        members = ball(space, i, candidate_radii(space, i)[0]).ids
        image = float(np.sum(cells[members]))
        if not image > 0:
            raise DegenerateImageError(i)
        weight[i] = image / float(np.sum(space.mu[members]))
    return weight


def random_weight(space: Space, seed: int, dynamic_range: float) -> np.ndarray:
    """Log-uniform weights in [1/dynamic_range, dynamic_range], reproducible from the seed"""
    if dynamic_range < 1:
        raise ConfigError(f"dynamic range must be >= 1, got {dynamic_range!r}")
    rng = np.random.default_rng(seed)
    return float(dynamic_range) ** rng.uniform(-1.0, 1.0, space.n)


@dataclass(frozen=True)
class ExampleSpec:
    name: str
    description: str
    default_scale: int
    build: Callable[[int], SpaceWithWeight]
    a1_weight: bool = False


def _power_family(dim: int, alpha: float) -> Callable[[int], SpaceWithWeight]:
    def build(n: int) -> SpaceWithWeight:
        space = grid_space(dim, n)
        return space, power_weight(space, alpha)
    return build


def _random_family(seed: int, dynamic_range: float) -> Callable[[int], SpaceWithWeight]:
    def build(n: int) -> SpaceWithWeight:
        space = grid_space(1, n)
        return space, random_weight(space, seed, dynamic_range)
    return build


def _jacobian_family(n: int) -> SpaceWithWeight:
    space = grid_space(2, n)
    return space, jacobian_weight(space, RadialStretch(2.0))


EXAMPLES: Dict[str, ExampleSpec] = {
    spec.name: spec for spec in [
        ExampleSpec("grid1d", "uniform grid on [-1, 1], unweighted", 101, lambda n: (grid_space(1, n), None)),
        ExampleSpec("grid2d", "uniform grid on [-1, 1]^2, unweighted", 33, lambda n: (grid_space(2, n), None)),
        ExampleSpec("constant-1d", "uniform grid on [-1, 1] with ω = 1", 101,
                    lambda n: (grid_space(1, n), np.ones(n)), a1_weight=True),
        ExampleSpec("segment-pair", "two segments at distance 2, ω = 0 on the first", 32, segment_pair_space),
        ExampleSpec("sphere-plane", "unit circle together with a line through the centre", 64,
                    lambda n: (sphere_plane_space(n), None)),
        ExampleSpec("power-alpha1", "ω = |x| on the 1-D grid", 101, _power_family(1, 1.0)),
        ExampleSpec("a1-1d", "ω = max(|x|, h)^(-1/2) on the 1-D grid", 101, _power_family(1, -0.5), a1_weight=True),
        ExampleSpec("power2d-alpha1", "ω = |x| on the 2-D grid", 17, _power_family(2, 1.0)),
        ExampleSpec("power2d-alpha2", "ω = |x|^2 on the 2-D grid", 17, _power_family(2, 2.0)),
        ExampleSpec("jacobian-2d", "Jacobian of x -> |x| x on the 2-D grid", 17, _jacobian_family),
        ExampleSpec("random-1d", "log-uniform random weight (range 10, seed 0) on the 1-D grid", 101,
                    _random_family(0, 10.0)),
    ]
}


def list_examples() -> List[str]:
    return sorted(EXAMPLES)


def build_example(name: str, scale: Optional[int] = None) -> SpaceWithWeight:
    """
    Tạo example theo tên

    Args:
        name: Tên trong registry, xem list_examples()
        scale: Số điểm mỗi trục (mỗi đoạn với segment-pair, số điểm trên đường tròn với sphere-plane)

    Returns:
        (space, weight hoặc None)
    """
    if name not in EXAMPLES:
        raise ConfigError(f"unknown example '{name}' (known: {', '.join(list_examples())})")
    spec = EXAMPLES[name]
    space, weight = spec.build(scale or spec.default_scale)
    logger.info(f"Built example '{name}' -> {space.name}")
    return space, weight
