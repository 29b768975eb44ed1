"""
Modulus Solver Module
p-modulus of source-to-sink curve families on a space's skeleton graph by
constraint generation, plus the lower-bound check for annuli around a ball
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import cvxpy as cp
from scipy.optimize import linprog
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra

from .metric_space import Space, ball, measure_of
from .utils import (UNBOUNDED, BallTooLargeError, ConfigError, InvalidPathError, SolverError,
                    SpaceValidationError)

logger = logging.getLogger(__name__)

Path = Tuple[int, ...]


@dataclass(frozen=True)
class CurveFamily:
    """All skeleton paths from a point of `source` to a point of `sink`"""
    source: FrozenSet[int]
    sink: FrozenSet[int]
    description: str = "all skeleton paths from source to sink"

    @classmethod
    def between(cls, source: Iterable[int], sink: Iterable[int], description: Optional[str] = None) -> "CurveFamily":
        family = cls(frozenset(int(i) for i in source), frozenset(int(i) for i in sink),
                     description or cls.description)
        if family.source & family.sink:
            raise ConfigError(f"source and sink overlap at {sorted(family.source & family.sink)}")
        return family

    def check(self, space: Space):
        if not self.source or not self.sink:
            raise ConfigError("curve family needs a nonempty source and sink")
        for point in self.source | self.sink:
            space.check_point(point)


@dataclass
class ModulusResult:
    p: float
    value: float
    rho: np.ndarray
    active_paths: List[Path]
    certificate: float
    lower: float
    upper: float
    rounds: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "value": self.value,
            "lower_bound": self.lower,
            "upper_bound": self.upper,
            "certificate": self.certificate,
            "rounds": self.rounds,
            "active_paths": len(self.active_paths),
            "rho": self.rho.tolist(),
        }


@dataclass
class AnnulusCheckResult:
    x0: int
    r: float
    ball_mass: float
    modulus: ModulusResult
    ratio: float
    source_size: int = 0
    sink_size: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {"x0": self.x0, "r": self.r, "ball_mass": self.ball_mass, "mod_1": self.modulus.value,
                "ratio": self.ratio, "source_size": self.source_size, "sink_size": self.sink_size,
                "modulus": {k: v for k, v in self.modulus.to_dict().items() if k != "rho"}}


def _edge_lengths(space: Space) -> np.ndarray:
    if space.skeleton is None:
        raise SpaceValidationError("skeleton", f"space '{space.name}' has no skeleton for curves")
    lengths = np.full((space.n, space.n), np.inf)
    for i, j, length in space.skeleton:
        lengths[i, j] = lengths[j, i] = min(lengths[i, j], length)
    return lengths


def curve_length(space: Space, rho: Sequence[float], path: Sequence[int]) -> float:
    """Trapezoid rule: Σ (ρ_u + ρ_v)/2 · ℓ(u, v) over consecutive skeleton neighbours"""
    lengths = _edge_lengths(space)
    rho = np.asarray(rho, dtype=float)
    total = 0.0
    for u, v in zip(path, path[1:]):
        u, v = space.check_point(u), space.check_point(v)
        if np.isinf(lengths[u, v]):
            raise InvalidPathError(f"points {u} and {v} are not joined by a skeleton edge")
        total += 0.5 * (rho[u] + rho[v]) * lengths[u, v]
    return float(total)


def _path_row(path: Path, lengths: np.ndarray, n: int) -> np.ndarray:
    row = np.zeros(n)
    for u, v in zip(path, path[1:]):
        row[u] += 0.5 * lengths[u, v]
        row[v] += 0.5 * lengths[u, v]
    return row


def _trace(predecessors: np.ndarray, target: int) -> List[int]:
    path = [target]
    while predecessors[path[-1]] >= 0:
        path.append(int(predecessors[path[-1]]))
    return path[::-1]


def _trim(path: List[int], family: CurveFamily) -> Path:
    """Cut to the subpath from its last source point to its first sink point after that"""
    start = max(k for k, v in enumerate(path) if v in family.source)
    path = path[start:]
    end = next(k for k, v in enumerate(path) if v in family.sink)
    return tuple(path[:end + 1])


class _Separation:
    """Shortest ρ-length paths from the source to the sink"""

    def __init__(self, space: Space, family: CurveFamily, lengths: np.ndarray):
        self.family = family
        self.edges = np.isfinite(lengths)
        self.finite_lengths = np.where(self.edges, lengths, 0.0)
        self.sources = np.array(sorted(family.source), dtype=int)
        self.sinks = np.array(sorted(family.sink), dtype=int)

    def run(self, rho: np.ndarray, threshold: float, limit: int) -> Tuple[float, List[Path]]:
        cost = np.where(self.edges, 0.5 * (rho[:, None] + rho[None, :]) * self.finite_lengths, np.inf)
        # zero-cost edges must survive, so inf marks the missing ones
        graph = csgraph_from_dense(cost, null_value=np.inf)
        dist, predecessors, _ = dijkstra(graph, directed=False, indices=self.sources,
                                         min_only=True, return_predecessors=True)
        sink_dist = dist[self.sinks]
        certificate = float(sink_dist.min())
        paths: List[Path] = []
        for k in np.argsort(sink_dist, kind="stable"):
            if sink_dist[k] >= threshold or len(paths) >= limit:
                break
            path = _trim(_trace(predecessors, int(self.sinks[k])), self.family)
            if path not in paths:
                paths.append(path)
        return certificate, paths


def _solve_master(rows: np.ndarray, mu: np.ndarray, p: float) -> Tuple[np.ndarray, float]:
    """min Σ ρ_v^p μ_v subject to rows @ ρ >= 1, ρ >= 0"""
    if p == 1.0:
        res = linprog(mu, A_ub=-rows, b_ub=-np.ones(rows.shape[0]), bounds=(0, None), method="highs")
        if res.status != 0:
            raise SolverError(f"master LP failed: {res.message}")
        return np.maximum(res.x, 0.0), float(res.fun)
    rho = cp.Variable(mu.size, nonneg=True)
    problem = cp.Problem(cp.Minimize(cp.sum(cp.multiply(mu, cp.power(rho, p)))), [rows @ rho >= 1])
    problem.solve()
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverError(f"master convex program ended with status {problem.status}")
    return np.maximum(np.asarray(rho.value, dtype=float), 0.0), float(problem.value)


def p_modulus(space: Space, family: CurveFamily, p: float = 1.0, tol: float = 1e-6,
              max_cuts_per_round: int = 32, iteration_factor: int = 10) -> ModulusResult:
    """
    Tính p-modulus bằng cutting planes

    Args:
        family: Họ đường cong từ source tới sink dọc theo skeleton
        p: Số mũ >= 1 (LP khi p = 1, bài toán lồi khi p > 1)
        tol: Dừng khi mọi đường cong có ρ-length >= 1 - tol

    Returns:
        ModulusResult gồm ρ admissible, khối lượng của nó và khoảng
        [giá trị master, khối lượng / certificate^p]
    """
    if not p >= 1:
        raise ConfigError(f"modulus exponent must be >= 1, got {p!r}")
    if not tol > 0:
        raise ConfigError(f"tolerance must be positive, got {tol!r}")
    family.check(space)
    p = float(p)
    lengths = _edge_lengths(space)
    separation = _Separation(space, family, lengths)
    mu = space.mu

    rho = np.ones(space.n)
    certificate, paths = separation.run(rho, np.inf, max_cuts_per_round)
    if np.isinf(certificate):
        logger.info("Sink unreachable from source: modulus 0")
        return ModulusResult(p, 0.0, np.zeros(space.n), [], UNBOUNDED, 0.0, 0.0, 0)

    active: List[Path] = []
    rows: List[np.ndarray] = []
    lower = 0.0
    cap = iteration_factor * space.n ** 2
    for rounds in range(1, cap + 1):
        fresh = [path for path in paths if path not in active]
        if not fresh:
            # violations left only on active curves come from master-solver precision
            if not certificate > 0:
                raise SolverError("active curve has zero ρ-length", lower, UNBOUNDED)
            logger.warning(f"Rescaling ρ by 1/{certificate:.10g} to reach admissibility")
            rho = rho / certificate
            certificate, _ = separation.run(rho, 0.0, 0)
            return _result(p, rho, mu, active, certificate, lower, rounds - 1)
        active.extend(fresh)
        rows.extend(_path_row(path, lengths, space.n) for path in fresh)
        rho, lower = _solve_master(np.vstack(rows), mu, p)
        certificate, paths = separation.run(rho, 1.0 - tol, max_cuts_per_round)
        logger.debug(f"Round {rounds}: {len(active)} curves, master {lower:.10g}, certificate {certificate:.10g}")
        if certificate >= 1.0 - tol:
            return _result(p, rho, mu, active, certificate, lower, rounds)
    raise SolverError(f"no convergence within {cap} rounds", lower, _upper(rho, mu, p, certificate))


def _result(p: float, rho: np.ndarray, mu: np.ndarray, active: List[Path], certificate: float,
            lower: float, rounds: int) -> ModulusResult:
    value = float(np.sum(rho ** p * mu))
    logger.info(f"mod_{p:g} = {value:.10g} after {rounds} rounds ({len(active)} curves)")
    return ModulusResult(p, value, rho, active, certificate, min(lower, value),
                         _upper(rho, mu, p, certificate), rounds)


def _upper(rho: np.ndarray, mu: np.ndarray, p: float, certificate: float) -> float:
    if not certificate > 0:
        return UNBOUNDED
    return float(np.sum(rho ** p * mu)) / min(certificate, 1.0) ** p


def annulus_family(space: Space, x0: int, r: float) -> CurveFamily:
    """Curves joining B(x0, r) to X \\ B(x0, 2r)"""
    inner = ball(space, x0, r)
    outer = ball(space, x0, 2.0 * r)
    sink = frozenset(range(space.n)) - outer.members
    if not sink:
        raise BallTooLargeError(f"ball too large: B({x0}, {2.0 * r!r}) covers the space")
    return CurveFamily.between(inner.members, sink, f"curves from B({x0}, {r:g}) to the complement of B({x0}, {2 * r:g})")


def annulus_check(space: Space, x0: int, r: float, tol: float = 1e-6, **solver_options) -> AnnulusCheckResult:
    """mod_1 of the annulus family scaled by r / μ(B(x0, r))"""
    if not r > 0:
        raise ConfigError(f"radius must be positive, got {r!r}")
    family = annulus_family(space, x0, r)
    result = p_modulus(space, family, 1.0, tol, **solver_options)
    ball_mass = measure_of(space, family.source)
    ratio = result.value * r / ball_mass
    logger.info(f"Annulus check at x0={x0}, r={r:g}: mod_1 = {result.value:.10g}, ratio {ratio:.6g}")
    return AnnulusCheckResult(int(x0), float(r), ball_mass, result, float(ratio),
                         len(family.source), len(family.sink))
