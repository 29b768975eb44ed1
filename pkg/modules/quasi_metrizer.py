"""
Quasi Metrizer Module
Quasi-distance δ_ν, its chain metrization, distortion certificates and
strong-A_∞ stability verdicts across refinements
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra, floyd_warshall

from .metric_space import Space, doubling_constant, validate_weight
from .utils import UNBOUNDED, ConfigError, NotApWeightError, NotDoublingError, ProgressTracker, within_factor
from .weight_classifier import DEFAULT_P_GRID, a1_constant, ap_constant, cond2_curve

logger = logging.getLogger(__name__)

STABLE = "STABLE"
UNSTABLE = "UNSTABLE"
NOT_STRONG = "NOT-STRONG"


@dataclass
class Metrization:
    delta_nu: np.ndarray
    delta: np.ndarray
    distortion: float
    witness: Optional[Tuple[int, int]]
    restricted: bool = False

    def summary(self) -> Dict[str, Any]:
        return {"distortion": self.distortion,
                "witness": list(self.witness) if self.witness is not None else None,
                "restricted": self.restricted}


@dataclass
class ComparisonResult:
    constant: float
    witness: Optional[Tuple[int, int]]
    left_inequality_holds: bool
    doubling: float


@dataclass
class ScaleResult:
    name: str
    n: int
    distortion: float
    witness: Optional[Tuple[int, int]]
    restricted_distortion: Optional[float]
    cond2: List[Tuple[float, float]]
    ap: Optional[float]
    ap_error: Optional[str] = None
    a1: Optional[float] = None


@dataclass
class StabilityReport:
    verdict: str
    stability_factor: float
    ap_exponent: float
    ap_stable: Optional[bool]
    a1_stable: Optional[bool] = None
    scales: List[ScaleResult] = field(default_factory=list)
    note: str = ("on finite spaces every positive weight has finite distortion; "
                 "'strong' is read as stability of the distortion under refinement")

    @property
    def distortions(self) -> List[float]:
        return [s.distortion for s in self.scales]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "stability_factor": self.stability_factor,
            "ap_exponent": self.ap_exponent,
            "ap_stable": self.ap_stable,
            "a1_stable": self.a1_stable,
            "note": self.note,
            "scales": [
                {"space": s.name, "n": s.n, "distortion": s.distortion,
                 "witness": list(s.witness) if s.witness is not None else None,
                 "restricted_distortion": s.restricted_distortion,
                 "cond2_curve": [[p, c] for p, c in s.cond2],
                 "ap": s.ap, "ap_error": s.ap_error, "a1": s.a1}
                for s in self.scales
            ],
        }


def open_ball_masses(space: Space, weight: Optional[np.ndarray]) -> np.ndarray:
    """S[x, y] = ν(B(x, d(x, y))) with the open ball"""
    w = validate_weight(space, weight)
    masses = space.weighted_masses(w)
    S = np.empty((space.n, space.n))
    for x in range(space.n):
        cum = np.concatenate(([0.0], np.cumsum(masses[space.order[x]])))
        S[x] = cum[np.searchsorted(space.sorted_dist[x], space.dist[x], side="left")]
    return S


def quasi_distance(space: Space, weight: Optional[np.ndarray]) -> np.ndarray:
    """δ_ν(x, y) = [ν(B(x, d)) + ν(B(y, d))]^(1/Q), open balls, d = d(x, y)"""
    S = open_ball_masses(space, weight)
    delta_nu = (S + S.T) ** (1.0 / space.Q)
    np.fill_diagonal(delta_nu, 0.0)
    return delta_nu


def _shortest_paths(delta_nu: np.ndarray) -> np.ndarray:
    # zero-weight edges must survive, so inf marks the missing ones
    graph = csgraph_from_dense(delta_nu, null_value=np.inf)
    return floyd_warshall(graph, directed=False)


def _restricted_paths(delta_nu: np.ndarray, space: Space, unrestricted: np.ndarray) -> np.ndarray:
    """Chains from x to y with every point in the closed ball B(x, 2 d(x, y))"""
    n = space.n
    out = np.empty((n, n))
    for x in range(n):
        row = space.dist[x]
        reach = row.max()
        for d in np.unique(row):
            targets = np.flatnonzero(row == d)
            if 2.0 * d >= reach:
                out[x, targets] = unrestricted[x, targets]
                continue
            members = np.flatnonzero(row <= 2.0 * d)
            local = np.searchsorted(members, x)
            sub = csgraph_from_dense(delta_nu[np.ix_(members, members)], null_value=np.inf)
            lengths = dijkstra(sub, directed=False, indices=local)
            out[x, targets] = lengths[np.searchsorted(members, targets)]
    return np.minimum(out, out.T)


def _distortion(delta_nu: np.ndarray, delta: np.ndarray) -> Tuple[float, Optional[Tuple[int, int]]]:
    n = delta.shape[0]
    off = ~np.eye(n, dtype=bool)
    degenerate = off & (delta <= 0)
    if np.any(degenerate):
        i, j = np.argwhere(degenerate)[0]
        return UNBOUNDED, (int(i), int(j))
    if n < 2:
        return 1.0, None
    ratio = np.where(off, delta_nu / np.where(off, delta, 1.0), 0.0)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return float(max(ratio[i, j], 1.0)), (int(i), int(j))


def chain_metrization(delta_nu: np.ndarray, space: Space, restricted: bool = False) -> Metrization:
    """
    Largest metric below δ_ν: shortest chains on the complete graph

    Distortion is max δ_ν/δ over distinct pairs. It is UNBOUNDED when δ
    vanishes on some pair of distinct points, with the first such pair
    (lexicographic) as witness.
    """
    delta_nu = np.asarray(delta_nu, dtype=float)
    if delta_nu.shape != (space.n, space.n):
        raise ConfigError(f"δ_ν has shape {delta_nu.shape}, space has {space.n} points")
    delta = _shortest_paths(delta_nu)
    if restricted:
        delta = _restricted_paths(delta_nu, space, delta)
    distortion, witness = _distortion(delta_nu, delta)
    logger.debug(f"Metrized {space.name}: distortion {distortion!r} (restricted={restricted})")
    return Metrization(delta_nu, delta, distortion, witness, restricted)


def metrize(space: Space, weight: Optional[np.ndarray], restricted: bool = False) -> Metrization:
    return chain_metrization(quasi_distance(space, weight), space, restricted)


def comparison_check(space: Space, weight: Optional[np.ndarray]) -> ComparisonResult:
    """Smallest C with δ_ν(x, y) <= C ν(B(x, d(x, y)))^(1/Q) over pairs with ν(B) > 0"""
    doubling = doubling_constant(space, weight)
    if not doubling.bounded:
        raise NotDoublingError(doubling.witness)
    S = open_ball_masses(space, weight)
    delta_nu = quasi_distance(space, weight)
    lower = S ** (1.0 / space.Q)
    off = ~np.eye(space.n, dtype=bool)
    left_ok = bool(np.all(lower[off] <= delta_nu[off]))
    valid = off & (S > 0)
    if not np.any(valid):
        return ComparisonResult(1.0, None, left_ok, doubling.value)
    ratio = np.where(valid, delta_nu / np.where(valid, lower, 1.0), 0.0)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return ComparisonResult(float(ratio[i, j]), (int(i), int(j)), left_ok, doubling.value)


def sa_verdict(family: Sequence[Tuple[Space, Optional[np.ndarray]]], stability_factor: float = 2.0,
               ap_exponent: float = 4.0, p_grid: Sequence[float] = DEFAULT_P_GRID,
               restricted: bool = False, check_a1: bool = False) -> StabilityReport:
    """
    Strong-A_∞ verdict over a refinement family

    STABLE when consecutive distortions differ by at most `stability_factor`,
    NOT-STRONG when any scale has unbounded distortion, UNSTABLE otherwise.
    The A_1 constant is recorded at every scale; with `check_a1` it must also
    stay finite and within `stability_factor` across scales.
    """
    if len(family) < 2:
        raise ConfigError("stability verdict needs at least two scales")
    tracker = ProgressTracker(len(family), label="sa_verdict")
    scales: List[ScaleResult] = []
    for space, weight in family:
        result = metrize(space, weight)
        restricted_distortion = metrize(space, weight, restricted=True).distortion if restricted else None
        cond2 = [(c.parameter, c.value) for c in cond2_curve(space, weight, p_grid)]
        ap, ap_error = None, None
        try:
            ap = ap_constant(space, weight, ap_exponent).value
        except NotApWeightError as e:
            ap_error = str(e)
        a1 = a1_constant(space, weight).value
        scales.append(ScaleResult(space.name, space.n, result.distortion, result.witness,
                                  restricted_distortion, cond2, ap, ap_error, a1))
        tracker.update(message=f"{space.name}: distortion {result.distortion:.6g}")
    tracker.complete("Stability verdict")

    distortions = [s.distortion for s in scales]
    if any(math.isinf(d) for d in distortions):
        verdict = NOT_STRONG
    elif within_factor(distortions, stability_factor):
        verdict = STABLE
    else:
        verdict = UNSTABLE
    ap_values = [s.ap for s in scales]
    ap_stable = None if any(a is None for a in ap_values) else within_factor(ap_values, stability_factor)
    a1_stable = within_factor([s.a1 for s in scales], stability_factor) if check_a1 else None
    logger.info(f"Strong A_inf verdict: {verdict} (distortions {distortions})")
    return StabilityReport(verdict, stability_factor, ap_exponent, ap_stable, a1_stable, scales)
