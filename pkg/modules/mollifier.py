"""
Mollifier Module
Separated nets, partitions of unity and the mollified measures ν_t = ω_t μ,
with weak-convergence, uniform reverse Hölder and Gehring probes
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .metric_space import Space, ball, doubling_constant, validate_weight
from .utils import UNBOUNDED, ProgressTracker, is_unbounded

logger = logging.getLogger(__name__)

BallSpec = Tuple[int, float]


@dataclass(frozen=True)
class Net:
    t: float
    centers: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.centers)


@dataclass
class MollifiedWeight:
    t: float
    net: Net
    a: np.ndarray
    omega_t: np.ndarray
    phi: sparse.csr_matrix
    overlap: int
    sandwich_constant: float
    sandwich_ratio: float
    sandwich_holds: bool
    comparability: float
    local_comparability: float

    def summary(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "centers": self.net.size,
            "overlap": self.overlap,
            "sandwich_constant": self.sandwich_constant,
            "sandwich_ratio": self.sandwich_ratio,
            "sandwich_holds": self.sandwich_holds,
            "comparability": self.comparability,
            "local_comparability": self.local_comparability,
        }


@dataclass
class PowerMeanResult:
    t: float
    constant: float
    witness: Optional[BallSpec]


@dataclass
class UniformRHIReport:
    constants: List[PowerMeanResult]
    spread: float
    uniform: bool
    factor: float
    informative: bool = True
    note: Optional[str] = None

    @property
    def max_constant(self) -> float:
        return max(c.constant for c in self.constants)


@dataclass
class GehringResult:
    eps_star: float
    constant: float
    base: float
    qualified: bool
    curve: List[Tuple[float, float]] = field(default_factory=list)
    witnesses: Dict[float, Optional[BallSpec]] = field(default_factory=dict)


def _weight_or_ones(space: Space, weight: Optional[np.ndarray]) -> np.ndarray:
    w = validate_weight(space, weight)
    return np.ones(space.n) if w is None else w


def default_t_grid(space: Space) -> List[float]:
    """Geometric with ratio 2 from diam/4 down to twice the minimal spacing"""
    t, floor = space.diam / 4.0, 2.0 * space.min_spacing
    grid = []
    while t >= floor and t > 0:
        grid.append(t)
        t /= 2.0
    return grid or [space.diam / 4.0]


def separated_net(space: Space, t: float) -> Net:
    """Greedy maximal set with pairwise distances > 2t/5, in ascending point id"""
    if not t > 0:
        raise ValueError(f"net scale must be positive, got {t!r}")
    separation = 2.0 * t / 5.0
    nearest = np.full(space.n, np.inf)
    centers = []
    for i in range(space.n):
        if nearest[i] > separation:
            centers.append(i)
            nearest = np.minimum(nearest, space.dist[i])
    return Net(float(t), tuple(centers))


def net_overlap(space: Space, net: Net) -> int:
    """max over points of the number of doubled balls 2B_i containing it"""
    return int(np.max(np.sum(space.dist[:, list(net.centers)] <= 2.0 * net.t, axis=1)))


def partition(space: Space, net: Net) -> sparse.csr_matrix:
    """
    φ_i(x) = φ̃_i(x) / Σ_j φ̃_j(x) with φ̃_i = 1 on B_i, 1 - dist(x, B_i)/t on 2B_i
    and 0 outside, where dist(x, B_i) = max(0, d(x, x_i) - t)
    """
    t = net.t
    d = space.dist[:, list(net.centers)]
    raw = np.clip(1.0 - np.maximum(d - t, 0.0) / t, 0.0, 1.0)
    totals = raw.sum(axis=1, keepdims=True)
    assert np.all(totals >= 1.0), "net does not cover the space"
    return sparse.csr_matrix(raw / totals)


def _comparability(values: np.ndarray, reference: np.ndarray, mask: np.ndarray) -> float:
    """max over masked pairs of max(v/r, r/v); pairs with both zero are skipped"""
    v = np.broadcast_to(values, mask.shape)
    r = np.broadcast_to(reference, mask.shape)
    both_zero = (v <= 0) & (r <= 0)
    one_zero = mask & ~both_zero & ((v <= 0) | (r <= 0))
    if np.any(one_zero):
        return UNBOUNDED
    valid = mask & ~both_zero
    if not np.any(valid):
        return 1.0
    safe_v = np.where(valid, v, 1.0)
    safe_r = np.where(valid, r, 1.0)
    return float(np.max(np.where(valid, np.maximum(safe_v / safe_r, safe_r / safe_v), 1.0)))


def mollify(space: Space, weight: Optional[np.ndarray], t: float, net: Optional[Net] = None) -> MollifiedWeight:
    """
    Làm mượt weight ở thang t

    Args:
        weight: ω (None nghĩa là ω = 1)
        t: Thang của net và của partition of unity
        net: Net dựng sẵn ở thang t (tùy chọn)

    Returns:
        MollifiedWeight gồm a_i, ω_t = Σ a_i φ_i và các hằng số đo được
    """
    w = _weight_or_ones(space, weight)
    net = net or separated_net(space, t)
    phi = partition(space, net)
    nu = w * space.mu
    a = (phi.T @ nu) / (phi.T @ space.mu)
    omega_t = phi @ a

    overlap = net_overlap(space, net)
    c_mu = doubling_constant(space).value
    c_nu = doubling_constant(space, w).value
    sandwich_constant = overlap * max(c_mu, c_nu)
    centers = list(net.centers)
    inner = (space.dist[centers] <= t).astype(float)
    ratio_i = (inner @ nu) / (inner @ space.mu)
    sandwich_ratio = _comparability(a, ratio_i, np.ones(len(centers), dtype=bool))
    sandwich_holds = is_unbounded(sandwich_constant) or sandwich_ratio <= sandwich_constant * (1 + 1e-12)

    near = space.dist <= 2.0 * t
    balls_t = (space.dist <= t).astype(float)
    local_ratio = (balls_t @ nu) / (balls_t @ space.mu)
    comparability = _comparability(omega_t[None, :], local_ratio[:, None], near)
    local_comparability = _comparability(omega_t[None, :], omega_t[:, None], near)

    logger.debug(f"Mollified at t={t:.6g}: {net.size} centers, overlap {overlap}")
    return MollifiedWeight(float(t), net, a, omega_t, phi, overlap, sandwich_constant, sandwich_ratio,
                           bool(sandwich_holds), comparability, local_comparability)


def default_test_set(space: Space, fraction: float = 0.25) -> np.ndarray:
    """Open ball around the origin of radius fraction*diam"""
    origin = space.meta.get("origin", 0)
    return np.flatnonzero(space.dist[origin] < fraction * space.diam)


def inner_set(space: Space, region: np.ndarray, margin: float) -> np.ndarray:
    """U_margin = {x in U : dist(x, X \\ U) > margin}"""
    inside = np.zeros(space.n, dtype=bool)
    inside[region] = True
    if np.all(inside):
        return np.asarray(region)
    to_complement = space.dist[np.ix_(region, np.flatnonzero(~inside))].min(axis=1)
    return np.asarray(region)[to_complement > margin]


def weak_convergence_probe(space: Space, weight: Optional[np.ndarray], t_list: Sequence[float],
                           test_sets: Optional[Dict[str, Sequence[int]]] = None,
                           floor: float = 1e-12) -> List[Dict[str, Any]]:
    """Relative errors |ν_t(U) - ν(U)| / ν(U) and the inner bound ν_t(U) >= ν(U_4t)"""
    w = _weight_or_ones(space, weight)
    if test_sets is None:
        test_sets = {"default": default_test_set(space)}
    nu = w * space.mu
    rows = []
    tracker = ProgressTracker(len(t_list), label="weak convergence")
    for t in t_list:
        mollified = mollify(space, w, t)
        nu_t = mollified.omega_t * space.mu
        for name, region in test_sets.items():
            region = np.asarray(sorted(int(i) for i in region), dtype=int)
            target = float(np.sum(nu[region]))
            approx = float(np.sum(nu_t[region]))
            inner = float(np.sum(nu[inner_set(space, region, 4.0 * t)]))
            rows.append({
                "t": float(t), "set": name, "nu": target, "nu_t": approx,
                "relative_error": abs(approx - target) / max(target, floor),
                "inner_mass": inner, "inner_bound_holds": approx >= inner - 1e-12,
            })
        tracker.update(message=f"t={t:.6g}")
    return rows


def errors_nonincreasing(errors: Sequence[float], allowance: float = 0.1, max_inversions: int = 1) -> bool:
    """Errors ordered by decreasing t; allow a few small increases from discreteness"""
    inversions = 0
    for prev, cur in zip(errors, errors[1:]):
        if cur > prev:
            inversions += 1
            if cur > prev * (1.0 + allowance) or inversions > max_inversions:
                return False
    return True


def power_mean_ratio(space: Space, f: np.ndarray, power: float,
                     ball_sample: Optional[Sequence[BallSpec]] = None) -> Tuple[float, Optional[BallSpec]]:
    """sup over balls of (avg f^power)^(1/power) / avg f, with 0/0 counted as 1"""
    f = np.asarray(f, dtype=float)
    fp = f ** power
    best, witness = 1.0, None
    if ball_sample is not None:
        for center, radius in ball_sample:
            ids = ball(space, center, radius).ids
            m = np.sum(space.mu[ids])
            avg = np.sum(f[ids] * space.mu[ids]) / m
            if avg <= 0:
                continue
            value = (np.sum(fp[ids] * space.mu[ids]) / m) ** (1.0 / power) / avg
            if value > best:
                best, witness = float(value), (int(center), float(radius))
        return best, witness
    for x in range(space.n):
        radii, sizes = space.closed_prefixes(x)
        o = space.order[x]
        m = np.cumsum(space.mu[o])[sizes - 1]
        avg = np.cumsum((f * space.mu)[o])[sizes - 1] / m
        avg_p = np.cumsum((fp * space.mu)[o])[sizes - 1] / m
        ratio = np.where(avg > 0, avg_p ** (1.0 / power) / np.where(avg > 0, avg, 1.0), 1.0)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, witness = float(ratio[k]), (x, float(radii[k]))
    return best, witness


def uniform_rhi_probe(space: Space, weight: Optional[np.ndarray], t_list: Sequence[float],
                      ball_sample: Optional[Sequence[BallSpec]] = None,
                      factor: float = 4.0) -> UniformRHIReport:
    """(avg ω_t)^(1/Q) <= C avg ω_t^(1/Q) for each t; uniform when max/min over t <= factor"""
    w = _weight_or_ones(space, weight)
    constants = []
    for t in t_list:
        f = mollify(space, w, t).omega_t ** (1.0 / space.Q)
        value, witness = power_mean_ratio(space, f, space.Q, ball_sample)
        constants.append(PowerMeanResult(float(t), value, witness))
    values = [c.constant for c in constants]
    spread = max(values) / min(values)
    uniform = spread <= factor
    if not uniform:
        logger.warning(f"Reverse Hölder constants of ω_t vary by {spread:.3g} across t on {space.name}")
    if space.Q == 1.0:
        # f^Q = f, so the ratio is 1 for every ball and every weight
        note = "Q = 1: the reverse Hölder ratio is identically 1 and carries no information"
        logger.info(f"Uniform reverse Hölder check is trivial on {space.name} (Q = 1)")
        return UniformRHIReport(constants, spread, uniform, factor, False, note)
    return UniformRHIReport(constants, spread, uniform, factor)


def gehring_probe(space: Space, mollified: MollifiedWeight, eps_grid: Sequence[float],
                  factor: float = 10.0) -> GehringResult:
    """
    Largest ε in the grid whose improved constant sup (avg f^(Q+ε))^(1/(Q+ε)) / avg f
    stays within `factor` times the base constant, f = ω_t^(1/Q)
    """
    f = mollified.omega_t ** (1.0 / space.Q)
    base, _ = power_mean_ratio(space, f, space.Q)
    curve, witnesses = [], {}
    for eps in sorted(float(e) for e in eps_grid):
        value, witness = power_mean_ratio(space, f, space.Q + eps)
        curve.append((eps, value))
        witnesses[eps] = witness
    qualified = [(eps, value) for eps, value in curve if value <= factor * base]
    if qualified:
        eps_star, constant = qualified[-1]
        return GehringResult(eps_star, constant, base, True, curve, witnesses)
    logger.warning(f"No ε in the grid improves the reverse Hölder exponent at t={mollified.t:.6g}")
    eps_star, constant = curve[0]
    return GehringResult(eps_star, constant, base, False, curve, witnesses)
