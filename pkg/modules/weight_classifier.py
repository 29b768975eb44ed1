"""
Weight Classifier Module
Muckenhoupt-type constants of a weight on a finite metric measure space:
A_1 / A_p constants, superlevel and sublevel sweeps, the curves of
conditions (1), (2), (4), reverse Hölder constants and the implication table
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .metric_space import Ball, DoublingResult, Space, ball, doubling_constant, validate_weight
from .utils import UNBOUNDED, ConfigError, NotApWeightError, SpaceValidationError, is_unbounded

logger = logging.getLogger(__name__)

DEFAULT_P_GRID = (1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0)
DEFAULT_EPS_GRID = (0.05, 0.1, 0.2, 0.4)
DEFAULT_AP_GRID = (1.5, 2.0, 3.0, 4.0, 8.0)

ZERO_SET_MESSAGE = "not in any A_p: ω vanishes on a set of positive measure"

Witness = Tuple[int, float, Optional[float]]


@dataclass(frozen=True)
class SweepCurve:
    """Breakpoints (u, v) of a level-set sweep; E_k = {ω >= levels[k]} (or <= for sublevel sweeps)"""
    ball: Ball
    breakpoints: List[Tuple[float, float]]
    levels: List[float]
    descending: bool = True


@dataclass(frozen=True)
class ConstantResult:
    """One point of a constant curve together with the ball (and level) attaining it"""
    parameter: float
    value: float
    witness: Optional[Witness]

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"parameter": self.parameter, "value": self.value}
        if self.witness is not None:
            center, radius, level = self.witness
            out["witness"] = {"center": center, "radius": radius}
            if level is not None:
                out["witness"]["level"] = level
        return out


@dataclass(frozen=True)
class Implication:
    name: str
    premise: bool
    conclusion: bool
    holds: bool
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"implication": self.name, "premise": self.premise, "conclusion": self.conclusion,
                "holds": self.holds, "detail": self.detail}


@dataclass
class ClassReport:
    a1_constant: ConstantResult
    ap_curve: List[ConstantResult]
    ap_error: Optional[str]
    cond1_curve: List[ConstantResult]
    cond2_curve: List[ConstantResult]
    cond4_curve: List[ConstantResult]
    rhi_curve: List[ConstantResult]
    nu_doubling: DoublingResult
    verdicts: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    implications: List[Implication] = field(default_factory=list)
    witness_replay: Dict[str, Any] = field(default_factory=dict)

    @property
    def violations(self) -> List[Implication]:
        return [row for row in self.implications if not row.holds]

    def curves(self) -> Dict[str, List[Tuple[float, float]]]:
        named = {"ap": self.ap_curve, "cond1": self.cond1_curve, "cond2": self.cond2_curve,
                 "cond4": self.cond4_curve, "rhi": self.rhi_curve}
        return {name: [(c.parameter, c.value) for c in curve] for name, curve in named.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a1_constant": self.a1_constant.to_dict(),
            "ap_curve": [c.to_dict() for c in self.ap_curve],
            "ap_error": self.ap_error,
            "cond1_curve": [c.to_dict() for c in self.cond1_curve],
            "cond2_curve": [c.to_dict() for c in self.cond2_curve],
            "cond4_curve": [c.to_dict() for c in self.cond4_curve],
            "rhi_curve": [c.to_dict() for c in self.rhi_curve],
            "nu_doubling": {"value": self.nu_doubling.value,
                            "witness": {"center": self.nu_doubling.witness[0],
                                        "radius": self.nu_doubling.witness[1]}},
            "ainf_exponent": ainf_exponent(self.cond2_curve),
            "verdicts": self.verdicts,
            "implications": [row.to_dict() for row in self.implications],
            "violations": len(self.violations),
            "witness_replay": self.witness_replay,
        }


def _weight_or_ones(space: Space, weight: Optional[np.ndarray]) -> np.ndarray:
    w = validate_weight(space, weight)
    return np.ones(space.n) if w is None else w


# ---------------------------------------------------------------- sweeps

def _level_sweep(space: Space, weight: np.ndarray, members: np.ndarray, descending: bool):
    w = weight[members]
    order = np.argsort(-w if descending else w, kind="stable")
    sorted_w = w[order]
    ends = np.append(np.flatnonzero(np.diff(sorted_w) != 0), sorted_w.size - 1)
    mu_cum = np.cumsum(space.mu[members][order])[ends]
    nu_cum = np.cumsum((w * space.mu[members])[order])[ends]
    u = mu_cum / mu_cum[-1]
    v = nu_cum / nu_cum[-1] if nu_cum[-1] > 0 else np.zeros_like(nu_cum)
    return u, v, sorted_w[ends]


def superlevel_sweep(space: Space, weight: Optional[np.ndarray], region: Ball) -> SweepCurve:
    if not region.members:
        raise ValueError("superlevel sweep needs a nonempty ball")
    u, v, levels = _level_sweep(space, _weight_or_ones(space, weight), region.ids, descending=True)
    return SweepCurve(region, list(zip(u.tolist(), v.tolist())), levels.tolist(), True)


def sublevel_sweep(space: Space, weight: Optional[np.ndarray], region: Ball) -> SweepCurve:
    if not region.members:
        raise ValueError("sublevel sweep needs a nonempty ball")
    u, v, levels = _level_sweep(space, _weight_or_ones(space, weight), region.ids, descending=False)
    return SweepCurve(region, list(zip(u.tolist(), v.tolist())), levels.tolist(), False)


def envelope_at(curve: SweepCurve, eps: float) -> float:
    """Piecewise-linear envelope through the origin and the breakpoints, evaluated at u = eps"""
    u = [0.0] + [b[0] for b in curve.breakpoints]
    v = [0.0] + [b[1] for b in curve.breakpoints]
    return float(np.interp(eps, u, v))


class _SweepTables:
    """
    All balls around one center at once

    Row k is the closed ball of radius radii[k]; column g is the level set
    ending at tie group g of the global ω ordering. Points outside the ball
    contribute nothing, so a row's columns run through its sweep breakpoints
    (with repeats).
    """

    def __init__(self, space: Space, weight: np.ndarray, descending: bool):
        self.space = space
        self.weight = weight
        self.nu = weight * space.mu
        self.rank = np.argsort(-weight if descending else weight, kind="stable")
        sorted_w = weight[self.rank]
        self.ends = np.append(np.flatnonzero(np.diff(sorted_w) != 0), space.n - 1)
        self.levels = sorted_w[self.ends]
        self._mu_ranked = space.mu[self.rank]
        self._nu_ranked = self.nu[self.rank]

    def center(self, x: int):
        pos = np.empty(self.space.n, dtype=int)
        pos[self.space.order[x]] = np.arange(self.space.n)
        radii, sizes = self.space.closed_prefixes(x)
        member = pos[self.rank][None, :] < sizes[:, None]
        mu_cum = np.cumsum(member * self._mu_ranked, axis=1)[:, self.ends]
        nu_cum = np.cumsum(member * self._nu_ranked, axis=1)[:, self.ends]
        mu_b = mu_cum[:, -1:]
        nu_b = nu_cum[:, -1:]
        u = mu_cum / mu_b
        positive = nu_b[:, 0] > 0
        v = np.where(nu_b > 0, nu_cum / np.where(nu_b > 0, nu_b, 1.0), 0.0)
        return radii, u, v, positive


def _superlevel_pass(space: Space, weight: np.ndarray, p_grid: Sequence[float],
                     eps_grid: Sequence[float]) -> Tuple[List[ConstantResult], List[ConstantResult]]:
    tables = _SweepTables(space, weight, descending=True)
    best2 = [(-1.0, None)] * len(p_grid)
    best1 = [(-1.0, None)] * len(eps_grid)
    for x in range(space.n):
        radii, u, v, positive = tables.center(x)
        safe_u = np.where(u > 0, u, 1.0)
        for i, p in enumerate(p_grid):
            ratio = np.where(u > 0, v / safe_u ** (1.0 / p), 0.0)
            k, g = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
            if ratio[k, g] > best2[i][0]:
                best2[i] = (float(ratio[k, g]), (x, float(radii[k]), float(tables.levels[g])))
        if not np.any(positive):
            continue
        rows = np.flatnonzero(positive)
        ur, vr = u[rows], v[rows]
        for i, eps in enumerate(eps_grid):
            count = np.sum(ur <= eps, axis=1)
            idx = np.arange(rows.size)
            left = count - 1
            u_l = np.where(left >= 0, ur[idx, np.maximum(left, 0)], 0.0)
            v_l = np.where(left >= 0, vr[idx, np.maximum(left, 0)], 0.0)
            u_r = ur[idx, count]
            v_r = vr[idx, count]
            value = v_l + (v_r - v_l) * (eps - u_l) / (u_r - u_l)
            k = int(np.argmax(value))
            if value[k] > best1[i][0]:
                best1[i] = (float(value[k]), (x, float(radii[rows[k]]), None))
    cond2 = [ConstantResult(float(p), b[0], b[1]) for p, b in zip(p_grid, best2)]
    cond1 = [ConstantResult(float(eps), 1.0 - max(b[0], 0.0), b[1]) for eps, b in zip(eps_grid, best1)]
    return cond2, cond1


def _sublevel_pass(space: Space, weight: np.ndarray, p_grid: Sequence[float]) -> List[ConstantResult]:
    tables = _SweepTables(space, weight, descending=False)
    best = [(math.inf, None)] * len(p_grid)
    for x in range(space.n):
        radii, u, v, _ = tables.center(x)
        safe_u = np.where(u > 0, u, 1.0)
        for i, p in enumerate(p_grid):
            ratio = np.where(u > 0, v / safe_u ** p, math.inf)
            k, g = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
            if ratio[k, g] < best[i][0]:
                best[i] = (float(ratio[k, g]), (x, float(radii[k]), float(tables.levels[g])))
    return [ConstantResult(float(p), b[0], b[1]) for p, b in zip(p_grid, best)]


def _check_grid(values: Sequence[float], name: str, low: float, low_inclusive: bool = True,
                high: Optional[float] = None) -> List[float]:
    out = [float(v) for v in values]
    for v in out:
        if (v < low) if low_inclusive else (v <= low):
            raise ConfigError(f"{name} value {v!r} is out of range")
        if high is not None and v >= high:
            raise ConfigError(f"{name} value {v!r} is out of range")
    return out


def cond2_curve(space: Space, weight: Optional[np.ndarray],
                p_grid: Sequence[float] = DEFAULT_P_GRID) -> List[ConstantResult]:
    """c(p) = max over balls and superlevel sets of (ν(E)/ν(B)) / (μ(E)/μ(B))^(1/p)"""
    p_grid = _check_grid(p_grid, "p", 1.0)
    return _superlevel_pass(space, _weight_or_ones(space, weight), p_grid, [])[0]


def cond1_curve(space: Space, weight: Optional[np.ndarray],
                eps_grid: Sequence[float] = DEFAULT_EPS_GRID) -> List[ConstantResult]:
    """δ(ε) = 1 - max ν(E)/ν(B) over balls with ν(B) > 0 and sets with μ(E) <= ε μ(B)"""
    eps_grid = _check_grid(eps_grid, "ε", 0.0, low_inclusive=False, high=1.0)
    return _superlevel_pass(space, _weight_or_ones(space, weight), [], eps_grid)[1]


def cond4_curve(space: Space, weight: Optional[np.ndarray],
                p_grid: Sequence[float] = DEFAULT_P_GRID) -> List[ConstantResult]:
    """c(p) = min over balls and sublevel sets of (ν(E)/ν(B)) / (μ(E)/μ(B))^p"""
    p_grid = _check_grid(p_grid, "p", 1.0)
    return _sublevel_pass(space, _weight_or_ones(space, weight), p_grid)


# ------------------------------------------------------- ball-average constants

def _ball_averages(space: Space, values: Sequence[np.ndarray], x: int):
    """Prefix sums of values*mu over every closed ball around x, divided by mu(B)"""
    radii, sizes = space.closed_prefixes(x)
    o = space.order[x]
    mu_b = np.cumsum(space.mu[o])[sizes - 1]
    averages = [np.cumsum((np.asarray(val) * space.mu)[o])[sizes - 1] / mu_b for val in values]
    return radii, sizes, averages


def ap_constant(space: Space, weight: Optional[np.ndarray], p: float) -> ConstantResult:
    """sup over balls of (avg ω)(avg ω^(1-q))^(p-1), q = p/(p-1)"""
    if not p > 1:
        raise ConfigError(f"A_p needs p > 1, got {p!r}")
    w = _weight_or_ones(space, weight)
    if np.any(w <= 0):
        raise NotApWeightError(ZERO_SET_MESSAGE)
    q = p / (p - 1.0)
    dual = w ** (1.0 - q)
    best, witness = -1.0, None
    for x in range(space.n):
        radii, _, (avg_w, avg_dual) = _ball_averages(space, [w, dual], x)
        product = avg_w * avg_dual ** (p - 1.0)
        k = int(np.argmax(product))
        if product[k] > best:
            best, witness = float(product[k]), (x, float(radii[k]), None)
    return ConstantResult(float(p), best, witness)


def ap_curve(space: Space, weight: Optional[np.ndarray],
             p_grid: Sequence[float] = DEFAULT_AP_GRID) -> List[ConstantResult]:
    return [ap_constant(space, weight, p) for p in p_grid]


def a1_constant(space: Space, weight: Optional[np.ndarray]) -> ConstantResult:
    """sup over balls of avg ω / min ω; UNBOUNDED when a ball has min 0 and positive average"""
    w = _weight_or_ones(space, weight)
    best, witness = -1.0, None
    for x in range(space.n):
        radii, sizes, (avg_w,) = _ball_averages(space, [w], x)
        low = np.minimum.accumulate(w[space.order[x]])[sizes - 1]
        blowup = (low <= 0) & (avg_w > 0)
        if np.any(blowup):
            k = int(np.argmax(blowup))
            return ConstantResult(1.0, UNBOUNDED, (x, float(radii[k]), None))
        ratio = np.where(low > 0, avg_w / np.where(low > 0, low, 1.0), 0.0)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, witness = float(ratio[k]), (x, float(radii[k]), None)
    return ConstantResult(1.0, best, witness)


def rhi_constant(space: Space, weight: Optional[np.ndarray], eps: float) -> ConstantResult:
    """sup over balls with ν(B) > 0 of (avg ω^(1+ε))^(1/(1+ε)) / avg ω"""
    if not eps > 0:
        raise ConfigError(f"reverse Hölder needs ε > 0, got {eps!r}")
    w = _weight_or_ones(space, weight)
    best, witness = -1.0, None
    for x in range(space.n):
        radii, _, (avg_w, avg_pow) = _ball_averages(space, [w, w ** (1.0 + eps)], x)
        ratio = np.where(avg_w > 0, avg_pow ** (1.0 / (1.0 + eps)) / np.where(avg_w > 0, avg_w, 1.0), 1.0)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, witness = float(ratio[k]), (x, float(radii[k]), None)
    return ConstantResult(float(eps), best, witness)


def rhi_curve(space: Space, weight: Optional[np.ndarray],
              eps_grid: Sequence[float] = DEFAULT_EPS_GRID) -> List[ConstantResult]:
    return [rhi_constant(space, weight, eps) for eps in eps_grid]


# -------------------------------------------------------------- witness replay

def evaluate_witness(space: Space, weight: Optional[np.ndarray], kind: str, result: ConstantResult) -> float:
    """Recompute a reported constant directly from its witness ball (and level)"""
    if result.witness is None:
        raise ValueError(f"{kind} result has no witness")
    w = _weight_or_ones(space, weight)
    center, radius, level = result.witness
    region = ball(space, center, radius)
    ids = region.ids
    mu, nu = space.mu[ids], (w * space.mu)[ids]
    mu_b, nu_b = float(np.sum(mu)), float(np.sum(nu))
    param = result.parameter
    if kind == "a1":
        low = float(np.min(w[ids]))
        if low <= 0:
            return UNBOUNDED if nu_b > 0 else 0.0
        return nu_b / mu_b / low
    if kind == "ap":
        q = param / (param - 1.0)
        return (nu_b / mu_b) * (float(np.sum(w[ids] ** (1.0 - q) * mu)) / mu_b) ** (param - 1.0)
    if kind == "rhi":
        if nu_b <= 0:
            return 1.0
        return (float(np.sum(w[ids] ** (1.0 + param) * mu)) / mu_b) ** (1.0 / (1.0 + param)) / (nu_b / mu_b)
    if kind in ("cond2", "cond4"):
        inside = w[ids] >= level if kind == "cond2" else w[ids] <= level
        u = float(np.sum(mu[inside])) / mu_b
        v = float(np.sum(nu[inside])) / nu_b if nu_b > 0 else 0.0
        return v / u ** (1.0 / param) if kind == "cond2" else v / u ** param
    if kind == "cond1":
        return 1.0 - envelope_at(superlevel_sweep(space, w, region), param)
    raise ValueError(f"unknown constant kind '{kind}'")


def replay_witnesses(space: Space, weight: Optional[np.ndarray], report: ClassReport,
                     tol: float = 1e-12) -> Dict[str, Any]:
    """Largest relative gap between a reported constant and its value recomputed on the witness"""
    curves = [("a1", [report.a1_constant]), ("ap", report.ap_curve), ("rhi", report.rhi_curve),
              ("cond2", report.cond2_curve), ("cond4", report.cond4_curve), ("cond1", report.cond1_curve)]
    worst, where, checked = 0.0, None, 0
    for kind, results in curves:
        for result in results:
            if result.witness is None:
                continue
            replay = evaluate_witness(space, weight, kind, result)
            checked += 1
            if is_unbounded(replay) or is_unbounded(result.value):
                gap = 0.0 if is_unbounded(replay) and is_unbounded(result.value) else UNBOUNDED
            else:
                gap = abs(replay - result.value) / max(abs(replay), abs(result.value), 1.0)
            if gap > worst:
                worst, where = float(gap), {"kind": kind, "parameter": result.parameter}
    return {"checked": checked, "max_discrepancy": worst, "worst": where, "tol": tol, "holds": worst <= tol}


# --------------------------------------------------------------- swaps and views

def swap_measures(space: Space, weight: Optional[np.ndarray]) -> Tuple[Space, np.ndarray]:
    """(μ, ν) -> (ν, μ): the new base measure is ν and the new weight is 1/ω"""
    w = _weight_or_ones(space, weight)
    if np.any(w <= 0):
        raise SpaceValidationError("positive-mass", "cannot swap measures: ω vanishes somewhere")
    swapped = Space(space.dist, w * space.mu, space.Q, skeleton=space.skeleton, coords=space.coords,
                    name=f"{space.name}-swapped", meta=dict(space.meta))
    return swapped, 1.0 / w


def ainf_exponent(cond2: Sequence[ConstantResult]) -> Optional[Dict[str, float]]:
    """A_∞ in exponent form: ν(E)/ν(B) <= c (μ(E)/μ(B))^δ with δ = 1/p for the smallest finite p"""
    finite = [c for c in cond2 if not is_unbounded(c.value)]
    if not finite:
        return None
    best = min(finite, key=lambda c: c.parameter)
    return {"p": best.parameter, "delta": 1.0 / best.parameter, "c": best.value}


# ------------------------------------------------------------------ classification

def rhi_bound_from_cond2(c: float, p: float, eps: float) -> Optional[float]:
    """Reverse Hölder constant implied by condition (2) with constants (c, p); None if p is too large for ε"""
    c = max(c, 1.0)
    if p == 1.0:
        return c ** (eps / (1.0 + eps))
    q = p / (p - 1.0)
    if not q - 1.0 > eps:
        return None
    return c ** (p * eps / (1.0 + eps)) * ((q - 1.0) / (q - 1.0 - eps)) ** (1.0 / (1.0 + eps))


def _leq(a: float, b: float, tol: float) -> bool:
    if is_unbounded(b):
        return True
    if is_unbounded(a):
        return False
    return a <= b + tol * max(abs(a), abs(b), 1.0)


def _nonincreasing(values: Sequence[float], tol: float) -> bool:
    return all(_leq(b, a, tol) for a, b in zip(values, values[1:]))


def implication_matrix(space: Space, weight: Optional[np.ndarray], report: ClassReport,
                       tol: float = 1e-9) -> List[Implication]:
    """Check the computed constants against the implications between conditions (1)-(5)"""
    w = _weight_or_ones(space, weight)
    rows: List[Implication] = []
    c2 = {c.parameter: c.value for c in report.cond2_curve}
    c4 = {c.parameter: c.value for c in report.cond4_curve}
    delta = {c.parameter: c.value for c in report.cond1_curve}
    rhi = {c.parameter: c.value for c in report.rhi_curve}
    ap = {c.parameter: c.value for c in report.ap_curve}

    # (2) => (1)
    finite2 = {p: c for p, c in c2.items() if not is_unbounded(c)}
    failures = [f"δ({e})={d!r} < 1-c({p})ε^(1/p)" for p, c in finite2.items() for e, d in delta.items()
                if not _leq(1.0 - c * e ** (1.0 / p), d, tol)]
    conclusion = any(d > 0 for d in delta.values())
    rows.append(Implication("(2) => (1)", bool(finite2), conclusion,
                            not failures and (not finite2 or conclusion or not delta), "; ".join(failures)))

    # (3) => (2): Hölder with exponent p = (1+ε)/ε
    if rhi:
        direct = cond2_curve(space, w, [(1.0 + e) / e for e in rhi])
        failures = [f"c((1+{e})/{e})={d.value!r} > C({e})={rhi[e]!r}"
                    for e, d in zip(rhi, direct) if not _leq(d.value, rhi[e], tol)]
        rows.append(Implication("(3) => (2)", True, all(not is_unbounded(d.value) for d in direct),
                                not failures, "; ".join(failures)))

    # (2) => (3): layer-cake bound
    failures = []
    for e, value in rhi.items():
        for p, c in finite2.items():
            bound = rhi_bound_from_cond2(c, p, e)
            if bound is not None and not _leq(value, bound, tol):
                failures.append(f"C({e})={value!r} > bound {bound!r} from c({p})")
    rows.append(Implication("(2) => (3)", bool(finite2), all(not is_unbounded(v) for v in rhi.values()),
                            not failures, "; ".join(failures)))

    # (4) <=> (2) for the swapped pair of measures
    if np.all(w > 0) and c4:
        swapped, inv = swap_measures(space, w)
        ps = sorted(c4)
        direct = cond2_curve(swapped, inv, ps)
        failures = []
        for p, d in zip(ps, direct):
            expected = UNBOUNDED if c4[p] <= 0 else c4[p] ** (-1.0 / p)
            if not (_leq(d.value, expected, tol) and _leq(expected, d.value, tol)):
                failures.append(f"swapped c({p})={d.value!r} vs c4^(-1/p)={expected!r}")
        rows.append(Implication("(4) <=> (2) on swapped measures", True, True, not failures, "; ".join(failures)))
    else:
        rows.append(Implication("(4) <=> (2) on swapped measures", False, False, True,
                                "not applicable: ω vanishes somewhere"))

    # (5) => (4): c4(p) >= 1/A_p(p)
    failures = [f"c4({p})={c4[p]!r} < 1/A_p={1.0 / a!r}" for p, a in ap.items()
                if p in c4 and not is_unbounded(a) and not _leq(1.0 / a, c4[p], tol)]
    has_ap = bool(ap) and report.ap_error is None
    rows.append(Implication("(5) => (4)", has_ap, any(v > 0 for v in c4.values()),
                            not failures and (not has_ap or any(v > 0 for v in c4.values())),
                            "; ".join(failures)))

    # (2) & (4) => (5)
    premise = bool(finite2) and any(v > 0 for v in c4.values())
    rows.append(Implication("(2) & (4) => (5)", premise, has_ap, not premise or has_ap,
                            report.ap_error or ""))

    # ν doubling is necessary for (4) and (5)
    doubling_ok = report.nu_doubling.bounded
    rows.append(Implication("(5) => ν doubling", has_ap, doubling_ok, not has_ap or doubling_ok))
    premise4 = any(v > 0 for v in c4.values())
    rows.append(Implication("(4) => ν doubling", premise4, doubling_ok, not premise4 or doubling_ok))

    # A_1 ⊂ A_p ⊂ A_q
    ap_values = [ap[p] for p in sorted(ap)]
    rows.append(Implication("A_p nonincreasing in p", has_ap, _nonincreasing(ap_values, tol),
                            not has_ap or _nonincreasing(ap_values, tol)))
    a1 = report.a1_constant.value
    contained = all(_leq(v, a1, tol) for v in ap_values)
    rows.append(Implication("A_1 => A_p", has_ap and not is_unbounded(a1), contained, contained))

    # curve monotonicity
    rows.append(Implication("c2 nonincreasing in p", True, True,
                            _nonincreasing([c2[p] for p in sorted(c2)], tol)))
    rows.append(Implication("c4 nondecreasing in p", True, True,
                            _nonincreasing([c4[p] for p in sorted(c4, reverse=True)], tol)))
    rows.append(Implication("δ nonincreasing in ε", True, True,
                            _nonincreasing([delta[e] for e in sorted(delta)], tol)))
    rows.append(Implication("RHI nondecreasing in ε", True, True,
                            _nonincreasing([rhi[e] for e in sorted(rhi, reverse=True)], tol)))
    return rows


def _verdicts(report: ClassReport) -> Dict[str, Dict[str, Any]]:
    def first(curve, predicate, key=None):
        hits = [c for c in curve if predicate(c.value)]
        if key is not None:
            hits = sorted(hits, key=key)
        return hits[0] if hits else None

    best1 = max(report.cond1_curve, key=lambda c: c.value, default=None)
    v2 = first(report.cond2_curve, lambda v: not is_unbounded(v), key=lambda c: c.parameter)
    v3 = first(report.rhi_curve, lambda v: not is_unbounded(v), key=lambda c: -c.parameter)
    v4 = first(report.cond4_curve, lambda v: v > 0, key=lambda c: c.parameter)
    v5 = None if report.ap_error else first(report.ap_curve, lambda v: not is_unbounded(v),
                                            key=lambda c: c.parameter)
    a1 = report.a1_constant

    def verdict(result, name):
        if result is None:
            return {"holds": False, name: None, "constant": None}
        return {"holds": True, name: result.parameter, "constant": result.value}

    out = {
        "(1)": {"holds": bool(best1 and best1.value > 0), "eps": best1.parameter if best1 else None,
                "constant": best1.value if best1 else None},
        "(2)": verdict(v2, "p"),
        "(3)": verdict(v3, "eps"),
        "(4)": verdict(v4, "p"),
        "(5)": verdict(v5, "p"),
        "A_1": {"holds": not is_unbounded(a1.value), "constant": a1.value},
        "nu_doubling": {"holds": report.nu_doubling.bounded, "constant": report.nu_doubling.value},
    }
    if report.ap_error:
        out["(5)"]["error"] = report.ap_error
    return out


def classify(space: Space, weight: Optional[np.ndarray], p_grid: Sequence[float] = DEFAULT_P_GRID,
             eps_grid: Sequence[float] = DEFAULT_EPS_GRID, ap_grid: Sequence[float] = DEFAULT_AP_GRID,
             rhi_grid: Optional[Sequence[float]] = None, tol: float = 1e-9,
             witness_tol: float = 1e-12) -> ClassReport:
    """
    Phân loại weight: mọi đường cong hằng số, verdict và bảng implication

    Args:
        p_grid: Số mũ cho điều kiện (2) và (4), đều >= 1
        eps_grid: Giá trị ε trong (0, 1) cho điều kiện (1)
        ap_grid: Số mũ p > 1 cho đường cong A_p
        rhi_grid: Giá trị ε cho hằng số reverse Hölder (mặc định lấy eps_grid)
        witness_tol: Sai số tương đối cho phép khi tính lại hằng số từ witness
    """
    w = _weight_or_ones(space, weight)
    p_grid = _check_grid(p_grid, "p", 1.0)
    eps_grid = _check_grid(eps_grid, "ε", 0.0, low_inclusive=False, high=1.0)
    ap_grid = _check_grid(ap_grid, "A_p exponent", 1.0, low_inclusive=False)
    rhi_grid = _check_grid(rhi_grid if rhi_grid is not None else eps_grid, "ε", 0.0, low_inclusive=False)

    logger.info(f"Classifying weight on {space.name} ({space.n} points)")
    cond2, cond1 = _superlevel_pass(space, w, p_grid, eps_grid)
    p4 = sorted(set(p_grid) | set(ap_grid))
    cond4_all = _sublevel_pass(space, w, p4)
    cond4 = [c for c in cond4_all if c.parameter in set(p_grid)]

    ap_error = None
    try:
        ap = ap_curve(space, w, ap_grid)
    except NotApWeightError as e:
        ap, ap_error = [], str(e)
        logger.info(f"A_p skipped: {e}")

    report = ClassReport(
        a1_constant=a1_constant(space, w),
        ap_curve=ap,
        ap_error=ap_error,
        cond1_curve=cond1,
        cond2_curve=cond2,
        cond4_curve=cond4,
        rhi_curve=rhi_curve(space, w, rhi_grid),
        nu_doubling=doubling_constant(space, w),
    )
    # the implication table needs c4 on the A_p grid too
    full = ClassReport(**{**report.__dict__, "cond4_curve": cond4_all})
    report.implications = implication_matrix(space, w, full, tol)
    report.verdicts = _verdicts(report)
    report.witness_replay = replay_witnesses(space, w, report, witness_tol)
    if not report.witness_replay["holds"]:
        logger.warning(f"Witness replay off by {report.witness_replay['max_discrepancy']!r} on {space.name}")
    if report.violations:
        logger.warning(f"{len(report.violations)} implication violations on {space.name}")
    return report
