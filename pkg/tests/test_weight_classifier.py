import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_weights
from modules.metric_space import Space, ball
from modules.space_builder import grid_space, power_weight, segment_pair_space
from modules.utils import UNBOUNDED, ConfigError, NotApWeightError, SpaceValidationError
from modules.weight_classifier import (DEFAULT_AP_GRID, ZERO_SET_MESSAGE, a1_constant, ainf_exponent, ap_constant,
                                       ap_curve, classify, cond1_curve, cond2_curve, cond4_curve, envelope_at,
                                       evaluate_witness, implication_matrix, rhi_bound_from_cond2, rhi_constant,
                                       rhi_curve, superlevel_sweep, sublevel_sweep, swap_measures)

P_GRID = [1.0, 1.5, 2.0, 4.0]
EPS_GRID = [0.1, 0.25, 0.4]


def _subset_table(k):
    """Boolean matrix of every nonempty subset of k items"""
    codes = np.arange(1, 2 ** k)
    return ((codes[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)


def test_constant_weight_has_trivial_constants(line101):
    report = classify(line101, np.ones(line101.n), P_GRID, EPS_GRID, [2.0, 4.0])
    assert report.a1_constant.value == pytest.approx(1.0)
    assert all(c.value == pytest.approx(1.0) for c in report.ap_curve)
    assert all(c.value == pytest.approx(1.0) for c in report.cond2_curve)
    assert all(c.value == pytest.approx(1.0) for c in report.cond4_curve)
    assert all(c.value == pytest.approx(1.0) for c in report.rhi_curve)
    assert [c.value for c in report.cond1_curve] == pytest.approx([1 - e for e in EPS_GRID])
    assert not report.violations


def test_segment_pair_fails_conditions_four_and_five():
    space, weight = segment_pair_space(32)
    report = classify(space, weight)
    c2 = {c.parameter: c.value for c in report.cond2_curve}
    assert c2[1.0] == pytest.approx(2.0, abs=1e-9)
    assert all(c.value == 0.0 for c in report.cond4_curve)
    assert report.nu_doubling.value == UNBOUNDED
    assert report.ap_error == ZERO_SET_MESSAGE
    assert report.a1_constant.value == UNBOUNDED
    assert report.verdicts["(2)"]["holds"] and report.verdicts["(2)"]["p"] == 1.0
    assert not report.verdicts["(4)"]["holds"]
    assert not report.verdicts["(5)"]["holds"]
    assert not report.violations


def test_ap_rejects_vanishing_weight():
    space, weight = segment_pair_space(8)
    with pytest.raises(NotApWeightError, match="vanishes"):
        ap_constant(space, weight, 2.0)


def test_sweeps_on_a_small_ball():
    space = grid_space(1, 5)
    weight = np.array([1.0, 3.0, 2.0, 2.0, 5.0])
    region = ball(space, 2, 0.5)
    up = superlevel_sweep(space, weight, region)
    assert up.levels == [3.0, 2.0]
    assert up.breakpoints[-1] == pytest.approx((1.0, 1.0))
    assert up.breakpoints[0] == pytest.approx((1 / 3, 3 / 7))
    down = sublevel_sweep(space, weight, region)
    assert down.levels == [2.0, 3.0]
    assert down.breakpoints[0] == pytest.approx((2 / 3, 4 / 7))
    assert envelope_at(up, 1 / 6) == pytest.approx(3 / 14)


@pytest.mark.parametrize("seed", range(5))
def test_sweeps_dominate_every_subset(seed):
    space = grid_space(1, 12)
    weight = random_weights(space.n, 1, seed=seed)[0]
    c2 = cond2_curve(space, weight, P_GRID)
    c4 = cond4_curve(space, weight, P_GRID)
    delta = cond1_curve(space, weight, EPS_GRID)
    best2 = np.zeros(len(P_GRID))
    best4 = np.full(len(P_GRID), np.inf)
    for x in range(space.n):
        for r in [0.0] + sorted(set(space.dist[x]) - {0.0}):
            ids = ball(space, x, r).ids
            subsets = _subset_table(ids.size)
            mu, nu = space.mu[ids], (weight * space.mu)[ids]
            u = subsets @ mu / mu.sum()
            v = subsets @ nu / nu.sum()
            for i, p in enumerate(P_GRID):
                best2[i] = max(best2[i], np.max(v / u ** (1 / p)))
                best4[i] = min(best4[i], np.min(v / u ** p))
            for d, eps in zip(delta, EPS_GRID):
                small = u <= eps
                if np.any(small):
                    assert np.max(v[small]) <= 1.0 - d.value + 1e-12
    assert [c.value for c in c2] == pytest.approx(best2.tolist(), rel=1e-12)
    assert [c.value for c in c4] == pytest.approx(best4.tolist(), rel=1e-12)


def test_constants_replay_from_their_witnesses():
    space = grid_space(1, 41)
    weight = power_weight(space, 1.0)
    checks = [("a1", a1_constant(space, weight))]
    checks += [("ap", c) for c in ap_curve(space, weight, [1.5, 3.0])]
    checks += [("rhi", c) for c in rhi_curve(space, weight, [0.1, 0.4])]
    checks += [("cond2", c) for c in cond2_curve(space, weight, [1.0, 2.0])]
    checks += [("cond4", c) for c in cond4_curve(space, weight, [1.0, 2.0])]
    checks += [("cond1", c) for c in cond1_curve(space, weight, [0.1, 0.4])]
    for kind, result in checks:
        assert evaluate_witness(space, weight, kind, result) == pytest.approx(result.value, rel=1e-12), kind


def test_ap_is_nonincreasing_in_p():
    space = grid_space(1, 41)
    for weight in random_weights(space.n, 3, seed=11):
        values = [c.value for c in ap_curve(space, weight, DEFAULT_AP_GRID)]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
        assert values[0] <= a1_constant(space, weight).value + 1e-12


def test_inverse_square_root_weight_is_a1():
    space = grid_space(1, 101)
    result = a1_constant(space, power_weight(space, -0.5))
    assert math.isfinite(result.value) and result.value >= 1.0


def test_rhi_constant_at_least_one():
    space = grid_space(1, 21)
    weight = random_weights(space.n, 1, seed=2)[0]
    assert rhi_constant(space, weight, 0.2).value >= 1.0
    with pytest.raises(ConfigError):
        rhi_constant(space, weight, 0.0)


def test_grids_are_checked():
    space = grid_space(1, 5)
    with pytest.raises(ConfigError):
        cond2_curve(space, None, [0.5])
    with pytest.raises(ConfigError):
        cond1_curve(space, None, [1.0])
    with pytest.raises(ConfigError):
        ap_constant(space, None, 1.0)


def test_swapped_measures():
    space = grid_space(1, 7)
    weight = np.array([1.0, 2.0, 4.0, 1.0, 0.5, 2.0, 1.0])
    swapped, inverse = swap_measures(space, weight)
    assert np.allclose(swapped.mu, weight * space.mu)
    assert np.allclose(inverse * swapped.mu, space.mu)
    with pytest.raises(SpaceValidationError):
        swap_measures(space, np.zeros(7))


def test_rhi_bound_needs_small_enough_eps():
    assert rhi_bound_from_cond2(2.0, 1.0, 0.5) == pytest.approx(2.0 ** (1 / 3))
    assert rhi_bound_from_cond2(2.0, 8.0, 0.2) is None
    assert rhi_bound_from_cond2(0.5, 2.0, 0.5) == pytest.approx(2.0 ** (1 / 1.5))


def test_ainf_exponent_view():
    space, weight = segment_pair_space(8)
    view = ainf_exponent(cond2_curve(space, weight, [1.0, 2.0]))
    assert view == {"p": 1.0, "delta": 1.0, "c": pytest.approx(2.0)}


def test_implication_table_flags_a_tampered_rhi_curve():
    space = grid_space(1, 21)
    weight = np.ones(space.n)
    report = classify(space, weight, [1.0, 2.0], [0.25], [2.0])
    tampered = replace(report, rhi_curve=[replace(c, value=0.5) for c in report.rhi_curve])
    rows = {row.name: row for row in implication_matrix(space, weight, tampered)}
    assert not rows["(3) => (2)"].holds
    assert "C(0.25)=0.5" in rows["(3) => (2)"].detail
    assert rows["(2) => (1)"].holds


@pytest.mark.slow
def test_random_corpus_has_consistent_implications():
    space = grid_space(1, 101)
    for weight in random_weights(space.n, 10, seed=1):
        report = classify(space, weight)
        ap_values = [c.value for c in report.ap_curve]
        assert all(b <= a + 1e-12 for a, b in zip(ap_values, ap_values[1:]))
        assert all(math.isfinite(c.value) for c in report.cond2_curve)
        assert all(c.value > 0 for c in report.cond1_curve)
        assert all(c.value > 0 for c in report.cond4_curve)
        assert not report.violations, [row.to_dict() for row in report.violations]


def _assert_same_curves(left, right):
    assert left.keys() == right.keys()
    for name in left:
        assert [p for p, _ in left[name]] == [p for p, _ in right[name]]
        assert [v for _, v in left[name]] == pytest.approx([v for _, v in right[name]], rel=1e-9)


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_curves_ignore_weight_and_measure_scaling(c):
    space = grid_space(1, 31)
    weight = random_weights(space.n, 1, seed=11)[0]
    base = classify(space, weight, P_GRID, EPS_GRID)
    by_weight = classify(space, c * weight, P_GRID, EPS_GRID)
    by_measure = classify(Space(space.dist, c * space.mu, space.Q), weight, P_GRID, EPS_GRID)
    for other in (by_weight, by_measure):
        _assert_same_curves(base.curves(), other.curves())
        assert other.a1_constant.value == pytest.approx(base.a1_constant.value, rel=1e-9)


def test_classify_replays_its_witnesses():
    space = grid_space(1, 41)
    report = classify(space, power_weight(space, 1.0), P_GRID, EPS_GRID)
    replay = report.witness_replay
    assert replay["checked"] > 0
    assert replay["holds"]
    assert replay["max_discrepancy"] <= replay["tol"]
    assert report.to_dict()["witness_replay"] == replay
