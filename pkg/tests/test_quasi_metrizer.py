import itertools
import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from conftest import random_weights
from modules.metric_space import Space
from modules.quasi_metrizer import (NOT_STRONG, STABLE, chain_metrization, comparison_check, metrize,
                                    open_ball_masses, quasi_distance, sa_verdict)
from modules.space_builder import build_example, grid_space, power_weight, segment_pair_space
from modules.utils import UNBOUNDED, ConfigError, NotDoublingError


def _random_planar_space(n, seed):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 1.0, (n, 2))
    return Space(cdist(coords, coords), rng.uniform(0.5, 2.0, n), 2.0, coords=coords, name=f"planar-{seed}")


def _brute_force_chains(delta_nu):
    """Shortest chain length by enumerating every simple chain"""
    n = delta_nu.shape[0]
    best = delta_nu.copy()
    for x, y in itertools.combinations(range(n), 2):
        others = [z for z in range(n) if z not in (x, y)]
        for k in range(1, len(others) + 1):
            for middle in itertools.permutations(others, k):
                chain = (x,) + middle + (y,)
                length = sum(delta_nu[a, b] for a, b in zip(chain, chain[1:]))
                best[x, y] = best[y, x] = min(best[x, y], length)
    return best


@pytest.mark.parametrize("Q, expected", [(1.0, 2.0), (2.0, math.sqrt(2.0))])
def test_two_point_quasi_distance(Q, expected):
    space = Space(np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones(2), Q)
    delta_nu = quasi_distance(space, None)
    assert delta_nu[0, 1] == pytest.approx(expected)
    assert delta_nu[0, 0] == 0.0
    result = metrize(space, None)
    assert result.distortion == pytest.approx(1.0)


def test_open_ball_masses_exclude_the_boundary():
    space = grid_space(1, 5)
    S = open_ball_masses(space, None)
    h = space.meta["spacing"]
    assert S[0, 1] == pytest.approx(h)
    assert S[2, 4] == pytest.approx(3 * h)
    assert S[2, 2] == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_chain_metrization_matches_brute_force(seed):
    space = _random_planar_space(7, seed)
    weight = random_weights(space.n, 1, seed=seed)[0]
    result = metrize(space, weight)
    assert np.allclose(result.delta, _brute_force_chains(result.delta_nu), rtol=1e-12, atol=0)


def test_metrization_is_a_metric_below_quasi_distance():
    space = grid_space(1, 41)
    result = metrize(space, power_weight(space, 1.0))
    delta = result.delta
    assert np.all(delta <= result.delta_nu + 1e-15)
    assert np.array_equal(delta, delta.T)
    through = delta[:, :, None] + delta[None, :, :]
    assert np.all(delta[:, None, :] <= through + 1e-12)
    assert 1.0 <= result.distortion < math.inf


def test_vanishing_weight_gives_unbounded_distortion():
    space, weight = segment_pair_space(8)
    result = metrize(space, weight)
    assert result.distortion == UNBOUNDED
    assert result.witness == (0, 1)
    assert result.summary()["witness"] == [0, 1]
    with pytest.raises(NotDoublingError):
        comparison_check(space, weight)


def test_restricted_chains_are_longer():
    space = grid_space(1, 31)
    weight = random_weights(space.n, 1, seed=4)[0]
    free = metrize(space, weight)
    restricted = metrize(space, weight, restricted=True)
    assert restricted.restricted
    assert np.all(restricted.delta >= free.delta - 1e-12)
    assert np.all(restricted.delta <= restricted.delta_nu + 1e-12)
    assert restricted.distortion <= free.distortion + 1e-12


def test_distortion_ignores_rescaling():
    space = grid_space(1, 21)
    weight = power_weight(space, 2.0)
    scaled = Space(space.dist * 3.0, space.mu * 5.0, space.Q)
    assert metrize(scaled, weight).distortion == pytest.approx(metrize(space, weight).distortion, rel=1e-9)


def test_chain_metrization_checks_shape():
    with pytest.raises(ConfigError):
        chain_metrization(np.zeros((2, 2)), grid_space(1, 3))


def test_comparison_constant_replays_from_witness():
    space = grid_space(1, 41)
    weight = power_weight(space, 1.0)
    result = comparison_check(space, weight)
    assert result.left_inequality_holds
    assert result.doubling < math.inf
    i, j = result.witness
    S = open_ball_masses(space, weight)
    delta_nu = quasi_distance(space, weight)
    assert result.constant == pytest.approx(delta_nu[i, j] / S[i, j] ** (1.0 / space.Q), rel=1e-12)
    assert result.constant >= 1.0


def test_verdict_needs_two_scales():
    with pytest.raises(ConfigError):
        sa_verdict([build_example("power-alpha1", 21)])


def test_segment_pair_is_not_strong():
    report = sa_verdict([segment_pair_space(8), segment_pair_space(16)])
    assert report.verdict == NOT_STRONG
    assert report.ap_stable is None
    assert all(s.ap_error for s in report.scales)
    doc = report.to_dict()
    assert doc["verdict"] == NOT_STRONG
    assert len(doc["scales"]) == 2


@pytest.mark.slow
def test_power_weight_is_stable_under_refinement():
    report = sa_verdict([build_example("power-alpha1", 101), build_example("power-alpha1", 201)],
                        restricted=True)
    assert report.verdict == STABLE
    assert all(s.restricted_distortion is not None for s in report.scales)


def test_verdict_records_a1_and_checks_it_on_request():
    family = [build_example("a1-1d", 21), build_example("a1-1d", 41)]
    report = sa_verdict(family, check_a1=True)
    assert all(1.0 <= s.a1 < math.inf for s in report.scales)
    assert report.a1_stable is True
    assert report.to_dict()["scales"][0]["a1"] == report.scales[0].a1
    assert sa_verdict(family).a1_stable is None


def test_unbounded_a1_fails_the_check():
    report = sa_verdict([segment_pair_space(8), segment_pair_space(16)], check_a1=True)
    assert all(s.a1 == UNBOUNDED for s in report.scales)
    assert report.a1_stable is False


@pytest.mark.slow
def test_a1_weight_is_strong_under_refinement():
    report = sa_verdict([build_example("a1-1d", 101), build_example("a1-1d", 201)],
                        restricted=True, check_a1=True)
    assert report.verdict == STABLE
    assert report.a1_stable is True
    a1 = [s.a1 for s in report.scales]
    assert max(a1) / min(a1) <= 2.0
    for s in report.scales:
        assert s.restricted_distortion / s.distortion <= 10.0
        assert s.distortion / s.restricted_distortion <= 10.0


@pytest.mark.slow
@pytest.mark.parametrize("name", ["power2d-alpha1", "power2d-alpha2"])
def test_planar_power_weight_is_strong_and_ap(name):
    report = sa_verdict([build_example(name, 17), build_example(name, 33)], ap_exponent=4.0)
    assert report.verdict == STABLE
    assert report.ap_stable is True
    ap = [s.ap for s in report.scales]
    assert max(ap) / min(ap) <= 2.0


@pytest.mark.parametrize("c", [0.25, 7.0])
def test_quasi_distance_scales_with_weight(c):
    space = grid_space(1, 21)
    weight = power_weight(space, 1.0)
    base = metrize(space, weight)
    scaled = metrize(space, c * weight)
    factor = c ** (1.0 / space.Q)
    assert np.allclose(quasi_distance(space, c * weight), factor * base.delta_nu, rtol=1e-12, atol=0)
    assert np.allclose(scaled.delta, factor * base.delta, rtol=1e-12, atol=0)
    assert scaled.distortion == pytest.approx(base.distortion, rel=1e-12)


def test_quasi_distance_scales_with_weight_in_the_plane():
    space = grid_space(2, 7)
    weight = power_weight(space, 2.0)
    assert np.allclose(quasi_distance(space, 4.0 * weight), 2.0 * quasi_distance(space, weight),
                       rtol=1e-12, atol=0)
