import math
from fractions import Fraction

import numpy as np
import pytest

from thermoform.cantor import build_pattern
from thermoform.gibbs import bernoulli_measure
from thermoform.interval_maps import GaussMap, NAryMap
from thermoform.monte_carlo import (HORIZON_CAP, ORBIT_CAP, ExperimentPlan, bc_dichotomy,
                                    box_dimension, hitting_sequence, middle_thirds,
                                    orbit_digits, orbit_streams)
from thermoform.symbolic import SymbolicPoint, full_shift
from thermoform.target import TargetSpec

GAUSS_MASS_OF_ONE = math.log2(4.0 / 3.0)


# ------------------------------------------------------------ box counting

def test_unit_interval_box_dimension():
    assert box_dimension(np.array([[0.0, 1.0]]))["slope"] == pytest.approx(1.0, abs=0.02)


def test_middle_thirds_box_dimension():
    res = box_dimension(middle_thirds(10))
    assert res["slope"] == pytest.approx(math.log(2) / math.log(3), abs=0.03)
    assert res["meets_scale_precondition"]


def test_points_box_dimension_on_uniform_sample():
    pts = np.random.default_rng(3).random(200_000)
    assert box_dimension(pts)["slope"] == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("N", [2, 3])
def test_nary_tree_box_dimension(N):
    # radius N^-n around 0 is the lock rule l_n = n, where the root of the pressure equation is 1/2
    tree = build_pattern(full_shift(N), bernoulli_measure(N),
                         TargetSpec(center=(0,), depth_rule="n", period=1), 8)
    assert box_dimension(tree)["slope"] == pytest.approx(0.5, abs=0.05)


# ------------------------------------------------------------ hitting sequences

def test_repeating_digit_hits_every_step():
    res = hitting_sequence(NAryMap(5), [3] * 60, horizon=50)
    assert res["p"] == list(range(1, 51))


def test_golden_point_hits_every_step():
    gauss = GaussMap()
    golden = SymbolicPoint(gauss.chain(10), (1,), tail="periodic")
    assert hitting_sequence(gauss, golden, horizon=200)["p"] == list(range(1, 201))


def test_exact_rational_point():
    # 1/3 in base 2 is 0101...; block {0} recurs at even times
    res = hitting_sequence(NAryMap(2), Fraction(1, 3), horizon=12)
    assert res["p"] == [2, 4, 6, 8, 10, 12]


def test_random_gauss_frequency():
    res = hitting_sequence(GaussMap(), "random", horizon=40_000, blocks=[1],
                           rng=np.random.default_rng(11))
    assert res["p"], "Poincare recurrence: the block is revisited"
    assert res["frequency"] == pytest.approx(GAUSS_MASS_OF_ONE, abs=0.02)


def test_digit_law_of_random_points():
    rng = np.random.default_rng(5)
    d = np.concatenate([orbit_digits(GaussMap(), 200, rng) for _ in range(200)])
    assert np.mean(d == 1) == pytest.approx(GAUSS_MASS_OF_ONE, abs=0.01)
    assert np.mean(d == 2) == pytest.approx(math.log2(9.0 / 8.0), abs=0.01)


# ------------------------------------------------------------ shrinking targets

def small_plan(**kw):
    base = dict(model="gauss", radius_rule="n**-2", orbit_count=400, horizon_n=1000,
                rng_seed=1, after=100)
    base.update(kw)
    return ExperimentPlan(**base)


def test_convergent_pilot():
    res = bc_dichotomy(small_plan(orbit_count=2000, horizon_n=2000))
    assert res["fraction_hit_after"] < 0.05
    lo, hi = res["ci99_hit_after"]
    assert lo <= res["fraction_hit_after"] <= hi


def test_unit_radius_always_hits():
    res = bc_dichotomy(small_plan(radius_rule="1", hit_threshold=1, horizon_n=50))
    assert res["fraction_hitting_at_least_K"] == 1.0


def test_hits_monotone_in_radius():
    means = [bc_dichotomy(small_plan(radius_rule=f"{c}/n", horizon_n=500))["mean_hits"]
             for c in (0.01, 0.1, 0.5)]
    assert means[0] <= means[1] <= means[2]


def test_mean_hits_near_stationary_sum():
    res = bc_dichotomy(small_plan(radius_rule="0.25/n", orbit_count=2000, horizon_n=2000))
    # a sum of nearly independent rare events; sampling error ~ sqrt(mean / orbits)
    tol = 5.0 * math.sqrt(res["expected_hits_stationary"] / 2000) + 0.05
    assert abs(res["mean_hits"] - res["expected_hits_stationary"]) < tol


def test_deterministic_and_thread_independent():
    a = bc_dichotomy(small_plan(chunk=64))
    b = bc_dichotomy(small_plan(chunk=64))
    c = bc_dichotomy(small_plan(chunk=64, threads=4))
    assert a == b == c


def test_streams_reproducible():
    x = [g.random(3).tolist() for g in orbit_streams(9, 4)]
    y = [g.random(3).tolist() for g in orbit_streams(9, 4)]
    assert x == y and x[0] != x[1]


@pytest.mark.parametrize("kw", [dict(orbit_count=0), dict(orbit_count=ORBIT_CAP + 1),
                                dict(horizon_n=HORIZON_CAP + 1), dict(center=1.5),
                                dict(threads=0)])
def test_plan_caps(kw):
    with pytest.raises(ValueError):
        small_plan(**kw)


def test_non_moebius_model_rejected():
    with pytest.raises(NotImplementedError):
        bc_dichotomy(small_plan(model="mp", model_params={"alpha": 0.5}))
