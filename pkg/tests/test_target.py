import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermoform.gibbs import bernoulli_measure, gauss_measure, sample_cylinder_words
from thermoform.interval_maps import GaussMap
from thermoform.potentials import gauss_log_deriv, nary_log_deriv
from thermoform.symbolic import full_shift
from thermoform.target import (
    TargetSpec, bowen_root, builtin_example, compile_rule, config_hash, dimension_bounds,
    exponent_s, mp_dimension,
)

GAUSS_ENTROPY = math.pi ** 2 / (6 * math.log(2))
LOG2 = math.log(2)


def fair_coin_target(rule, bound=1.0):
    return TargetSpec(center=(0,), depth_rule=rule, period=1, linear_bound=bound)


def test_exponent_linear_depth():
    ex = exponent_s(bernoulli_measure(2), fair_coin_target("n"), [200, 400, 600, 800, 1000])
    assert abs(ex["s_lo"] - LOG2) <= LOG2 / 600 + 1e-12
    assert abs(ex["s_hi"] - LOG2) <= LOG2 / 600 + 1e-12


def test_exponent_double_depth():
    ex = exponent_s(bernoulli_measure(2), fair_coin_target("2*n", 2.0), [200, 400, 600, 800])
    assert abs(ex["s_lo"] - 2 * LOG2) <= LOG2 / 600


def test_exponent_gauss_generic_centers_concentrate():
    mu = gauss_measure()
    centers = sample_cylinder_words(mu, 62, 16, seed=11)
    vals = [exponent_s(mu, TargetSpec(center=tuple(c), depth_rule="n"), [20, 40, 60])["values"][-1]
            for c in centers]
    assert abs(np.mean(vals) - GAUSS_ENTROPY) < 0.2
    assert np.std(vals) < 0.4


@pytest.mark.parametrize("N", [2, 3, 10])
@pytest.mark.parametrize("k", [0.0, 0.5, 1.0, 5.0])
def test_bowen_root_n_shift(N, k):
    s = k * math.log(N)
    sol = bowen_root(full_shift(N), nary_log_deriv(N), s)
    assert abs(sol.T - math.log(N) / (math.log(N) + s)) < 1e-10


def test_bowen_root_s_zero():
    assert bowen_root(GaussMap().chain(200), gauss_log_deriv(), 0.0).T == 1.0


def test_bowen_root_gauss_in_range():
    for u in (0.5, 2.0, 10.0):
        sol = bowen_root(GaussMap().chain(200), gauss_log_deriv(), u, {"t_sing": 0.5})
        assert 0.5 < sol.T <= 1.0 and sol.form == "root"
        # the entropy bound pi^2 / (pi^2 + 6 u log 2) lies strictly below the root
        assert math.pi ** 2 / (math.pi ** 2 + 6 * u * LOG2) < sol.T


def test_dimension_bounds_fair_coin():
    res = dimension_bounds(full_shift(2), nary_log_deriv(2), bernoulli_measure(2),
                           fair_coin_target("n"), {"n_grid": [400, 600, 800, 1000]})
    for key in ("upper_T_plus", "lower_T_minus", "lower_hs"):
        assert abs(res[key] - 0.5) < 2e-3


def test_dimension_zero_for_quadratic_depth():
    res = dimension_bounds(full_shift(2), nary_log_deriv(2), bernoulli_measure(2),
                           fair_coin_target("n**2", math.inf), {"n_grid": [2, 4, 6, 8]})
    assert res["report"]["dimension_zero"]
    assert res["upper_T_plus"] == 0.0 and res["lower_hs"] == 0.0


@pytest.mark.parametrize("name", ["nary", "bernoulli", "gauss", "mp"])
def test_root_nonincreasing_in_s(name):
    ex = builtin_example(name)
    cfg = dict(ex.config, t_sing=ex.t_sing)
    Ts = [bowen_root(ex.chain, ex.phi, s, cfg).T for s in (0.0, 0.2, 0.5, 1.0, 3.0)]
    assert all(b <= a + 1e-10 for a, b in zip(Ts, Ts[1:]))


def test_mp_indifferent_point_has_larger_dimension():
    r0 = mp_dimension(0.5, 1.0, 0.0)
    r1 = mp_dimension(0.5, 1.0, 0.3)
    assert r0["u_effective"] == 0.5 and r1["u_effective"] == 1.0
    assert r0["T"] > r1["T"]


def test_compile_rule_rejects_code():
    assert compile_rule("ceil(v*n)", {"v": 1.5})(3) == 5
    for bad in ("__import__('os')", "n.real", "open('x')"):
        with pytest.raises(ValueError):
            compile_rule(bad)


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.integers(), max_size=5))
def test_config_hash_ignores_key_order(d):
    rev = dict(reversed(list(d.items())))
    assert config_hash(d) == config_hash(rev)


def test_periodic_center_counts():
    T = TargetSpec(center=(1, 2, 3), depth_rule="n", period=2)
    word = T.center_word(11)
    assert word == (1, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3)
    counts = T.center_counts(2, 11)
    assert counts == {3: 5, 2: 4}
