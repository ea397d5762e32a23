import math

import numpy as np
from hypothesis import given, strategies as st

from thermoform.gibbs import bernoulli_measure
from thermoform.potentials import (
    ConstantPotential, bernoulli_potential, birkhoff_sum, eval_on_cylinder, gauss_log_deriv,
    luroth_log_deriv, modified_gauss_log_deriv, mp_log_deriv, nary_log_deriv,
)
from thermoform.symbolic import full_shift

BUILTIN = {
    "gauss": (gauss_log_deriv, 1, 9),
    "luroth": (luroth_log_deriv, 1, 9),
    "modified-gauss": (modified_gauss_log_deriv, 1, 9),
    "nary": (lambda: nary_log_deriv(3), 0, 2),
    "bernoulli": (lambda: bernoulli_potential(full_shift(2), [0.3, 0.7]), 0, 1),
    "mp": (lambda: mp_log_deriv(0.5), 0, 1),
}


def test_constant_on_any_cylinder():
    phi = ConstantPotential(-1.25)
    assert eval_on_cylinder(phi, (3, 1, 4)) == -1.25
    assert eval_on_cylinder(phi, (0,), "sup-bracket") == (-1.25, -1.25)


def test_gauss_bracket_on_first_cylinder():
    lo, hi = eval_on_cylinder(gauss_log_deriv(), (1,), "sup-bracket")
    assert -2 * math.log(2) - 1e-12 <= lo <= hi <= 1e-12


def test_luroth_depth_one_value():
    assert math.isclose(eval_on_cylinder(luroth_log_deriv(), (2,)), -math.log(6), rel_tol=1e-14)


def test_birkhoff_constant_and_nary():
    assert birkhoff_sum(ConstantPotential(0.7), (1, 2, 3, 4)) == 4 * 0.7
    assert math.isclose(birkhoff_sum(nary_log_deriv(2), (0, 1, 1, 0, 1)), -5 * math.log(2),
                        rel_tol=1e-15)


def test_luroth_birkhoff_product_of_slopes():
    assert math.isclose(birkhoff_sum(luroth_log_deriv(), (1, 2, 3)), -math.log(144),
                        rel_tol=1e-13)


def test_bernoulli_potential_matches_measure():
    mu = bernoulli_measure(2, [0.3, 0.7])
    phi = bernoulli_potential(full_shift(2), [0.3, 0.7])
    w = (0, 1, 1, 0)
    assert math.isclose(birkhoff_sum(phi, w), math.log(mu.weight(w)), rel_tol=1e-14)


@given(st.sampled_from(sorted(BUILTIN)), st.floats(-3, 3, allow_nan=False), st.data())
def test_scaling_is_exact(name, t, data):
    make, lo, hi = BUILTIN[name]
    phi = make()
    w = data.draw(st.lists(st.integers(lo, hi), min_size=1, max_size=6))
    assert birkhoff_sum(phi.scaled(t), w) == t * birkhoff_sum(phi, w)


@given(st.sampled_from(["gauss", "luroth", "nary", "bernoulli", "modified-gauss"]), st.data())
def test_cocycle_bracket(name, data):
    make, lo, hi = BUILTIN[name]
    phi = make()
    w = data.draw(st.lists(st.integers(lo, hi), min_size=1, max_size=4))
    v = data.draw(st.lists(st.integers(lo, hi), min_size=1, max_size=4))
    if name == "modified-gauss":
        # keep words admissible: after a digit i > 1 the next digit is below i
        w, v = [1] * len(w), [1] * len(v)
    m, n = len(w), len(v)
    lhs = birkhoff_sum(phi, w + v) - birkhoff_sum(phi, w) - birkhoff_sum(phi, v)
    bound = sum(phi.variation_bound(j) for j in range(1, m + 1))
    assert abs(lhs) <= bound + 1e-12


def test_variation_bounds_decrease_for_gauss():
    phi = gauss_log_deriv()
    v = [phi.variation_bound(n) for n in range(1, 12)]
    assert all(b <= a for a, b in zip(v, v[1:]))
    assert v[-1] < 1e-3


def test_mean_value_birkhoff_inside_bracket():
    phi = gauss_log_deriv()
    words = np.array([[1, 2, 3], [4, 1, 1], [7, 7, 2]])
    lo, rep, hi = phi.birkhoff_bounds(words)
    mv = phi.mean_value_birkhoff(words)
    assert np.all(lo <= mv + 1e-12) and np.all(mv <= hi + 1e-12)
