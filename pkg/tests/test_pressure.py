import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermoform.interval_maps import GaussMap, LurothMap
from thermoform.potentials import (
    ConstantPotential, gauss_log_deriv, luroth_log_deriv, nary_log_deriv,
)
from thermoform.pressure import (
    pressure, pressure_collocation, pressure_cylinder_sum, pressure_gap, pressure_gurevich,
    transfer_operator_leading,
)
from thermoform.symbolic import ChainError, TruncatedChain, full_shift
from thermoform.target import builtin_example

# log sum_{n>=1} (n(n+1))^(-t): head summed exactly, tail by the binomial expansion
# (1 + 1/n)^(-t) = sum_k binom(-t, k) n^(-k) against Hurwitz zeta values (mpmath, 30 digits)
LUROTH_LOG_SUM = {
    0.6: 1.6127001660118921811,
    0.75: 0.69860134388944075263,
    0.9: 0.22678053040368838869,
    1.0: 0.0,
}


def luroth_oracle(t, A=200, K=60):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    t = mp.mpf(t)
    head = mp.fsum((n * (n + 1)) ** (-t) for n in range(1, A + 1))
    tail = mp.fsum(mp.binomial(-t, k) * mp.zeta(2 * t + k, A + 1) for k in range(K))
    return float(mp.log(head + tail))


def test_frozen_luroth_values_match_oracle():
    for t, v in LUROTH_LOG_SUM.items():
        assert abs(luroth_oracle(t) - v) < 1e-15


@pytest.mark.parametrize("n", [1, 3, 8])
def test_two_shift_uniform_is_zero(n):
    est = pressure_cylinder_sum(full_shift(2), nary_log_deriv(2), 1.0, n)
    assert est.value == 0.0 and est.lo == 0.0 and est.hi == 0.0


@given(st.floats(-3, 3, allow_nan=False))
def test_two_shift_closed_form(t):
    est = pressure_cylinder_sum(full_shift(2), nary_log_deriv(2), t, 4)
    assert abs(est.value - (1 - t) * math.log(2)) < 1e-12


def test_luroth_cylinder_sum_against_series():
    est = pressure_cylinder_sum(LurothMap().chain(10_000), luroth_log_deriv(), 0.75, 1)
    assert abs(est.value - LUROTH_LOG_SUM[0.75]) < 1e-8
    assert est.lo <= LUROTH_LOG_SUM[0.75] <= est.hi


def test_gurevich_entropy_of_two_shift():
    ch = full_shift(2)
    vals = [pressure_gurevich(ch, ConstantPotential(0.0), 1.0, 0, n).value for n in (4, 8, 16)]
    for n, v in zip((4, 8, 16), vals):
        assert abs(v - (n - 1) / n * math.log(2)) < 1e-12
    assert vals[0] < vals[1] < vals[2] < math.log(2)


def test_gurevich_gauss_bracket_contains_zero():
    est = pressure_gurevich(GaussMap().chain(60), gauss_log_deriv(), 1.0, 1, 6)
    assert est.lo <= 0.0 <= est.hi


def test_gurevich_rejects_non_mixing():
    ch = TruncatedChain(np.array([[0, 1], [1, 0]], dtype=bool))
    with pytest.raises(ChainError):
        pressure_gurevich(ch, ConstantPotential(0.0), 1.0, 0, 4)


def test_gap_at_one_and_zero():
    assert pressure_gap(full_shift(2), nary_log_deriv(2), 1.0).value == 0.0
    g0 = pressure_gap(full_shift(2), nary_log_deriv(2), 0.0)
    assert abs(g0.value - math.log(2)) < 1e-12


def test_gauss_gap_diverges_at_one_half():
    g = pressure_gap(GaussMap().chain(200), gauss_log_deriv(), 0.5)
    assert g.diverged and math.isinf(g.value)


def test_transfer_operator_two_shift():
    r = transfer_operator_leading(full_shift(2), nary_log_deriv(2), 1.0)
    assert abs(r["lambda"] - 1.0) < 1e-12
    h = r["eigvec"]
    assert np.allclose(h, h[0], rtol=1e-12)


def test_transfer_operator_gauss_lambda():
    r = transfer_operator_leading(GaussMap().chain(200), gauss_log_deriv(), 1.0, 1)
    assert abs(r["lambda"] - 1.0) < 1e-3


def test_transfer_operator_at_zero_is_spectral_radius():
    m = np.array([[1, 1, 0], [0, 0, 1], [1, 0, 1]], dtype=bool)
    r = transfer_operator_leading(TruncatedChain(m), ConstantPotential(-1.0), 0.0)
    rho = max(abs(np.linalg.eigvals(m.astype(float))))
    assert abs(r["lambda"] - rho) < 1e-10


def test_collocation_gauss_zero_at_one():
    est = pressure_collocation(GaussMap(), 1.0)
    assert abs(est.value) < 1e-9 and est.lo <= 0.0 <= est.hi


@pytest.mark.parametrize("name", ["bernoulli", "nary", "gauss", "luroth", "mp"])
@pytest.mark.parametrize("t", [0.75, 1.0, 1.5])
def test_methods_agree_within_brackets(name, t):
    ex = builtin_example(name)
    ch = ex.chain.restrict(min(ex.chain.alphabet_size, 40))
    countable = ex.model is not None and ex.model.countable
    ests = [pressure(ch, ex.phi, t, "cylinder-sum", n=2 if countable else 8),
            pressure(ch, ex.phi, t, "periodic-orbit", n=6),
            pressure(ch, ex.phi, t, "transfer-matrix")]
    lo = max(e.lo for e in ests)
    hi = min(e.hi for e in ests)
    assert lo <= hi + 1e-12


def test_truncation_is_monotone():
    phi = luroth_log_deriv()
    lows = [pressure_cylinder_sum(LurothMap().chain(A), phi, 0.8, 1).lo for A in (10, 50, 200, 1000)]
    assert all(b >= a for a, b in zip(lows, lows[1:]))
