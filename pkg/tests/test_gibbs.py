import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermoform.gibbs import (
    PerturbedMeasure, bernoulli_measure, export_measure_csv, fit_decay, gauss_measure,
    gibbs_sample_words, good_set_fraction, import_measure_csv, lebesgue_measure,
    measure_entropy_and_lyapunov, mixing_correlation, rpf_measure, sample_cylinder_words,
    verify_gibbs_ratio,
)
from thermoform.interval_maps import GaussMap, LurothMap
from thermoform.potentials import (
    bernoulli_potential, gauss_log_deriv, luroth_log_deriv, nary_log_deriv,
)
from thermoform.symbolic import full_shift, word_array

GAUSS_ENTROPY = math.pi ** 2 / (6 * math.log(2))
# sum log(n(n+1)) / (n(n+1)): mpmath, head to 2000 plus an Euler-Maclaurin tail
LUROTH_ENTROPY = 2.04627745285587859107
GAUSS_MASS_OF_ONE = 0.41503749927884381855  # log(4/3) / log 2


@pytest.fixture(scope="module")
def gauss_rpf():
    return rpf_measure(GaussMap().chain(200), gauss_log_deriv())


def test_rpf_two_shift_is_fair_coin():
    mu = rpf_measure(full_shift(2), nary_log_deriv(2))
    for w in [(0,), (1, 0), (0, 1, 1, 0, 1)]:
        assert math.isclose(mu.weight(w), 2.0 ** -len(w), rel_tol=1e-12)


def test_rpf_gauss_first_cylinder(gauss_rpf):
    assert abs(gauss_rpf.weight((1,)) / GAUSS_MASS_OF_ONE - 1) < 0.01


def test_rpf_gauss_density_matches_closed_form(gauss_rpf):
    x = np.linspace(0.01, 0.99, 50)
    ref = 1.0 / ((1.0 + x) * math.log(2))
    assert np.max(np.abs(gauss_rpf.density(x) / ref - 1)) < 0.02


def test_rpf_luroth_is_lebesgue():
    mu = rpf_measure(LurothMap().chain(200), luroth_log_deriv())
    for w in [(2,), (1, 2, 3), (5, 1, 7, 2)]:
        expect = np.prod([1.0 / (a * (a + 1)) for a in w])
        assert math.isclose(mu.weight(w), expect, rel_tol=1e-10)


def test_gibbs_ratio_exact_on_bernoulli():
    ch = full_shift(2)
    mu = bernoulli_measure(2, [0.3, 0.7])
    rep = verify_gibbs_ratio(mu, bernoulli_potential(ch, [0.3, 0.7]), gibbs_sample_words(ch, 10, 2))
    assert rep.max_ratio_violation == 0.0
    assert rep.fitted_K_growth == 0.0


def test_gibbs_ratio_plateaus_on_gauss(gauss_rpf):
    words = gibbs_sample_words(GaussMap().chain(200), 10, 20, cap=5000)
    rep = verify_gibbs_ratio(gauss_rpf, gauss_log_deriv(), words)
    by_n = rep.log_max_ratio_by_n
    assert abs(rep.fitted_K_growth) < 0.02
    late = [by_n[n] for n in range(4, 11)]
    assert max(late) - min(late) < 0.05
    assert max(rep.fitted_c.values()) < 2.0


def test_gibbs_ratio_flags_perturbation():
    ch = full_shift(2)
    mu = PerturbedMeasure(bernoulli_measure(2), (0, 1), 1.5)
    rep = verify_gibbs_ratio(mu, nary_log_deriv(2), gibbs_sample_words(ch, 6, 2))
    assert rep.max_ratio_violation > 0.4


def test_entropy_bernoulli():
    r = measure_entropy_and_lyapunov(bernoulli_measure(2), nary_log_deriv(2), 1)
    assert math.isclose(r["entropy_estimate"], math.log(2), rel_tol=1e-14)
    assert math.isclose(r["integral_phi"], -math.log(2), rel_tol=1e-14)
    assert abs(r["pressure_check"]) < 1e-14


def test_entropy_gauss_measure():
    r = measure_entropy_and_lyapunov(gauss_measure(), gauss_log_deriv(), 1)
    assert abs(r["entropy_estimate"] - GAUSS_ENTROPY) < 1e-3
    assert abs(r["entropy_quadrature"] - GAUSS_ENTROPY) < 1e-9
    assert abs(r["pressure_check"]) < 1e-3


def test_entropy_luroth():
    r = measure_entropy_and_lyapunov(lebesgue_measure(LurothMap()), luroth_log_deriv(), 1,
                                     first_A=2000, context_B=100)
    assert abs(r["entropy_quadrature"] - LUROTH_ENTROPY) < 1e-9
    assert abs(r["entropy_estimate"] - LUROTH_ENTROPY) < 1e-4


def test_luroth_entropy_oracle():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    f = lambda n: mp.log(n * (n + 1)) / (n * (n + 1))  # noqa: E731
    assert abs(float(mp.nsum(f, [1, mp.inf], method="euler-maclaurin")) - LUROTH_ENTROPY) < 1e-15


def test_good_set_bernoulli_on_target():
    r = good_set_fraction(bernoulli_measure(2), nary_log_deriv(2), (0,), 1, 0.01, 8)
    assert r["fraction"] == 1.0


def test_good_set_gauss_monotone_in_M():
    mu, phi = gauss_measure(), gauss_log_deriv()
    fr = [good_set_fraction(mu, phi, (1,), M, 0.3, 12, samples=8000)["fraction"] for M in (3, 5, 8)]
    assert all(0.0 < f < 1.0 for f in fr)
    assert fr[0] < fr[1] < fr[2]


def test_good_set_huge_epsilon():
    r = good_set_fraction(gauss_measure(), gauss_log_deriv(), (1,), 5, 10.0, 12, samples=2000)
    assert r["fraction"] == 1.0


def test_mixing_bernoulli_exact():
    mu = bernoulli_measure(3, [0.2, 0.3, 0.5])
    for ell in (1, 2, 5):
        assert mixing_correlation(mu, (0,), (1,), (2,), 1, ell)["deviation"] < 1e-12


def test_mixing_gauss_decays():
    mu = gauss_measure()
    rows = [mixing_correlation(mu, (1,), (1,), (1,), 1, ell, orbit_samples=400_000)
            for ell in (1, 2, 8)]
    fit = fit_decay([1, 2], [rows[0]["deviation"], rows[1]["deviation"]])
    assert fit["rho"] < 1.0
    assert rows[0]["deviation"] > 3 * rows[0]["stderr"]
    assert rows[2]["deviation"] < 4 * rows[2]["stderr"]


def test_mixing_short_range_branch():
    r = mixing_correlation(gauss_measure(), (1,), (1,), (1,), 1, 0, orbit_samples=20_000)
    assert r["short_range"] and math.isfinite(r["deviation"])


def test_sampled_gauss_digits_follow_the_measure():
    W = sample_cylinder_words(gauss_measure(), 3, 400_000, seed=5)
    for j in range(3):
        p = np.mean(W[:, j] == 1)
        assert abs(p - GAUSS_MASS_OF_ONE) < 5 * math.sqrt(p * (1 - p) / len(W))


@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=4), st.integers(1, 9))
def test_additivity_closed_form(raw, depth):
    p = np.array(raw) / np.sum(raw)
    p[-1] = 1.0 - p[:-1].sum()
    mu = bernoulli_measure(len(p), p)
    ch = mu.chain
    words = word_array(ch, depth, cap=10**6)
    for w in words[:: max(1, len(words) // 20)]:
        assert mu.additivity_defect(tuple(w)) < 1e-6


def test_additivity_gauss_density():
    mu = gauss_measure(2000)
    rng = np.random.default_rng(0)
    for _ in range(10):
        w = tuple(int(v) for v in rng.integers(1, 5, size=rng.integers(1, 10)))
        tail = 1.0 / (2000 + 1)  # mass of digits beyond the truncation is O(1/A) of mu(w)
        assert mu.additivity_defect(w) <= 2 * tail * mu.weight(w)


def test_pressure_check_converges():
    mu = rpf_measure(full_shift(3), bernoulli_potential(full_shift(3), [0.2, 0.3, 0.5]))
    phi = bernoulli_potential(full_shift(3), [0.2, 0.3, 0.5])
    checks = [measure_entropy_and_lyapunov(mu, phi, n)["pressure_check"] for n in (1, 2, 3)]
    assert all(abs(c) < 1e-10 for c in checks)


def test_measure_csv_roundtrip(tmp_path):
    mu = bernoulli_measure(2, [0.25, 0.75])
    export_measure_csv(mu, 4, tmp_path / "m.csv")
    back = import_measure_csv(mu.chain, tmp_path / "m.csv")
    for w in word_array(mu.chain, 4):
        assert back.weight(tuple(w)) == mu.weight(tuple(w))
