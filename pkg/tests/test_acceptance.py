"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the summary lines.
"""

import json
import math
import time

import numpy as np
import pytest

from thermoform.cantor import (build_pattern, frostman_check, frostman_measure,
                               hungerford_lower_bound)
from thermoform.cli import main
from thermoform.gibbs import (bernoulli_measure, gibbs_sample_words, measure_entropy_and_lyapunov,
                              rpf_measure, verify_gibbs_ratio)
from thermoform.interval_maps import GaussMap, LurothMap, mp_tail_check
from thermoform.monte_carlo import ExperimentPlan, bc_dichotomy, box_dimension, middle_thirds
from thermoform.potentials import bernoulli_potential, gauss_log_deriv, luroth_log_deriv, \
    nary_log_deriv
from thermoform.pressure import pressure_cylinder_sum, pressure_gap
from thermoform.symbolic import full_shift
from thermoform.target import (BUILTIN_EXAMPLES, TargetSpec, bowen_root, builtin_example,
                               dimension_bounds, integral_phi_by_derivative)

GAUSS_ENTROPY = math.pi ** 2 / (6.0 * math.log(2.0))


def report(number, title, ok, detail=""):
    print(f"\ncriterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
    assert ok, f"criterion {number} failed: {detail}"


# ------------------------------------------------------------ 1

def test_criterion_01_gauss_entropy():
    start = time.perf_counter()
    mu = rpf_measure(GaussMap().chain(200), gauss_log_deriv())
    r = measure_entropy_and_lyapunov(mu, gauss_log_deriv(), 1)
    elapsed = time.perf_counter() - start
    err_block = abs(r["entropy_estimate"] - GAUSS_ENTROPY)
    err_quad = abs(r["entropy_quadrature"] - GAUSS_ENTROPY)
    report(1, "Gauss entropy", err_block < 1e-3 and err_quad < 1e-6 and elapsed < 10.0,
           f"block err {err_block:.2e}, quadrature err {err_quad:.2e}, {elapsed:.1f} s")


# ------------------------------------------------------------ 2

def _tail_integral(t, K, terms=12):
    """int_K^inf (x(x+1))^-t dx by the binomial series of (1 + 1/x)^-t (K >> 1)."""
    total, coef = 0.0, 1.0
    for k in range(terms):
        total += coef * K ** (1.0 - 2.0 * t - k) / (2.0 * t + k - 1.0)
        coef *= (-t - k) / (k + 1.0)
    return total


def luroth_series_oracle(t, K=2_000_000):
    """log sum_{n>=1} (n(n+1))^-t: direct head plus midpoint of the integral tail bracket."""
    n = np.arange(1, K + 1, dtype=float)
    head = math.fsum((n * (n + 1.0)) ** -t)
    # f decreasing: int_{K+1}^inf f <= sum_{n>K} f(n) <= int_K^inf f
    lo, hi = _tail_integral(t, K + 1.0), _tail_integral(t, float(K))
    return math.log(head + 0.5 * (lo + hi)), 0.5 * (hi - lo) / head


def test_criterion_02_luroth_closed_form():
    worst = 0.0
    chain = LurothMap().chain(10_000)
    for t in (0.6, 0.75, 0.9, 1.0):
        est = pressure_cylinder_sum(chain, luroth_log_deriv(), t, 1)
        oracle, half_width = luroth_series_oracle(t)
        assert half_width < 1e-7
        worst = max(worst, abs(est.value - oracle))
    g1 = pressure_gap(LurothMap().chain(1000), luroth_log_deriv(), 1.0).value
    report(2, "Luroth pressure", worst < 1e-6 and abs(g1) < 1e-6,
           f"max |P - oracle| {worst:.2e}, G(1) {g1:.1e}")


# ------------------------------------------------------------ 3

def test_criterion_03_nshift_bowen_family():
    worst = 0.0
    for N in (2, 3, 10):
        h = math.log(N)
        for s in (0.0, 0.5 * h, h, 5.0 * h):
            T = bowen_root(full_shift(N), nary_log_deriv(N), s).T
            worst = max(worst, abs(T - h / (h + s)))
    report(3, "N-shift Bowen family", worst < 1e-10, f"max error {worst:.2e}")


# ------------------------------------------------------------ 4

def test_criterion_04_gibbs_ratio():
    mu = rpf_measure(GaussMap().chain(400), gauss_log_deriv())
    words = gibbs_sample_words(GaussMap().chain(400), 10, 20, cap=20_000)
    rep = verify_gibbs_ratio(mu, gauss_log_deriv(), words)
    ch = full_shift(2)
    coin = verify_gibbs_ratio(bernoulli_measure(2, [0.3, 0.7]),
                              bernoulli_potential(ch, [0.3, 0.7]), gibbs_sample_words(ch, 10, 2))
    ok = abs(rep.fitted_K_growth) <= 0.02 and coin.max_ratio_violation == 0.0
    report(4, "Gibbs ratio", ok, f"Gauss slope {rep.fitted_K_growth:+.4f} over "
           f"{rep.words_checked} words, Bernoulli violation {coin.max_ratio_violation}")


# ------------------------------------------------------------ 5

def _gap_shape(ex):
    ts = np.linspace(ex.t_sing, 1.0, 22)[1:]
    est = [pressure_gap(ex.chain, ex.phi, float(t), ex.config) for t in ts]
    v = np.array([e.value for e in est])
    # bracket width plus a few ulps of the value absorbs exact closed forms evaluated in floats
    slack = np.array([e.hi - e.lo for e in est]) + 1e-12 * (1.0 + np.abs(v))
    mono = all(v[i + 1] - v[i] <= slack[i] + slack[i + 1] for i in range(len(v) - 1))
    convex = all(v[i - 1] - 2 * v[i] + v[i + 1] >= -(slack[i - 1] + 2 * slack[i] + slack[i + 1])
                 for i in range(1, len(v) - 1))
    g1 = est[-1]
    return mono, convex, g1.lo <= 0.0 <= g1.hi and abs(g1.value) <= g1.hi - g1.lo + 1e-12


def _ordering(name, ex):
    cfg = dict(ex.config, t_sing=ex.t_sing)
    if name in ("mp", "mp-induced"):
        h = -integral_phi_by_derivative(ex.chain, ex.phi, cfg)
        sol = bowen_root(ex.chain, ex.phi, 1.0, cfg)
        lower = h / (h + 1.0)
        return lower, sol.T_minus, sol.T_plus
    target = TargetSpec(center=(int(ex.chain.symbols[0]),), depth_rule="n", period=1)
    r = dimension_bounds(ex.chain, ex.phi, ex.measure(), target, dict(cfg, n_grid=[4, 8, 12, 16]))
    return r["lower_hs"], r["lower_T_minus"], r["upper_T_plus"]


def test_criterion_05_pressure_gap_shape():
    failures = []
    for name in BUILTIN_EXAMPLES:
        ex = builtin_example(name)
        mono, convex, g1 = _gap_shape(ex)
        lower, tm, tp = _ordering(name, ex)
        ordered = lower <= tm + 1e-9 and tm <= tp + 1e-9
        if not (mono and convex and g1 and ordered):
            failures.append(f"{name}(mono={mono}, convex={convex}, G1={g1}, "
                            f"order={lower:.4f}/{tm:.4f}/{tp:.4f})")
    report(5, "pressure-gap shape", not failures,
           "; ".join(failures) or f"{len(BUILTIN_EXAMPLES)} examples")


# ------------------------------------------------------------ 6

def test_criterion_06_hungerford_frostman():
    mu = bernoulli_measure(2)
    tree = build_pattern(full_shift(2), mu, TargetSpec(center=(0,), depth_rule="n", period=1), 6)
    D = hungerford_lower_bound(tree)["D_minus"]
    chk = frostman_check(frostman_measure(tree, mu), mu, D - 0.05)
    ok = abs(D - 0.5) < 0.05 and math.isfinite(chk["max_c"]) and not chk["growth_detected"]
    report(6, "Hungerford/Frostman", ok,
           f"D- {D:.4f}, max_c {chk['max_c']:.3f} to depth {tree.depth()}")


# ------------------------------------------------------------ 7

def test_criterion_07_box_counting():
    start = time.perf_counter()
    calib = box_dimension(middle_thirds(10))["slope"]
    # radius 2^-n around the center is the depth rule l_n = u n / log 2 = n
    tree = build_pattern(full_shift(2), bernoulli_measure(2),
                         TargetSpec(center=(0,), depth_rule="n", period=1), 8)
    slope = box_dimension(tree)["slope"]
    elapsed = time.perf_counter() - start
    ok = abs(calib - math.log(2) / math.log(3)) <= 0.03 and abs(slope - 0.5) <= 0.05 \
        and elapsed < 60.0
    report(7, "box counting", ok,
           f"middle-thirds {calib:.4f}, tree slope {slope:.4f}, {elapsed:.1f} s")


# ------------------------------------------------------------ 8

def _bc_plan(rule):
    return ExperimentPlan(model="gauss", radius_rule=rule, orbit_count=10_000, horizon_n=10_000,
                          rng_seed=2024, hit_threshold=10, after=100, chunk=250)


@pytest.fixture(scope="module")
def bc_convergent():
    return bc_dichotomy(_bc_plan("n**-2"))


@pytest.fixture(scope="module")
def bc_divergent():
    return bc_dichotomy(_bc_plan("1/(4*n)"))


def test_criterion_08a_borel_cantelli_convergent(bc_convergent):
    frac = bc_convergent["fraction_hit_after"]
    lo, hi = bc_convergent["ci99_hit_after"]
    report("8a", "Borel-Cantelli convergent radii", hi <= 0.05,
           f"hit after n=100: {frac:.4f}, 99% CI [{lo:.4f}, {hi:.4f}]")


def test_criterion_08b_borel_cantelli_divergent(bc_divergent):
    frac = bc_divergent["fraction_hitting_at_least_K"]
    lo, hi = bc_divergent["ci99_at_least_K"]
    report("8b", "Borel-Cantelli divergent radii", lo >= 0.95,
           f">=10 hits: {frac:.4f}, 99% CI [{lo:.4f}, {hi:.4f}], mean hits "
           f"{bc_divergent['mean_hits']:.2f} vs stationary expectation "
           f"{bc_divergent['expected_hits_stationary']:.2f}")


# ------------------------------------------------------------ 9

def test_criterion_09_mp_phase(tmp_path):
    cfg = {"model": {"name": "mp", "alpha": 0.5}, "target": {"rule": "exp 1"},
           "dimension": {"compare_x": [0.0, 0.3]}}
    (tmp_path / "mp.json").write_text(json.dumps(cfg))
    rc = main(["dimension", "--config", str(tmp_path / "mp.json"), "--out", str(tmp_path)])
    d = json.loads((tmp_path / "dimension.json").read_text())
    by_x = {r["x"]: r for r in d["by_x"]}
    tail = mp_tail_check(0.5, jmax=200)
    ok = (rc == 0 and d["assertion"]["T(x=0) > T(x!=0)"]
          and by_x[0.0]["u_effective"] == (1 - 0.5) * 1.0 and by_x[0.3]["u_effective"] == 1.0
          and 0.01 <= tail["min"] and tail["max"] <= 100.0)
    report(9, "MP phase", ok, f"T(0) {by_x[0.0]['T']:.4f} > T(0.3) {by_x[0.3]['T']:.4f}, "
           f"tail constants [{tail['min']:.3f}, {tail['max']:.3f}]")


# ------------------------------------------------------------ 10

DETERMINISM_RUNS = [
    ("pressure", {"model": {"name": "gauss"}, "pressure": {"t_grid": [0.7, 1.0, 1.5]}}),
    ("dimension", {"model": {"name": "nary", "N": 3}, "target": {"rule": "exp 1"}}),
    ("cantor", {"model": {"name": "bernoulli"}, "cantor": {"levels": 4}}),
    ("simulate", {"model": {"name": "gauss"}, "seed": 5,
                  "experiment": {"radius_rule": "0.25/n", "orbit_count": 600, "horizon_n": 400,
                                 "chunk": 64}}),
    ("diagnose", {"model": {"name": "bernoulli"}, "seed": 5,
                  "diagnose": {"depth": 5, "mixing": {"k": 1, "ell": [1, 2]}}}),
]


def test_criterion_10_determinism(tmp_path):
    mismatches = []
    for i, (cmd, cfg) in enumerate(DETERMINISM_RUNS):
        path = tmp_path / f"c{i}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for run, threads in enumerate((1, 4, 1)):
            out = tmp_path / f"r{i}_{run}"
            rc = main([cmd, "--config", str(path), "--out", str(out), "--threads", str(threads)])
            assert rc == 0
            outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        if not (outs[0] == outs[1] == outs[2]):
            mismatches.append(cmd)
    report(10, "determinism", not mismatches,
           f"{len(DETERMINISM_RUNS)} commands x 3 runs (threads 1/4/1)"
           + (f", mismatched: {mismatches}" if mismatches else ""))
