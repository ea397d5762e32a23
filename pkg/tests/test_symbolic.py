import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermoform.symbolic import (
    ChainError, ResourceGuardError, SymbolicPoint, TruncatedChain, check_properties,
    count_words, enumerate_words, full_shift, metric, modified_gauss_chain, word_array,
)


def test_metric_first_difference():
    ch = TruncatedChain(np.ones((5, 5), dtype=bool), offset=0)
    x = SymbolicPoint(ch, (1, 2, 3))
    y = SymbolicPoint(ch, (1, 2, 4))
    d = metric(x, y)
    assert d.value == 0.25 and not d.depth_limited


def test_metric_identical_points_depth_limited():
    ch = full_shift(2)
    x = SymbolicPoint(ch, (0, 1), tail="periodic")
    y = SymbolicPoint(ch, (0, 1), tail="periodic")
    d = metric(x, y, max_depth=64)
    assert d.value == 0.0 and d.depth_limited


def test_metric_differs_at_zero():
    ch = full_shift(2)
    assert metric(SymbolicPoint(ch, (0,)), SymbolicPoint(ch, (1,))).value == 1.0


def test_enumerate_full_two_shift_lexicographic():
    words = list(enumerate_words(full_shift(2), 3))
    assert len(words) == 8
    assert words == sorted(words)
    assert np.array_equal(word_array(full_shift(2), 3), np.array(words))


def test_enumerate_modified_gauss_first_three():
    assert list(enumerate_words(modified_gauss_chain(3), 2, first=3)) == [(3, 1), (3, 2)]


def test_enumerate_empty_when_loop_forbidden():
    ch = TruncatedChain(np.array([[0, 1], [1, 0]], dtype=bool), offset=0)
    assert list(enumerate_words(ch, 2, first=0, last=0)) == []


def test_enumeration_cap():
    with pytest.raises(ResourceGuardError):
        word_array(full_shift(10), 8, cap=1000)


def test_full_shift_properties():
    rep = check_properties(full_shift(4))
    assert rep.mixing and rep.mixing_power == 1
    assert rep.BI and rep.BIP and rep.witness == (0,)


def test_modified_gauss_bip_not_full():
    rep = check_properties(modified_gauss_chain(30))
    assert rep.BIP and rep.mixing
    assert not rep.full


def test_period_two_not_mixing():
    rep = check_properties(TruncatedChain(np.array([[0, 1], [1, 0]], dtype=bool)))
    assert not rep.mixing and rep.mixing_status == "not-mixing"


def test_periodic_tail_must_close():
    ch = TruncatedChain(np.array([[0, 1], [1, 1]], dtype=bool))
    with pytest.raises(ChainError):
        SymbolicPoint(ch, (0,), tail="periodic")


matrices = st.integers(2, 6).flatmap(
    lambda A: st.lists(st.lists(st.booleans(), min_size=A, max_size=A), min_size=A, max_size=A))


@given(matrices, st.integers(1, 5))
def test_enumerated_words_are_admissible(m, n):
    ch = TruncatedChain(np.array(m, dtype=bool))
    for w in enumerate_words(ch, n):
        assert all(ch.allowed(a, b) for a, b in zip(w, w[1:]))


@given(st.integers(2, 12).flatmap(lambda A: st.tuples(
    st.lists(st.lists(st.booleans(), min_size=A, max_size=A), min_size=A, max_size=A),
    st.integers(0, A - 1))), st.integers(1, 8))
def test_counts_match_matrix_powers(args, n):
    m, i = args
    ch = TruncatedChain(np.array(m, dtype=bool))
    M = np.array(m, dtype=object).astype(int).astype(object)
    P = np.identity(len(m), dtype=object)
    for _ in range(n - 1):
        P = P.dot(M)
    assert count_words(ch, n, first=i) == int(P[i].sum())
    if count_words(ch, n, first=i) <= 5000:
        assert len(list(enumerate_words(ch, n, first=i))) == count_words(ch, n, first=i)


heads = st.lists(st.integers(0, 2), min_size=1, max_size=6)


@given(heads, heads, heads)
def test_metric_symmetric_and_ultrametric(a, b, c):
    ch = full_shift(3)
    x, y, z = (SymbolicPoint(ch, h, tail="periodic") for h in (a, b, c))
    dxy, dyz, dxz = metric(x, y).value, metric(y, z).value, metric(x, z).value
    assert dxy == metric(y, x).value
    assert dxz <= max(dxy, dyz)
