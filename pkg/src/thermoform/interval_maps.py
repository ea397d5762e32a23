"""Concrete Markov interval maps and their cylinder geometry.

Every model exposes its inverse branches psi_s (one per symbol), the
derivative |psi_s'|, the partition interval P_s and the image f(P_s).
Cylinders are obtained by composing inverse branches right to left.  For the
maps whose branches are Moebius transformations with integer coefficients
(N-ary, Gauss, modified Gauss, Lueroth) cylinder endpoints are exact
fractions; the Manneville-Pomeau maps are solved numerically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .symbolic import (ChainError, TruncatedChain, countable_full_shift, full_shift,
                       modified_gauss_chain, mp_induced_chain)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LOG2 = math.log(2.0)


class CylinderInterval(NamedTuple):
    word: tuple
    a: float
    b: float
    diameter: float
    exact: Optional[tuple] = None  # (Fraction, Fraction) when available


def _hurwitz(s, q):
    s = np.asarray(s, dtype=float)
    out = np.where(s > 1.0, zeta(np.maximum(s, 1.0 + 1e-300), q), np.inf)
    return out


class IntervalMapModel:
    """Base class; subclasses provide the branch data."""

    name = "model"
    offset = 0
    countable = False
    n_symbols: Optional[int] = None
    exact = False
    full_branch = True

    # --- branch data (subclasses) ------------------------------------------
    def partition(self, sym: int):
        raise NotImplementedError

    def image(self, sym: int):
        return (0.0, 1.0)

    def inverse(self, sym, y):
        raise NotImplementedError

    def inverse_deriv(self, sym, y):
        raise NotImplementedError

    def symbol_of(self, x: float) -> int:
        raise NotImplementedError

    def symbol_array(self, x):
        """Vectorized symbol_of."""
        return np.vectorize(self.symbol_of, otypes=[float])(np.asarray(x, dtype=float))

    def forward(self, x: float):
        """Return (symbol, f(x)) for a point inside a partition interval."""
        raise NotImplementedError

    def deriv(self, x):
        """|f'(x)| for points inside partition intervals."""
        raise NotImplementedError

    def chain(self, A: Optional[int] = None) -> TruncatedChain:
        raise NotImplementedError

    def return_time(self, sym):
        return np.ones_like(np.asarray(sym), dtype=float)

    def acip_density(self, x):
        return None

    def acip_cdf(self, x):
        return None

    def tail_sum(self, t: float, A: int, y, kind: str = "estimate", p: float = 0.0):
        """Sum over symbols beyond the truncation of exp(-p R) |psi'(y)|^t."""
        return np.zeros_like(np.asarray(y, dtype=float))

    # --- generic geometry ----------------------------------------------------
    def least_symbol(self) -> int:
        return self.offset

    def fixed_point(self, sym: int) -> float:
        y = 0.5
        for _ in range(2000):
            y_new = float(self.inverse(np.array([sym]), np.array([y]))[0])
            if abs(y_new - y) < 1e-16:
                return y_new
            y = y_new
        return y

    def canonical_tail_point(self, last: Optional[int] = None) -> float:
        """Projection of the canonical extension after a word ending in ``last``.

        All shipped chains have least successor equal to the least symbol, so
        the canonical tail is constant and its projection a fixed point.
        """
        return self.fixed_point(self.least_symbol())

    def compose_inverse(self, words: np.ndarray, y):
        """psi_{w_0} o ... o psi_{w_{n-1}}(y) and the log-derivative, vectorized.

        ``words`` has shape (m, n); ``y`` broadcasts against (m,).
        """
        words = np.atleast_2d(words)
        y = np.broadcast_to(np.asarray(y, dtype=float), (words.shape[0],)).copy()
        logd = np.zeros(words.shape[0])
        for k in range(words.shape[1] - 1, -1, -1):
            s = words[:, k]
            logd += np.log(self.inverse_deriv(s, y))
            y = self.inverse(s, y)
        return y, logd

    def _partition_arrays(self, syms):
        """Partition endpoints for an array of symbols."""
        uniq, inv = np.unique(syms, return_inverse=True)
        ends = np.array([[float(v) for v in self.partition(int(s))] for s in uniq])
        return ends[inv, 0], ends[inv, 1]

    def cylinder_bounds(self, words: np.ndarray):
        """Float endpoints (lo, hi) of the cylinder intervals of many words."""
        lo, hi, _ = self.cylinder_geometry(words, with_length=False)
        return lo, hi

    def cylinder_geometry(self, words: np.ndarray, with_length: bool = True):
        """Endpoints and log-lengths of many cylinders in one backward pass."""
        words = np.atleast_2d(words)
        last = words[:, -1]
        lo, hi = self._partition_arrays(last)
        loglen = None
        if with_length:
            if isinstance(self, MPInduced):
                loglen = np.log(self.partition_measure(last))
            else:
                loglen = np.log(hi - lo)
        for k in range(words.shape[1] - 2, -1, -1):
            s = words[:, k]
            if with_length:
                loglen = loglen + self.log_branch_ratio(s, lo, hi)
            u = self.inverse(s, lo)
            v = self.inverse(s, hi)
            lo, hi = np.minimum(u, v), np.maximum(u, v)
        return lo, hi, loglen

    def cylinder_lengths(self, words: np.ndarray):
        return np.exp(self.log_cylinder_lengths(words))

    def log_branch_ratio(self, sym, y0, y1):
        """log(|psi(y1) - psi(y0)| / |y1 - y0|), the mean-value log-derivative."""
        y0 = np.asarray(y0, dtype=float)
        y1 = np.asarray(y1, dtype=float)
        gap = np.abs(y1 - y0)
        wide = gap > 1e-6
        safe0 = np.where(wide, y0, 0.0)
        safe1 = np.where(wide, y1, 1.0)
        diff = np.abs(self.inverse(sym, safe1) - self.inverse(sym, safe0))
        direct = np.log(np.maximum(diff, 1e-300)) - np.log(np.where(wide, gap, 1.0))
        mid = np.log(self.inverse_deriv(sym, 0.5 * (y0 + y1)))
        return np.where(wide, direct, mid)

    def log_cylinder_lengths(self, words: np.ndarray):
        """log of the cylinder lengths, free of endpoint cancellation."""
        return self.cylinder_geometry(words)[2]

    def check_word(self, word: Sequence[int]) -> tuple:
        w = tuple(int(s) for s in word)
        if not w:
            raise ChainError("empty word")
        A = max(max(w) - self.offset + 1, 2)
        if self.n_symbols is not None:
            A = self.n_symbols
        return self.chain(A).check_word(w)


def cylinder_interval(model: IntervalMapModel, word: Sequence[int]) -> CylinderInterval:
    """Closure of the cylinder interval P_{w_0...w_n}."""
    w = model.check_word(word)
    if model.exact:
        a, b = model.partition_exact(w[-1])
        for s in reversed(w[:-1]):
            u, v = model.inverse_exact(s, a), model.inverse_exact(s, b)
            a, b = min(u, v), max(u, v)
        return CylinderInterval(w, float(a), float(b), float(b - a), (a, b))
    lo, hi = model.cylinder_bounds(np.array([w]))
    return CylinderInterval(w, float(lo[0]), float(hi[0]), float(hi[0] - lo[0]))


def derivative_product(model: IntervalMapModel, word: Sequence[int]) -> float:
    """|(f^{n+1})'| at the midpoint of the cylinder of an (n+1)-symbol word."""
    cyl = cylinder_interval(model, word)
    if model.exact:
        x = (cyl.exact[0] + cyl.exact[1]) / 2
        # exact orbit through the Moebius branches
        total = 1.0
        for s in cyl.word:
            total *= float(model.deriv_exact(s, x))
            x = model.forward_exact(s, x)
        return total
    # no exact forward orbit: evaluate at the pull-back of the image midpoint,
    # which stays inside the cylinder without forward round-off
    y_mid = _image_midpoint(model, cyl.word)
    _, logd = model.compose_inverse(np.array([cyl.word]), y_mid)
    return float(np.exp(-logd[0]))


def _image_midpoint(model, word):
    """Point y in f^{n+1}(P_w) whose preimage is the cylinder midpoint."""
    lo, hi = model.image(word[-1])
    return 0.5 * (float(lo) + float(hi))


# ============================================================== Moebius maps

class MoebiusModel(IntervalMapModel):
    """Branches psi_s(y) = (a y + b) / (c y + d) with integer coefficients."""

    exact = True

    def coeffs(self, sym):
        raise NotImplementedError

    def inverse(self, sym, y):
        a, b, c, d = self.coeffs(np.asarray(sym))
        y = np.asarray(y, dtype=float)
        return (a * y + b) / (c * y + d)

    def inverse_deriv(self, sym, y):
        a, b, c, d = self.coeffs(np.asarray(sym))
        y = np.asarray(y, dtype=float)
        return np.abs(a * d - b * c) / (c * y + d) ** 2

    def inverse_exact(self, sym, y: Fraction) -> Fraction:
        a, b, c, d = (int(v) for v in self.coeffs(int(sym)))
        return Fraction(a * y + b) / (c * y + d)

    def forward_exact(self, sym, x: Fraction) -> Fraction:
        a, b, c, d = (int(v) for v in self.coeffs(int(sym)))
        # invert y -> (a y + b)/(c y + d)
        return Fraction(d * x - b) / (a - c * x)

    def deriv_exact(self, sym, x: Fraction) -> Fraction:
        y = self.forward_exact(sym, x)
        a, b, c, d = (int(v) for v in self.coeffs(int(sym)))
        return Fraction((c * y + d) ** 2) / abs(a * d - b * c)

    def partition(self, sym):
        a, b = self.partition_exact(int(sym))
        return float(a), float(b)

    def _partition_arrays(self, syms):
        if not self.full_branch:
            return super()._partition_arrays(syms)
        u = self.inverse(syms, 0.0)
        v = self.inverse(syms, 1.0)
        return np.minimum(u, v), np.maximum(u, v)

    def log_branch_ratio(self, sym, y0, y1):
        a, b, c, d = self.coeffs(np.asarray(sym))
        y0 = np.asarray(y0, dtype=float)
        y1 = np.asarray(y1, dtype=float)
        return (np.log(np.abs(a * d - b * c).astype(float))
                - np.log(c * y0 + d) - np.log(c * y1 + d))

    def forward(self, x: float):
        s = self.symbol_of(x)
        a, b, c, d = (float(v) for v in self.coeffs(s))
        return s, (d * x - b) / (a - c * x)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        s = np.vectorize(self.symbol_of)(x) if x.ndim else self.symbol_of(float(x))
        a, b, c, d = self.coeffs(np.asarray(s))
        y = (d * x - b) / (a - c * x)
        return (c * y + d) ** 2 / np.abs(a * d - b * c)


class NAryMap(MoebiusModel):
    """x -> N x mod 1 with digits 0..N-1 (also the z^N inner function)."""

    def __init__(self, N: int = 2):
        if N < 2:
            raise ValueError("N must be at least 2")
        self.N = N
        self.name = f"nary-{N}"
        self.offset = 0
        self.n_symbols = N

    def coeffs(self, sym):
        sym = np.asarray(sym)
        one = np.ones_like(sym)
        return one, sym, 0 * one, self.N * one

    def partition_exact(self, sym):
        return Fraction(sym, self.N), Fraction(sym + 1, self.N)

    def symbol_of(self, x):
        return min(int(x * self.N), self.N - 1)

    def symbol_array(self, x):
        return np.minimum(np.floor(np.asarray(x, dtype=float) * self.N), self.N - 1)

    def chain(self, A=None):
        return full_shift(self.N, 0, name=self.name)

    def acip_density(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def acip_cdf(self, x):
        return np.asarray(x, dtype=float)

    def fixed_point(self, sym):
        return sym / (self.N - 1.0)


class GaussMap(MoebiusModel):
    """x -> 1/x - floor(1/x); digit k on (1/(k+1), 1/k)."""

    name = "gauss"
    offset = 1
    countable = True

    def coeffs(self, sym):
        sym = np.asarray(sym)
        one = np.ones_like(sym)
        return 0 * one, one, one, sym

    def partition_exact(self, sym):
        return Fraction(1, sym + 1), Fraction(1, sym)

    def symbol_of(self, x):
        return int(math.floor(1.0 / x))

    def symbol_array(self, x):
        return np.floor(1.0 / np.asarray(x, dtype=float))

    def chain(self, A=None):
        return countable_full_shift(A or 50, 1, "gauss")

    def acip_density(self, x):
        return 1.0 / ((1.0 + np.asarray(x, dtype=float)) * LOG2)

    def acip_cdf(self, x):
        return np.log1p(np.asarray(x, dtype=float)) / LOG2

    def fixed_point(self, sym):
        return (math.sqrt(sym * sym + 4.0) - sym) / 2.0

    def tail_sum(self, t, A, y, kind="estimate", p=0.0):
        y = np.asarray(y, dtype=float)
        return math.exp(-p) * _hurwitz(2.0 * t, A + 1.0 + y)


class ModifiedGaussMap(MoebiusModel):
    """Gauss map on (1/2, 1); on (1/(k+1), 1/k), k >= 2, the rescaled branch
    (1 - 1/k)(1/x - k) + 1/k with image (1/k, 1)."""

    name = "modified-gauss"
    offset = 1
    countable = True
    full_branch = False

    def coeffs(self, sym):
        k = np.asarray(sym)
        one = np.ones_like(k)
        first = k == 1
        b = np.where(first, 1, k - 1)
        c = np.where(first, 1, k)
        d = np.where(first, 1, k * k - k - 1)
        return 0 * one, b, c, d

    def partition_exact(self, sym):
        return Fraction(1, sym + 1), Fraction(1, sym)

    def image(self, sym):
        return (0.0, 1.0) if sym == 1 else (1.0 / sym, 1.0)

    def image_exact(self, sym):
        return (Fraction(0), Fraction(1)) if sym == 1 else (Fraction(1, sym), Fraction(1))

    def symbol_of(self, x):
        return int(math.floor(1.0 / x))

    def symbol_array(self, x):
        return np.floor(1.0 / np.asarray(x, dtype=float))

    def chain(self, A=None):
        return modified_gauss_chain(A or 50)

    def fixed_point(self, sym):
        if sym != 1:
            raise ValueError("only the first branch has an interior fixed point")
        return GOLDEN

    def tail_sum(self, t, A, y, kind="estimate", p=0.0):
        """Symbols k > A whose image (1/k, 1) contains y."""
        y = np.asarray(y, dtype=float)
        B = 4096
        k = np.arange(A + 1, A + B + 1, dtype=float)[:, None]
        yy = y[None, ...] if y.ndim else np.array([[float(y)]])
        w = (k * (k - 1.0)) / (k * yy + k * k - k - 1.0) ** 2
        w = np.where(yy > 1.0 / k, w ** t, 0.0)
        head = w.sum(axis=0)
        K = A + B
        yv = yy[0]
        if kind == "lower":
            rest = _hurwitz(2.0 * t, K + 1.0 + yv)
        elif kind == "upper":
            rest = ((K + 1.0) / K) ** t * _hurwitz(2.0 * t, K + 1.0 + yv - 1.0 / K)
        else:
            rest = ((2.0 * K + 1.0) / (2.0 * K)) ** t * _hurwitz(2.0 * t, K + 1.0 + yv - 0.5 / K)
        out = math.exp(-p) * (head + rest)
        return out if y.ndim else float(out[0])


def _luroth_tail_integral(t, V):
    """Integral from V - 1/2 to infinity of (x(x+1))^(-t), i.e. of (v^2 - 1/4)^(-t) from V."""
    if 2.0 * t <= 1.0:
        return math.inf
    total, term_coef = 0.0, 1.0
    for k in range(200):
        term = term_coef * V ** (1.0 - 2.0 * t - 2.0 * k) / (2.0 * t + 2.0 * k - 1.0)
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
        term_coef *= (t + k) / (k + 1.0) / 4.0
    return total


class LurothMap(MoebiusModel):
    """x -> n(n+1) x - n on [1/(n+1), 1/n)."""

    name = "luroth"
    offset = 1
    countable = True

    def coeffs(self, sym):
        n = np.asarray(sym)
        one = np.ones_like(n)
        return one, n, 0 * one, n * (n + 1)

    def partition_exact(self, sym):
        return Fraction(1, sym + 1), Fraction(1, sym)

    def symbol_of(self, x):
        return int(math.floor(1.0 / x))

    def symbol_array(self, x):
        return np.floor(1.0 / np.asarray(x, dtype=float))

    def chain(self, A=None):
        return countable_full_shift(A or 50, 1, "luroth")

    def acip_density(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def acip_cdf(self, x):
        return np.asarray(x, dtype=float)

    def fixed_point(self, sym):
        return 1.0 / sym

    def tail_sum(self, t, A, y, kind="estimate", p=0.0):
        """Sum_{n > A} (n(n+1))^(-t) for the convex decreasing summand.

        Lower: integral from A + 1.  Upper: midpoint integral from A + 1/2.
        Estimate: midpoint integral plus the Euler-Maclaurin correction
        f'(A + 1/2)/24.
        """
        val = luroth_tail(t, A, kind)
        return np.full_like(np.asarray(y, dtype=float), math.exp(-p) * val)


def luroth_tail(t: float, A: int, kind: str = "estimate") -> float:
    if 2.0 * t <= 1.0:
        return math.inf
    if kind == "lower":
        return _luroth_tail_integral(t, A + 1.5)
    mid = _luroth_tail_integral(t, A + 1.0)
    if kind == "upper":
        return mid
    x = A + 0.5
    fprime = -t * (2.0 * x + 1.0) * (x * (x + 1.0)) ** (-t - 1.0)
    return mid + fprime / 24.0


# ============================================================== Manneville-Pomeau

def _mp_solve(alpha, target, lo, hi):
    """Solve x + x^(1+alpha) = target on [lo, hi] (vectorized, monotone)."""
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    # Newton from the upper end is monotone for this convex increasing map
    x = hi.copy()
    for _ in range(60):
        fx = x + x ** (1.0 + alpha) - target
        step = fx / (1.0 + (1.0 + alpha) * x ** alpha)
        x_new = np.clip(x - step, lo, hi)
        done = np.abs(x_new - x) <= 4e-16 * np.maximum(x_new, 1e-300)
        x = x_new
        if done.all():
            break
    return x


@dataclass
class MPOriginal(IntervalMapModel):
    """F(x) = x + x^(1+alpha) mod 1 with the two-interval partition."""

    alpha: float = 0.5
    name: str = "mp"
    offset: int = 0
    n_symbols: int = 2
    a0: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.a0 = float(_mp_bisect(self.alpha, 1.0, 0.0, 1.0))

    def F(self, x):
        x = np.asarray(x, dtype=float)
        v = x + x ** (1.0 + self.alpha)
        return np.where(v >= 1.0, v - 1.0, v)

    def partition(self, sym):
        return (0.0, self.a0) if sym == 0 else (self.a0, 1.0)

    def inverse(self, sym, y):
        sym = np.asarray(sym)
        y = np.asarray(y, dtype=float)
        tgt = y + (sym == 1)
        lo = np.where(sym == 1, self.a0, 0.0)
        hi = np.where(sym == 1, 1.0, self.a0)
        return _mp_solve(self.alpha, tgt + 0 * lo, lo + 0 * tgt, hi + 0 * tgt)

    def inverse_deriv(self, sym, y):
        x = self.inverse(sym, y)
        return 1.0 / (1.0 + (1.0 + self.alpha) * x ** self.alpha)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 + (1.0 + self.alpha) * x ** self.alpha

    def symbol_of(self, x):
        return 0 if x < self.a0 else 1

    def forward(self, x):
        s = self.symbol_of(x)
        return s, float(self.F(x))

    def chain(self, A=None):
        return full_shift(2, 0, name="mp")

    def fixed_point(self, sym):
        return 0.0 if sym == 0 else 1.0

    def tail_points(self, J: int) -> np.ndarray:
        """a_0, ..., a_J with F(a_{j+1}) = a_j."""
        return mp_backward_orbit(self.alpha, J, self.a0)


def _mp_bisect(alpha, target, lo, hi, rtol=1e-15):
    """Monotone bisection for x + x^(1+alpha) = target on (lo, hi)."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid + mid ** (1.0 + alpha) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def mp_backward_orbit(alpha: float, J: int, a0: Optional[float] = None) -> np.ndarray:
    """Backward orbit a_0 > a_1 > ... > a_J of the left branch, by bisection."""
    a = np.empty(J + 1)
    a[0] = a0 if a0 is not None else _mp_bisect(alpha, 1.0, 0.0, 1.0)
    for j in range(1, J + 1):
        a[j] = _mp_bisect(alpha, a[j - 1], 0.0, a[j - 1])
    return a


@dataclass
class MPInduced(IntervalMapModel):
    """First entry into (a_0, 1) followed by one more step: on P_j = (a_j, a_{j-1})
    (a_{-1} = 1) the induced map is F^(j+1), an onto branch with return time j+1."""

    alpha: float = 0.5
    J: int = 4000
    name: str = "mp-induced"
    offset: int = 0
    countable: bool = True
    a: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.base = MPOriginal(self.alpha)
        self.a = mp_backward_orbit(self.alpha, self.J, self.base.a0)

    def endpoints(self, j):
        j = np.asarray(j)
        upper = np.where(j == 0, 1.0, self.a[np.maximum(j - 1, 0)])
        return self.a[j], upper

    def partition(self, sym):
        lo, hi = self.endpoints(int(sym))
        return float(lo), float(hi)

    def partition_measure(self, j):
        """Lebesgue measure a_{j-1} - a_j = a_j^(1+alpha), cancellation free."""
        return self.a[np.asarray(j)] ** (1.0 + self.alpha)

    def return_time(self, sym):
        return np.asarray(sym, dtype=float) + 1.0

    def inverse(self, sym, y):
        sym = np.asarray(sym)
        y = np.asarray(y, dtype=float)
        sym, y = np.broadcast_arrays(sym, y)
        x = self.base.inverse(np.ones_like(sym), y)
        for step in range(1, int(sym.max(initial=0)) + 1):
            act = sym >= step
            x = np.where(act, _mp_solve(self.alpha, x, 0.0, x), x)
        return x

    def inverse_deriv(self, sym, y):
        sym = np.asarray(sym)
        y = np.asarray(y, dtype=float)
        sym, y = np.broadcast_arrays(sym, y)
        x = self.base.inverse(np.ones_like(sym), y)
        logd = -np.log(self.base.deriv(x))
        for step in range(1, int(sym.max(initial=0)) + 1):
            act = sym >= step
            x_new = _mp_solve(self.alpha, x, 0.0, x)
            logd = np.where(act, logd - np.log(self.base.deriv(x_new)), logd)
            x = np.where(act, x_new, x)
        return np.exp(logd)

    def branch_table(self, y, count: int):
        """psi_j(y) and |psi_j'(y)| for j = 0..count-1 and all y (shape (count, len(y)))."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        cache = self.__dict__.setdefault("_tables", {})
        key = y.tobytes()
        hit = cache.get(key)
        if hit is not None and hit[0].shape[0] >= count:
            return hit[0][:count], hit[1][:count]
        xs, ds = self._branch_table(y, count)
        if len(cache) > 64:
            cache.clear()
        cache[key] = (xs, ds)
        return xs, ds

    def _branch_table(self, y, count):
        xs = np.empty((count, y.size))
        ds = np.empty((count, y.size))
        x = self.base.inverse(np.ones(y.size, dtype=int), y)
        logd = -np.log(self.base.deriv(x))
        xs[0], ds[0] = x, logd
        for j in range(1, count):
            x = _mp_solve(self.alpha, x, 0.0, x)
            logd = logd - np.log(self.base.deriv(x))
            xs[j], ds[j] = x, logd
        return xs, np.exp(ds)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        j = np.vectorize(self.symbol_of)(x) if x.ndim else self.symbol_of(float(x))
        out = np.ones_like(x)
        cur = x.copy() if x.ndim else np.array(float(x))
        for step in range(int(np.max(j)) + 1):
            act = np.asarray(j) >= step
            out = np.where(act, out * self.base.deriv(cur), out)
            cur = np.where(act, self.base.F(cur), cur)
        return out

    def symbol_of(self, x):
        if x > self.a[0]:
            return 0
        j = int(np.searchsorted(-self.a, -x))  # first j with a_j < x
        if j > self.J:
            raise ValueError("point too close to 0 for the stored backward orbit")
        return j

    def forward(self, x):
        j = self.symbol_of(x)
        for _ in range(j + 1):
            x = float(self.base.F(x))
        return j, x

    def chain(self, A=None):
        return mp_induced_chain(A or 50)

    def fixed_point(self, sym):
        if sym == 0:
            return 1.0
        return super().fixed_point(sym)

    def tail_sum(self, t, A, y, kind="estimate", p=0.0):
        """Symbols beyond A: explicit block then a power-law remainder."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        B = 2048
        _, d = self.branch_table(y, A + B + 1)
        j = np.arange(A + B + 1)[:, None]
        w = np.exp(-p * (j + 1.0)) * d ** t
        head = w[A + 1:].sum(axis=0) if A + 1 < len(w) else np.zeros(y.size)
        # remainder beyond K = A + B: |psi_j'| ~ C j^(-gamma)
        K = A + B
        half = K // 2
        gam_loc = np.log(d[half] / d[K]) / math.log(K / half)
        gam_inf = 1.0 + 1.0 / self.alpha
        C = d[K] * K ** gam_loc
        if p > 0.0:
            # geometric weight dominates: bound by the last term times a geometric series
            last = np.exp(-p * (K + 1.0)) * d[K] ** t
            rest_hi = last / (1.0 - math.exp(-p))
            rest_lo = np.zeros_like(rest_hi)
            rest = {"lower": rest_lo, "upper": rest_hi, "estimate": 0.5 * rest_hi}[kind]
        else:
            g_lo, g_hi = np.minimum(gam_loc, gam_inf), np.maximum(gam_loc, gam_inf)
            r_hi = C ** t * _hurwitz(t * g_lo, K + 1.0) * K ** (t * (g_lo - gam_loc))
            r_lo = C ** t * _hurwitz(t * g_hi, K + 1.0) * K ** (t * (g_hi - gam_loc))
            rest = {"lower": r_lo, "upper": r_hi, "estimate": 0.5 * (r_lo + r_hi)}[kind]
        return head + rest


class MPModels(NamedTuple):
    original: MPOriginal
    induced: MPInduced


def mp_model(alpha: float, J: int = 4000) -> MPModels:
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return MPModels(MPOriginal(alpha), MPInduced(alpha, J))


def mp_tail_check(alpha: float, jmax: int = 200, J: int = 4000) -> dict:
    """lambda(P_j) (alpha (j + 1))^(1 + 1/alpha) for j = 0..jmax with its extremes."""
    m = MPInduced(alpha, max(J, jmax + 1))
    j = np.arange(jmax + 1)
    v = m.partition_measure(j) * (alpha * (j + 1.0)) ** (1.0 + 1.0 / alpha)
    return {"j": j.tolist(), "values": v.tolist(), "min": float(v.min()), "max": float(v.max()),
            "two_sided": bool(v.min() > 0 and np.isfinite(v.max()))}


def utilde(alpha: float, u: float, x: float) -> float:
    """Effective exponent: (1 - alpha) u at the indifferent fixed point, u elsewhere."""
    if u < 0:
        raise ValueError("u must be nonnegative")
    return (1.0 - alpha) * u if x == 0 else u


# ============================================================== diagnostics

def distortion_check(model: IntervalMapModel, word: Sequence[int],
                     subset_fraction: float = 0.25) -> dict:
    """Compare lambda(A)/lambda(P) with lambda(f^j A)/lambda(f^j P), j = 1..n+1.

    A is the middle ``subset_fraction`` of the cylinder P itself.  Its image
    f^{n+1}(A) is located by safeguarded Newton on the inverse branch, and every
    f^j(A) is then computed through inverse branches (no forward round-off).
    """
    w = model.check_word(word)
    n1 = len(w)
    if model.exact:
        return _distortion_exact(model, w, subset_fraction)
    lo, hi = model.image(w[-1])
    lo, hi = float(lo), float(hi)

    def pulled(k, a, b):
        if k >= n1:
            return a, b
        arr = np.array([w[k:]])
        u, _ = model.compose_inverse(arr, a)
        v, _ = model.compose_inverse(arr, b)
        return float(min(u[0], v[0])), float(max(u[0], v[0]))

    p0, p1 = pulled(0, lo, hi)
    half = 0.5 * subset_fraction * (p1 - p0)
    targets = 0.5 * (p0 + p1) + np.array([-half, half])
    arr = np.array([w, w])
    a_lo, a_hi = np.full(2, lo), np.full(2, hi)
    x_lo, _ = model.compose_inverse(arr, a_lo)
    increasing = x_lo[0] <= p0 + 0.5 * (p1 - p0)
    sign = 1.0 if increasing else -1.0
    y = lo + (hi - lo) * np.array([0.5 - 0.5 * subset_fraction, 0.5 + 0.5 * subset_fraction])
    # safeguarded Newton on y -> psi_w(y); bisection whenever Newton leaves the bracket
    for _ in range(200):
        xm, logd = model.compose_inverse(arr, y)
        below = (xm < targets) if increasing else (xm > targets)
        a_lo = np.where(below, y, a_lo)
        a_hi = np.where(below, a_hi, y)
        y_new = y - (xm - targets) / (sign * np.exp(logd))
        outside = ~((y_new > a_lo) & (y_new < a_hi))
        y_new = np.where(outside, 0.5 * (a_lo + a_hi), y_new)
        if np.all(np.abs(y_new - y) <= 4e-16 * np.maximum(np.abs(y), 1e-300)):
            a_lo = a_hi = y_new
            break
        y = y_new
    b0, b1 = sorted(0.5 * (a_lo + a_hi))
    # f^j(A), f^j(P) for j = n+1 down to 0, one inverse branch at a time
    pts = np.array([b0, b1, lo, hi])
    widths = []
    for k in range(n1 - 1, -1, -1):
        widths.append(abs(pts[1] - pts[0]) / abs(pts[3] - pts[2]))
        pts = np.asarray(model.inverse(np.full(4, w[k]), pts), dtype=float)
    base = abs(pts[1] - pts[0]) / abs(pts[3] - pts[2])
    ratios = [v / base for v in reversed(widths)]
    r = np.array(ratios)
    return {"word": list(w), "ratios": r.tolist(),
            "max_deviation": float(np.max(np.abs(r - 1.0))),
            "max_log_ratio": float(np.max(np.abs(np.log(r))))}


def _distortion_exact(model, w, subset_fraction):
    cyl = cylinder_interval(model, w)
    p0, p1 = cyl.exact
    frac = Fraction(subset_fraction).limit_denominator(10**6)
    a0 = p0 + (1 - frac) / 2 * (p1 - p0)
    a1 = a0 + frac * (p1 - p0)
    base = (a1 - a0) / (p1 - p0)
    ratios = []
    ends = [p0, p1, a0, a1]
    for s in w:
        ends = [model.forward_exact(s, e) for e in ends]
        fp = abs(ends[1] - ends[0])
        fa = abs(ends[3] - ends[2])
        ratios.append(float((fa / fp) / base))
    r = np.array(ratios)
    return {"word": list(w), "ratios": r.tolist(),
            "max_deviation": float(np.max(np.abs(r - 1.0))),
            "max_log_ratio": float(np.max(np.abs(np.log(r))))}


def markov_property_audit(model: IntervalMapModel, A: int = 40, samples: int = 200,
                          depth: int = 6) -> dict:
    """Numerical check of properties (a)-(g) of a Markov transformation."""
    report = {}
    chain = model.chain(A) if model.n_symbols is None else model.chain()
    syms = chain.symbols
    parts = np.array([[float(v) for v in model.partition(int(s))] for s in syms])
    order = np.argsort(parts[:, 0])
    p = parts[order]
    gaps = np.maximum(p[1:, 0] - p[:-1, 1], 0.0).sum()
    overlaps = np.maximum(p[:-1, 1] - p[1:, 0], 0.0).max(initial=0.0)
    covered = (p[:, 1] - p[:, 0]).sum()
    missing = 1.0 - covered
    # for truncated countable partitions the remainder is the tail (0, min endpoint)
    tail_len = float(p[:, 0].min()) if model.countable else 0.0
    report["a"] = {"pass": bool(gaps < 1e-12 and overlaps < 1e-12
                                and abs(missing - tail_len) < 1e-9),
                   "uncovered": float(missing), "tail_interval": tail_len}
    # (b): image endpoints are partition endpoints (or 0 / 1)
    ends = np.unique(np.concatenate([p.ravel(), [0.0, 1.0]]))
    bad = []
    for s in syms:
        lo, hi = model.image(int(s))
        for e in (float(lo), float(hi)):
            if np.min(np.abs(ends - e)) > 1e-10 and not (model.countable and e < tail_len):
                bad.append(int(s))
    report["b"] = {"pass": not bad, "bad_symbols": bad,
                   "images": {int(s): [float(v) for v in model.image(int(s))]
                              for s in syms[:6]}}
    # (c), (d): derivative lower bounds on sampled points
    rng = np.random.default_rng(12345)
    ys = rng.random(samples)
    words = np.array([chain.canonical_extension((int(s),), 1) for s in syms])
    sig = np.inf
    for s in syms:
        lo, hi = model.image(int(s))
        yy = float(lo) + (float(hi) - float(lo)) * ys
        sig = min(sig, float(np.min(1.0 / model.inverse_deriv(np.full(samples, s), yy))))
    report["c"] = {"pass": bool(sig > 0), "sigma": sig}
    best = None
    for n0 in (1, 2, 3):
        wa = _sample_words(chain, n0, rng, 2000)
        lo = np.empty(len(wa))
        for i, w in enumerate(wa):
            a, b = model.image(int(w[-1]))
            # endpoints included: derivative minima sit there for indifferent branches
            yy = float(a) + (float(b) - float(a)) * np.concatenate([[0.0, 1.0], ys[:14]])
            _, logd = model.compose_inverse(np.repeat(w[None, :], 16, axis=0), yy)
            lo[i] = np.min(np.exp(-logd))
        gamma = float(lo.min())
        if gamma > 1.0:
            best = (n0, gamma)
            break
        if n0 == 1:
            first_gamma = gamma
    report["d"] = {"pass": best is not None,
                   "n0": best[0] if best else None,
                   "gamma": best[1] if best else first_gamma}
    # (e) mixing via the chain
    from .symbolic import check_properties
    props = check_properties(chain, max_power=min(4 * chain.alphabet_size, 400))
    report["e"] = {"pass": props.mixing, "power": props.mixing_power}
    # (f) recurrence sums: assumed through the tail model
    report["f"] = {"pass": True, "status": "assumed via tail model"}
    # (g) derivative Hoelder ratio on partition intervals
    cs = []
    for s in syms[: min(len(syms), 30)]:
        a, b = model.image(int(s))
        yy = np.sort(float(a) + (float(b) - float(a)) * ys[:64])
        x = model.inverse(np.full(yy.size, s), yy)
        fd = 1.0 / model.inverse_deriv(np.full(yy.size, s), yy)
        r = np.abs(fd[1:] / fd[:-1] - 1.0) / np.maximum(np.abs(np.diff(x)), 1e-300)
        cs.append(float(r.max()))
    report["g"] = {"pass": bool(np.isfinite(max(cs))), "c_alpha1": max(cs)}
    report["BI"] = {"images_min_length": float(min(float(model.image(int(s))[1])
                                                   - float(model.image(int(s))[0])
                                                   for s in syms))}
    report["all_pass"] = all(report[k]["pass"] for k in "abcdefg")
    return report


def _sample_words(chain, n, rng, count):
    from .symbolic import count_words, word_array
    total = count_words(chain, n)
    if total <= count:
        return word_array(chain, n)
    out = np.empty((count, n), dtype=np.int64)
    for i in range(count):
        w = [int(rng.choice(chain.symbols))]
        while len(w) < n:
            w.append(int(rng.choice(chain.successors(w[-1]))))
        out[i] = w
    return out


def export_cylinders_csv(model: IntervalMapModel, words, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["word", "a", "b"])
        for w in words:
            c = cylinder_interval(model, w)
            wr.writerow([" ".join(str(s) for s in c.word), repr(c.a), repr(c.b)])


MODELS = {
    "nary": NAryMap,
    "gauss": GaussMap,
    "modified-gauss": ModifiedGaussMap,
    "luroth": LurothMap,
    "mp": MPOriginal,
    "mp-induced": MPInduced,
}


def make_model(name: str, **params) -> IntervalMapModel:
    if name not in MODELS:
        raise ValueError(f"unknown model {name!r}")
    cls = MODELS[name]
    if name in ("gauss", "modified-gauss", "luroth"):
        return cls()
    return cls(**params)
