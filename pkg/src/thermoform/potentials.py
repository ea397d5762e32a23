"""Potentials on the shift space with variation bounds and regularity tags.

A potential is evaluated on words.  Birkhoff sums S_n phi are taken at the
canonical extension of a word (its representative point); ``birkhoff_bounds``
additionally returns the inf and sup of S_n phi over the whole cylinder of the
word, which is what rigorous pressure brackets consume.

Scaling ``phi.scaled(t)`` multiplies every output by ``t`` and nothing else,
so S_n(t phi) == t * S_n(phi) holds bit for bit.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .interval_maps import (GOLDEN, GaussMap, IntervalMapModel, LurothMap, ModifiedGaussMap,
                            MPInduced, MPOriginal, NAryMap, mp_backward_orbit)
from .symbolic import ChainError, SymbolicPoint, TruncatedChain, enumerate_words


@dataclass(frozen=True)
class Regularity:
    kind: str  # locally-constant | weakly-hoelder | summable-variations | walters-only | non-hoelder
    depth: Optional[int] = None
    A: Optional[float] = None
    theta: Optional[float] = None

    def describe(self) -> str:
        if self.kind == "locally-constant":
            return f"locally-constant(depth {self.depth})"
        if self.kind == "weakly-hoelder":
            return f"weakly-hoelder(A={self.A:.4g}, theta={self.theta:.4g})"
        return self.kind


def _as_words(words) -> np.ndarray:
    arr = np.asarray(words, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


class Potential:
    """Base class.  Subclasses implement the unscaled ``_birkhoff``."""

    name = "potential"
    regularity = Regularity("summable-variations")
    scale = 1.0
    _sup: Optional[float] = None
    _inf: Optional[float] = None

    # ---- subclass hooks -----------------------------------------------------
    def _birkhoff(self, words: np.ndarray, n: int):
        """Unscaled (lo, rep, hi) of S_n phi over the cylinders of ``words``."""
        raise NotImplementedError

    def _variation(self, n: int) -> float:
        raise NotImplementedError

    def _evaluate_point(self, point: SymbolicPoint) -> float:
        raise NotImplementedError

    # ---- public API ---------------------------------------------------------
    def scaled(self, t: float) -> "Potential":
        out = copy.copy(self)
        out.scale = self.scale * float(t)
        return out

    def _apply_scale(self, lo, rep, hi):
        s = self.scale
        if s == 1.0:
            return lo, rep, hi
        if s >= 0:
            return s * lo, s * rep, s * hi
        return s * hi, s * rep, s * lo

    def birkhoff(self, words, n: Optional[int] = None) -> np.ndarray:
        """S_n phi at the canonical extension of each word (n defaults to the length)."""
        w = _as_words(words)
        n = w.shape[1] if n is None else n
        _, rep, _ = self._birkhoff(w, n)
        return self.scale * rep

    def birkhoff_bounds(self, words, n: Optional[int] = None):
        """(lo, rep, hi): inf, representative value and sup of S_n phi on each cylinder."""
        w = _as_words(words)
        n = w.shape[1] if n is None else n
        return self._apply_scale(*self._birkhoff(w, n))

    def variation_bound(self, n: int) -> float:
        return abs(self.scale) * self._variation(int(n))

    @property
    def sup_bound(self) -> Optional[float]:
        if self.scale >= 0:
            return None if self._sup is None else self.scale * self._sup
        return None if self._inf is None else self.scale * self._inf

    def evaluate(self, point: SymbolicPoint) -> float:
        return self.scale * self._evaluate_point(point)

    def __call__(self, word) -> float:
        return float(self.birkhoff([tuple(word)], 1)[0])


# ================================================================ constant

class ConstantPotential(Potential):
    def __init__(self, c: float, name: str = "constant"):
        self.c = float(c)
        self.name = name
        self.regularity = Regularity("locally-constant", depth=0)
        self._sup = self._inf = self.c

    def _birkhoff(self, words, n):
        v = np.full(len(words), n * self.c)
        return v, v, v

    def _variation(self, n):
        return 0.0

    def _evaluate_point(self, point):
        return self.c


def nary_log_deriv(N: int) -> ConstantPotential:
    """-log|f'| for x -> N x mod 1, identically -log N."""
    return ConstantPotential(-math.log(N), name=f"nary-{N}")


# ================================================================ tables

class TablePotential(Potential):
    """phi(x) = table[x_0 ... x_{k-1}] on a truncated chain."""

    def __init__(self, chain: TruncatedChain, depth: int,
                 table: Mapping[tuple, float] | Callable[[tuple], float], name: str = "table"):
        if depth < 1:
            raise ValueError("table depth must be at least 1")
        self.chain = chain
        self.k = depth
        self.name = name
        self.regularity = Regularity("locally-constant", depth=depth)
        A = chain.alphabet_size
        if A ** depth > 10_000_000:
            raise ValueError("table too large for dense storage")
        dense = np.full(A ** depth, np.nan)
        for w in enumerate_words(chain, depth):
            val = table(w) if callable(table) else table.get(w)
            if val is None:
                raise ChainError(f"table has no entry for admissible word {w}")
            dense[self._index(np.array([w]))[0]] = float(val)
        self.dense = dense
        finite = dense[np.isfinite(dense)]
        self._sup = float(finite.max())
        self._inf = float(finite.min())

    def _index(self, words):
        A = self.chain.alphabet_size
        idx = np.zeros(len(words), dtype=np.int64)
        for j in range(words.shape[1]):
            idx = idx * A + (words[:, j] - self.chain.offset)
        return idx

    def _lookup_sum(self, words, n):
        total = np.zeros(len(words))
        for j in range(n):
            total += self.dense[self._index(words[:, j:j + self.k])]
        return total

    def _birkhoff(self, words, n):
        need = n + self.k - 1
        L = words.shape[1]
        if L >= need:
            v = self._lookup_sum(words, n)
            return v, v, v
        rep = np.empty(len(words))
        lo = np.empty(len(words))
        hi = np.empty(len(words))
        for i, w in enumerate(words):
            w = tuple(int(s) for s in w)
            rep[i] = self._lookup_sum(np.array([self.chain.canonical_extension(w, need)]), n)[0]
            vals = [self._lookup_sum(np.array([w + ext]), n)[0]
                    for ext in self._extensions(w[-1], need - L)]
            lo[i], hi[i] = min(vals), max(vals)
        return lo, rep, hi

    def _extensions(self, last, m):
        out = [()]
        for _ in range(m):
            out = [e + (s,) for e in out for s in self.chain.successors(e[-1] if e else last)]
        return out

    def _variation(self, n):
        if n >= self.k:
            return 0.0
        A = self.chain.alphabet_size
        t = self.dense.reshape(A ** n, A ** (self.k - n)) if n > 0 else self.dense[None, :]
        with np.errstate(all="ignore"):
            spread = np.nanmax(t, axis=1) - np.nanmin(t, axis=1)
        return float(np.nanmax(spread))

    def _evaluate_point(self, point):
        w = np.array([point.prefix(self.k)])
        return float(self.dense[self._index(w)[0]])


def bernoulli_potential(chain: TruncatedChain, probs: Sequence[float]) -> TablePotential:
    """phi(x) = log p_{x_0}; its equilibrium state is the Bernoulli measure."""
    probs = [float(p) for p in probs]
    if len(probs) != chain.alphabet_size or abs(sum(probs) - 1.0) > 1e-12:
        raise ValueError("probabilities must match the alphabet and sum to 1")
    table = {(s,): math.log(probs[s - chain.offset]) for s in chain.symbols}
    return TablePotential(chain, 1, table, name="bernoulli")


# ================================================================ interval maps

@lru_cache(maxsize=None)
def _gauss_max_diameter(m: int) -> float:
    """Largest Gauss cylinder with m digits: all ones, 1/(q_m (q_m + q_{m-1}))."""
    if m <= 0:
        return 1.0
    q_prev, q = 1, 1  # q_0, q_1 for the all-ones expansion
    for _ in range(m - 1):
        q_prev, q = q, q + q_prev
    return 1.0 / (q * (q + q_prev))


@lru_cache(maxsize=None)
def _modified_gauss_diameters(mmax: int = 10) -> tuple:
    """Largest modified-Gauss cylinder with m digits, m <= mmax, by enumeration.

    Digits beyond 4 only shrink cylinders (each branch k >= 2 contracts by at
    least 1/(k-1)^2 relative to branch 2), so a small alphabet suffices.
    """
    from .symbolic import word_array
    model = ModifiedGaussMap()
    chain = model.chain(4)
    out = [1.0]
    for m in range(1, mmax + 1):
        out.append(float(model.cylinder_lengths(word_array(chain, m)).max()))
    return tuple(out)


def _modified_gauss_max_diameter(m: int) -> float:
    table = _modified_gauss_diameters()
    if m < len(table):
        return table[m]
    k = len(table) - 1
    ratio = max(table[k] / table[k - 1], table[k - 1] / table[k - 2])
    return table[k] * ratio ** (m - k)


class IntervalPotential(Potential):
    """phi = -log|f' o pi| = log|psi_{x_0}'(pi(sigma x))| for an interval map model."""

    def __init__(self, model: IntervalMapModel, name: Optional[str] = None,
                 regularity: Optional[Regularity] = None, eval_depth: int = 64):
        self.model = model
        self.name = name or f"{model.name}-log-deriv"
        self.eval_depth = eval_depth
        self.regularity = regularity or Regularity("weakly-hoelder")
        self._tail_y = model.canonical_tail_point()
        self._sup = _log_deriv_sup(model)
        self._inf = None

    # lower-level helpers -----------------------------------------------------
    def _remaining_interval(self, words, n):
        """Closure of pi(sigma^n C(w)) as endpoint arrays."""
        m = self.model
        L = words.shape[1]
        if L > n:
            return m.cylinder_bounds(words[:, n:])
        lo = np.empty(len(words))
        hi = np.empty(len(words))
        last = words[:, -1]
        for s in np.unique(last):
            a, b = m.image(int(s))
            lo[last == s], hi[last == s] = float(a), float(b)
        return lo, hi

    def _birkhoff(self, words, n):
        m = self.model
        if n == 0:
            z = np.zeros(len(words))
            return z, z, z
        L = words.shape[1]
        if L > n:
            y_rep, _ = m.compose_inverse(words[:, n:], self._tail_y)
        else:
            y_rep = np.full(len(words), self._tail_y)
        head = words[:, :n]
        _, rep = m.compose_inverse(head, y_rep)
        lo_y, hi_y = self._remaining_interval(words, n)
        _, v0 = m.compose_inverse(head, lo_y)
        _, v1 = m.compose_inverse(head, hi_y)
        lo = np.minimum(v0, v1)
        hi = np.maximum(v0, v1)
        return np.minimum(lo, rep), rep, np.maximum(hi, rep)

    def mean_value_birkhoff(self, words, n: Optional[int] = None) -> np.ndarray:
        """log(|P_w| / |P_{sigma^n w}|): S_n phi averaged over the cylinder."""
        w = _as_words(words)
        n = w.shape[1] if n is None else n
        m = self.model
        full = m.log_cylinder_lengths(w)
        if w.shape[1] > n:
            rest = m.log_cylinder_lengths(w[:, n:])
        else:
            last = w[:, -1]
            rest = np.array([math.log(float(m.image(int(s))[1]) - float(m.image(int(s))[0]))
                             for s in last])
        return self.scale * (full - rest)

    def _variation(self, n):
        return log_deriv_variation(self.model, n)

    def _evaluate_point(self, point):
        w = np.array([point.prefix(self.eval_depth)])
        y, _ = self.model.compose_inverse(w[:, 1:], self._tail_y)
        _, logd = self.model.compose_inverse(w[:, :1], y)
        return float(logd[0])


def _log_deriv_sup(model) -> float:
    if isinstance(model, NAryMap):
        return -math.log(model.N)
    if isinstance(model, LurothMap):
        return -math.log(2.0)
    if isinstance(model, MPInduced):
        return -math.log(float(model.base.deriv(model.base.a0)))
    return 0.0  # Gauss, modified Gauss and the MP map: |psi'| <= 1


@lru_cache(maxsize=64)
def _mp_variation_table(alpha: float, nmax: int = 14):
    """Exact oscillation of log F' over every n-cylinder (n <= nmax), by enumeration."""
    model = MPOriginal(alpha)
    out = [math.inf]
    for n in range(1, nmax + 1):
        words = ((np.arange(2 ** n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)
        lo, hi = model.cylinder_bounds(words)
        osc = np.log(model.deriv(hi)) - np.log(model.deriv(lo))
        out.append(float(osc.max()))
    return tuple(out)


@lru_cache(maxsize=64)
def _mp_induced_lipschitz(alpha: float) -> float:
    """sup over branches of |d/dy log|psi_j'(y)||, estimated on a grid with margin."""
    model = MPInduced(alpha, J=400)
    y = np.linspace(0.0, 1.0, 401)
    _, d = model.branch_table(y, 300)
    slope = np.abs(np.diff(np.log(d), axis=1)) / np.diff(y)[None, :]
    return 1.25 * float(slope.max())


def log_deriv_variation(model: IntervalMapModel, n: int) -> float:
    """Upper bound for V_n of -log|f' o pi| on the model's coding."""
    if isinstance(model, NAryMap):
        return 0.0
    if isinstance(model, LurothMap):
        return math.inf if n == 0 else 0.0
    if n == 0:
        if model.countable:
            return math.inf
        return math.log(2.0 + model.alpha)  # log F' ranges over [0, log(2 + alpha)]
    if isinstance(model, (GaussMap, ModifiedGaussMap)):
        # log|psi_k'(y)| = const - 2 log(c y + d) with c/(c y + d) <= 1 on the
        # branch's image, so its oscillation on an (n-1)-cylinder Q is at
        # most 2 log(1 + |Q|)
        if isinstance(model, GaussMap):
            return 2.0 * math.log1p(_gauss_max_diameter(n - 1))
        return 2.0 * math.log1p(_modified_gauss_max_diameter(n - 1))
    if isinstance(model, MPOriginal):
        table = _mp_variation_table(model.alpha)
        if n < len(table):
            return table[n]
        # beyond the enumerated depth the 0^n cylinder (0, a_{n-1}) dominates;
        # scale its exact oscillation by the largest observed ratio
        a = mp_backward_orbit(model.alpha, n - 1, model.a0)
        zero_run = np.log1p((1.0 + model.alpha) * a ** model.alpha)
        k = len(table) - 1
        ratio = max(1.0, table[k] / zero_run[k - 1])
        return float(ratio * zero_run[n - 1])
    if isinstance(model, MPInduced):
        theta = 1.0 / float(model.base.deriv(model.base.a0))
        return _mp_induced_lipschitz(model.alpha) * theta ** (n - 1)
    raise TypeError(f"no variation bound for {type(model).__name__}")


def gauss_log_deriv() -> IntervalPotential:
    """phi(w) = 2 log pi(w) for the Gauss map."""
    return IntervalPotential(GaussMap(), "gauss-log-deriv",
                             Regularity("weakly-hoelder", A=2.0, theta=GOLDEN ** 2))


def modified_gauss_log_deriv() -> IntervalPotential:
    return IntervalPotential(ModifiedGaussMap(), "modified-gauss-log-deriv",
                             Regularity("weakly-hoelder", A=2.0, theta=GOLDEN ** 2))


def luroth_log_deriv() -> IntervalPotential:
    """-log(n(n+1)) on the digit n: locally constant of depth 1."""
    return IntervalPotential(LurothMap(), "luroth-log-deriv", Regularity("locally-constant", depth=1))


def mp_log_deriv(alpha: float) -> IntervalPotential:
    """-log F' on the two-symbol coding of the Manneville-Pomeau map (not Hoelder at 0)."""
    return IntervalPotential(MPOriginal(alpha), f"mp-log-deriv-{alpha:g}",
                             Regularity("non-hoelder"), eval_depth=400)


def mp_induced_log_deriv(alpha: float, J: int = 4000) -> IntervalPotential:
    model = MPInduced(alpha, J)
    theta = 1.0 / float(model.base.deriv(model.base.a0))
    return IntervalPotential(model, f"mp-induced-log-deriv-{alpha:g}",
                             Regularity("weakly-hoelder", theta=theta))


def interval_potential(model: IntervalMapModel) -> Potential:
    """-log|f'| for any shipped model."""
    if isinstance(model, NAryMap):
        return nary_log_deriv(model.N)
    if isinstance(model, GaussMap):
        return gauss_log_deriv()
    if isinstance(model, ModifiedGaussMap):
        return modified_gauss_log_deriv()
    if isinstance(model, LurothMap):
        return luroth_log_deriv()
    if isinstance(model, MPOriginal):
        return mp_log_deriv(model.alpha)
    if isinstance(model, MPInduced):
        return IntervalPotential(model, f"mp-induced-log-deriv-{model.alpha:g}")
    raise TypeError(f"unsupported model {type(model).__name__}")


# ================================================================ free functions

def eval_on_cylinder(phi: Potential, word: Sequence[int], mode: str = "representative"):
    """phi at the canonical extension of ``word``, or a bracket for sup/inf on its cylinder.

    The bracket is [rep - V, rep + V] with V the variation bound at the word
    length, intersected with the range of phi over the cylinder when that
    range is known exactly.
    """
    w = np.array([tuple(int(s) for s in word)])
    lo, rep, hi = phi.birkhoff_bounds(w, 1)
    rep = float(rep[0])
    if mode == "representative":
        return rep
    if mode != "sup-bracket":
        raise ValueError(f"unknown mode {mode!r}")
    V = phi.variation_bound(w.shape[1])
    return (max(rep - V, float(lo[0])), min(rep + V, float(hi[0])))


def birkhoff_sum(phi: Potential, word: Sequence[int], n: Optional[int] = None) -> float:
    w = np.array([tuple(int(s) for s in word)])
    return float(phi.birkhoff(w, n)[0])


def periodic_birkhoff_sum(phi: Potential, word: Sequence[int], repeats: int = 8) -> float:
    """S_n phi at the periodic point with period ``word``."""
    w = tuple(int(s) for s in word)
    ext = np.array([w * repeats])
    return float(phi.birkhoff(ext, len(w))[0])
