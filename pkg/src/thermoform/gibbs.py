"""Cylinder measures approximating (local weak) Gibbs measures and their diagnostics.

Three concrete measure families are provided:

* ``ProductMeasure``: Bernoulli measures on full shifts;
* ``MarkovMeasure``: stationary Markov measures on k-words, built from the
  leading eigendata of a depth-k Ruelle matrix (``rpf_measure``);
* ``DensityMeasure``: pushforwards of an absolutely continuous invariant
  density on an interval map (Gauss, Lueroth, N-ary closed forms, or the
  collocated eigenfunction for the modified Gauss map).

All of them expose ``log_weights`` on word arrays so that ratio tests can be
done in log space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .interval_maps import (GaussMap, IntervalMapModel, LurothMap, ModifiedGaussMap, MoebiusModel,
                            NAryMap)
from .potentials import IntervalPotential, Potential, TablePotential
from .pressure import (_PiecewiseCheb, _collocation_matrix, _collocation_pieces, _leading_eig,
                       depth_matrix, perron_root)
from .symbolic import TruncatedChain, count_words, full_shift, word_array

KINDS = ("gibbs", "weak-gibbs", "local-gibbs", "local-weak-gibbs")

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _as_words(words) -> np.ndarray:
    arr = np.asarray(words, dtype=np.int64)
    return arr[None, :] if arr.ndim == 1 else arr


class CylinderMeasure:
    """Weights of cylinders with the constants of the Gibbs inequality."""

    name = "measure"
    kind = "gibbs"
    P_const = 0.0
    chain: TruncatedChain
    reliable_depth = 64

    def log_weights(self, words) -> np.ndarray:
        raise NotImplementedError

    def weights(self, words) -> np.ndarray:
        return np.exp(self.log_weights(words))

    def weight(self, word: Sequence[int]) -> float:
        if len(word) == 0:
            return 1.0
        return float(self.weights(np.array([tuple(int(s) for s in word)]))[0])

    def K_seq(self, n: int) -> float:
        return 1.0

    def local_consts(self, symbol: int) -> float:
        return 1.0

    def additivity_defect(self, word: Sequence[int], A: Optional[int] = None) -> float:
        """|mu(w) - sum_a mu(w a)| over admissible one-symbol extensions (truncated at A)."""
        w = tuple(int(s) for s in word)
        ch = self.chain if A is None else self.chain.restrict(A)
        succ = ch.symbols if not w else ch.successors(w[-1])
        ext = np.array([w + (int(s),) for s in succ])
        return abs(self.weight(w) - float(self.weights(ext).sum()))


# ====================================================================== products

class ProductMeasure(CylinderMeasure):
    """Bernoulli measure: mu(w) = prod p_{w_j}, summed in log space in word order."""

    reliable_depth = 100_000  # log-space products do not underflow

    def __init__(self, chain: TruncatedChain, probs: Sequence[float], name: str = "bernoulli"):
        p = np.asarray(probs, dtype=float)
        if len(p) != chain.alphabet_size or abs(p.sum() - 1.0) > 1e-12 or (p <= 0).any():
            raise ValueError("probabilities must be positive, match the alphabet and sum to 1")
        if not chain.is_full:
            raise ValueError("product measures need a full shift")
        self.chain = chain
        self.logp = np.log(p)
        self.probs = p
        self.name = name
        self.kind = "gibbs"
        self.P_const = 0.0

    def log_weights(self, words):
        w = _as_words(words)
        total = np.zeros(len(w))
        for j in range(w.shape[1]):
            total += self.logp[w[:, j] - self.chain.offset]
        return total

    def potential(self) -> TablePotential:
        table = {(s,): float(self.logp[s - self.chain.offset]) for s in self.chain.symbols}
        return TablePotential(self.chain, 1, table, name=self.name)


def bernoulli_measure(N: int = 2, probs: Optional[Sequence[float]] = None) -> ProductMeasure:
    probs = [1.0 / N] * N if probs is None else probs
    return ProductMeasure(full_shift(N), probs)


# ====================================================================== Markov

class MarkovMeasure(CylinderMeasure):
    """Stationary Markov measure on k-word states."""

    def __init__(self, chain: TruncatedChain, states: np.ndarray, P, pi: np.ndarray,
                 P_const: float = 0.0, kind: str = "gibbs", name: str = "markov",
                 local: Optional[dict] = None, tail_mass: float = 0.0):
        self.chain = chain
        self.states = np.asarray(states, dtype=np.int64)
        self.k = self.states.shape[1]
        self.P = P.tocsr() if hasattr(P, "tocsr") else np.asarray(P)
        self.Pd = self.P.toarray() if hasattr(self.P, "toarray") else self.P
        self.pi = np.asarray(pi, dtype=float)
        self.P_const = P_const
        self.kind = kind
        self.name = name
        self._local = local or {}
        self.tail_mass = tail_mass
        A, off = chain.alphabet_size, chain.offset
        self._A, self._off = A, off
        idx = self._index(self.states)
        self._lookup = np.full(A ** self.k, -1, dtype=np.int64)
        self._lookup[idx] = np.arange(len(self.states))
        with np.errstate(divide="ignore"):
            self.logP = np.log(self.Pd)
            self.logpi = np.log(self.pi)

    def _index(self, words):
        idx = np.zeros(len(words), dtype=np.int64)
        for j in range(words.shape[1]):
            idx = idx * self._A + (words[:, j] - self._off)
        return idx

    def _state(self, words):
        return self._lookup[self._index(words)]

    def log_weights(self, words):
        w = _as_words(words)
        L = w.shape[1]
        k = self.k
        if L < k:
            # marginalize the stationary law over states with this prefix
            pref = self._index(self.states[:, :L])
            target = self._index(w)
            order = np.argsort(pref, kind="stable")
            sp = pref[order]
            cums = np.concatenate([[0.0], np.cumsum(self.pi[order])])
            lo = np.searchsorted(sp, target, "left")
            hi = np.searchsorted(sp, target, "right")
            with np.errstate(divide="ignore"):
                return np.log(cums[hi] - cums[lo])
        s = self._state(w[:, :k])
        out = np.where(s >= 0, self.logpi[np.maximum(s, 0)], -np.inf)
        for j in range(1, L - k + 1):
            s2 = self._state(w[:, j:j + k])
            step = np.where((s >= 0) & (s2 >= 0),
                            self.logP[np.maximum(s, 0), np.maximum(s2, 0)], -np.inf)
            out = out + step
            s = s2
        return out

    def local_consts(self, symbol):
        return self._local.get(int(symbol), 1.0)

    def correlation(self, P1, P2, P3, k: int, ell: int):
        """Exact mu(P1 & sigma^-k P2 & sigma^-(k+ell) P3) and the product term."""
        if self.k != 1:
            raise NotImplementedError("exact correlations are implemented for depth 1")

        def block(word, start_dist):
            # distribution after reading ``word`` starting from start_dist on states
            v = start_dist.copy()
            mass = np.zeros_like(v)
            first = word[0] - self._off
            mass[first] = v[first]
            for s in word[1:]:
                nxt = np.zeros_like(v)
                nxt[s - self._off] = (mass @ self.Pd)[s - self._off]
                mass = nxt
            return mass

        def advance(dist, steps):
            for _ in range(steps):
                dist = dist @ self.Pd
            return dist

        P1, P2, P3 = (tuple(int(s) for s in x) for x in (P1, P2, P3))
        if k < len(P1) or ell < len(P2):
            raise ValueError("blocks overlap: need k >= |P1| and ell >= |P2|")
        d = block(P1, self.pi)
        d = advance(d, k - len(P1) + 1)
        d12 = block(P2, d)
        m12 = float(d12.sum())
        d = advance(d12, ell - len(P2) + 1)
        m123 = float(block(P3, d).sum())
        m3 = float(self.weight(P3))
        return m123, m12 * m3


def rpf_measure(chain: TruncatedChain, phi: Potential, depth_k: int = 1,
                config: Optional[dict] = None) -> MarkovMeasure:
    """Markov measure from the leading eigendata of the depth-k Ruelle matrix of phi.

    mu(w) = l(s_0) prod M(s_j, s_{j+1}) r(s_last) / (lambda^(n-k) <l, r>), with
    l the eigenfunction and r the conformal masses.  For countable models the
    depth-1 matrix carries the lumped tail state; its mass is reported as
    ``tail_mass`` and words through it are not representable.
    """
    config = dict(config or {})
    mode = config.get("mode", "mean-value" if isinstance(phi, IntervalPotential) else
                      "representative")
    t = float(config.get("t", 1.0))
    tail = bool(config.get("tail", depth_k == 1))
    dm = depth_matrix(chain, phi, t, depth_k, mode, tail=tail)
    lam, l, r = perron_root(dm.M)
    if not np.isfinite(lam) or lam <= 0:
        raise RuntimeError("transfer matrix has no finite positive leading eigenvalue")
    model = getattr(phi, "model", None)
    if (config.get("h_correction", True) and depth_k == 1 and abs(t - 1.0) < 1e-12
            and isinstance(model, (GaussMap, ModifiedGaussMap, LurothMap, NAryMap))):
        return _corrected_density(model, chain, dm, l, lam, config)
    Md = dm.M.toarray()
    m = len(dm.states)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = Md * r[None, :] / (lam * r[:, None])
    P = np.nan_to_num(P)
    pi_full = l * r / float(l @ r)
    tail_mass = float(pi_full[m:].sum()) if dm.tail else 0.0
    # restricted to truncated states: transitions into the tail are lost mass
    pi = pi_full[:m]
    Pm = P[:m, :m]
    local = {}
    for s in chain.symbols:
        sel = dm.states[:, 0] == s
        if sel.any():
            hv = l[:m][sel]
            local[int(s)] = float(hv.max() / hv.min())
    return MarkovMeasure(chain, dm.states, Pm, pi, P_const=math.log(lam),
                         kind=config.get("kind", "gibbs"), name=f"rpf-{phi.name}",
                         local=local, tail_mass=tail_mass)


# ====================================================================== densities

class DensityMeasure(CylinderMeasure):
    """mu(P_w) = integral of an invariant density over the cylinder interval."""

    def __init__(self, model: IntervalMapModel, density: Callable, chain_A: int = 400,
                 name: Optional[str] = None, cdf: Optional[Callable] = None):
        self.model = model
        self.density = density
        self.cdf = cdf
        self.chain = model.chain(chain_A) if model.countable else model.chain()
        self.name = name or f"acip-{model.name}"
        self.kind = "gibbs"
        self.P_const = 0.0

    def log_weights(self, words):
        w = _as_words(words)
        lo, hi, loglen = self.model.cylinder_geometry(w)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = mid[:, None] + half[:, None] * _GL_X[None, :]
        avg = 0.5 * (self.density(pts) * _GL_W[None, :]).sum(axis=1)
        return loglen + np.log(avg)

    def sample_points(self, rng, count: int, within: Optional[tuple] = None) -> np.ndarray:
        """Points distributed by the density (inverse CDF when available)."""
        lo, hi = within if within is not None else (0.0, 1.0)
        if self.cdf is not None and isinstance(self.model, GaussMap):
            Fa, Fb = self.cdf(lo), self.cdf(hi)
            u = Fa + (Fb - Fa) * rng.random(count)
            return np.expm1(u * math.log(2.0))
        if self.cdf is not None:
            Fa, Fb = self.cdf(lo), self.cdf(hi)
            return lo + (hi - lo) * (rng.random(count) if Fa == lo else rng.random(count))
        # rejection sampling against the maximum on a grid
        grid = np.linspace(lo, hi, 2049)[1:-1]
        cap = 1.05 * float(np.max(self.density(grid)))
        out = np.empty(0)
        while out.size < count:
            x = lo + (hi - lo) * rng.random(2 * count)
            keep = rng.random(2 * count) * cap < self.density(x)
            out = np.concatenate([out, x[keep]])
        return out[:count]


def gauss_measure(chain_A: int = 400) -> DensityMeasure:
    m = GaussMap()
    return DensityMeasure(m, m.acip_density, chain_A, "gauss-measure", m.acip_cdf)


def lebesgue_measure(model: IntervalMapModel, chain_A: int = 400) -> DensityMeasure:
    return DensityMeasure(model, lambda x: np.ones_like(np.asarray(x, dtype=float)), chain_A,
                          f"lebesgue-{model.name}", lambda x: x)


def collocated_acip(model: IntervalMapModel, A: int = 1000, nodes: int = 10, pieces_K: int = 60,
                    chain_A: int = 400) -> DensityMeasure:
    """Invariant density from the collocated eigenfunction of the t = 1 transfer operator."""
    grid = _PiecewiseCheb(_collocation_pieces(model, pieces_K), nodes)
    Mtx = _collocation_matrix(model, 1.0, A, grid)
    _, v = _leading_eig(Mtx)
    v = np.abs(v)
    # normalize: integrate the piecewise interpolant with Gauss-Legendre on each piece
    total = 0.0
    for a, b in grid.pieces:
        x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
        total += 0.5 * (b - a) * float((grid.basis(x) @ v * _GL_W).sum())
    coef = v / total

    def density(x):
        x = np.asarray(x, dtype=float)
        return grid.evaluate(x, coef)

    return DensityMeasure(model, density, chain_A, f"acip-{model.name}")


def acip_measure(model: IntervalMapModel, chain_A: int = 400) -> DensityMeasure:
    if isinstance(model, GaussMap):
        return gauss_measure(chain_A)
    if isinstance(model, (LurothMap, NAryMap)):
        return lebesgue_measure(model, chain_A)
    if isinstance(model, ModifiedGaussMap):
        return collocated_acip(model, chain_A=chain_A)
    raise TypeError(f"no density measure for {type(model).__name__}")


class RPFDensityMeasure(DensityMeasure):
    """Density h dnu with h refined from the depth-1 eigenvector by the Ruelle operator."""

    def local_consts(self, symbol):
        return self._local.get(int(symbol), 1.0)


def _corrected_density(model, chain, dm, l, lam, config) -> RPFDensityMeasure:
    """h-correction of the depth-1 eigenvector.

    The depth-1 left vector l is the fixed point of the operator averaged on
    1-cylinders, so it carries an O(1) error where h varies across a cylinder.
    Applying the Ruelle operator to the piecewise-constant l contracts that
    error geometrically; the iteration runs on a piecewise Chebyshev grid
    until the nodal values stop moving.  For t = 1 the conformal measure of
    -log|f'| is Lebesgue, so mu(P_w) = integral of h over P_w.
    """
    nodes = int(config.get("nodes", 16))
    A_col = int(config.get("collocation_A", 1000))
    grid = _PiecewiseCheb(_collocation_pieces(model, int(config.get("pieces_K", 60))), nodes)
    y = grid.nodes
    m = len(dm.states)
    seed = np.zeros(y.size)
    for i, s in enumerate(dm.states[:, 0]):
        lo_img, hi_img = model.image(int(s))
        ok = (y >= float(lo_img)) & (y <= float(hi_img))
        ss = np.full(int(ok.sum()), int(s))
        seed[ok] += l[i] * model.inverse_deriv(ss, y[ok])
    if dm.tail and len(l) > m:
        A = chain.alphabet_size
        seed += l[m] * np.asarray(model.tail_sum(1.0, A, y, "estimate"), dtype=float)
    seed /= lam
    Mtx = _collocation_matrix(model, 1.0, A_col, grid)
    v = seed / np.max(np.abs(seed))
    steps = 0
    for steps in range(1, int(config.get("max_steps", 400)) + 1):
        w = Mtx @ v
        w /= np.max(np.abs(w))
        done = np.max(np.abs(w - v)) < 1e-13
        v = w
        if done:
            break
    total = 0.0
    for a, b in grid.pieces:
        x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
        total += 0.5 * (b - a) * float((grid.basis(x) @ v * _GL_W).sum())
    coef = v / total

    def density(x):
        x = np.asarray(x, dtype=float)
        return grid.evaluate(x, coef)

    mu = RPFDensityMeasure(model, density, chain.alphabet_size, f"rpf-{model.name}")
    mu.P_const = math.log(lam)
    mu.correction_steps = steps
    mu.depth1_lambda = lam
    local = {}
    for s in chain.symbols[: min(chain.alphabet_size, 64)]:
        a, b = model.partition(int(s))
        hv = density(np.linspace(a, b, 33)[1:-1])
        local[int(s)] = float(hv.max() / hv.min())
    mu._local = local
    return mu


# ====================================================================== perturbation

class PerturbedMeasure(CylinderMeasure):
    """A copy of ``base`` with the weight of one cylinder (and its subcylinders) scaled."""

    def __init__(self, base: CylinderMeasure, word: Sequence[int], factor: float = 1.5):
        self.base = base
        self.word = tuple(int(s) for s in word)
        self.factor = float(factor)
        self.chain = base.chain
        self.kind = base.kind
        self.P_const = base.P_const
        self.name = f"{base.name}-perturbed"

    def log_weights(self, words):
        w = _as_words(words)
        out = self.base.log_weights(w)
        L = len(self.word)
        if w.shape[1] >= L:
            hit = np.all(w[:, :L] == np.array(self.word), axis=1)
            out = np.where(hit, out + math.log(self.factor), out)
        return out

    def K_seq(self, n):
        return self.base.K_seq(n)

    def local_consts(self, s):
        return self.base.local_consts(s)


# ====================================================================== diagnostics

@dataclass
class GibbsRatioReport:
    max_ratio_violation: float
    fitted_c: dict
    fitted_K_growth: float
    log_max_ratio_by_n: dict
    words_checked: int
    flagged: bool = False
    notes: str = ""


def verify_gibbs_ratio(mu: CylinderMeasure, phi: Potential, sample_words) -> GibbsRatioReport:
    """Check 1/(c K_n) <= mu(w) / exp(-n P + S_n phi) <= c K_n on the given words.

    ``sample_words`` is a list of words (any lengths) or a 2-D array.  The
    ratio is formed in log space; the slope of log max(r, 1/r) against n is
    reported as the fitted growth of K_n (zero for genuine Gibbs measures).
    """
    groups = {}
    if isinstance(sample_words, np.ndarray) and sample_words.ndim == 2:
        groups[sample_words.shape[1]] = sample_words
    else:
        for w in sample_words:
            groups.setdefault(len(w), []).append(tuple(int(s) for s in w))
        groups = {n: np.array(ws, dtype=np.int64) for n, ws in groups.items()}
    worst = 0.0
    fitted_c: dict = {}
    by_n = {}
    total = 0
    for n in sorted(groups):
        W = groups[n]
        logr = mu.log_weights(W) - (-n * mu.P_const + phi.birkhoff(W, n))
        a = np.abs(logr)
        by_n[n] = float(a.max())
        total += len(W)
        firsts = W[:, 0]
        for s in np.unique(firsts):
            sel = firsts == s
            fitted_c[int(s)] = max(fitted_c.get(int(s), 1.0), float(np.exp(a[sel].max())))
        c = np.array([mu.local_consts(int(s)) for s in firsts])
        K = mu.K_seq(n)
        logcK = np.log(c * K)
        viol = np.maximum(logr - logcK, -logr - logcK)
        worst = max(worst, float(np.expm1(np.max(viol))) if viol.size else 0.0)
    ns = np.array(sorted(by_n), dtype=float)
    if len(ns) >= 2:
        slope = float(np.polyfit(ns, np.array([by_n[n] for n in sorted(by_n)]), 1)[0])
    else:
        slope = 0.0
    flagged = phi.regularity.kind == "walters-only" and worst > 0
    return GibbsRatioReport(max(worst, 0.0), fitted_c, slope, by_n, total, flagged,
                            "walters-only potential: violations flagged, not failed"
                            if flagged else "")


def gibbs_sample_words(chain: TruncatedChain, max_depth: int, digits: int, cap: int = 60000,
                       seed: int = 0) -> list:
    """All words up to ``max_depth`` with symbols <= ``digits`` when affordable, otherwise
    every word up to the affordable depth plus a deterministic sample and the
    extremal words (constant words and alternations of the smallest and largest symbols)."""
    ch = chain.restrict(digits) if chain.alphabet_size > digits else chain
    rng = np.random.default_rng(seed)
    out = []
    for n in range(1, max_depth + 1):
        if count_words(ch, n) <= cap:
            out.extend(map(tuple, word_array(ch, n).tolist()))
            continue
        syms = ch.symbols
        seen = set()
        lo, hi = int(syms[0]), int(syms[-1])
        for pat in ((lo,), (hi,), (lo, hi), (hi, lo), (hi, hi, lo), (lo, lo, hi)):
            w = tuple((pat * n)[:n])
            if ch.is_admissible(w):
                seen.add(w)
        while len(seen) < cap:
            w = [int(rng.choice(syms))]
            while len(w) < n:
                w.append(int(rng.choice(ch.successors(w[-1]))))
            seen.add(tuple(w))
        out.extend(sorted(seen))
    return out


def _tail_shape_entropy(A: int, power: float = 2.0) -> float:
    """Entropy of the law proportional to a^(-power) on a > A."""
    a = np.arange(A + 1, 2000 * (A + 1), dtype=float)
    w = a ** (-power)
    Z = w.sum()
    p = w / Z
    return float(-(p * np.log(p)).sum())


def measure_entropy_and_lyapunov(mu: CylinderMeasure, phi: Optional[Potential], n: int = 1,
                                 first_A: Optional[int] = None, context_B: Optional[int] = None
                                 ) -> dict:
    """Integral of phi, entropy and the variational check h + int phi - P.

    The entropy is the conditional block entropy H(x_0 | x_1 ... x_n), which
    decreases to h_mu and converges much faster than H_n / n.  For countable
    alphabets the first symbol is truncated at ``first_A`` and the context
    symbols at ``context_B``; the missing first-symbol mass is charged with
    the entropy of a 1/a^2 law and the missing context mass with the mean
    conditional entropy of the largest retained contexts.
    """
    chain = mu.chain
    countable = isinstance(mu, DensityMeasure) and mu.model.countable
    if countable:
        first_A = first_A or 5000
        context_B = context_B or 1000
        model = mu.model
        ctx_chain = model.chain(context_B)
        first_chain = model.chain(max(first_A, context_B))
    else:
        first_A = first_A or chain.alphabet_size
        context_B = context_B or chain.alphabet_size
        ctx_chain = chain.restrict(min(context_B, chain.alphabet_size))
        first_chain = chain.restrict(min(max(first_A, context_B), chain.alphabet_size))
    ctx = word_array(ctx_chain, n) if n > 0 else np.zeros((1, 0), dtype=np.int64)
    firsts = np.arange(chain.offset, chain.offset + min(first_A, first_chain.alphabet_size))
    muv = mu.weights(ctx) if n > 0 else np.ones(1)
    H_ctx = np.zeros(len(ctx))
    shape_H = _tail_shape_entropy(len(firsts)) if countable else 0.0
    chunk = max(1, 2_000_000 // max(len(firsts), 1))
    for start in range(0, len(ctx), chunk):
        C = ctx[start:start + chunk]
        m = len(C)
        a = np.repeat(firsts, m)
        v = np.tile(C, (len(firsts), 1))
        allowed = first_chain.matrix[a - chain.offset, v[:, 0] - chain.offset] if n > 0 else \
            np.ones(len(a), dtype=bool)
        W = np.column_stack([a, v])[allowed]
        owner = np.tile(np.arange(m), len(firsts))[allowed]
        w = mu.weights(W)
        mv = muv[start:start + m]
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.where(w > 0, -w * np.log(w / mv[owner]), 0.0)
        H = np.bincount(owner, contrib, minlength=m)
        got = np.bincount(owner, w, minlength=m)
        miss = np.maximum(mv - got, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            H += np.where(miss > 0, miss * (-np.log(miss / mv) + shape_H), 0.0)
        H_ctx[start:start + m] = H
    covered = float(muv.sum())
    entropy = float(H_ctx.sum())
    if countable and covered < 1.0:
        boundary = ctx[:, 0] >= ctx[:, 0].max() - max(1, len(ctx_chain.symbols) // 10)
        rate = float(H_ctx[boundary].sum() / muv[boundary].sum())
        entropy += (1.0 - covered) * rate
    if phi is None:
        return {"entropy_estimate": entropy, "n": n, "method": "conditional block entropy"}
    # integral of phi
    integral = _integral_phi(mu, phi, max(n, 1))
    out = {"integral_phi": integral, "entropy_estimate": entropy,
           "pressure_check": entropy + integral - mu.P_const,
           "n": n, "method": "conditional block entropy"}
    if isinstance(mu, DensityMeasure) and isinstance(phi, IntervalPotential):
        q = integral_phi_quadrature(mu, phi)
        out["integral_phi_quadrature"] = q
        out["entropy_quadrature"] = mu.P_const - q
    return out


def entropy_rate(mu: CylinderMeasure) -> float:
    """Entropy of mu: closed form for product and Markov measures, estimated otherwise."""
    if isinstance(mu, ProductMeasure):
        return float(-(mu.probs * mu.logp).sum())
    if isinstance(mu, MarkovMeasure):
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(mu.Pd > 0, mu.Pd * mu.logP, 0.0)
        return float(-(mu.pi * plogp.sum(axis=1)).sum() / max(mu.pi.sum(), 1e-300))
    return measure_entropy_and_lyapunov(mu, None, 1)["entropy_estimate"]


def _integral_phi(mu: CylinderMeasure, phi: Potential, n: int) -> float:
    """sum_w mu(w) S_n phi(w) / n over n-words (truncated alphabets get an explicit tail)."""
    if isinstance(mu, DensityMeasure) and isinstance(phi, IntervalPotential):
        return _integral_phi_cells(mu, phi)
    words = word_array(mu.chain, n)
    w = mu.weights(words)
    return float((w * phi.birkhoff(words, n)).sum() / n)


def _integral_phi_cells(mu: DensityMeasure, phi: IntervalPotential, K: int = 200000) -> float:
    """Cylinder path: sum over first digits of mu(P_a) times phi averaged on P_a."""
    model = mu.model
    if not model.countable:
        syms = mu.chain.symbols
        total = 0.0
        for s in syms:
            a, b = model.partition(int(s))
            x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
            total += 0.5 * (b - a) * float((_GL_W * mu.density(x) * -np.log(model.deriv(x))).sum())
        return phi.scale * total
    k = np.arange(1, K + 1, dtype=float)
    a, b = 1.0 / (k + 1.0), 1.0 / k
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X[None, :]
    d = mu.density(x)
    syms = np.repeat(k.astype(np.int64), len(_GL_X)).reshape(x.shape)
    logd = _log_deriv_on_partition(model, syms, x)
    total = float((0.5 * (b - a)[:, None] * _GL_W[None, :] * d * -logd).sum())
    total += _phi_tail(model, mu, K)
    return phi.scale * total


def _log_deriv_on_partition(model, syms, x):
    a, bb, c, d = model.coeffs(syms)
    y = (d * x - bb) / (a - c * x)
    return 2.0 * np.log(c * y + d) - np.log(np.abs(a * d - bb * c).astype(float))


def _phi_tail(model, mu, K) -> float:
    """Integral of phi over (0, 1/(K+1)) from the asymptotics of the partition."""
    h0 = float(mu.density(np.array([0.0]))[0])
    if isinstance(model, GaussMap):
        # |f'| = 1/x^2 on (0, 1/(K+1)): integral of 2 log x h(x) dx, h ~ h(0)
        e = 1.0 / (K + 1.0)
        return h0 * 2.0 * (e * math.log(e) - e)
    if isinstance(model, LurothMap):
        # phi = -log(k(k+1)) on a set of measure 1/(k(k+1))
        s = 0.0
        kk = np.arange(K + 1, 50 * K, dtype=float)
        s = float((-np.log(kk * (kk + 1)) / (kk * (kk + 1))).sum())
        e = 1.0 / (50 * K)
        return h0 * (s + 2.0 * (e * math.log(e) - e))
    if isinstance(model, ModifiedGaussMap):
        # |f'| on P_k ~ k^2 (1 - 1/k)/ ... ~ (k-1) k (x-dependent); use log|f'| ~ 2 log(1/x)
        e = 1.0 / (K + 1.0)
        return h0 * 2.0 * (e * math.log(e) - e)
    return 0.0


def integral_phi_quadrature(mu: DensityMeasure, phi: IntervalPotential) -> float:
    """Adaptive quadrature of phi against the density (per partition interval if needed)."""
    model = mu.model
    if isinstance(model, GaussMap):
        val, _ = integrate.quad(lambda x: 2.0 * math.log(x) * float(mu.density(np.array([x]))[0]),
                                0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-13)
        return phi.scale * val
    if isinstance(model, (LurothMap, NAryMap)) or not model.countable:
        total = 0.0
        syms = range(1, 20001) if model.countable else mu.chain.symbols
        for s in syms:
            a, b = model.partition(int(s))
            val, _ = integrate.quad(lambda x: -math.log(float(model.deriv(np.array(x)))) *
                                    float(mu.density(np.array([x]))[0]), a, b)
            total += val
        if model.countable:
            total += _phi_tail(model, mu, 20000)
        return phi.scale * total
    return _integral_phi_cells(mu, phi)


def good_set_fraction(mu: CylinderMeasure, phi: Potential, P1: Sequence[int], M: int,
                      epsilon: float, depth: int, integral_phi: Optional[float] = None,
                      cap: int = 200_000, samples: int = 4000, seed: int = 0,
                      sample_A: int = 400) -> dict:
    """mu-share of P1 carried by depth-``depth`` cylinders that are good for all M <= j <= depth.

    A cylinder C(j, .) (j + 1 symbols) is good when
    exp(-(j+1)[P - int phi + eps]) < mu(C) < exp(-(j+1)[P - int phi - eps]).
    """
    if depth <= M:
        raise ValueError("depth must exceed M")
    if integral_phi is None:
        integral_phi = measure_entropy_and_lyapunov(mu, phi, 1)["integral_phi"]
    rate = mu.P_const - integral_phi
    P1 = tuple(int(s) for s in P1)
    chain = mu.chain
    path = "enumeration"
    if count_words(chain, depth + 1) <= cap and not getattr(getattr(mu, "model", None),
                                                             "countable", False):
        words = word_array(chain, depth + 1, first=P1[0])
        words = words[np.all(words[:, :len(P1)] == np.array(P1), axis=1)]
        weights_leaf = mu.weights(words)
    else:
        path = "sampling"
        words = sample_cylinder_words(mu, depth + 1, samples, seed, prefix=P1, A=sample_A)
        weights_leaf = np.ones(len(words))
    good = np.ones(len(words), dtype=bool)
    for j in range(M, depth + 1):
        lw = mu.log_weights(words[:, :j + 1])
        lo = -(j + 1) * (rate + epsilon)
        hi = -(j + 1) * (rate - epsilon)
        good &= (lw > lo) & (lw < hi)
    frac = float(weights_leaf[good].sum() / weights_leaf.sum()) if len(words) else 0.0
    return {"fraction": frac, "path": path, "count": int(len(words)), "rate": rate}


def sample_cylinder_words(mu: CylinderMeasure, length: int, count: int, seed: int = 0,
                          prefix: Sequence[int] = (), A: int = 400) -> np.ndarray:
    """Words drawn from mu by sequential conditionals (symbols truncated at A).

    Density measures with a closed-form CDF on Moebius-branch maps take a
    faster route: points are drawn from the density (inside the prefix
    cylinder) and their digits read off by iterating the map, so the
    alphabet is not truncated.
    """
    rng = np.random.default_rng(seed)
    if isinstance(mu, DensityMeasure) and mu.cdf is not None and \
            isinstance(mu.model, MoebiusModel):
        return _sample_words_by_points(mu, length, count, rng, prefix)
    chain = mu.chain if mu.chain.alphabet_size <= A else mu.chain.restrict(A)
    syms = np.array(chain.symbols)
    prefix = tuple(int(s) for s in prefix)
    words = np.tile(np.array(prefix, dtype=np.int64), (count, 1)) if prefix else \
        np.zeros((count, 0), dtype=np.int64)
    logcur = mu.log_weights(words) if prefix else np.zeros(count)
    while words.shape[1] < length:
        ext = np.concatenate([np.repeat(words, len(syms), axis=0),
                              np.tile(syms, count)[:, None]], axis=1)
        if words.shape[1] > 0:
            ok = chain.matrix[ext[:, -2] - chain.offset, ext[:, -1] - chain.offset]
        else:
            ok = np.ones(len(ext), dtype=bool)
        lw = np.full(len(ext), -np.inf)
        lw[ok] = mu.log_weights(ext[ok])
        P = np.exp(lw.reshape(count, len(syms)) - logcur[:, None])
        P = np.nan_to_num(P)
        P /= P.sum(axis=1, keepdims=True)
        u = rng.random(count)
        choice = (P.cumsum(axis=1) < u[:, None]).sum(axis=1)
        choice = np.minimum(choice, len(syms) - 1)
        words = np.concatenate([words, syms[choice][:, None]], axis=1)
        logcur = lw.reshape(count, len(syms))[np.arange(count), choice]
    return words


def _sample_words_by_points(mu: DensityMeasure, length: int, count: int, rng,
                            prefix: Sequence[int]) -> np.ndarray:
    model = mu.model
    prefix = tuple(int(v) for v in prefix)
    within = None
    if prefix:
        lo, hi = model.cylinder_bounds(np.array([prefix]))
        within = (float(lo[0]), float(hi[0]))
    x = mu.sample_points(rng, count, within)
    words = np.empty((count, length), dtype=np.int64)
    for j in range(length):
        if j < len(prefix):
            sym = np.full(count, prefix[j], dtype=np.int64)
        else:
            with np.errstate(divide="ignore"):
                sym = np.clip(model.symbol_array(x), model.least_symbol(), 10**12).astype(np.int64)
        words[:, j] = sym
        a, b, c, d = (np.asarray(v, dtype=float) for v in model.coeffs(sym))
        x = np.clip((d * x - b) / (a - c * x), 0.0, 1.0)
    return words


def mixing_correlation(mu: CylinderMeasure, P1, P2, P3, k: int, ell: int,
                       orbit_samples: int = 20000, seed: int = 0) -> dict:
    """Relative deviation |mu(P1 & s^-k P2 & s^-(k+l) P3) - mu(P1 & s^-k P2) mu(P3)| / (...).

    Exact for depth-1 Markov and product measures; otherwise estimated from
    words sampled from mu.  ``ell = 0`` is the short-range branch: the blocks
    P2 and P3 then start at the same position and the deviation is reported
    without the decay interpretation.
    """
    P1, P2, P3 = (tuple(int(s) for s in x) for x in (P1, P2, P3))
    short_range = ell < len(P2)
    if isinstance(mu, ProductMeasure) and not short_range and k >= len(P1):
        joint = mu.weight(P1) * mu.weight(P2) * mu.weight(P3)
        prod = mu.weight(P1) * mu.weight(P2) * mu.weight(P3)
        return {"deviation": abs(joint - prod) / prod, "ell": ell, "method": "exact",
                "stderr": 0.0, "warning": None}
    if isinstance(mu, MarkovMeasure) and mu.k == 1 and not short_range and k >= len(P1):
        joint, prod = mu.correlation(P1, P2, P3, k, ell)
        return {"deviation": abs(joint - prod) / prod, "ell": ell, "method": "exact",
                "stderr": 0.0, "warning": None}
    L = max(len(P1), k + len(P2), k + ell + len(P3))
    W = sample_cylinder_words(mu, L, orbit_samples, seed)
    in1 = np.all(W[:, :len(P1)] == np.array(P1), axis=1)
    in2 = np.all(W[:, k:k + len(P2)] == np.array(P2), axis=1)
    in3 = np.all(W[:, k + ell:k + ell + len(P3)] == np.array(P3), axis=1)
    m12 = float(np.mean(in1 & in2))
    m123 = float(np.mean(in1 & in2 & in3))
    m3 = mu.weight(P3)
    prod = m12 * m3
    warning = None
    if prod * orbit_samples < 50:
        warning = "denominator too small for a reliable estimate"
    dev = abs(m123 - prod) / prod if prod > 0 else math.inf
    stderr = math.sqrt(max(m123, 1e-300) / orbit_samples) / prod if prod > 0 else math.inf
    return {"deviation": dev, "ell": ell, "method": "sampling", "stderr": stderr,
            "warning": warning, "short_range": short_range}


def fit_decay(ells: Sequence[int], deviations: Sequence[float]) -> dict:
    """Least-squares fit log Psi(l) = a + l log rho."""
    e = np.asarray(ells, dtype=float)
    d = np.asarray(deviations, dtype=float)
    keep = d > 0
    slope, icpt = np.polyfit(e[keep], np.log(d[keep]), 1)
    return {"rho": float(math.exp(slope)), "C": float(math.exp(icpt))}


def export_measure_csv(mu: CylinderMeasure, depth: int, path, A: Optional[int] = None) -> None:
    ch = mu.chain if A is None else mu.chain.restrict(A)
    words = word_array(ch, depth)
    w = mu.weights(words)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["word", "weight"])
        for row, val in zip(words.tolist(), w.tolist()):
            wr.writerow([" ".join(map(str, row)), repr(val)])


class TableMeasure(CylinderMeasure):
    """Replay of exported weights (exact words only)."""

    def __init__(self, chain: TruncatedChain, table: dict, name: str = "replay"):
        self.chain = chain
        self.table = table
        self.name = name

    def log_weights(self, words):
        w = _as_words(words)
        with np.errstate(divide="ignore"):
            return np.log(np.array([self.table.get(tuple(int(s) for s in r), 0.0) for r in w]))


def import_measure_csv(chain: TruncatedChain, path) -> TableMeasure:
    table = {}
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for word, weight in rd:
            table[tuple(int(s) for s in word.split())] = float(weight)
    return TableMeasure(chain, table)
