"""Pressure of t*phi by cylinder sums, periodic-orbit sums, transfer matrices
and collocation of the transfer operator, each with an error bracket.

Rigorous brackets come from depth-k matrices whose entries are the inf (lower
bound) or sup (upper bound) of exp(t phi) over (k+1)-cylinders.  For countable
alphabets truncated at A the upper matrix carries one extra "tail" state that
lumps all symbols beyond A.  Accurate point values for the interval models
come from Chebyshev collocation of the transfer operator, whose error is
estimated by refining the node count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import sparse

from .interval_maps import (GaussMap, IntervalMapModel, LurothMap, ModifiedGaussMap, MPInduced,
                            MPOriginal, NAryMap, luroth_tail)
from .potentials import ConstantPotential, IntervalPotential, Potential, TablePotential
from .symbolic import (ChainError, ResourceGuardError, TruncatedChain, check_properties,
                       count_words, word_array)

OVERFLOW_LOG = 700.0
METHODS = ("cylinder-sum", "periodic-orbit", "transfer-matrix", "collocation")


class ConvergenceError(RuntimeError):
    pass


@dataclass
class PressureEstimate:
    value: float
    lo: float
    hi: float
    depth_n: int
    method: str
    truncation_A: int
    diverged: bool = False
    converged: bool = True
    notes: str = ""

    @property
    def bracket(self):
        return (self.lo, self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def row(self, t: float) -> list:
        return [t, self.lo, self.value, self.hi, self.method, self.depth_n, self.truncation_A]

    @classmethod
    def infinite(cls, n, method, A, notes="diverged"):
        return cls(math.inf, math.inf, math.inf, n, method, A, True, True, notes)


def _tail_model(phi: Potential) -> Optional[IntervalMapModel]:
    if isinstance(phi, IntervalPotential) and phi.model.countable:
        return phi.model
    return None


# ======================================================================
# depth-k matrices

@dataclass
class DepthMatrix:
    """Weighted transition matrix on admissible k-words (plus an optional tail state)."""

    states: np.ndarray          # (m, k) words; the tail state, if any, is last and not listed
    M: sparse.csr_matrix        # (m + tail, m + tail)
    u: np.ndarray               # weights of the final symbol (used by cylinder sums)
    tail: bool
    k: int


def _state_index(words: np.ndarray, A: int, offset: int) -> np.ndarray:
    idx = np.zeros(len(words), dtype=np.int64)
    for j in range(words.shape[1]):
        idx = idx * A + (words[:, j] - offset)
    return idx


def depth_matrix(chain: TruncatedChain, phi: Potential, t: float, depth_k: int = 1,
                 mode: str = "representative", tail: bool = False,
                 cap: int = 4_000_000) -> DepthMatrix:
    """M[u, v] = exp(t phi) on the (k+1)-word u.b, v = sigma(u.b).

    ``mode`` is one of representative, inf, sup, mean-value.  A tail state is
    only supported for depth 1 and interval potentials of countable models;
    its entries are upper bounds in mode ``sup``, lower-kind tail sums in mode
    ``inf`` and estimates otherwise.
    """
    if depth_k < 1:
        raise ValueError("depth must be at least 1")
    A, off = chain.alphabet_size, chain.offset
    if count_words(chain, depth_k + 1) > cap:
        raise ResourceGuardError("too many (k+1)-words for the depth matrix")
    words = word_array(chain, depth_k + 1)
    states = word_array(chain, depth_k)
    sidx = _state_index(states, A, off)
    lookup = {int(v): i for i, v in enumerate(sidx)}
    src = np.array([lookup[int(v)] for v in _state_index(words[:, :-1], A, off)])
    dst = np.array([lookup[int(v)] for v in _state_index(words[:, 1:], A, off)])
    tp = phi.scaled(t)
    if mode == "mean-value":
        if not isinstance(tp, IntervalPotential):
            raise TypeError("mean-value weights need an interval potential")
        logw = tp.mean_value_birkhoff(words, 1)
    else:
        lo, rep, hi = tp.birkhoff_bounds(words, 1)
        logw = {"representative": rep, "inf": lo, "sup": hi}[mode]
    weights = np.exp(logw)
    m = len(states)
    model = _tail_model(phi)
    use_tail = bool(tail and model is not None)
    if use_tail and depth_k != 1:
        raise ValueError("tail state requires depth 1")
    size = m + (1 if use_tail else 0)
    rows, cols, vals = list(src), list(dst), list(weights)
    # final-symbol weights: phi on a one-symbol cylinder, y ranging over its image
    last_syms = np.array([[s] for s in chain.symbols])
    if mode == "mean-value":
        u_sym = np.exp(tp.mean_value_birkhoff(last_syms, 1))
    else:
        ulo, urep, uhi = tp.birkhoff_bounds(last_syms, 1)
        u_sym = np.exp({"representative": urep, "inf": ulo, "sup": uhi}[mode])
    # state u's final weight depends on its last symbol
    u = u_sym[states[:, -1] - off]
    if use_tail:
        kind = {"sup": "upper", "inf": "lower"}.get(mode, "estimate")
        tr, tc, tv, u_tail = _tail_entries(model, chain, t, kind)
        rows += tr
        cols += tc
        vals += tv
        u = np.append(u, u_tail)
    M = sparse.csr_matrix((np.array(vals, dtype=float), (np.array(rows), np.array(cols))),
                          shape=(size, size))
    return DepthMatrix(states, M, u, use_tail, depth_k)


def _tail_entries(model: IntervalMapModel, chain: TruncatedChain, t: float, kind: str):
    """Entries of the lumped tail state for a depth-1 matrix (t >= 0).

    ``upper`` entries bound the sup of |psi'|^t (all shipped branches have
    |psi'| decreasing in y); ``estimate`` entries use interior points;
    ``lower`` entries are zero, which is always a valid lower bound.
    """
    A = chain.alphabet_size
    off = chain.offset
    star = A
    rows, cols, vals = [], [], []
    if kind == "lower":
        return rows, cols, vals, 0.0
    syms = chain.symbols
    wide = model.chain(A + 1)
    first_tail = off + A
    y_tail_hi = float(model.partition(first_tail)[1])
    y_edge = 0.0 if kind == "upper" else 0.5 * y_tail_hi
    for i, a in enumerate(syms):
        if not wide.allowed(int(a), first_tail):
            continue
        w = float(model.inverse_deriv(np.array([a]), np.array([y_edge]))[0]) ** t
        rows.append(i)
        cols.append(star)
        vals.append(w)
    for j, b in enumerate(syms):
        lo, hi = model.partition(int(b))
        if kind == "upper":
            y = lo + 1e-12 * (hi - lo)
            w = float(np.asarray(model.tail_sum(t, A, y, "upper")).ravel()[0]) * (1 + 1e-9)
        else:
            y = 0.5 * (lo + hi)
            w = float(np.asarray(model.tail_sum(t, A, y, "estimate")).ravel()[0])
        if w > 0:
            rows.append(star)
            cols.append(j)
            vals.append(w)
    rows.append(star)
    cols.append(star)
    vals.append(_tail_self(model, t, A, kind))
    return rows, cols, vals, _tail_self(model, t, A, kind, final=True)


def _tail_self(model, t, A, kind, final=False) -> float:
    """Sum over c > A of sup |psi_c'|^t over the tail region (or the image when final)."""
    if isinstance(model, ModifiedGaussMap):
        # sup over y > 1/c of c(c-1)/(c y + c^2 - c - 1)^2 is 1/(c(c-1));
        # transitions c -> d need d < c, so the self block starts at c = A + 2
        start = A + 1 if final else A + 2
        return luroth_tail(t, start - 2, "upper" if kind == "upper" else "estimate")
    y = 0.0 if kind == "upper" else 0.25 / (A + 1.0)
    return float(np.asarray(model.tail_sum(t, A, y, kind)).ravel()[0])


def perron_root(M, tol: float = 1e-14, max_iter: int = 20000) -> tuple:
    """Leading eigenvalue and left/right Perron vectors of a nonnegative matrix."""
    Md = M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=float)
    if not np.all(np.isfinite(Md)):
        return math.inf, None, None
    n = Md.shape[0]
    if n <= 2500:
        vals, vecs = np.linalg.eig(Md)
        i = int(np.argmax(vals.real))
        lam = float(vals[i].real)
        r = np.abs(vecs[:, i].real)
        valsT, vecsT = np.linalg.eig(Md.T)
        jj = int(np.argmax(valsT.real))
        l = np.abs(vecsT[:, jj].real)
        return lam, l / l.max(), r / r.max()
    lam, r, _, _ = _power(M, tol, max_iter)
    lamT, l, _, _ = _power(M.T.tocsr() if sparse.issparse(M) else Md.T, tol, max_iter)
    return lam, l, r


def _power(M, tol, max_iter):
    v = np.ones(M.shape[0])
    lam_old = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        lam = float(np.max(np.abs(w)))
        if lam == 0.0:
            return 0.0, v, it, 0.0
        w = w / lam
        if abs(lam - lam_old) <= tol * lam and np.max(np.abs(w - v)) <= 1e3 * tol:
            resid = float(np.max(np.abs(M @ w - lam * w)) / np.max(np.abs(w)))
            return lam, w, it, resid
        v, lam_old = w, lam
    resid = float(np.max(np.abs(M @ v - lam * v)) / np.max(np.abs(v)))
    return lam, v, max_iter, resid


def transfer_operator_leading(chain: TruncatedChain, phi: Potential, t: float, depth_k: int = 1,
                              iterations: int = 20000, mode: Optional[str] = None,
                              tail: bool = True, tol: float = 1e-13) -> dict:
    """Power iteration for the depth-k Ruelle matrix.

    ``eigvec`` is the eigenfunction h on k-words (left Perron vector of M,
    i.e. the fixed direction of the transfer operator), ``conformal`` the
    right Perron vector (cylinder masses of the conformal measure).  The
    mode defaults to cylinder means for interval potentials.
    """
    if mode is None:
        mode = "mean-value" if isinstance(phi, IntervalPotential) else "representative"
    dm = depth_matrix(chain, phi, t, depth_k, mode, tail)
    MT = dm.M.T.tocsr()
    lam, h, it_h, res_h = _power(MT, tol, iterations)
    lam_r, nu, it_r, res_r = _power(dm.M, tol, iterations)
    if it_h >= iterations or it_r >= iterations:
        raise ConvergenceError(f"power iteration did not converge in {iterations} steps")
    m = len(dm.states)
    return {"lambda": lam, "eigvec": h[:m], "conformal": nu[:m], "residual": res_h,
            "tail_eigvec": h[m:] if dm.tail else None, "tail_conformal": nu[m:] if dm.tail else None,
            "iterations": max(it_h, it_r), "states": dm.states, "matrix": dm}


# ======================================================================
# rigorous matrix brackets

def matrix_bracket(chain: TruncatedChain, phi: Potential, t: float, depth_k: int = 1):
    """(lo, hi) with lo <= P(t phi) <= hi from inf/sup depth-k matrices.

    The upper matrix includes the tail state for countable models (depth 1),
    so it bounds the pressure of the full countable system.
    """
    model = _tail_model(phi)
    lam_lo = perron_root(depth_matrix(chain, phi, t, depth_k, "inf").M)[0]
    if model is not None:
        if t < 0:
            return math.log(lam_lo) if lam_lo > 0 else -math.inf, math.inf
        hi_dm = depth_matrix(chain, phi, t, 1, "sup", tail=True)
        lam_hi = perron_root(hi_dm.M)[0]
    else:
        lam_hi = perron_root(depth_matrix(chain, phi, t, depth_k, "sup").M)[0]
    lo = math.log(lam_lo) if lam_lo > 0 else -math.inf
    hi = math.log(lam_hi) if lam_hi > 0 else -math.inf
    return lo, hi


def pressure_transfer_matrix(chain: TruncatedChain, phi: Potential, t: float,
                             depth_k: Optional[int] = None, mode: Optional[str] = None,
                             ) -> PressureEstimate:
    """log of the Perron root of the depth-k matrix with a rigorous bracket."""
    reg = phi.regularity
    if depth_k is None:
        depth_k = max(1, reg.depth) if reg.kind == "locally-constant" else 2
    model = _tail_model(phi)
    if mode is None:
        mode = "mean-value" if isinstance(phi, IntervalPotential) else "representative"
    if model is not None and t * 2.0 <= 1.0 and not isinstance(model, MPInduced):
        return PressureEstimate.infinite(depth_k, "transfer-matrix", chain.alphabet_size,
                                         "tail sum diverges")
    use_tail = model is not None and depth_k == 1
    dm = depth_matrix(chain, phi, t, depth_k, mode, tail=use_tail)
    lam = perron_root(dm.M)[0]
    if not np.isfinite(lam):
        return PressureEstimate.infinite(depth_k, "transfer-matrix", chain.alphabet_size)
    value = math.log(lam)
    lo, hi = matrix_bracket(chain, phi, t, depth_k)
    if model is not None and depth_k > 1:
        # the depth-k matrix is truncated; the tail correction from depth 1
        d1 = depth_matrix(chain, phi, t, 1, mode, tail=True)
        d1t = depth_matrix(chain, phi, t, 1, mode, tail=False)
        value += math.log(perron_root(d1.M)[0]) - math.log(perron_root(d1t.M)[0])
    value = min(max(value, lo), hi)
    return PressureEstimate(value, lo, hi, depth_k, "transfer-matrix", chain.alphabet_size,
                            notes=f"mode={mode}")


# ======================================================================
# cylinder sums

def _logsumexp(x: np.ndarray) -> float:
    if x.size == 0:
        return -math.inf
    m = float(np.max(x))
    if not np.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(x - m))))


def _tail_paths(U: np.ndarray, u: np.ndarray, n: int) -> float:
    """Sum of weights of length-n paths that visit the last (tail) state at least once."""
    star = U.shape[0] - 1
    F = u.copy()                       # all paths of the current length
    T = np.zeros_like(u)
    T[star] = u[star]
    log_scale = 0.0
    for _ in range(n - 1):
        F_new = U @ F
        T_new = U[:, :star] @ T[:star] + U[:, star] * F[star]
        T_new[star] = F_new[star]
        s = float(np.max(F_new))
        if not np.isfinite(s):
            return math.inf
        if s <= 0.0:
            return 0.0
        F, T = F_new / s, T_new / s
        log_scale += math.log(s)
    total = float(T.sum())
    if total <= 0.0:
        return 0.0
    log_total = log_scale + math.log(total)
    return math.inf if log_total > OVERFLOW_LOG else math.exp(log_total)


def pressure_cylinder_sum(chain: TruncatedChain, phi: Potential, t: float, n: int,
                          cap: int = 2_000_000) -> PressureEstimate:
    """(1/n) log sum over n-words of exp(S_n t phi), bracketed by inf/sup over cylinders.

    For countable models the upper end also includes every word that uses a
    symbol beyond the truncation, bounded through the lumped tail state.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    total = count_words(chain, n)
    if total > cap:
        raise ResourceGuardError(f"{total} words of length {n} exceed the cap {cap}")
    words = word_array(chain, n)
    lo, rep, hi = phi.scaled(t).birkhoff_bounds(words, n)
    logZ_lo, logZ_rep, logZ_hi = _logsumexp(lo), _logsumexp(rep), _logsumexp(hi)
    A = chain.alphabet_size
    model = _tail_model(phi)
    diverged = False
    notes = ""
    if model is not None:
        if t < 0 or (2.0 * t <= 1.0 and not isinstance(model, MPInduced)):
            return PressureEstimate.infinite(n, "cylinder-sum", A, "tail sum diverges")
        if n == 1:
            tail_hi = _tail_self(model, t, A, "upper", final=True)
            tail_est = _tail_self(model, t, A, "estimate", final=True)
        else:
            up = depth_matrix(chain, phi, t, 1, "sup", tail=True)
            est = depth_matrix(chain, phi, t, 1, "representative", tail=True)
            tail_hi = _tail_paths(up.M.toarray(), up.u, n)
            tail_est = _tail_paths(est.M.toarray(), est.u, n)
        if not np.isfinite(tail_hi):
            diverged = True
        else:
            logZ_hi = float(np.logaddexp(logZ_hi, math.log(tail_hi))) if tail_hi > 0 else logZ_hi
            if tail_est > 0:
                logZ_rep = float(np.logaddexp(logZ_rep, math.log(tail_est)))
        notes = "tail bounded through lumped state"
    if diverged or logZ_hi > OVERFLOW_LOG:
        return PressureEstimate.infinite(n, "cylinder-sum", A, "sum exceeds overflow cap")
    value = min(max(logZ_rep / n, logZ_lo / n), logZ_hi / n)
    return PressureEstimate(value, logZ_lo / n, logZ_hi / n, n, "cylinder-sum", A, notes=notes)


# ======================================================================
# periodic orbits

def pressure_gurevich(chain: TruncatedChain, phi: Potential, t: float, base: Optional[int] = None,
                      n: int = 12, method: str = "auto", depth_k: Optional[int] = None,
                      check_base: bool = True, cap: int = 2_000_000) -> PressureEstimate:
    """(1/n) log Z_n(t phi, base) from periodic orbits through ``base``."""
    props = check_properties(chain, max_power=min(4 * chain.alphabet_size ** 2, 2000))
    if not props.mixing:
        raise ChainError("chain is not mixing")
    base = chain.symbols[0] if base is None else int(base)
    if not chain.contains(base):
        raise ChainError(f"base symbol {base} not in the alphabet")
    A = chain.alphabet_size
    if depth_k is None:
        reg = phi.regularity
        depth_k = max(1, reg.depth) if reg.kind == "locally-constant" else 1
    if method == "auto":
        method = "enumerate" if count_words(chain, n) <= min(cap, 200_000) else "matrix"
    if method == "enumerate":
        val = _gurevich_enumerate(chain, phi, t, base, n)
        slack = 0.0
    elif method == "matrix":
        val = _gurevich_matrix(chain, phi, t, base, n, depth_k)
        slack = abs(t) * phi.variation_bound(depth_k + 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.isfinite(val):
        return PressureEstimate.infinite(n, "periodic-orbit", A)
    lam = perron_root(depth_matrix(chain, phi, t, depth_k, "representative").M)[0]
    limit = math.log(lam) if lam > 0 else -math.inf
    lo = min(val, limit) - slack
    hi = max(val, limit) + slack
    model = _tail_model(phi)
    notes = ""
    if model is not None:
        if t <= 0.5 and not isinstance(model, MPInduced):
            return PressureEstimate.infinite(n, "periodic-orbit", A, "tail sum diverges")
        hi = max(hi, matrix_bracket(chain, phi, t, 1)[1])
        notes = "truncated periodic orbits; upper end includes tail bound"
    if check_base and A > 1:
        other = chain.symbols[1] if chain.symbols[0] == base else chain.symbols[0]
        val2 = (_gurevich_enumerate(chain, phi, t, other, n) if method == "enumerate"
                else _gurevich_matrix(chain, phi, t, other, n, depth_k))
        spread = abs(val2 - val)
        # both sequences converge to the same limit at rate O(1/n)
        allowed = hi - lo + abs(val - limit) + abs(val2 - limit) + 1e-12
        if spread > allowed:
            raise ChainError(f"base dependence {spread:.3g} exceeds the bracket {allowed:.3g}")
    return PressureEstimate(val, lo, hi, n, "periodic-orbit", A, notes=notes)


def _gurevich_enumerate(chain, phi, t, base, n) -> float:
    words = word_array(chain, n, first=base)
    if len(words) == 0:
        return -math.inf
    last = words[:, -1]
    ok = np.array([chain.allowed(int(s), base) for s in last])
    words = words[ok]
    if len(words) == 0:
        return -math.inf
    reps = max(2, -(-64 // n))
    ext = np.tile(words, (1, reps))
    sums = phi.scaled(t).birkhoff(ext, n)
    return _logsumexp(sums) / n


def _gurevich_matrix(chain, phi, t, base, n, depth_k) -> float:
    dm = depth_matrix(chain, phi, t, depth_k, "representative")
    M = dm.M.toarray()
    # Z_n through base: closed paths of n transitions starting at a state with first symbol base
    starts = np.where(dm.states[:, 0] == base)[0]
    # log-scaled repeated multiplication
    V = np.zeros((M.shape[0], len(starts)))
    V[starts, np.arange(len(starts))] = 1.0
    log_scale = 0.0
    for _ in range(n):
        V = M.T @ V
        s = float(V.max())
        if s <= 0:
            return -math.inf
        V /= s
        log_scale += math.log(s)
    # closed orbits: after n steps the state must coincide with the starting state
    total = float(sum(V[st, i] for i, st in enumerate(starts)))
    if total <= 0:
        return -math.inf
    return (log_scale + math.log(total)) / n


# ======================================================================
# collocation

class _PiecewiseCheb:
    """Piecewise polynomial interpolation at Chebyshev points on sorted, abutting pieces."""

    def __init__(self, pieces: Sequence[tuple], m: int):
        pcs = sorted((float(a), float(b)) for a, b in pieces)
        self.pieces = pcs
        self.m = m
        k = np.arange(m)
        self.ref = np.cos(np.pi * (2 * k + 1) / (2 * m))
        self.bary = (-1.0) ** k * np.sin(np.pi * (2 * k + 1) / (2 * m))
        self.lows = np.array([a for a, _ in pcs])
        self.highs = np.array([b for _, b in pcs])
        self.nodes = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * self.ref for a, b in pcs])
        V = C.chebvander(self.ref, m - 1)
        self.Vinv = np.linalg.inv(V)

    @property
    def size(self):
        return len(self.pieces) * self.m

    def piece_of(self, x):
        idx = np.searchsorted(self.lows, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def _local(self, x):
        piece = self.piece_of(x)
        a, b = self.lows[piece], self.highs[piece]
        z = np.clip((2.0 * x - a - b) / (b - a), -1.0, 1.0)
        return piece, z, b - a

    def accumulate(self, Mtx, rows, x, w):
        """Mtx[rows[i], :] += w[i] * (cardinal functions at x[i]) without dense temporaries."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        piece, z, _ = self._local(x)
        diff = z[:, None] - self.ref[None, :]
        exact = np.abs(diff) < 1e-14
        diff = np.where(exact, 1.0, diff)
        q = self.bary[None, :] / diff
        L = q / q.sum(axis=1, keepdims=True)
        hit = exact.any(axis=1)
        if hit.any():
            L[hit] = exact[hit].astype(float)
        cols = piece[:, None] * self.m + np.arange(self.m)[None, :]
        np.add.at(Mtx, (np.broadcast_to(np.asarray(rows)[:, None], cols.shape), cols),
                  np.asarray(w)[:, None] * L)

    def evaluate(self, x, coef):
        """Interpolant with nodal values ``coef`` at x (Clenshaw on per-piece Chebyshev series)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        cheb = np.asarray(coef, dtype=float).reshape(len(self.pieces), self.m) @ self.Vinv.T
        single = len(self.pieces) == 1
        out = np.empty(flat.size)
        step = 500_000
        for start in range(0, flat.size, step):
            piece, z, _ = self._local(flat[start:start + step])
            c = None if single else cheb[piece]
            b1 = np.zeros(z.size)
            b2 = np.zeros(z.size)
            z2 = 2.0 * z
            for k in range(self.m - 1, 0, -1):
                ck = cheb[0, k] if single else c[:, k]
                b1, b2 = z2 * b1 - b2 + ck, b1
            c0 = cheb[0, 0] if single else c[:, 0]
            out[start:start + step] = z * b1 - b2 + c0
        return out.reshape(x.shape)

    def basis(self, x, deriv: int = 0):
        """(len(x), size) matrix of cardinal functions (or derivatives) evaluated at x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        piece, z, width = self._local(x)
        if deriv == 0:
            diff = z[:, None] - self.ref[None, :]
            exact = np.abs(diff) < 1e-14
            diff = np.where(exact, 1.0, diff)
            q = self.bary[None, :] / diff
            L = q / q.sum(axis=1, keepdims=True)
            hit = exact.any(axis=1)
            if hit.any():
                L[hit] = exact[hit].astype(float)
        else:
            eye = np.eye(self.m)
            T = np.stack([C.chebval(z, C.chebder(eye[j], deriv)) for j in range(self.m)], axis=1)
            L = (T @ self.Vinv) * (2.0 / width[:, None]) ** deriv
        out = np.zeros((x.size, self.size))
        cols = piece[:, None] * self.m + np.arange(self.m)[None, :]
        np.put_along_axis(out, cols, L, axis=1)
        return out


def _collocation_pieces(model: IntervalMapModel, pieces_K: int):
    """Intervals on which the eigenfunction is smooth (the Markov partition for
    modified Gauss, whose eigenfunction jumps at every 1/k)."""
    if isinstance(model, ModifiedGaussMap):
        pcs = [(1.0 / (k + 1), 1.0 / k) for k in range(1, pieces_K + 1)]
        pcs.append((0.0, 1.0 / (pieces_K + 1)))
        return pcs
    return [(0.0, 1.0)]


@dataclass
class CollocationResult:
    log_lambda: float
    nodes: np.ndarray
    eigvec: np.ndarray
    basis: _PiecewiseCheb = field(repr=False)
    diverged: bool = False

    def eigenfunction(self, x):
        return self.basis.basis(x) @ self.eigvec


def _collocation_matrix(model, t, A, grid: _PiecewiseCheb, p: float = 0.0):
    y = grid.nodes
    Mtx = np.zeros((y.size, grid.size))
    if isinstance(model, MPInduced):
        xs, ds = model.branch_table(y, A + 1)
        R = np.arange(A + 1, dtype=float) + 1.0
        for j in range(A + 1):
            w = np.exp(-p * R[j]) * ds[j] ** t
            Mtx += w[:, None] * grid.basis(xs[j])
        tail = model.tail_sum(t, A, y, "estimate", p)
        Mtx += tail[:, None] * grid.basis(np.zeros(y.size))
        return Mtx
    off = model.offset
    syms = np.arange(off, off + (A if model.countable else model.n_symbols))
    for s in syms:
        lo_img, hi_img = model.image(int(s))
        valid = np.nonzero((y >= float(lo_img)) & (y <= float(hi_img)))[0]
        if valid.size == 0:
            continue
        yy = y[valid]
        ss = np.full(yy.size, s)
        w = model.inverse_deriv(ss, yy) ** t
        grid.accumulate(Mtx, valid, model.inverse(ss, yy), w)
    if model.countable:
        if isinstance(model, GaussMap):
            # expand g(1/(k+y)) at 0 to second order: Hurwitz zeta moments
            z0 = np.zeros(y.size)
            for order, fac in ((0, 1.0), (1, 1.0), (2, 0.5)):
                mom = fac * _hurwitz_vec(2.0 * t + order, A + 1.0 + y)
                Mtx += mom[:, None] * grid.basis(z0, deriv=order)
        else:
            tail = np.asarray(model.tail_sum(t, A, y, "estimate"), dtype=float)
            Mtx += tail[:, None] * grid.basis(np.zeros(y.size))
    return Mtx


def _hurwitz_vec(s, q):
    from scipy.special import zeta
    return zeta(s, q) if s > 1 else np.full_like(np.asarray(q, dtype=float), np.inf)


def _leading_eig(Mtx):
    vals, vecs = np.linalg.eig(Mtx)
    real = np.abs(vals.imag) < 1e-9 * np.maximum(1.0, np.abs(vals.real))
    cand = np.where(real, vals.real, -np.inf)
    i = int(np.argmax(cand))
    v = vecs[:, i].real
    v = v / v[np.argmax(np.abs(v))]
    return float(vals[i].real), v


def collocation_leading(model: IntervalMapModel, t: float, A: int = 1000, nodes: int = 32,
                        p: float = 0.0, pieces_K: int = 60) -> CollocationResult:
    """Leading eigenpair of the transfer operator of |psi'|^t (times exp(-p R))."""
    if model.countable and not isinstance(model, MPInduced) and 2.0 * t <= 1.0:
        return CollocationResult(math.inf, np.array([]), np.array([]), None, True)
    grid = _PiecewiseCheb(_collocation_pieces(model, pieces_K), nodes)
    Mtx = _collocation_matrix(model, t, A, grid, p)
    if not np.all(np.isfinite(Mtx)):
        return CollocationResult(math.inf, grid.nodes, np.array([]), grid, True)
    lam, v = _leading_eig(Mtx)
    if lam <= 0:
        return CollocationResult(-math.inf, grid.nodes, v, grid, False)
    return CollocationResult(math.log(lam), grid.nodes, v, grid)


def _mp_induced_for(alpha: float, J: int) -> MPInduced:
    key = (alpha, J)
    if key not in _MP_CACHE:
        _MP_CACHE[key] = MPInduced(alpha, J)
    return _MP_CACHE[key]


_MP_CACHE: dict = {}


def mp_pressure(alpha: float, t: float, A: int = 1500, nodes: int = 24, J: int = 4000,
                tol: float = 1e-11) -> float:
    """Pressure of -t log F' for the Manneville-Pomeau map through its induced map.

    P(t) is the p >= 0 with spectral radius of sum_j exp(-p (j+1)) |psi_j'|^t
    equal to 1, and 0 when the radius at p = 0 is at most 1.
    """
    if t >= 1.0:
        return 0.0
    model = _mp_induced_for(alpha, J)
    grid = _PiecewiseCheb([(0.0, 1.0)], nodes)

    def log_rho(p):
        return collocation_leading_grid(model, t, A, grid, p)

    if t > 0 and log_rho(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, math.log(2.0) + 1e-9
    while log_rho(hi) > 0:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if log_rho(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_BRANCH_CACHE: dict = {}


def collocation_leading_grid(model: MPInduced, t, A, grid, p) -> float:
    """log spectral radius for the induced MP operator, reusing a cached branch table."""
    key = (model.alpha, model.J, A, grid.m)
    if key not in _BRANCH_CACHE:
        xs, ds = model.branch_table(grid.nodes, A + 1)
        B = np.stack([grid.basis(xs[j]) for j in range(A + 1)])  # (A+1, nodes, nodes)
        tail_t = {}
        _BRANCH_CACHE[key] = (xs, ds, B, tail_t, grid.basis(np.zeros(grid.nodes.size)))
    xs, ds, B, tail_t, B0 = _BRANCH_CACHE[key]
    R = np.arange(A + 1, dtype=float) + 1.0
    W = np.exp(-p * R)[:, None] * ds ** t
    Mtx = np.einsum("jn,jnm->nm", W, B)
    tail = model.tail_sum(t, A, grid.nodes, "estimate", p)
    if not np.all(np.isfinite(tail)):
        return math.inf
    Mtx += tail[:, None] * B0
    lam, _ = _leading_eig(Mtx)
    return math.log(lam) if lam > 0 else -math.inf


def pressure_collocation(model: IntervalMapModel, t: float, A: int = 1000,
                         nodes: Optional[int] = None, pieces_K: int = 60) -> PressureEstimate:
    """Collocation estimate with an error estimate from a coarser grid."""
    if isinstance(model, NAryMap):
        v = (1.0 - t) * math.log(model.N)
        return PressureEstimate(v, v, v, 0, "collocation", model.N, notes="closed form")
    if isinstance(model, MPOriginal):
        v = mp_pressure(model.alpha, t)
        v2 = mp_pressure(model.alpha, t, A=1000, nodes=16)
        err = abs(v - v2) + 1e-10
        return PressureEstimate(v, v - err, v + err, 24, "collocation", 1500,
                                notes="induced map")
    piecewise = isinstance(model, ModifiedGaussMap)
    if nodes is None:
        nodes = 10 if piecewise else 32
    fine = collocation_leading(model, t, A, nodes, pieces_K=pieces_K)
    if fine.diverged:
        return PressureEstimate.infinite(nodes, "collocation", A, "tail sum diverges")
    if isinstance(model, MPInduced):
        coarse = collocation_leading(model, t, A // 2, nodes // 2)
    elif piecewise:
        coarse = collocation_leading(model, t, A, nodes - 2, pieces_K=(2 * pieces_K) // 3)
    else:
        coarse = collocation_leading(model, t, A, max(nodes // 2, 8))
    err = abs(fine.log_lambda - coarse.log_lambda) + 1e-12
    v = fine.log_lambda
    return PressureEstimate(v, v - err, v + err, nodes, "collocation", A,
                            notes="error from coarser grid")


# ======================================================================
# dispatch, gap, cache and export

def pressure(chain: TruncatedChain, phi: Potential, t: float, method: str = "auto",
             n: int = 8, depth_k: Optional[int] = None, **kw) -> PressureEstimate:
    if method == "auto":
        if isinstance(phi, IntervalPotential):
            method = "collocation"
        else:
            method = "transfer-matrix"
    if method == "cylinder-sum":
        return pressure_cylinder_sum(chain, phi, t, n, **kw)
    if method == "periodic-orbit":
        return pressure_gurevich(chain, phi, t, n=n, depth_k=depth_k, **kw)
    if method == "transfer-matrix":
        return pressure_transfer_matrix(chain, phi, t, depth_k, **kw)
    if method == "collocation":
        if isinstance(phi, ConstantPotential):
            return pressure_transfer_matrix(chain, phi, t, 1)
        if not isinstance(phi, IntervalPotential):
            raise TypeError("collocation needs an interval potential")
        est = pressure_collocation(phi.model, t * phi.scale, **kw)
        return est
    raise ValueError(f"unknown method {method!r}")


def _cache_dir() -> Optional[Path]:
    d = os.environ.get("THERMOFORM_CACHE")
    if not d:
        return None
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _cache_key(parts: dict) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


_MEMO: dict = {}


def cached_pressure(chain: TruncatedChain, phi: Potential, t: float, method: str = "auto",
                    **kw) -> PressureEstimate:
    """``pressure`` memoized in process and, if THERMOFORM_CACHE is set, on disk."""
    parts = {"chain": chain.name, "A": chain.alphabet_size, "offset": chain.offset,
             "phi": phi.name, "scale": phi.scale, "t": repr(float(t)), "method": method,
             "kw": {k: kw[k] for k in sorted(kw)}}
    if isinstance(phi, IntervalPotential):
        parts["model"] = repr(getattr(phi.model, "alpha", phi.model.name))
    key = _cache_key(parts)
    if key in _MEMO:
        return _MEMO[key]
    cdir = _cache_dir()
    if cdir is not None:
        f = cdir / f"pressure-{key}.json"
        if f.exists():
            est = PressureEstimate(**json.loads(f.read_text()))
            _MEMO[key] = est
            return est
    est = pressure(chain, phi, t, method, **kw)
    _MEMO[key] = est
    if cdir is not None:
        (cdir / f"pressure-{key}.json").write_text(json.dumps(asdict(est)))
    return est


def pressure_gap(chain: TruncatedChain, phi: Potential, t: float, config: Optional[dict] = None
                 ) -> PressureEstimate:
    """G(t) = P(t phi) - t P(phi) with combined brackets."""
    config = dict(config or {})
    method = config.pop("method", "auto")
    if t == 1.0:
        base = cached_pressure(chain, phi, 1.0, method, **config)
        return PressureEstimate(0.0, 0.0, 0.0, base.depth_n, base.method, base.truncation_A,
                                notes="G(1) = 0 identically")
    Pt = cached_pressure(chain, phi, t, method, **config)
    P1 = cached_pressure(chain, phi, 1.0, method, **config)
    if Pt.diverged:
        return PressureEstimate.infinite(Pt.depth_n, Pt.method, Pt.truncation_A, Pt.notes)
    v = Pt.value - t * P1.value
    if t >= 0:
        lo, hi = Pt.lo - t * P1.hi, Pt.hi - t * P1.lo
    else:
        lo, hi = Pt.lo - t * P1.lo, Pt.hi - t * P1.hi
    return PressureEstimate(v, lo, hi, Pt.depth_n, Pt.method, Pt.truncation_A,
                            converged=Pt.converged and P1.converged, notes=Pt.notes)


def pressure_curve(chain, phi, ts: Sequence[float], config: Optional[dict] = None) -> list:
    return [(float(t), pressure_gap(chain, phi, float(t), config)) for t in ts]


CSV_HEADER = ["t", "lo", "value", "hi", "method", "n", "A"]


def write_pressure_csv(rows: Sequence[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for t, est in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in est.row(t)])
