"""Pattern trees inside target sets, the Hungerford bound D- and Frostman measures.

A pattern tree alternates two kinds of blocks.  At level j a *bridge*
(a cylinder of the good set that starts at the last symbol of the previous
level and returns to the first symbol of the center w) is appended, which
ends the fine cylinder J~_j at depth d~_j; then a *lock* copies
w_1 .. w_l with l = l_{d~_j}, so that sigma^{d~_j} z lies in C(l, w), ending
the coarse cylinder J_j at depth d_j.

Every level uses one bridge family, the same for all parents, so the tree is
a product of its level families.  Families are held explicitly (arrays of
words) or, for product measures on full shifts whose cylinders are all good,
implicitly as "every middle symbol free"; the implicit form keeps deep trees
tractable because masses, prefix counts and Frostman ratios factor over
positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gibbs import CylinderMeasure, ProductMeasure, entropy_rate
from .symbolic import ResourceGuardError, TruncatedChain, word_array
from .target import TargetSpec


class InfeasibleError(RuntimeError):
    """No admissible bridge exists within the configured caps."""


@dataclass
class BridgeFamily:
    """Shifted bridge cylinders b = (e, b_1, ..., b_N) with b_N = w_0."""

    start: int
    end: int
    N: int
    words: Optional[np.ndarray] = None      # explicit (count, N + 1)
    thinned: bool = False                   # explicit family cut down to the cap
    log_mass_estimate: Optional[float] = None  # log mu(S_N) before thinning
    logw: Optional[np.ndarray] = None       # log mu(b), explicit
    free_logp: Optional[np.ndarray] = None  # implicit: log p over the free alphabet
    free_symbols: Optional[np.ndarray] = None

    @property
    def implicit(self) -> bool:
        return self.words is None

    @property
    def log_count(self) -> float:
        if self.implicit:
            return (self.N - 1) * math.log(len(self.free_logp))
        return math.log(len(self.words))

    def log_prefix_count(self, k: int) -> float:
        """log of the number of distinct (b_1 .. b_k)."""
        k = max(0, min(k, self.N))
        if self.implicit:
            return min(k, self.N - 1) * math.log(len(self.free_logp))
        if k == 0:
            return 0.0
        return math.log(len(np.unique(self.words[:, 1:k + 1], axis=0)))


@dataclass
class Level:
    j: int
    d_tilde: int
    d: int
    bridge: BridgeFamily
    lock_len: int
    alpha: float
    beta: float
    gamma: float
    delta: float
    log_s_hat: float = 0.0
    lock_logw: Optional[np.ndarray] = None  # explicit: log mu(b + lock) per bridge word
    aux: dict = field(default_factory=dict)


@dataclass
class PatternTree:
    root: tuple
    levels: list
    target: TargetSpec
    chain: TruncatedChain
    measure_name: str
    rate: float
    epsilon: float
    M: int

    @property
    def d0(self) -> int:
        return len(self.root) - 1

    def depth(self) -> int:
        return self.levels[-1].d if self.levels else self.d0

    seq_alpha = property(lambda self: [lv.alpha for lv in self.levels])
    seq_beta = property(lambda self: [lv.beta for lv in self.levels])
    seq_gamma = property(lambda self: [lv.gamma for lv in self.levels])
    seq_delta = property(lambda self: [lv.delta for lv in self.levels])

    def log_leaf_count(self, upto: Optional[int] = None) -> float:
        lv = self.levels[:upto]
        return float(sum(x.bridge.log_count for x in lv))

    def lock_word(self, level: Level) -> tuple:
        return self.target.center_word(level.lock_len + 1)[1:]

    def words(self, level_index: int, fine: bool = False, cap: int = 200_000) -> np.ndarray:
        """Explicit words of J_j (or J~_j when ``fine``), j = level_index (0 is the root)."""
        if level_index == 0:
            return np.array([self.root], dtype=np.int64)
        if math.exp(self.log_leaf_count(level_index)) > cap:
            raise ResourceGuardError("tree level too large to enumerate")
        out = np.array([self.root], dtype=np.int64)
        for i, lv in enumerate(self.levels[:level_index]):
            if lv.bridge.implicit:
                mids = word_array(_free_chain(self.chain, lv.bridge.free_symbols), lv.bridge.N - 1,
                                      cap=cap) \
                    if lv.bridge.N > 1 else np.zeros((1, 0), dtype=np.int64)
                tails = np.column_stack([mids, np.full(len(mids), lv.bridge.end)])
            else:
                tails = lv.bridge.words[:, 1:]
            last = i == level_index - 1
            if not (last and fine):
                lock = np.array(self.lock_word(lv), dtype=np.int64)
                tails = np.column_stack([tails, np.tile(lock, (len(tails), 1))]) if lock.size \
                    else tails
            out = np.concatenate([np.repeat(out, len(tails), axis=0),
                                  np.tile(tails, (len(out), 1))], axis=1)
        return out

    def check_membership(self, cap: int = 200_000) -> bool:
        """sigma^{d~_j}(leaf) agrees with w to depth l_{d~_j} at every level (symbol check)."""
        leaves = self.words(len(self.levels), cap=cap)
        for lv in self.levels:
            need = np.array(self.target.center_word(lv.lock_len + 1), dtype=np.int64)
            seg = leaves[:, lv.d_tilde:lv.d_tilde + lv.lock_len + 1]
            if seg.shape[1] != len(need) or not np.all(seg == need):
                return False
        return True

    def to_json(self, nu: Optional["FrostmanMeasure"] = None, cap: int = 5000) -> dict:
        levels = []
        for lv in self.levels:
            rec = {"j": lv.j, "d_tilde": lv.d_tilde, "d": lv.d, "bridge_length": lv.bridge.N,
                   "lock_length": lv.lock_len, "mass_target_met": lv.aux.get("mass_target_met"), "alpha": lv.alpha, "beta": lv.beta,
                   "gamma": lv.gamma, "delta": lv.delta, "log_s_hat": lv.log_s_hat,
                   "bridge_start": lv.bridge.start, "bridge_end": lv.bridge.end,
                   "implicit": lv.bridge.implicit, "thinned": lv.bridge.thinned, "log_family_size": lv.bridge.log_count}
            if not lv.bridge.implicit and len(lv.bridge.words) <= cap:
                rec["bridges"] = lv.bridge.words.tolist()
                if nu is not None:
                    rec["nu_split"] = nu.splits[lv.j - 1].tolist()
            levels.append(rec)
        return {"root": list(self.root), "target": self.target.to_json(),
                "measure": self.measure_name, "rate": self.rate, "epsilon": self.epsilon,
                "M": self.M, "levels": levels}


def _free_chain(chain: TruncatedChain, symbols) -> TruncatedChain:
    A = len(symbols)
    return TruncatedChain(np.ones((A, A), dtype=bool), int(symbols[0]), False, None, "free")


# ---------------------------------------------------------------- construction

def _good_mask(mu: CylinderMeasure, words: np.ndarray, rate: float, eps: float, M: int):
    ok = np.ones(len(words), dtype=bool)
    for j in range(M, words.shape[1]):
        lw = mu.log_weights(words[:, :j + 1])
        ok &= (lw > -(j + 1) * (rate + eps)) & (lw < -(j + 1) * (rate - eps))
    return ok


def _product_all_good(mu: ProductMeasure, N: int, rate: float, eps: float, M: int) -> bool:
    # -log mu(C) / (j + 1) always lies between the extreme symbol costs
    lo, hi = float(mu.logp.min()), float(mu.logp.max())
    return N < M or (lo > -(rate + eps) and hi < -(rate - eps))


def _bridge_family(chain, mu, e, w0, N, rate, eps, M, cap, bridge_A, seed=0) -> BridgeFamily:
    if isinstance(mu, ProductMeasure) and chain.is_full and _product_all_good(mu, N, rate, eps, M):
        return BridgeFamily(e, w0, N, free_logp=mu.logp.copy(), free_symbols=chain.symbols.copy())
    ch = chain if chain.alphabet_size <= bridge_A else chain.restrict(bridge_A)
    words, thinned, log_scale = _grow_good_words(ch, mu, e, w0, N, rate, eps, M, cap, seed)
    logw = mu.log_weights(words) if len(words) else np.zeros(0)
    est = float(np.logaddexp.reduce(logw)) + log_scale if len(words) else -math.inf
    return BridgeFamily(e, w0, N, words=words, logw=logw, thinned=thinned, log_mass_estimate=est)


def _grow_good_words(ch, mu, e, w0, N, rate, eps, M, cap, seed):
    """Words (e, b_1, .., b_N = w0) extended one symbol at a time, every prefix of
    length j + 1 >= M + 1 kept inside the band exp(-(j+1)(rate +- eps)).  A seeded
    random subfamily of size ``cap`` is kept whenever the frontier outgrows it;
    the returned log scale undoes the mass lost to thinning (for the mass test only)."""
    off = ch.offset
    if not (ch.contains(e) and ch.contains(w0)):
        return np.zeros((0, N + 1), dtype=np.int64), False, 0.0
    A = ch.alphabet_size
    reach = [np.zeros(A, dtype=bool)]
    reach[0][w0 - off] = True
    for _ in range(N):
        reach.append((ch.matrix & reach[-1][None, :]).any(axis=1))
    rng = np.random.default_rng(seed)
    words = np.array([[e]], dtype=np.int64)
    thinned = False
    log_scale = 0.0
    for step in range(1, N + 1):
        rows, cols = np.nonzero(ch.matrix[words[:, -1] - off] & reach[N - step][None, :])
        words = np.column_stack([words[rows], cols + off])
        if step >= M and len(words):
            lw = mu.log_weights(words)
            n = step + 1
            words = words[(lw > -n * (rate + eps)) & (lw < -n * (rate - eps))]
        if len(words) > cap:
            keep = np.sort(rng.choice(len(words), cap, replace=False))
            lw = mu.log_weights(words)
            log_scale += float(np.logaddexp.reduce(lw) - np.logaddexp.reduce(lw[keep]))
            words = words[keep]
            thinned = True
        if not len(words):
            break
    return words, thinned, log_scale


def _family_mass(fam: BridgeFamily, mu) -> float:
    """mu(S_N) = total mass of the bridge family (shifted cylinders)."""
    if fam.log_mass_estimate is not None:
        return math.exp(fam.log_mass_estimate)
    if fam.implicit:
        # product measure: p_e * (sum p)^{N-1} * p_{w0}
        p = np.exp(fam.free_logp)
        off = int(fam.free_symbols[0])
        return float(p[fam.start - off] * p.sum() ** (fam.N - 1) * p[fam.end - off])
    return float(np.exp(fam.logw).sum()) if len(fam.logw) else 0.0


def build_pattern(chain: TruncatedChain, mu: CylinderMeasure, target: TargetSpec, levels_J: int,
                  config: Optional[dict] = None) -> PatternTree:
    """Alternate good bridges with locks for ``levels_J`` levels.

    config keys: M (default 5), epsilon (default 0.1 * rate), growth (bridge
    length at least growth * (d_{j-1} + 1), default 10), bridge_cap (how far
    past that floor to search, 8), family_cap (explicit families larger than this are thinned to a
    seeded random subfamily, 1024), bridge_A
    (alphabet cut for explicit families, 30), rate (P - int phi, default the
    entropy of mu).
    """
    config = dict(config or {})
    M = int(config.get("M", 5))
    rate = float(config["rate"]) if "rate" in config else entropy_rate(mu)
    eps = float(config.get("epsilon", 0.1 * rate))
    growth = float(config.get("growth", 10.0))
    bridge_cap = int(config.get("bridge_cap", 8))
    family_cap = int(config.get("family_cap", 1024))
    seed = int(config.get("seed", 0))
    bridge_A = int(config.get("bridge_A", 30))
    root = tuple(target.host) if target.host else (target.center_symbol(0),)
    if not chain.is_admissible(root):
        raise InfeasibleError("root word is not admissible")
    w0 = target.center_symbol(0)
    e = root[-1]
    if len(chain.successors(e)) == 0:
        raise InfeasibleError("root cylinder has no admissible continuation")
    d_prev = len(root) - 1
    levels = []
    for j in range(1, levels_J + 1):
        p_target = 0.5 * mu.weight((e,)) * mu.weight((w0,))
        N_min = max(1, int(math.ceil(growth * (d_prev + 1))))
        # smallest N above the growth floor whose family carries half the mixing
        # mass; failing that, the heaviest nonempty family in the scanned window
        fam, best, met = None, None, False
        for N in range(N_min, N_min + bridge_cap + 1):
            trial = _bridge_family(chain, mu, e, w0, N, rate, eps, M, family_cap, bridge_A, seed)
            mass = _family_mass(trial, mu)
            if mass >= p_target:
                fam, met = trial, True
                break
            if mass > 0 and (best is None or mass > best[0]):
                best = (mass, trial)
        if fam is None:
            if best is None:
                raise InfeasibleError(f"no admissible good bridge from {e} to {w0} of length "
                                      f"{N_min}..{N}")
            fam = best[1]
        d_tilde = d_prev + fam.N
        ell = int(target.depth(d_tilde))
        d = d_tilde + ell
        lv = _level_record(j, d_tilde, d, fam, ell, mu, target)
        lv.log_s_hat = _log_s_hat(mu, root[0], d_prev)
        lv.aux["mass_target_met"] = met
        levels.append(lv)
        e = target.center_symbol(ell)
        d_prev = d
    return PatternTree(root, levels, target, chain, mu.name, rate, eps, M)


def _lock_log_mass_product(mu: ProductMeasure, target: TargetSpec, ell: int) -> float:
    counts = target.center_counts(1, ell + 1)
    off = mu.chain.offset
    return float(sum(c * mu.logp[s - off] for s, c in counts.items()))


def _level_record(j, d_tilde, d, fam, ell, mu, target) -> Level:
    e_mass = math.log(mu.weight((fam.start,)))
    if fam.implicit:
        lp = fam.free_logp
        off = int(fam.free_symbols[0])
        end_lp = float(lp[fam.end - off])
        start_lp = float(lp[fam.start - off])
        lo_b = start_lp + (fam.N - 1) * float(lp.min()) + end_lp
        hi_b = start_lp + (fam.N - 1) * float(lp.max()) + end_lp
        total = math.log(_family_mass(fam, mu))
        lock = _lock_log_mass_product(mu, target, ell)
        alpha, beta = -(lo_b - e_mass), -(hi_b - e_mass)
        gamma = -lock
        delta = math.exp(total - e_mass)
        return Level(j, d_tilde, d, fam, ell, alpha, beta, gamma, delta)
    lock = np.array(target.center_word(ell + 1)[1:], dtype=np.int64)
    full = np.column_stack([fam.words, np.tile(lock, (len(fam.words), 1))]) if lock.size \
        else fam.words
    lock_logw = mu.log_weights(full)
    ratio_b = fam.logw - e_mass
    alpha, beta = -float(ratio_b.min()), -float(ratio_b.max())
    gamma = -float((lock_logw - fam.logw).min())
    delta = float(np.exp(fam.logw).sum() / math.exp(e_mass))
    return Level(j, d_tilde, d, fam, ell, alpha, beta, gamma, delta, lock_logw=lock_logw)


def _log_s_hat(mu: CylinderMeasure, z0: int, d: int) -> float:
    """log of (c(z_0) c)^2 K_{d+1}^4 with c the sup of the local constants."""
    c0 = mu.local_consts(z0)
    c = max([c0] + [mu.local_consts(int(s)) for s in mu.chain.symbols[:64]])
    return 2.0 * math.log(c0 * c) + 4.0 * math.log(mu.K_seq(d + 1))


# ---------------------------------------------------------------- Hungerford

def hungerford_from_sequences(alpha: Sequence[float], beta: Sequence[float],
                              gamma: Sequence[float], delta: Sequence[float],
                              log_s_hat: Optional[Sequence[float]] = None) -> list:
    """Finite-level values of the D- expression for j = 1 .. len(alpha).

    The numerator at level j uses delta_1 .. delta_{j+1}; at the last level,
    where delta_{j+1} is not available, delta_j stands in for it.
    """
    J = len(alpha)
    s = list(log_s_hat) if log_s_hat is not None else [0.0] * J
    out = []
    for j in range(1, J + 1):
        num = sum(beta[:j]) + sum(math.log(x) for x in delta[:j])
        num += math.log(delta[j] if j < J else delta[j - 1])
        den = sum(alpha[:j]) + sum(gamma[:j]) + sum(s[: max(j - 1, 0)])
        out.append(num / den if den > 0 else math.nan)
    return out


def hungerford_lower_bound(tree: PatternTree) -> dict:
    vals = hungerford_from_sequences(tree.seq_alpha, tree.seq_beta, tree.seq_gamma,
                                     tree.seq_delta, [lv.log_s_hat for lv in tree.levels])
    return {"D_minus": vals[-1], "per_level": vals, "non_asymptotic": len(vals) < 2}


# ---------------------------------------------------------------- Frostman

@dataclass
class FrostmanMeasure:
    """Mass distribution nu on the tree: each parent splits over its bridges in proportion
    to the base measure of the shifted bridge cylinders."""

    tree: PatternTree
    base_name: str
    splits: list            # per level: array of split weights (explicit) or log p (implicit)
    implicit: list
    aux: dict = field(default_factory=dict)

    def nu(self, word: Sequence[int]) -> float:
        """nu of an arbitrary cylinder: the tree mass it contains."""
        word = tuple(int(s) for s in word)
        tree = self.tree
        root = tree.root
        L = len(word)
        if word[:min(L, len(root))] != root[:min(L, len(root))]:
            return 0.0
        mass = 1.0
        pos = len(root)
        for i, lv in enumerate(tree.levels):
            if pos >= L:
                return mass
            seg = word[pos:]
            fam = lv.bridge
            k = min(len(seg), fam.N)
            if fam.implicit:
                off = int(fam.free_symbols[0])
                p = np.exp(self.splits[i])
                for t in range(k):
                    sym = seg[t]
                    if t == fam.N - 1:
                        if sym != fam.end:
                            return 0.0
                    else:
                        idx = sym - off
                        if idx < 0 or idx >= len(p):
                            return 0.0
                        mass *= p[idx] / p.sum()
            else:
                sel = np.all(fam.words[:, 1:k + 1] == np.array(seg[:k]), axis=1)
                mass *= float(self.splits[i][sel].sum())
                if mass == 0.0:
                    return 0.0
            pos += k
            if pos >= L:
                return mass
            lock = tree.lock_word(lv)
            seg = word[pos:]
            k = min(len(seg), len(lock))
            if tuple(seg[:k]) != tuple(lock[:k]):
                return 0.0
            pos += k
        return mass


def frostman_measure(tree: PatternTree, base: CylinderMeasure, t: Optional[float] = None,
                     mu: Optional[CylinderMeasure] = None) -> FrostmanMeasure:
    """Proportional redistribution of nu along the tree.

    With ``base`` an auxiliary measure (e.g. the RPF measure of t phi) and
    ``mu`` the reference measure, the per-level maxima of
    base(sigma^{d_{j-1}} J~_j) / mu(sigma^{d_{j-1}} J~_j)^t are recorded.
    """
    splits, implicit = [], []
    ineq = []
    for lv in tree.levels:
        fam = lv.bridge
        if fam.implicit:
            if not isinstance(base, ProductMeasure):
                raise TypeError("implicit families need a product base measure")
            splits.append(base.logp.copy())
            implicit.append(True)
            continue
        lw = base.log_weights(fam.words)
        if not np.isfinite(lw).any():
            raise ZeroDivisionError("zero-mass parent: base measure vanishes on the bridges")
        w = np.exp(lw - lw.max())
        splits.append(w / w.sum())
        implicit.append(False)
        if mu is not None and t is not None:
            ineq.append(float(np.max(lw - t * mu.log_weights(fam.words))))
    aux = {"log_m_over_mu_t": ineq} if ineq else {}
    return FrostmanMeasure(tree, base.name, splits, implicit, aux)


def frostman_check(nu: FrostmanMeasure, mu: CylinderMeasure, Lambda: float,
                   depth_cap: Optional[int] = None, node_cap: int = 500_000) -> dict:
    """max over cylinders C(m, z) meeting the tree (m <= depth_cap) of nu(C) / mu(C)^Lambda.

    Product trees are handled by position: within a free segment the log
    ratio changes by a fixed amount per symbol and within a lock it only
    grows, so the maximum over each segment sits at one of its ends and the
    check is exact at every depth.  Explicit trees are enumerated.
    """
    tree = nu.tree
    cap = tree.depth() if depth_cap is None else min(depth_cap, tree.depth())
    if all(nu.implicit) and isinstance(mu, ProductMeasure):
        depths, logs = _frostman_product(nu, mu, Lambda, cap)
    else:
        depths, logs = _frostman_explicit(nu, mu, Lambda, cap, node_cap)
    depths = np.array(depths)
    logs = np.array(logs)
    # per-level maxima: the ratio may rise inside a lock, so growth is judged
    # by whether successive levels keep setting records
    ends = [len(tree.root) - 1] + [lv.d for lv in tree.levels]
    level_max = []
    for a, b in zip(ends[:-1], ends[1:]):
        sel = (depths > a) & (depths <= b)
        if sel.any():
            level_max.append(float(logs[sel].max()))
    run = np.maximum.accumulate(logs)
    records = [int(d) for d, x, y in zip(depths[1:], run[1:], run[:-1]) if x > y + 1e-9]
    tail = level_max[len(level_max) // 2:]
    growing = len(tail) >= 2 and all(y > x + 1e-9 for x, y in zip(tail[:-1], tail[1:]))
    log_max = float(run[-1])
    return {"max_c": math.exp(log_max) if log_max < 700 else math.inf, "log_max_c": log_max,
            "violations": [d for d in records if d > ends[len(ends) // 2]],
            "level_log_max": level_max, "growth_detected": bool(growing),
            "depths": depths.tolist(), "log_ratio": logs.tolist()}


def _frostman_product(nu, mu, Lambda, cap):
    tree = nu.tree
    off = mu.chain.offset
    lp = mu.logp
    root_mu = float(sum(lp[s - off] for s in tree.root))
    depths = [0, len(tree.root) - 1]
    logs = [-Lambda * float(lp[tree.root[0] - off]), -Lambda * root_mu]
    cur = -Lambda * root_mu
    pos = len(tree.root) - 1
    for i, lv in enumerate(tree.levels):
        fam = lv.bridge
        sp = nu.splits[i] - np.log(np.exp(nu.splits[i]).sum())
        # free positions: nu gains log p_a (normalized split), mu gains log p_a
        per = float(np.max(sp - Lambda * lp))
        if fam.N > 1:
            depths.append(min(pos + 1, cap))
            logs.append(cur + per)
            cur += per * (fam.N - 1)
            pos += fam.N - 1
            depths.append(min(pos, cap))
            logs.append(cur)
        cur += -Lambda * float(lp[fam.end - off])
        pos += 1
        depths.append(min(pos, cap))
        logs.append(cur)
        if pos >= cap:
            break
        if lv.lock_len:
            lock = -Lambda * _lock_log_mass_product(mu, tree.target, lv.lock_len)
            cur += lock
            pos += lv.lock_len
            if pos > cap:
                # inside the lock the ratio is monotone; evaluate at the cap exactly
                cur -= lock
                part = _lock_log_mass_product(mu, tree.target, lv.lock_len - (pos - cap))
                cur += -Lambda * part
                pos = cap
            depths.append(pos)
            logs.append(cur)
        if pos >= cap:
            break
    return depths, logs


def _frostman_explicit(nu, mu, Lambda, cap, node_cap):
    tree = nu.tree
    leaves = tree.words(len(tree.levels), cap=node_cap)
    L = min(cap + 1, leaves.shape[1])
    depths, logs = [], []
    for m in range(L):
        pref = np.unique(leaves[:, :m + 1], axis=0)
        lmu = mu.log_weights(pref)
        lnu = np.log([nu.nu(tuple(r)) for r in pref.tolist()])
        depths.append(m)
        logs.append(float(np.max(lnu - Lambda * lmu)))
    return depths, logs


# ---------------------------------------------------------------- box counts

def tree_prefix_counts(tree: PatternTree, scales: Optional[Sequence[int]] = None) -> list:
    """(m, log #distinct (m+1)-prefixes of tree words) at the given depths (default: the
    level-completion depths d_j)."""
    if scales is None:
        scales = [lv.d for lv in tree.levels]
    out = []
    for m in scales:
        logc = 0.0
        pos = len(tree.root) - 1
        for lv in tree.levels:
            if m <= pos:
                break
            k = m - pos
            logc += lv.bridge.log_prefix_count(k)
            pos = lv.d
        out.append((int(m), float(logc)))
    return out


def tree_json(tree: PatternTree, nu: Optional[FrostmanMeasure] = None) -> str:
    return json.dumps(tree.to_json(nu), sort_keys=True, indent=1)
