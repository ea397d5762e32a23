"""Orbit simulation, shrinking-target hit statistics and box counting.

Orbits of Moebius-branch maps are sampled in digit space.  For a Lebesgue
start y, the law of f^n(y) given its first n digits has density proportional
to |psi_w'(x)|, i.e. to (1 + s x)^(-2) where s = c/d is read off the composed
branch matrix.  Drawing x_n from that law, reading its digit and updating s
reproduces the exact joint law of (a_1, .., a_H, f^H y).  The orbit points
f^n y for n < H are then recovered by the contracting backward recursion
x_{n-1} = psi_{a_n}(x_n), so no forward round-off is ever amplified.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .interval_maps import IntervalMapModel, MoebiusModel, make_model
from .symbolic import SymbolicPoint
from .target import compile_rule

ORBIT_CAP = 10**5
HORIZON_CAP = 10**6


@dataclass
class ExperimentPlan:
    model: str = "gauss"
    center: float = (math.sqrt(5.0) - 1.0) / 2.0
    radius_rule: str = "n**-2"
    orbit_count: int = 10_000
    horizon_n: int = 10_000
    rng_seed: int = 0
    hit_threshold: int = 10
    after: int = 100
    params: dict = field(default_factory=dict)
    model_params: dict = field(default_factory=dict)
    chunk: int = 500
    threads: int = 1

    def __post_init__(self):
        if not 1 <= self.orbit_count <= ORBIT_CAP:
            raise ValueError(f"orbit_count must lie in 1..{ORBIT_CAP}")
        if not 1 <= self.horizon_n <= HORIZON_CAP:
            raise ValueError(f"horizon_n must lie in 1..{HORIZON_CAP}")
        if not 0.0 <= self.center <= 1.0:
            raise ValueError("center must lie in [0, 1]")
        if self.hit_threshold < 1 or self.after < 0 or self.chunk < 1 or self.threads < 1:
            raise ValueError("hit_threshold, chunk and threads must be positive, after >= 0")

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("threads")  # results do not depend on it
        return d


# ---------------------------------------------------------------- orbit sampling

def _branch_row_update(model: MoebiusModel, s, digits):
    """s = c/d of psi_w composed with psi_a for each row."""
    a, b, c, d = model.coeffs(digits)
    return (s * a + c) / (s * b + d)


def _draw(model: MoebiusModel, s, u, digits_prev):
    """x with density prop. to (1 + s x)^(-2) on the image of the previous branch."""
    if model.full_branch or digits_prev is None:
        return u / (1.0 + s - s * u)
    lo, hi = np.vectorize(model.image, otypes=[float, float])(digits_prev)
    glo, ghi = lo / (1.0 + s * lo), hi / (1.0 + s * hi)
    v = glo + u * (ghi - glo)
    return v / (1.0 - s * v)


def sample_orbit_chunk(model: MoebiusModel, uniforms: np.ndarray):
    """Digits (rows, H) and endpoints f^H y from (rows, H + 1) uniforms."""
    rows, H1 = uniforms.shape
    H = H1 - 1
    digits = np.empty((rows, H), dtype=float)
    s = np.zeros(rows)
    prev = None
    for n in range(H):
        x = _draw(model, s, 1.0 - uniforms[:, n], prev)  # 1 - u lies in (0, 1]
        a = model.symbol_array(x)
        digits[:, n] = a
        s = _branch_row_update(model, s, a)
        prev = a
    last = _draw(model, s, 1.0 - uniforms[:, H], prev)
    return digits, last


def orbit_streams(seed: int, count: int) -> list:
    """Per-orbit generators: orbit i uses SeedSequence(seed).spawn(count)[i]."""
    return [np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(count)]


def _require_moebius(model):
    if not isinstance(model, MoebiusModel):
        raise NotImplementedError(f"digit-space orbit sampling needs Moebius branches, "
                                  f"not {type(model).__name__}")


def bc_dichotomy(plan: ExperimentPlan) -> dict:
    """Hit counts of |f^n(y) - x| < r_n, 1 <= n <= horizon, for Lebesgue-random y."""
    model = make_model(plan.model, **plan.model_params)
    _require_moebius(model)
    rule = compile_rule(plan.radius_rule, plan.params)
    H = plan.horizon_n
    n = np.arange(1, H + 1, dtype=float)
    radii = np.array([rule(k) for k in n]) if not _vector_ok(rule) else rule(n)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (H,))
    gens = orbit_streams(plan.rng_seed, plan.orbit_count)
    chunks = [range(i, min(i + plan.chunk, plan.orbit_count))
              for i in range(0, plan.orbit_count, plan.chunk)]

    def run(idx):
        U = np.stack([gens[i].random(H + 1) for i in idx])
        digits, x = sample_orbit_chunk(model, U)
        hits = np.zeros(len(idx), dtype=np.int64)
        late = np.zeros(len(idx), dtype=np.int64)
        rmin = np.full(len(idx), np.inf)
        rmin_tail = np.full(len(idx), np.inf)
        # x currently holds f^H y; walk back to f^1 y
        for k in range(H, 0, -1):
            dist = np.abs(x - plan.center)
            ratio = dist / radii[k - 1]
            hit = ratio < 1.0
            hits += hit
            if k > plan.after:
                late += hit
                rmin_tail = np.minimum(rmin_tail, ratio)
            rmin = np.minimum(rmin, ratio)
            a, b, c, d = model.coeffs(digits[:, k - 1])
            x = (a * x + b) / (c * x + d)
        return hits, late, rmin, rmin_tail

    if plan.threads > 1:
        with ThreadPoolExecutor(plan.threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    hits = np.concatenate([p[0] for p in parts])
    late = np.concatenate([p[1] for p in parts])
    rmin = np.concatenate([p[2] for p in parts])
    rmin_tail = np.concatenate([p[3] for p in parts])
    N = plan.orbit_count
    k_hit = int((hits >= plan.hit_threshold).sum())
    k_late = int((late > 0).sum())
    qs = [0.05, 0.25, 0.5, 0.75, 0.95]
    expected = _expected_hits(model, plan.center, radii)
    return {
        "plan": plan.to_json(),
        "fraction_hitting_at_least_K": k_hit / N,
        "ci99_at_least_K": _ci(k_hit, N),
        "fraction_hit_after": k_late / N,
        "ci99_hit_after": _ci(k_late, N),
        "mean_hits": float(hits.mean()),
        "expected_hits_stationary": expected,
        "sum_measure_of_balls": expected,
        "empirical_liminf_quantiles": (dict(zip(map(str, qs), np.quantile(rmin_tail, qs).tolist()))
                                       if H > plan.after else None),
        "min_ratio_quantiles": dict(zip(map(str, qs), np.quantile(rmin, qs).tolist())),
        "hit_counts_histogram": np.bincount(np.minimum(hits, 50)).tolist(),
    }


def _vector_ok(rule) -> bool:
    try:
        out = rule(np.arange(1.0, 3.0))
        return np.shape(out) == (2,)
    except Exception:
        return False


def _ci(k: int, n: int) -> list:
    ci = binomtest(k, n).proportion_ci(0.99)
    return [float(ci.low), float(ci.high)]


def _expected_hits(model: IntervalMapModel, x: float, radii: np.ndarray) -> float:
    """Sum over n of the invariant mass of the ball B(x, r_n)."""
    try:
        lo = np.clip(x - radii, 0.0, 1.0)
        hi = np.clip(x + radii, 0.0, 1.0)
        return float(np.sum(model.acip_cdf(hi) - model.acip_cdf(lo)))
    except NotImplementedError:
        return math.nan


# ---------------------------------------------------------------- box counting

def _interval_counts(lo: np.ndarray, hi: np.ndarray, eps: float, anchor: float) -> int:
    a = np.floor((lo - anchor) / eps + 1e-9)
    b = np.maximum(a, np.ceil((hi - anchor) / eps - 1e-9) - 1)
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    prev = np.concatenate([[-np.inf], np.maximum.accumulate(b)[:-1]])
    return int(np.sum(np.maximum(0.0, b - np.maximum(prev, a - 1))))


def box_dimension(cover, scales: Optional[Sequence[float]] = None, anchor: float = 0.0,
                  model: Optional[IntervalMapModel] = None, node_cap: int = 200_000) -> dict:
    """Least-squares slope of log N(eps) against log(1/eps).

    ``cover`` is an (n, 2) array of intervals, a 1-d array of points, or a
    PatternTree.  Boxes are the grid [anchor + k eps, anchor + (k+1) eps).
    For a tree on the N-ary map the count at depth m is the number of
    distinct (m+1)-prefixes (each a grid box of side N^-(m+1)), taken at the
    level-completion depths unless ``scales`` lists depths; other trees are
    enumerated and mapped through ``model``.
    """
    from .cantor import PatternTree, tree_prefix_counts
    from .interval_maps import NAryMap

    if isinstance(cover, PatternTree):
        nary = model is None or isinstance(model, NAryMap)
        if nary:
            N = cover.chain.alphabet_size
            pc = tree_prefix_counts(cover, None if scales is None else [int(m) for m in scales])
            log_inv = np.array([(m + 1) * math.log(N) for m, _ in pc])
            logN = np.array([c for _, c in pc])
            return _fit(log_inv, logN, {"depths": [m for m, _ in pc]})
        words = cover.words(len(cover.levels), cap=node_cap)
        lo, hi = model.cylinder_bounds(words)
        cover = np.column_stack([lo, hi])
    arr = np.asarray(cover, dtype=float)
    points = arr.ndim == 1
    if points:
        arr = np.column_stack([arr, arr])
    lo, hi = arr[:, 0], arr[:, 1]
    if scales is None:
        # dyadic scales from a quarter of the span down to the resolution of the cover
        span = max(float(hi.max() - lo.min()), 1e-300)
        if points:  # keep about ten samples per occupied box at the finest scale
            finest = span * 10.0 / len(arr)
        else:
            finest = float(np.min(hi - lo))
        finest = min(max(finest, span * 1e-6), span * 1e-3)
        k0 = math.ceil(math.log2(4.0 / span))
        k1 = math.floor(math.log2(1.0 / finest))
        scales = 2.0 ** -np.arange(k0, max(k1, k0 + 3) + 1)
    scales = np.asarray(scales, dtype=float)
    counts = np.array([_interval_counts(lo, hi, e, anchor) for e in scales], dtype=float)
    return _fit(-np.log(scales), np.log(counts), {"scales": scales.tolist(),
                                                   "counts": counts.astype(int).tolist()})


def _fit(x: np.ndarray, y: np.ndarray, extra: dict) -> dict:
    if len(x) < 2:
        raise ValueError("need at least two scales")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    decades = float((x.max() - x.min()) / math.log(10.0))
    out = {"slope": float(slope), "r2": r2, "decades": decades,
           "meets_scale_precondition": bool(len(x) >= 4 and decades >= 2.0),
           "log_inv_scale": x.tolist(), "log_count": y.tolist()}
    out.update(extra)
    return out


def middle_thirds(depth: int) -> np.ndarray:
    """Intervals of the depth-``depth`` middle-thirds construction."""
    lo = np.zeros(1)
    for k in range(depth):
        step = 3.0 ** -(k + 1)
        lo = np.concatenate([lo, lo + 2.0 * step])
    return np.column_stack([lo, lo + 3.0 ** -depth])


def box_counts_csv(result: dict, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["log_inv_scale", "log_count"])
        for a, b in zip(result["log_inv_scale"], result["log_count"]):
            w.writerow([repr(float(a)), repr(float(b))])


# ---------------------------------------------------------------- hitting times

def orbit_digits(model: MoebiusModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """First n digits of a Lebesgue-random point, exact in law."""
    _require_moebius(model)
    digits, _ = sample_orbit_chunk(model, rng.random((1, n + 1)))
    return digits[0].astype(np.int64)


def hitting_sequence(model: IntervalMapModel, x, horizon: int = 1000,
                     blocks: Optional[Sequence[int]] = None,
                     rng: Optional[np.random.Generator] = None) -> dict:
    """Return times n >= 1 with the digit of f^n(x) in ``blocks``.

    ``x`` may be a SymbolicPoint, a digit sequence, an exact Fraction or
    float (expanded exactly, so a dyadic float codes a finite orbit), or
    ``"random"`` (a Lebesgue-random point sampled in digit space with
    ``rng``).  ``blocks`` defaults to the block of x itself.
    """
    if isinstance(x, SymbolicPoint):
        digits = np.array(x.prefix(horizon + 1), dtype=np.int64)
    elif isinstance(x, str) and x == "random":
        digits = orbit_digits(model, horizon + 1, rng or np.random.default_rng(0))
    elif isinstance(x, (float, Fraction, int)):
        digits = _exact_digits(model, Fraction(x), horizon + 1)
    else:
        digits = np.asarray(x, dtype=np.int64)[: horizon + 1]
    if blocks is None:
        blocks = [int(digits[0])]
    inside = np.isin(digits[1:], np.asarray(blocks))
    p = np.flatnonzero(inside) + 1
    return {"p": p.tolist(), "blocks": [int(b) for b in blocks],
            "horizon": int(len(digits) - 1), "frequency": float(inside.mean()) if len(inside)
            else math.nan}


def _exact_digits(model, x: Fraction, n: int) -> np.ndarray:
    _require_moebius(model)
    out = []
    for _ in range(n):
        if x <= 0 or x >= 1:
            break
        sym = model.symbol_of(float(x))
        lo, hi = model.partition_exact(sym)
        if not lo < x < hi:  # float rounding at a boundary
            sym = sym - 1 if x <= lo else sym + 1
        out.append(sym)
        x = model.forward_exact(sym, x)
    return np.array(out, dtype=np.int64)


def report_json(result: dict) -> str:
    return json.dumps(result, sort_keys=True, indent=1)
