"""Shrinking targets: the exponent s, the generalized Bowen equation and dimension bounds."""

from __future__ import annotations

import ast
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .gibbs import (CylinderMeasure, ProductMeasure, acip_measure, bernoulli_measure,
                    measure_entropy_and_lyapunov)
from .interval_maps import (GaussMap, IntervalMapModel, LurothMap, ModifiedGaussMap, MPInduced,
                            MPOriginal, NAryMap, utilde)
from .potentials import (ConstantPotential, IntervalPotential, Potential, bernoulli_potential,
                         gauss_log_deriv, luroth_log_deriv, modified_gauss_log_deriv,
                         mp_induced_log_deriv, mp_log_deriv, nary_log_deriv)
from .pressure import PressureEstimate, cached_pressure, pressure_gap
from .symbolic import SymbolicPoint, TruncatedChain, check_properties, full_shift

from . import __version__


class DepthOverflowError(RuntimeError):
    """The depth rule asks for cylinders deeper than the measure can resolve."""


# ---------------------------------------------------------------- rule expressions

_FUNCS = {"exp": math.exp, "log": math.log, "sqrt": math.sqrt, "floor": math.floor,
          "ceil": math.ceil, "min": min, "max": max}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult, ast.Div,
          ast.FloorDiv, ast.Pow, ast.USub, ast.UAdd, ast.Name, ast.Load, ast.Constant, ast.Call)


def compile_rule(expr: str, params: Optional[dict] = None) -> Callable[[int], float]:
    """Arithmetic expression in ``n`` (plus named parameters) to a function of n."""
    params = dict(params or {})
    tree = ast.parse(str(expr), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ValueError(f"unsupported construct in {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name)
                                               and node.func.id in _FUNCS):
            raise ValueError(f"unsupported function in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id != "n" \
                and node.id not in params:
            raise ValueError(f"unknown name {node.id!r} in {expr!r}")
    code = compile(tree, "<rule>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **params}

    def rule(n):
        return eval(code, env, {"n": n})

    return rule


# ---------------------------------------------------------------- targets

@dataclass
class TargetSpec:
    """Target-ball set around ``center``: cylinders C(l_n, w) hit for infinitely many n.

    Exactly one of ``depth_rule`` (n -> l_n) or ``radius_rule`` (n -> r_n) is
    given, as an expression string in n.  ``linear_bound`` is the declared
    limsup l_n / n (``math.inf`` for superlinear rules).
    """

    center: Sequence[int]
    depth_rule: Optional[str] = None
    radius_rule: Optional[str] = None
    host: Sequence[int] = ()
    linear_bound: Optional[float] = 1.0
    params: dict = field(default_factory=dict)
    point: Optional[float] = None  # interval coordinate of the center, if any
    period: Optional[int] = None   # the center repeats its last ``period`` symbols
    name: str = "target"

    def __post_init__(self):
        if (self.depth_rule is None) == (self.radius_rule is None):
            raise ValueError("give exactly one of depth_rule or radius_rule")
        self.center = tuple(int(s) for s in self.center)
        self.host = tuple(int(s) for s in self.host)
        if self.period is not None and not 1 <= self.period <= len(self.center):
            raise ValueError("period must lie in 1..len(center)")

    @property
    def known_length(self) -> float:
        return math.inf if self.period else len(self.center)

    def center_symbol(self, i: int) -> int:
        L = len(self.center)
        if i < L:
            return self.center[i]
        if not self.period:
            raise DepthOverflowError(f"center known only to {L} symbols")
        return self.center[L - self.period + (i - L) % self.period]

    def center_word(self, length: int) -> tuple:
        return tuple(self.center_symbol(i) for i in range(length))

    def center_counts(self, start: int, stop: int) -> dict:
        """Symbol counts of w[start:stop] without materializing long periodic words."""
        L = len(self.center)
        counts: dict = {}
        head_stop = min(stop, L)
        for i in range(start, head_stop):
            counts[self.center[i]] = counts.get(self.center[i], 0) + 1
        lo = max(start, L)
        if stop > lo:
            if not self.period:
                raise DepthOverflowError(f"center known only to {L} symbols")
            p = self.period
            block = self.center[L - p:]
            full, rest = divmod(stop - lo, p)
            off = (lo - L) % p
            for k in range(p):
                counts[block[k]] = counts.get(block[k], 0) + full
            for k in range(rest):
                sym = block[(off + k) % p]
                counts[sym] = counts.get(sym, 0) + 1
            # the full cycles started at ``off``; a whole cycle has the same counts
        return counts

    def depth(self, n: int) -> int:
        if self.depth_rule is None:
            raise ValueError("radius targets need depth_from_radius")
        return int(compile_rule(self.depth_rule, self.params)(n))

    def radius(self, n: int) -> float:
        if self.radius_rule is None:
            raise ValueError("depth target has no radius rule")
        return float(compile_rule(self.radius_rule, self.params)(n))

    def to_json(self) -> dict:
        return {"name": self.name, "center": list(self.center), "depth_rule": self.depth_rule,
                "radius_rule": self.radius_rule, "host": list(self.host),
                "linear_bound": self.linear_bound, "params": self.params, "point": self.point,
                "period": self.period}


def depth_from_radius(model: IntervalMapModel, target: TargetSpec, n: int) -> int:
    """Smallest l with the l-cylinder of the center inside [x - r_n, x + r_n]."""
    x = target.point
    r = target.radius(n)
    L = int(min(target.known_length, 200))
    w = np.array(target.center_word(L), dtype=np.int64)
    for ell in range(L):
        lo, hi = model.cylinder_bounds(w[None, : ell + 1])
        if x - r <= lo[0] and hi[0] <= x + r:
            return ell
    raise DepthOverflowError(f"center word too short to fit inside radius {r:g}")


def _cylinder_depth(mu: CylinderMeasure, target: TargetSpec, n: int) -> int:
    if target.depth_rule is not None:
        return target.depth(n)
    model = getattr(mu, "model", None)
    if model is None:
        raise ValueError("radius targets need an interval measure")
    return depth_from_radius(model, target, n)


def exponent_s(mu: CylinderMeasure, target: TargetSpec, n_grid: Sequence[int],
               tol: float = 0.05) -> dict:
    """-(1/n) log mu(C(l_n, w)) on the grid; liminf / limsup over its second half."""
    ns, vals, depths = [], [], []
    reliable = getattr(mu, "reliable_depth", 64)
    superlinear = target.linear_bound is not None and math.isinf(target.linear_bound)
    for n in n_grid:
        ell = _cylinder_depth(mu, target, int(n))
        if ell + 1 > min(reliable, target.known_length):
            if superlinear:
                break
            raise DepthOverflowError(f"l_{n} = {ell} exceeds the resolvable depth")
        lw = float(mu.log_weights(np.array([target.center_word(ell + 1)]))[0])
        ns.append(int(n))
        depths.append(ell)
        vals.append(-lw / n)
    if not vals:
        raise DepthOverflowError("no grid point within the resolvable depth")
    vals_a = np.array(vals)
    tail = vals_a[len(vals_a) // 2:]
    s_lo, s_hi = float(tail.min()), float(tail.max())
    if superlinear:
        # per-symbol decay stays positive while l_n / n grows without bound
        rate = float(np.min(np.array(vals) * np.array(ns) / (np.array(depths) + 1.0)))
        if rate > 0:
            s_lo = s_hi = math.inf
    limit = 0.5 * (s_lo + s_hi) if (math.isinf(s_lo) or s_hi - s_lo < tol) else None
    if math.isinf(s_lo):
        limit = math.inf
    return {"s_lo": s_lo, "s_hi": s_hi, "s_limit_estimate": limit, "n": ns, "values": vals,
            "depths": depths}


# ---------------------------------------------------------------- Bowen equation

@dataclass
class BowenSolution:
    T: float
    bracket: tuple
    s_used: float
    form: str = "root"          # root | sup-inf-gap | boundary
    T_minus: Optional[float] = None
    T_plus: Optional[float] = None
    lower_bound_hs: Optional[float] = None
    evaluations: int = 0
    notes: str = ""

    def __post_init__(self):
        if self.T_minus is None:
            self.T_minus = self.T
        if self.T_plus is None:
            self.T_plus = self.T

    def to_json(self) -> dict:
        return {"T": self.T, "bracket": list(self.bracket), "s": self.s_used, "form": self.form,
                "T_minus": self.T_minus, "T_plus": self.T_plus,
                "lower_bound_hs": self.lower_bound_hs, "notes": self.notes}


class BracketError(RuntimeError):
    """G(t) - s t failed to change sign monotonically."""


def _gap(chain, phi, t, config) -> PressureEstimate:
    cfg = {k: v for k, v in config.items() if k in ("method", "A", "nodes", "n", "depth_k")}
    return pressure_gap(chain, phi, t, cfg)


def bowen_root(chain: TruncatedChain, phi: Potential, s: float, config: Optional[dict] = None
               ) -> BowenSolution:
    """Root in t of G(t) = s t on (t_sing, 1], G(t) = P(t phi) - t P(phi).

    G is convex and nonincreasing where finite while s t increases, so
    H(t) = G(t) - s t has at most one sign change.  A diverged G counts as
    above the target.  The root is located by a safeguarded bisection
    (Brent) to ``tol``; the reported bracket also maps the pressure bracket
    through the local slope of H.  A jump of G across the level (countable
    alphabets) returns the pair T- = sup{G > st}, T+ = inf{G < st}.
    """
    config = dict(config or {})
    t_sing = float(config.get("t_sing", 0.0))
    tol = float(config.get("tol", 1e-12))
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0:
        return BowenSolution(1.0, (1.0, 1.0), 0.0, "root", notes="s = 0: G(1) = 0")
    if math.isinf(s):
        return BowenSolution(0.0, (0.0, 0.0), s, "boundary", notes="s infinite: dimension 0")
    evals = [0]
    cache: dict = {}

    def G(t):
        if t not in cache:
            evals[0] += 1
            cache[t] = _gap(chain, phi, t, config)
        return cache[t]

    def H(t):
        g = G(t)
        return math.inf if g.diverged or not math.isfinite(g.value) else g.value - s * t

    # left end: nudge off the singularity until G is finite, or accept divergence
    lo = t_sing if t_sing > 0 else 0.0
    if t_sing > 0:
        step = 1e-3 * (1.0 - t_sing)
        lo = t_sing + step
    hi = 1.0
    h_hi = H(hi)
    if h_hi > 0:
        raise BracketError("G(1) - s must be negative")
    h_lo = H(lo)
    if h_lo <= 0:
        # the level lies at or below the left end of the finite region
        if t_sing > 0:
            # G jumps to +inf at t_sing: report the gap form pinned to the singularity
            return BowenSolution(lo, (t_sing, lo), s, "sup-inf-gap", t_sing, lo,
                                 evaluations=evals[0],
                                 notes="level crossed inside the singular boundary layer")
        return BowenSolution(lo, (lo, lo), s, "boundary", evaluations=evals[0])
    if not math.isfinite(h_lo):
        # shrink toward the right until finite, keeping the sign information
        a, b = lo, hi
        while b - a > tol:
            m = 0.5 * (a + b)
            hm = H(m)
            if math.isfinite(hm):
                if hm > 0:
                    a, h_lo = m, hm
                    break
                b = m
            else:
                a = m
        lo = a
        if not math.isfinite(H(lo)):
            Tm, Tp = lo, b
            return BowenSolution(0.5 * (Tm + Tp), (Tm, Tp), s, "sup-inf-gap", Tm, Tp,
                                 evaluations=evals[0],
                                 notes="G diverges up to the crossing")
        hi = b
    root = optimize.brentq(H, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    # bracket: bisection tolerance and the pressure bracket through the slope
    g = G(root)
    d = max(1e-6, 1e-4 * (1.0 - t_sing))
    t1 = min(root + d, 1.0)
    t0 = max(root - d, lo)
    slope = (H(t1) - H(t0)) / (t1 - t0) if t1 > t0 else -s
    width = max(g.hi - g.lo, 0.0)
    err = max(tol, width / abs(slope) if slope != 0 else math.inf)
    # a jump straddling the level shows up as H far from 0 on both sides of the root
    left, right = H(max(root - 10 * tol, lo)), H(min(root + 10 * tol, hi))
    jump = abs(left - right) > 1e3 * (abs(slope) * 20 * tol + width + 1e-12)
    if jump:
        return BowenSolution(root, (root - err, root + err), s, "sup-inf-gap",
                             max(root - 10 * tol, lo), min(root + 10 * tol, hi),
                             evaluations=evals[0], notes="G discontinuous at the crossing")
    return BowenSolution(root, (root - err, root + err), s, "root", evaluations=evals[0])


def integral_phi_by_derivative(chain, phi, config: Optional[dict] = None, delta: float = 1e-3
                               ) -> float:
    """Left derivative of t -> P(t phi) at 1 (Richardson), which is the integral of phi
    against the equilibrium state."""
    cfg = {k: v for k, v in (config or {}).items() if k in ("method", "A", "nodes")}
    method = cfg.pop("method", "auto")
    P = lambda t: cached_pressure(chain, phi, t, method, **cfg).value  # noqa: E731
    p1 = P(1.0)
    d1 = (p1 - P(1.0 - delta)) / delta
    d2 = (p1 - P(1.0 - 2 * delta)) / (2 * delta)
    return 2.0 * d1 - d2


# ---------------------------------------------------------------- dimension bounds

def _applicable(flags: dict, phi: Potential) -> list:
    """Names of the dimension statements whose hypotheses hold."""
    out = []
    model = getattr(phi, "model", None)
    reg = phi.regularity.kind
    summable = reg in ("locally-constant", "weakly-hoelder", "summable-variations")
    if flags["BIP"] and summable and flags["sup_phi_finite"] and flags["linear_depth"]:
        out.append("bowen-root (BIP, Gibbs)")
    if flags["BI"] and flags["sup_phi_finite"]:
        out.append("sup-inf bounds (BI)" if flags["BIP"] else
                   "sup-inf bounds (BI), T- conditional on positive recurrence")
    if flags["upper_bound"]:
        out.append("upper bound inf{t: G(t) < s t}")
    if flags["lower_hs"]:
        out.append("entropy lower bound (P - int phi)/(P - int phi + s)")
    if isinstance(model, GaussMap):
        out += ["interval-map radius formula", "gauss lower bound pi^2/(pi^2 + 6 u log 2)"]
    elif isinstance(model, LurothMap):
        out += ["interval-map radius formula", "lueroth formula"]
    elif isinstance(model, ModifiedGaussMap):
        out.append("modified-gauss radius formula (a.e. center)")
    elif isinstance(model, (MPOriginal, MPInduced)):
        out.append("manneville-pomeau formula with effective exponent")
    return out


def dimension_bounds(chain: TruncatedChain, phi: Potential, mu: Optional[CylinderMeasure],
                     target: TargetSpec, config: Optional[dict] = None) -> dict:
    """T+ from the liminf exponent, T- from the limsup exponent, and the entropy bound."""
    config = dict(config or {})
    n_grid = config.get("n_grid", list(range(4, 41, 4)))
    ex = exponent_s(mu, target, n_grid)
    sol_plus = bowen_root(chain, phi, ex["s_lo"], config)
    sol_minus = bowen_root(chain, phi, ex["s_hi"], config) if ex["s_hi"] != ex["s_lo"] \
        else sol_plus
    P1 = cached_pressure(chain, phi, 1.0, config.get("method", "auto"),
                         **{k: v for k, v in config.items() if k in ("A", "nodes")})
    if mu is not None and config.get("integral_phi") is None:
        integral = measure_entropy_and_lyapunov(mu, phi, 1)["integral_phi"]
    elif config.get("integral_phi") is not None:
        integral = float(config["integral_phi"])
    else:
        integral = integral_phi_by_derivative(chain, phi, config)
    h = P1.value - integral
    s_hi = ex["s_hi"]
    lower_hs = 0.0 if math.isinf(s_hi) else h / (h + s_hi)
    props = check_properties(chain.restrict(min(chain.alphabet_size, 60)))
    flags = {
        "BIP": bool(props.BIP), "BI": bool(props.BI), "mixing": bool(props.mixing),
        "regularity": phi.regularity.kind,
        "sup_phi_finite": phi.sup_bound is not None and math.isfinite(phi.sup_bound),
        "linear_depth": target.linear_bound is not None and math.isfinite(target.linear_bound),
        "upper_bound": True, "lower_hs": True,
    }
    T_plus = sol_plus.T_plus
    T_minus = sol_minus.T_minus
    report = {
        "flags": flags, "exponent": ex, "P_phi": P1.value, "integral_phi": integral,
        "entropy": h, "solutions": {"plus": sol_plus.to_json(), "minus": sol_minus.to_json()},
        "dimension_zero": math.isinf(ex["s_lo"]),
    }
    return {"upper_T_plus": T_plus, "lower_T_minus": T_minus, "lower_hs": lower_hs,
            "applicable": _applicable(flags, phi), "report": report,
            "brackets": {"plus": list(sol_plus.bracket), "minus": list(sol_minus.bracket)}}


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def dimension_json(target: TargetSpec, result: dict, config: dict) -> dict:
    rep = result["report"]
    root = None
    if rep["solutions"]["plus"]["form"] == "root" and result["upper_T_plus"] == \
            result["lower_T_minus"]:
        root = result["upper_T_plus"]
    return {
        "target": target.to_json(),
        "s": {"lo": rep["exponent"]["s_lo"], "hi": rep["exponent"]["s_hi"]},
        "T": {"minus": result["lower_T_minus"], "plus": result["upper_T_plus"], "root": root},
        "lower_hs": result["lower_hs"],
        "applicable_theorems": result["applicable"],
        "brackets": result["brackets"],
        "config_hash": config_hash(config),
        "version": __version__,
    }


# ---------------------------------------------------------------- builtin examples

@dataclass
class Example:
    name: str
    chain: TruncatedChain
    phi: Potential
    t_sing: float
    measure: Callable[[], Optional[CylinderMeasure]]
    model: Optional[IntervalMapModel] = None
    config: dict = field(default_factory=dict)


def builtin_example(name: str, A: int = 200, alpha: float = 0.5, N: int = 2) -> Example:
    """Registry of the worked examples with their singular parameter t_sing."""
    if name == "nary":
        ch = full_shift(N)
        return Example(name, ch, nary_log_deriv(N), 0.0,
                       lambda: bernoulli_measure(N), NAryMap(N))
    if name == "bernoulli":
        ch = full_shift(2)
        probs = (1.0 / 3.0, 2.0 / 3.0)
        return Example(name, ch, bernoulli_potential(ch, probs), 0.0,
                       lambda: bernoulli_measure(2, probs))
    if name == "gauss":
        m = GaussMap()
        return Example(name, m.chain(A), gauss_log_deriv(), 0.5, lambda: acip_measure(m), m)
    if name == "luroth":
        m = LurothMap()
        return Example(name, m.chain(A), luroth_log_deriv(), 0.5, lambda: acip_measure(m), m)
    if name == "modified-gauss":
        m = ModifiedGaussMap()
        return Example(name, m.chain(A), modified_gauss_log_deriv(), 0.5,
                       lambda: acip_measure(m), m)
    if name == "mp":
        phi = mp_log_deriv(alpha)
        m = phi.model
        return Example(name, m.chain(), phi, 0.0, lambda: None, m)
    if name == "mp-induced":
        phi = mp_induced_log_deriv(alpha)
        m = phi.model
        return Example(name, m.chain(min(A, 60)), phi, alpha / (1.0 + alpha), lambda: None, m)
    raise KeyError(f"unknown example {name!r}")


BUILTIN_EXAMPLES = ("nary", "bernoulli", "gauss", "luroth", "modified-gauss", "mp", "mp-induced")


def mp_dimension(alpha: float, u: float, x: float, config: Optional[dict] = None) -> dict:
    """Dimension of the MP target set at x with radii exp(-u n): root of P(t) = t u~."""
    ex = builtin_example("mp", alpha=alpha)
    ut = utilde(alpha, u, x)
    sol = bowen_root(ex.chain, ex.phi, ut, config)
    h = -integral_phi_by_derivative(ex.chain, ex.phi, config)
    return {"alpha": alpha, "u": u, "x": x, "u_effective": ut, "T": sol.T,
            "bracket": list(sol.bracket), "form": sol.form, "entropy": h,
            "lower_hs": h / (h + ut)}
