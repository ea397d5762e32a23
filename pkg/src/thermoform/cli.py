"""Command-line front end: thermoform {pressure,dimension,cantor,simulate,diagnose}.

Every run reads one JSON config.  Unknown keys are rejected, numeric fields
are range-checked, and every output file carries the config hash and the
package version.  Outputs contain no timestamps or host data, so re-running
a config reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .target import BUILTIN_EXAMPLES, config_hash


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


# ---------------------------------------------------------------- schema

SCHEMA = {
    "model": {"name": str, "N": int, "alpha": float, "A": int, "probs": list},
    "potential": {"family": str, "values": list},
    "target": {"center": list, "period": int, "point": float, "rule": (str, dict), "host": list},
    "pressure": {"t_grid": list, "points": int, "method": str, "A": int, "nodes": int,
                 "n": int, "depth_k": int},
    "dimension": {"tol": float, "method": str, "A": int, "nodes": int, "n": int,
                  "n_grid": list, "compare_x": list},
    "cantor": {"levels": int, "growth": float, "M": int, "epsilon": float, "bridge_cap": int,
               "family_cap": int, "bridge_A": int, "frostman_margin": float,
               "frostman_depth_cap": int},
    "experiment": {"center": float, "radius_rule": str, "orbit_count": int, "horizon_n": int,
                   "hit_threshold": int, "after": int, "params": dict, "chunk": int,
                   "box_calibration_depth": int},
    "diagnose": {"depth": int, "digits": int, "perturb": dict, "good": dict, "mixing": dict,
                 "audit_A": int},
    "out": str, "seed": int, "threads": int,
}
NESTED = {
    ("diagnose", "perturb"): {"word": list, "factor": float},
    ("diagnose", "good"): {"P1": list, "M": int, "epsilon": float, "depth": int},
    ("diagnose", "mixing"): {"P1": list, "P2": list, "P3": list, "k": int, "ell": list},
}
MODELS = BUILTIN_EXAMPLES


def _check_keys(d: dict, allowed: dict, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    for k, v in d.items():
        if k not in allowed:
            raise ConfigError(f"unknown key {where}.{k}" if where else f"unknown key {k}")
        typ = allowed[k]
        if isinstance(typ, dict):
            _check_keys(v, typ, f"{where}.{k}" if where else k)
            continue
        types = typ if isinstance(typ, tuple) else (typ,)
        if float in types:
            types = types + (int,)
        if isinstance(v, bool) or not isinstance(v, types):
            raise ConfigError(f"{where}.{k} has the wrong type")
        if isinstance(v, dict) and (where, k) in NESTED:
            _check_keys(v, NESTED[(where, k)], f"{where}.{k}")


def _positive(cfg, path, value, lo=1, hi=None):
    if value is None:
        return
    if not (value >= lo and (hi is None or value <= hi)) or not math.isfinite(value):
        rng = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise ConfigError(f"{path} = {value} outside {rng}")


def validate(cfg: dict) -> dict:
    _check_keys(cfg, SCHEMA, "")
    m = cfg.get("model", {})
    name = m.get("name", "gauss")
    if name not in MODELS:
        raise ConfigError(f"model.name must be one of {', '.join(MODELS)}")
    _positive(cfg, "model.A", m.get("A"), 1, 100_000)
    _positive(cfg, "model.N", m.get("N"), 2, 1000)
    if "alpha" in m and not 0.0 < m["alpha"] < 1.0:
        raise ConfigError("model.alpha must lie in (0, 1)")
    if "probs" in m:
        p = np.asarray(m["probs"], dtype=float)
        if p.ndim != 1 or len(p) < 2 or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("model.probs must be a positive probability vector")
    pr = cfg.get("pressure", {})
    for t in pr.get("t_grid", []):
        if not isinstance(t, (int, float)) or not math.isfinite(t) or t <= 0:
            raise ConfigError("pressure.t_grid entries must be positive numbers")
    _positive(cfg, "pressure.points", pr.get("points"), 2, 1000)
    for sec in ("pressure", "dimension"):
        _positive(cfg, f"{sec}.A", cfg.get(sec, {}).get("A"), 1, 100_000)
        _positive(cfg, f"{sec}.n", cfg.get(sec, {}).get("n"), 1, 64)
    c = cfg.get("cantor", {})
    _positive(cfg, "cantor.levels", c.get("levels"), 1, 12)
    _positive(cfg, "cantor.growth", c.get("growth"), 0.0)
    _positive(cfg, "cantor.M", c.get("M"), 1)
    if "epsilon" in c and not c["epsilon"] > 0:
        raise ConfigError("cantor.epsilon must be positive")
    e = cfg.get("experiment", {})
    _positive(cfg, "experiment.orbit_count", e.get("orbit_count"), 1, 10**5)
    _positive(cfg, "experiment.horizon_n", e.get("horizon_n"), 1, 10**6)
    _positive(cfg, "threads", cfg.get("threads"), 1, 1024)
    _positive(cfg, "seed", cfg.get("seed"), 0)
    d = cfg.get("diagnose", {})
    _positive(cfg, "diagnose.depth", d.get("depth"), 1, 24)
    _positive(cfg, "diagnose.digits", d.get("digits"), 1, 1000)
    return cfg


# ---------------------------------------------------------------- model assembly

def build_example(cfg: dict):
    from .gibbs import bernoulli_measure
    from .potentials import TablePotential, bernoulli_potential
    from .symbolic import full_shift
    from .target import Example, builtin_example

    m = cfg.get("model", {})
    name = m.get("name", "gauss")
    A = int(m.get("A", 200))
    if name == "bernoulli":
        probs = m.get("probs", [0.5, 0.5])
        ch = full_shift(len(probs))
        ex = Example(name, ch, bernoulli_potential(ch, probs), 0.0,
                     lambda: bernoulli_measure(len(probs), probs))
    else:
        ex = builtin_example(name, A=A, alpha=float(m.get("alpha", 0.5)), N=int(m.get("N", 2)))
    pot = cfg.get("potential", {})
    fam = pot.get("family", "log-derivative" if ex.model is not None else "bernoulli")
    if fam == "table":
        vals = np.asarray(pot.get("values", []), dtype=float)
        if vals.shape != (ex.chain.alphabet_size,):
            raise ConfigError("potential.values must give one value per symbol")
        ex.phi = TablePotential(ex.chain, 1, {(int(s),): float(v)
                                              for s, v in zip(ex.chain.symbols, vals)})
        ex.measure = lambda: None
    elif fam not in ("log-derivative", "bernoulli"):
        raise ConfigError(f"unknown potential.family {fam!r}")
    return ex


_RULE = re.compile(r"^\s*(linear|power|exp)\b(.*)$")


def parse_rule(rule) -> dict:
    """'linear v' -> depth ceil(v n); 'power c p' -> radius c n^-p; 'exp u' -> radius e^(-u n).

    Parameters may be written positionally or as name=value; a value may be
    any constant expression accepted by compile_rule ('log(2)', 'log 2').
    """
    from .target import compile_rule

    if isinstance(rule, dict):
        kind = rule.get("kind")
        params = {k: float(v) for k, v in rule.items() if k != "kind"}
    else:
        mt = _RULE.match(rule)
        if not mt:
            raise ConfigError(f"cannot parse target rule {rule!r}")
        kind, rest = mt.group(1), mt.group(2)
        rest = re.sub(r"\blog\s+([0-9.]+)", r"log(\1)", rest)
        names = {"linear": ["v"], "power": ["c", "p"], "exp": ["u"]}[kind]
        params = {}
        for i, tok in enumerate(rest.split()):
            key, _, val = tok.rpartition("=")
            key = key or names[min(i, len(names) - 1)]
            params[key] = float(compile_rule(val)(0))
    need = {"linear": ["v"], "power": ["c", "p"], "exp": ["u"]}.get(kind)
    if need is None or any(k not in params for k in need):
        raise ConfigError(f"rule {rule!r} needs parameters {need}")
    if kind == "exp" and params["u"] < 0:
        raise ConfigError("exp rule needs u >= 0")
    if kind == "linear" and params["v"] <= 0:
        raise ConfigError("linear rule needs v > 0")
    return {"kind": kind, **params}


def _target_spec(cfg: dict, rule: dict, ex):
    from .target import TargetSpec

    t = cfg.get("target", {})
    center = t.get("center", [int(ex.chain.symbols[0])])
    period = t.get("period", len(center))
    if rule["kind"] == "linear":
        return TargetSpec(center, depth_rule="ceil(v*n)", params={"v": rule["v"]},
                          linear_bound=rule["v"], period=period, host=t.get("host", ()),
                          point=t.get("point"))
    expr = "exp(-u*n)" if rule["kind"] == "exp" else "c*n**(-p)"
    return TargetSpec(center, radius_rule=expr, params={k: v for k, v in rule.items()
                                                        if k != "kind"},
                      period=period, host=t.get("host", ()), point=t.get("point"))


# ---------------------------------------------------------------- output helpers

def _stamp(cfg: dict) -> dict:
    return {"config_hash": config_hash(_hashable(cfg)), "version": __version__}


def _hashable(cfg: dict) -> dict:
    # thread count and output location never change results
    return {k: v for k, v in cfg.items() if k not in ("threads", "out")}


def _write_json(path: Path, payload: dict, cfg: dict):
    payload = dict(payload)
    payload.update(_stamp(cfg))
    path.write_text(json.dumps(_clean(payload), sort_keys=True, indent=1) + "\n")


def _write_csv(path: Path, header: list, rows, cfg: dict):
    st = _stamp(cfg)
    with open(path, "w", newline="") as fh:
        fh.write(f"# thermoform {st['version']} config {st['config_hash']}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in r])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


# ---------------------------------------------------------------- commands

def cmd_pressure(cfg: dict, out: Path) -> str:
    from .pressure import pressure_gap

    ex = build_example(cfg)
    pc = cfg.get("pressure", {})
    engine = {k: pc[k] for k in ("method", "A", "nodes", "n", "depth_k") if k in pc}
    if "t_grid" in pc:
        ts = [float(t) for t in pc["t_grid"]]
    else:
        k = int(pc.get("points", 21))
        ts = list(np.linspace(ex.t_sing, 1.0, k + 1)[1:]) if ex.t_sing > 0 else \
            list(np.linspace(0.0, 1.0, k))
    rows = []
    for t in ts:
        est = pressure_gap(ex.chain, ex.phi, t, engine)
        rows.append(est.row(t) + [est.diverged])
    _write_csv(out / "pressure.csv", ["t", "lo", "G", "hi", "method", "n", "A", "diverged"],
               rows, cfg)
    g1 = [r for r in rows if r[0] == 1.0]
    summary = {"model": ex.name, "t_sing": ex.t_sing, "points": len(rows),
               "G": {repr(r[0]): r[2] for r in rows},
               "G_at_1": g1[0][2] if g1 else None,
               "nonincreasing": bool(all(b[2] <= a[2] + (a[3] - a[1]) + (b[3] - b[1])
                                         for a, b in zip(rows, rows[1:]) if not b[7]))}
    _write_json(out / "pressure.json", summary, cfg)
    return "ok"


def cmd_dimension(cfg: dict, out: Path) -> str:
    from .target import bowen_root, dimension_bounds, dimension_json, integral_phi_by_derivative
    from .target import mp_dimension

    ex = build_example(cfg)
    t = cfg.get("target", {})
    rule = parse_rule(t.get("rule", "exp 0"))
    dc = cfg.get("dimension", {})
    engine = {k: dc[k] for k in ("method", "A", "nodes", "n") if k in dc}
    engine.update(t_sing=ex.t_sing, tol=float(dc.get("tol", 1e-12)))
    status = "ok"
    if ex.name == "mp":
        if rule["kind"] != "exp":
            raise ConfigError("the MP model takes an 'exp u' radius rule")
        alpha = float(cfg.get("model", {}).get("alpha", 0.5))
        xs = [float(x) for x in dc.get("compare_x", [t.get("point", 0.0)])]
        runs = [mp_dimension(alpha, rule["u"], x, engine) for x in xs]
        payload = {"model": "mp", "alpha": alpha, "u": rule["u"], "by_x": runs}
        zero = [r["T"] for r in runs if r["x"] == 0.0]
        other = [r["T"] for r in runs if r["x"] != 0.0]
        if zero and other:
            ok = all(zero[0] > T for T in other)
            payload["assertion"] = {"T(x=0) > T(x!=0)": ok}
            status = "ok" if ok else "error"
        _write_json(out / "dimension.json", payload, cfg)
        return status
    target = _target_spec(cfg, rule, ex)
    if rule["kind"] == "linear":
        mu = ex.measure()
        if mu is None:
            raise ConfigError("a depth rule needs a model with a reference measure")
        if dc.get("n_grid"):
            engine["n_grid"] = [int(n) for n in dc["n_grid"]]
        res = dimension_bounds(ex.chain, ex.phi, mu, target, engine)
        payload = dimension_json(target, res, _hashable(cfg))
    else:
        # radii e^(-u n) under an invariant density bounded away from 0 and infinity
        # have exponent exactly u; polynomial radii have exponent 0
        s = rule["u"] if rule["kind"] == "exp" else 0.0
        sol = bowen_root(ex.chain, ex.phi, s, engine)
        h = -integral_phi_by_derivative(ex.chain, ex.phi, engine) if s > 0 else math.nan
        lower = h / (h + s) if s > 0 else 1.0
        res = {"upper_T_plus": sol.T_plus, "lower_T_minus": sol.T_minus, "lower_hs": lower,
               "applicable": [], "brackets": {"plus": list(sol.bracket),
                                              "minus": list(sol.bracket)},
               "report": {"solutions": {"plus": sol.to_json()},
                          "exponent": {"s_lo": s, "s_hi": s}}}
        payload = dimension_json(target, res, _hashable(cfg))
        payload["solution"] = sol.to_json()
        if sol.form != "root":
            status = "warning"
    _write_json(out / "dimension.json", payload, cfg)
    return status


def cmd_cantor(cfg: dict, out: Path) -> str:
    from .cantor import (build_pattern, frostman_check, frostman_measure,
                         hungerford_lower_bound, tree_prefix_counts)
    from .monte_carlo import box_dimension

    cfg_m = dict(cfg.get("model", {}))
    cfg_m.setdefault("name", "nary")
    cfg = dict(cfg, model=cfg_m)
    ex = build_example(cfg)
    mu = ex.measure()
    if mu is None:
        raise ConfigError("the cantor command needs a model with a reference measure")
    t = cfg.get("target", {})
    rule = parse_rule(t.get("rule", "linear 1"))
    if rule["kind"] != "linear":
        if ex.model is None or rule["kind"] != "exp":
            raise ConfigError("the cantor command takes 'linear v' or, for interval maps, "
                              "'exp u'")
        # cylinders of the N-ary map have length N^-(l+1); radius e^(-u n) needs l ~ u n / log N
        N = ex.chain.alphabet_size
        rule = {"kind": "linear", "v": rule["u"] / math.log(N)}
    target = _target_spec(cfg, rule, ex)
    cc = cfg.get("cantor", {})
    levels = int(cc.get("levels", 6))
    bcfg = {k: cc[k] for k in ("growth", "M", "epsilon", "bridge_cap", "family_cap", "bridge_A")
            if k in cc}
    bcfg["seed"] = int(cfg.get("seed", 0))
    tree = build_pattern(ex.chain, mu, target, levels, bcfg)
    hb = hungerford_lower_bound(tree)
    nu = frostman_measure(tree, mu)
    lam = max(0.0, hb["D_minus"] - float(cc.get("frostman_margin", 0.05)))
    chk = frostman_check(nu, mu, lam, cc.get("frostman_depth_cap"))
    payload = {"tree": tree.to_json(nu), "D_minus": hb["D_minus"], "per_level": hb["per_level"],
               "non_asymptotic": hb["non_asymptotic"],
               "frostman": {"Lambda": lam, "max_c": chk["max_c"], "log_max_c": chk["log_max_c"],
                            "growth_detected": chk["growth_detected"],
                            "violations": chk["violations"]}}
    try:
        payload["box"] = {k: v for k, v in box_dimension(tree, model=ex.model).items()
                          if k in ("slope", "r2", "decades", "depths")}
    except Exception as err:  # box counts need an enumerable tree off the N-ary map
        payload["box"] = {"error": str(err)}
    _write_json(out / "cantor.json", payload, cfg)
    rows = [(lv.j, lv.d_tilde, lv.d, lv.bridge.N, lv.lock_len, lv.alpha, lv.beta, lv.gamma,
             lv.delta) for lv in tree.levels]
    _write_csv(out / "levels.csv", ["j", "d_tilde", "d", "bridge", "lock", "alpha", "beta",
                                    "gamma", "delta"], rows, cfg)
    _write_csv(out / "prefix_counts.csv", ["m", "log_count"], tree_prefix_counts(tree), cfg)
    return "warning" if chk["growth_detected"] else "ok"


def cmd_simulate(cfg: dict, out: Path) -> str:
    from .monte_carlo import ExperimentPlan, bc_dichotomy, box_dimension, middle_thirds

    e = dict(cfg.get("experiment", {}))
    calib = int(e.pop("box_calibration_depth", 10))
    m = cfg.get("model", {})
    model_params = {}
    if m.get("name") == "nary":
        model_params["N"] = int(m.get("N", 2))
    plan = ExperimentPlan(model=m.get("name", "gauss"), rng_seed=int(cfg.get("seed", 0)),
                          threads=int(cfg.get("threads", 1)), model_params=model_params, **e)
    res = bc_dichotomy(plan)
    cal = box_dimension(middle_thirds(calib))
    res["box_calibration"] = {"depth": calib, "slope": cal["slope"],
                              "expected": math.log(2) / math.log(3),
                              "within_0.03": abs(cal["slope"] - math.log(2) / math.log(3)) <= 0.03}
    _write_json(out / "simulate.json", res, cfg)
    hist = res["hit_counts_histogram"]
    _write_csv(out / "hits.csv", ["hits", "orbits"], list(enumerate(hist)), cfg)
    return "ok" if res["box_calibration"]["within_0.03"] else "warning"


def cmd_diagnose(cfg: dict, out: Path) -> str:
    from dataclasses import asdict

    from .gibbs import (PerturbedMeasure, gibbs_sample_words, good_set_fraction,
                        mixing_correlation, rpf_measure, verify_gibbs_ratio)
    from .interval_maps import markov_property_audit

    ex = build_example(cfg)
    dc = cfg.get("diagnose", {})
    seed = int(cfg.get("seed", 0))
    mu = ex.measure() if ex.model is None else rpf_measure(ex.chain, ex.phi)
    if mu is None:
        mu = rpf_measure(ex.chain, ex.phi)
    pert = dc.get("perturb")
    if pert:
        mu = PerturbedMeasure(mu, pert["word"], float(pert.get("factor", 1.5)))
    words = gibbs_sample_words(ex.chain, int(dc.get("depth", 6)),
                               int(dc.get("digits", min(ex.chain.alphabet_size, 20))), seed=seed)
    rep = verify_gibbs_ratio(mu, ex.phi, words)
    payload = {"measure": mu.name, "gibbs_ratio": asdict(rep), "violations": []}
    if rep.max_ratio_violation > 1e-9:
        payload["violations"].append(
            f"gibbs ratio exceeds the declared c K_n by a factor 1 + {rep.max_ratio_violation:.6g}")
    status = "warning" if rep.flagged or payload["violations"] else "ok"
    gd = dc.get("good")
    if gd:
        payload["good_set"] = good_set_fraction(mu, ex.phi, gd.get("P1", [int(ex.chain.symbols[0])]),
                                                int(gd.get("M", 5)), float(gd.get("epsilon", 0.3)),
                                                int(gd.get("depth", 8)), seed=seed)
    mx = dc.get("mixing")
    if mx:
        s0 = [int(ex.chain.symbols[0])]
        ells = [int(v) for v in mx.get("ell", [1, 2, 4, 8])]
        rows = [mixing_correlation(mu, mx.get("P1", s0), mx.get("P2", s0), mx.get("P3", s0),
                                   int(mx.get("k", 1)), ell, seed=seed) for ell in ells]
        payload["mixing"] = {"ell": ells, "reports": rows}
    if ex.model is not None:
        payload["markov_audit"] = markov_property_audit(ex.model, int(dc.get("audit_A", 40)))
    _write_json(out / "diagnose.json", payload, cfg)
    rows = sorted(rep.log_max_ratio_by_n.items())
    _write_csv(out / "gibbs_ratio.csv", ["n", "log_max_ratio"], rows, cfg)
    return status


COMMANDS = {"pressure": cmd_pressure, "dimension": cmd_dimension, "cantor": cmd_cantor,
            "simulate": cmd_simulate, "diagnose": cmd_diagnose}


# ---------------------------------------------------------------- entry point

def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="thermoform", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--out", help="output directory (overrides config 'out')")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides config 'seed')")
    ap.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    args = ap.parse_args(argv)
    try:
        cfg = validate(load_config(args.config))
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg["threads"] = args.threads or cfg.get("threads") or os.cpu_count() or 1
        validate(cfg)
        out = Path(args.out or cfg.get("out") or ".")
        out.mkdir(parents=True, exist_ok=True)
        status = COMMANDS[args.command](cfg, out)
    except ConfigError as err:
        print(f"thermoform: config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # engine failure
        print(f"thermoform: {args.command} failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    print(f"thermoform {args.command}: {status} -> {out}")
    return 0 if status in ("ok", "warning") else 1


if __name__ == "__main__":
    sys.exit(main())
