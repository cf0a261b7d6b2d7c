"""Command line front end. Every report is one JSON object on stdout.

Exit codes: 0 on success, 2 on bad input or configuration, 3 when a size
guard is exceeded. Randomness comes from ``--seed`` alone: trial ``t`` uses
``splitmix64(seed ^ t)``, split into an oracle stream and an algorithm
stream, so reports do not depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import detailing as dt
from .core_dist import Distribution, bit_length, load_distribution, parse_builtin, tv_distance
from .emd import emd, emd_weighted_types, hamming, kronecker
from .errors import GuardExceeded, HugeObjectError
from .estimators import (
    EstimatorConfig,
    estimate_index,
    estimate_index_budget,
    estimate_parameters,
    estimate_parameters_budget,
    find_weakly_robust_detailing,
)
from .oracle import (
    BUILTIN_TESTERS,
    HugeObjectOracle,
    acceptance_probability_exact,
    acceptance_probability_mc,
)
from .predictor import accept_probability, simulate, simulated_distribution_exact
from .tolerant import BUILTIN_PROPERTIES, TolerantConfig, estimate_distance, tolerant_trace

MASK = (1 << 64) - 1
DESK_SAMPLES = 2000
DESK_INDEX_SET = 64

# config keys use the symbols of the procedures they feed
CONFIG_KEYS = {
    "kappa": "kappa", "gamma": "gamma", "delta": "delta", "k": "k", "rho": "rho",
    "S": "sample_size_override", "I": "index_set_override", "repetitions": "repetition_override",
    "query_guard": "query_guard",
}
TOLERANT_KEYS = {
    "delta_tol": "delta", "k_prime": "k_prime", "rho_tol": "rho", "B_max": "b_max",
    "eta_den": "eta_den", "upsilon_den": "upsilon_den", "amplification": "amplification",
    "max_candidates": "max_candidates", "kappa_ep": "ep_kappa", "S_tol": "S", "I_tol": "I",
}


class ConfigError(Exception):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def trial_streams(seed: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent oracle and algorithm generators for one trial."""
    ss = np.random.SeedSequence(splitmix64((seed ^ trial) & MASK))
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


# --------------------------------------------------------------------------
# argument handling


def _load(spec: str | None) -> Distribution | None:
    if spec is None:
        return None
    if os.path.exists(spec):
        return load_distribution(spec)
    return parse_builtin(spec)


def _dist(args, second: bool = False) -> Distribution:
    if second:
        d = _load(args.dist2)
        if d is None:
            raise ConfigError("--dist2 is required")
        return d
    d = _load(args.dist) if args.dist else _load(args.builtin)
    if d is None:
        raise ConfigError("one of --dist or --builtin is required")
    return d


def _u(args, n: int) -> list[int]:
    """``--u`` is 1-based on the command line, 0-based inside the library."""
    raw = (args.u or "").strip()
    if not raw:
        return []
    try:
        u = sorted({int(t) - 1 for t in raw.split(",")})
    except ValueError as e:
        raise ConfigError(f"bad --u {raw!r}") from e
    if any(not 0 <= i < n for i in u):
        raise ConfigError(f"--u indices must lie in [1, {n}]")
    return u


def _config_file(args) -> dict:
    if not args.config:
        return {}
    with open(args.config) as fh:
        cfg = json.load(fh)
    unknown = set(cfg) - set(CONFIG_KEYS) - set(TOLERANT_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return cfg


def estimator_config(args) -> EstimatorConfig:
    raw = _config_file(args)
    kw = {CONFIG_KEYS[k]: v for k, v in raw.items() if k in CONFIG_KEYS}
    if not args.paper_constants:
        kw.setdefault("sample_size_override", DESK_SAMPLES)
        kw.setdefault("index_set_override", DESK_INDEX_SET)
    else:
        kw.pop("sample_size_override", None)
        kw.pop("index_set_override", None)
    for flag in ("kappa", "gamma", "delta", "k"):
        v = getattr(args, flag, None)
        if v is not None:
            kw[flag] = v
    if args.samples is not None:
        kw["sample_size_override"] = args.samples
    if args.index_size is not None:
        kw["index_set_override"] = args.index_size
    return EstimatorConfig(**kw)


def tolerant_config(args) -> TolerantConfig:
    raw = _config_file(args)
    kw = {TOLERANT_KEYS[k]: v for k, v in raw.items() if k in TOLERANT_KEYS}
    est = TolerantConfig().estimator
    s, i = kw.pop("S", None), kw.pop("I", None)
    est = est.with_(sample_size_override=s or est.sample_size_override, index_set_override=i or est.index_set_override)
    if args.samples is not None:
        est = est.with_(sample_size_override=args.samples)
    if args.index_size is not None:
        est = est.with_(index_set_override=args.index_size)
    return TolerantConfig(estimator=est, **kw)


def _num(x):
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _label(a) -> str:
    return "|".join(str(p) for p in a)


def eta_json(eta: Distribution) -> dict:
    return {_label(a): str(w) for a, w in eta.items()}


def lam_json(lam) -> dict:
    return {
        "labels": [_label(a) for a in lam.labels],
        "types": [{"t": [str(x) for x in t], "p": str(w)} for t, w in lam.dist.items()],
    }


def matrix_key(m) -> str:
    return "/".join("".join(str(b) for b in row) for row in m)


def run_trials(args, fn: Callable[[int, np.random.Generator, np.random.Generator], dict]) -> list[dict]:
    trials = max(1, args.trials)
    seed = args.seed & MASK

    def one(t):
        orng, arng = trial_streams(seed, t)
        return fn(t, orng, arng)

    if args.threads > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as ex:
            return list(ex.map(one, range(trials)))
    return [one(t) for t in range(trials)]


def _totals(results: Sequence[dict]) -> dict:
    return {
        "queries": sum(r.pop("_queries", 0) for r in results),
        "samples": sum(r.pop("_samples", 0) for r in results),
    }


def _counted(o: HugeObjectOracle, rec: dict) -> dict:
    rec["_queries"] = o.queries_made
    rec["_samples"] = o.samples_drawn
    return rec


def _paper_gate(args, budget: dict, cfg: EstimatorConfig):
    """Under ``--paper-constants``: stop with exit 3 when the budget is over the guard."""
    guard = cfg.query_guard
    if args.paper_constants and guard is not None and budget["queries"] > guard:
        raise GuardExceeded(json.dumps({"budget": budget, "query_guard": guard}))


# --------------------------------------------------------------------------
# subcommands


def cmd_exact_index(args) -> dict:
    mu = _dist(args)
    u = _u(args, bit_length(mu))
    val = dt.refined_index(dt.Detailing.trivial(mu), u)
    return {"index": _num(val), "index_exact": str(val), "U": [i + 1 for i in u], "queries": 0, "samples": 0}


def cmd_estimate_index(args) -> dict:
    mu = _dist(args)
    n = bit_length(mu)
    u = _u(args, n)
    cfg = estimator_config(args)
    budget = estimate_index_budget(len(u), cfg.kappa, cfg.gamma)
    _paper_gate(args, budget, cfg)
    exact = dt.refined_index(dt.Detailing.trivial(mu), u)

    def fn(t, orng, arng):
        o = HugeObjectOracle(mu, orng)
        est = estimate_index(o, u, cfg, arng)
        return _counted(o, {"estimate": est})

    res = run_trials(args, fn)
    totals = _totals(res)
    ests = [r["estimate"] for r in res]
    within = sum(abs(e - float(exact)) <= float(cfg.kappa) for e in ests) / len(ests)
    out = {"U": [i + 1 for i in u], "exact_index": _num(exact), "kappa": _num(cfg.kappa), "estimates": ests,
           "within_kappa_frac": within, "budget": budget, **totals}
    return out


def cmd_find_detailing(args) -> dict:
    mu = _dist(args)
    cfg = estimator_config(args)
    det = dt.Detailing.trivial(mu)

    def fn(t, orng, arng):
        o = HugeObjectOracle(mu, orng)
        u = find_weakly_robust_detailing(o, cfg.delta, cfg.k, cfg.gamma, cfg, arng)
        rec = {"U": None if u is None else [i + 1 for i in sorted(u)]}
        if u is not None:
            try:
                rec["weakly_robust_exact"] = dt.is_weakly_robust(dt.refine_by_variables(det, sorted(u)), cfg.delta, cfg.k)
            except GuardExceeded:
                rec["weakly_robust_exact"] = None
        return _counted(o, rec)

    res = run_trials(args, fn)
    totals = _totals(res)
    robust = [r.get("weakly_robust_exact") for r in res]
    return {"results": res, "robust_frac": sum(bool(x) for x in robust) / len(res),
            "delta": _num(cfg.delta), "k": cfg.k, **totals}


def cmd_estimate_params(args) -> dict:
    mu = _dist(args)
    n = bit_length(mu)
    u = _u(args, n)
    cfg = estimator_config(args)
    budget = estimate_parameters_budget(len(u), cfg.kappa, cfg.gamma, cfg.rho)
    _paper_gate(args, budget, cfg)
    det = dt.variable_detailing(mu, u)
    eta = dt.weight_distribution(det)
    lam = dt.type_distribution(det)

    def fn(t, orng, arng):
        o = HugeObjectOracle(mu, orng)
        eta_t, lam_t = estimate_parameters(o, u, cfg, arng)
        return _counted(o, {
            "eta": eta_json(eta_t),
            "lambda": lam_json(lam_t),
            "tv_eta": _num(tv_distance(eta_t, eta)),
            "emd_lambda": _num(emd_weighted_types(lam_t, lam, eta)),
        })

    res = run_trials(args, fn)
    totals = _totals(res)
    k = float(cfg.kappa)
    ok = sum(r["tv_eta"] <= k and r["emd_lambda"] <= k for r in res) / len(res)
    return {"U": [i + 1 for i in u], "results": res, "within_kappa_frac": ok, "budget": budget, **totals}


def _stats(args):
    mu = _dist(args)
    u = _u(args, bit_length(mu))
    det = dt.variable_detailing(mu, u)
    return mu, u, dt.weight_distribution(det), dt.type_distribution(det)


def cmd_simulate(args) -> dict:
    mu, u, eta, lam = _stats(args)
    exact = simulated_distribution_exact(args.s, args.q, eta, lam)
    res = run_trials(args, lambda t, orng, arng: {"matrix": matrix_key(simulate(args.s, args.q, eta, lam, arng))})
    counts: dict = {}
    for r in res:
        counts[r["matrix"]] = counts.get(r["matrix"], 0) + 1
    emp = {k: v / len(res) for k, v in sorted(counts.items())}
    tv = 0.5 * sum(abs(emp.get(matrix_key(m), 0.0) - float(w)) for m, w in exact.items())
    tv += 0.5 * sum(p for k, p in emp.items() if k not in {matrix_key(m) for m in exact})
    return {"U": [i + 1 for i in u], "s": args.s, "q": args.q, "empirical": emp,
            "exact": {matrix_key(m): _num(w) for m, w in exact.items()}, "tv": tv, "queries": 0, "samples": 0}


def _tester(args):
    if args.tester not in BUILTIN_TESTERS:
        raise ConfigError(f"unknown tester {args.tester!r}")
    return BUILTIN_TESTERS[args.tester](args.s, args.q)


def cmd_accept_prob(args) -> dict:
    mu, u, eta, lam = _stats(args)
    tester = _tester(args)
    predicted = accept_probability(args.s, args.q, eta, lam, tester)
    actual = acceptance_probability_exact(mu, tester)
    return {"U": [i + 1 for i in u], "tester": tester.name, "s": args.s, "q": args.q,
            "predicted": _num(predicted), "exact": _num(actual), "gap": abs(_num(predicted) - _num(actual)),
            "queries": 0, "samples": 0}


def cmd_emd(args) -> dict:
    a, b = _dist(args), _dist(args, second=True)
    metric = {"hamming": hamming, "kronecker": kronecker}.get(args.metric)
    if metric is None:
        raise ConfigError(f"unknown metric {args.metric!r}")
    value, plan = emd(a, b, metric())
    return {"emd": _num(value), "emd_exact": str(value), "plan": json.loads(plan.to_json()), "queries": 0, "samples": 0}


def _property(args):
    if args.property not in BUILTIN_PROPERTIES:
        raise ConfigError(f"unknown property {args.property!r}")
    return BUILTIN_PROPERTIES[args.property]()


def cmd_tolerant_test(args) -> dict:
    mu = _dist(args)
    prop = _property(args)
    cfg = tolerant_config(args)
    if args.paper_constants:
        s_q = prop.tester(0)
        raise GuardExceeded(json.dumps({"paper_constants": {
            k: (str(v) if isinstance(v, Fraction) else v)
            for k, v in TolerantConfig.paper(args.eps1, args.eps2, s_q.s, s_q.q).items()}}))

    def fn(t, orng, arng):
        o = HugeObjectOracle(mu, orng)
        tr = tolerant_trace(o, prop, args.eps1, args.eps2, cfg=cfg, rng=arng)
        rec = {"U": None if tr["U"] is None else [i + 1 for i in tr["U"]], **tr["result"].to_json()}
        return _counted(o, rec)

    res = run_trials(args, fn)
    totals = _totals(res)
    return {"property": prop.name, "eps1": args.eps1, "eps2": args.eps2, "exact_distance": _num(prop.distance(mu)),
            "results": res, "accept_frac": sum(r["verdict"] == "accept" for r in res) / len(res), **totals}


def cmd_estimate_distance(args) -> dict:
    mu = _dist(args)
    prop = _property(args)
    cfg = tolerant_config(args)
    eps = args.eps

    def fn(t, orng, arng):
        o = HugeObjectOracle(mu, orng)
        bands: list = []
        d = estimate_distance(o, prop, eps, cfg, arng, bands)
        return _counted(o, {"estimate": d, "bands": bands})

    res = run_trials(args, fn)
    totals = _totals(res)
    exact = float(prop.distance(mu))
    within = sum(abs(r["estimate"] - exact) <= eps for r in res) / len(res)
    return {"property": prop.name, "eps": eps, "exact_distance": exact, "results": res,
            "within_eps_frac": within, **totals}


def cmd_oracle_check(args) -> dict:
    """Monte Carlo runs against their exact counterparts on one input."""
    mu, u, eta, lam = _stats(args)
    tester = _tester(args)
    trials = max(args.trials, 1000)
    orng, arng = trial_streams(args.seed & MASK, 0)
    o = HugeObjectOracle(mu, orng)
    checks = []
    exact_acc = float(acceptance_probability_exact(mu, tester))
    mc_acc = acceptance_probability_mc(o, tester, trials, arng)
    tol = 4 * (0.25 / trials) ** 0.5
    checks.append({"name": "acceptance", "exact": exact_acc, "mc": mc_acc, "tol": tol, "pass": abs(exact_acc - mc_acc) <= tol})
    exact_sim = simulated_distribution_exact(args.s, args.q, eta, lam)
    counts: dict = {}
    for _ in range(trials):
        m = simulate(args.s, args.q, eta, lam, arng)
        counts[m] = counts.get(m, 0) + 1
    tv = 0.5 * sum(abs(counts.get(m, 0) / trials - float(exact_sim.get(m, 0))) for m in set(counts) | set(exact_sim))
    checks.append({"name": "simulate", "tv": tv, "tol": 0.05, "pass": tv <= 0.05})
    cfg = estimator_config(args)
    est = estimate_index(o, u, cfg, arng)
    exact_ind = float(dt.refined_index(dt.Detailing.trivial(mu), u))
    checks.append({"name": "estimate-index", "exact": exact_ind, "estimate": est, "tol": float(cfg.kappa),
                   "pass": abs(est - exact_ind) <= float(cfg.kappa)})
    return {"checks": checks, "all_pass": all(c["pass"] for c in checks), **o.counters()}


COMMANDS = {
    "exact-index": cmd_exact_index,
    "estimate-index": cmd_estimate_index,
    "find-detailing": cmd_find_detailing,
    "estimate-params": cmd_estimate_params,
    "simulate": cmd_simulate,
    "accept-prob": cmd_accept_prob,
    "emd": cmd_emd,
    "tolerant-test": cmd_tolerant_test,
    "estimate-distance": cmd_estimate_distance,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="huge-object", description="Huge Object distribution testing experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--dist", help="distribution JSON file (or a built-in spec)")
    p.add_argument("--dist2", help="second distribution: JSON file or built-in spec")
    p.add_argument("--builtin", help="uniform:n, point-mass:bits, two-point:n, product-bernoulli:n[:p,...]")
    p.add_argument("--u", default="", help="comma-separated 1-based variable indices")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config, keys named after the procedure symbols")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--paper-constants", action="store_true", help="use the theoretical sizes; abort if over guard")
    p.add_argument("--kappa", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--samples", type=int, help="override |S|")
    p.add_argument("--index-size", type=int, help="override |I|")
    p.add_argument("--metric", default="hamming")
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--tester", default="rows-equal")
    p.add_argument("--property", default="point-mass")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--eps1", type=float, default=0.1)
    p.add_argument("--eps2", type=float, default=0.5)
    return p


def _emit(report: dict, out: str | None) -> str:
    text = json.dumps(report, sort_keys=True, default=_num)
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    return text


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        report = COMMANDS[args.command](args)
    except GuardExceeded as e:
        msg = str(e)
        try:
            detail = json.loads(msg)
        except ValueError:
            detail = msg
        _emit({"error": type(e).__name__, "detail": detail}, args.out)
        return 3
    except (HugeObjectError, ConfigError, ValueError, KeyError, OSError) as e:
        _emit({"error": type(e).__name__, "detail": str(e)}, args.out)
        return 2
    _emit(report, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
