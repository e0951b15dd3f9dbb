"""Batch experiment runner.

Every verification pipeline is exposed as a subcommand producing a single
JSON (or CSV) report. Reports are fully determined by the configuration,
seeds included; wall-clock time goes to stderr so reruns stay byte
identical. NOFLAB_THREADS caps the number of worker threads used for
independent per-instance checks.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import combinatorics, density, fourier, nof
from .core_math import derive_seed
from .functions import (
    LiftedFn,
    Params,
    cor35_params,
    cor35_regime_ok,
    g_mod2_eval,
    gip_batch_encoded,
    make_two_party,
)

SCHEMA_VERSION = 1


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("NOFLAB_THREADS", "1")))
    except ValueError:
        return 1


def map_ordered(fn, items):
    """Apply fn to items, possibly in parallel, preserving input order."""
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _round_sig(x: float, sig: int = 12):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{sig}g}")
    return x


def _clean(obj):
    """Normalize a report tree: native types, 12-significant-digit floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _round_sig(float(obj))
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float):
        return _round_sig(obj)
    return obj


def make_report(experiment: str, config: dict, results: dict, checks: list) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "config": _clean(config),
        "results": _clean(results),
        "checks": _clean(checks),
        "passed": all(c.get("passed", True) for c in checks),
    }


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, rows)
    else:
        rows.append((prefix, obj))


def emit_report(report: dict, fmt: str = "json", path: str | None = None):
    """Write the report as a JSON document or flattened CSV rows."""
    if fmt == "json":
        text = json.dumps(report, indent=2) + "\n"
    elif fmt == "csv":
        rows = []
        _flatten("", report, rows)
        lines = ["key,value"]
        for key, val in rows:
            sval = json.dumps(val) if isinstance(val, str) else str(val)
            lines.append(f"{key},{sval}")
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _two_party(args):
    if args.fn == "file":
        return make_two_party("file", path=args.path)
    return make_two_party(args.fn, args.q)


def _lifted(args) -> LiftedFn:
    params = Params(args.q, args.r, args.k)
    return LiftedFn(make_two_party(args.fn, args.q), params)


# --- subcommand implementations ---------------------------------------------


def run_occ(args):
    f = _two_party(args)
    _, reps = nof.row_classes(f)
    results = {
        "fn": f.name,
        "rows": f.rows,
        "cols": f.cols,
        "distinct_rows": len(reps),
        "occ": nof.occ_two_party(f),
    }
    return make_report("occ", vars_config(args), results, [])


def run_nof_search(args):
    lf = _lifted(args)
    found = nof.search_one_way_protocol(lf, args.max_budget)
    occ = nof.occ_two_party(lf.base)
    checks = []
    if found is None:
        results = {"target": lf.name, "min_occ": "exceeds budget", "occ_two_party": occ}
    else:
        cost, proto = found
        verified = nof.verify_protocol(proto, lf)
        results = {
            "target": lf.name,
            "min_occ": cost,
            "occ_two_party": occ,
            "protocol": proto.to_json_dict(),
        }
        checks = [
            {"name": "searched_protocol_correct", "passed": verified.correct},
            {"name": "upper_bound_consistency", "passed": cost <= occ,
             "detail": f"min {cost} <= occ {occ}"},
        ]
    return make_report("nof-search", vars_config(args), results, checks)


def run_simulate(args):
    lf = _lifted(args)
    params = lf.params
    if args.protocol == "lift-upper":
        proto = nof.build_lift_upper(lf.base, params)
    elif args.protocol == "ind-two-round":
        proto = nof.build_ind_two_round(params)
    elif args.protocol == "eq-rand":
        proto = nof.build_eq_rand(params, args.t)
    else:
        raise ValueError(f"unknown protocol {args.protocol!r}")
    results = {"protocol": proto.to_json_dict()}
    checks = []
    if proto.randomized:
        yes_rate, yes_se = nof.estimate_rand_error(
            proto, lf, args.samples, args.seed, "yes")
        no_rate, no_se = nof.estimate_rand_error(
            proto, lf, args.samples, derive_seed(args.seed, 1), "no")
        expected = 2.0 ** (-args.t)
        results["yes_error"] = yes_rate
        results["no_error"] = no_rate
        results["no_error_stderr"] = no_se
        results["expected_no_error"] = expected
        checks = [
            {"name": "one_sided_no_yes_errors", "passed": yes_rate == 0.0},
            {"name": "no_error_within_3_sigma",
             "passed": abs(no_rate - expected) <= 3 * no_se + 1e-12},
        ]
    else:
        res = nof.verify_protocol(proto, lf)
        results["cost"] = proto.cost
        results["rounds"] = proto.num_rounds
        results["correct"] = res.correct
        if res.counterexample is not None:
            results["counterexample"] = list(res.counterexample)
        checks = [{"name": "exhaustively_correct", "passed": res.correct}]
    return make_report("simulate", vars_config(args), results, checks)


def run_disperser(args):
    params = Params(args.q, args.r, args.k)
    dens = args.density if args.density is not None else 1.3 / args.q
    min_dens = args.min_density if args.min_density is not None else 1.0 / args.q

    def one(i):
        ci = fourier.sample_ci_random(params, dens, derive_seed(args.seed, i),
                                      min_density=min_dens)
        rep = fourier.disperser_check(params, ci, mode=args.mode,
                                      samples=args.samples,
                                      seed=derive_seed(args.seed, i, 0xF))
        return ci, rep

    checks, sets = [], []
    for i, (ci, rep) in enumerate(map_ordered(one, list(range(args.sets)))):
        sets.append({
            "set": i,
            "measured_density": ci.measured_density,
            "accepted": rep.accepted,
            "bound": rep.bound,
            "alt_bound": rep.alt_bound,
            "tighter": rep.tighter,
            "vacuous": rep.vacuous,
            "min_prob": min(rep.probs),
            "probs": rep.probs,
            "stderrs": rep.stderrs,
        })
        if rep.passed is not None:
            checks.append({"name": f"set_{i}_above_bound", "passed": rep.passed})
    results = {"params": {"q": args.q, "r": args.r, "k": args.k},
               "bound": sets[0]["bound"] if sets else None,
               "premise_regime": params.theorem_regime,
               "sets": sets}
    return make_report("disperser", vars_config(args), results, checks)


def run_chain(args):
    params = Params(args.q, args.r, args.k)

    def one(i):
        ci = fourier.sample_ci_random(params, args.density,
                                      derive_seed(args.seed, i))
        return ci, fourier.cs_chain_check(ci)

    checks, sets = [], []
    for i, (ci, rep) in enumerate(map_ordered(one, list(range(args.sets)))):
        worst = max((row.gamma_power for row in rep.rows), default=0.0)
        sets.append({
            "set": i,
            "size": rep.size,
            "density": rep.density,
            "vanish_exact": rep.vanish.exact,
            "vanish_bound": rep.vanish.paper_bound,
            "max_gamma_power": worst,
            "alphas": [{"alpha": row.alpha, "d": row.d_value,
                        "gamma": row.gamma, "gamma_power": row.gamma_power}
                       for row in rep.rows],
        })
        checks.append({"name": f"set_{i}_chain", "passed": rep.passed})
    results = {"params": {"q": args.q, "r": args.r, "k": args.k}, "sets": sets}
    return make_report("chain", vars_config(args), results, checks)


def run_largeness(args):
    def one(i):
        g = combinatorics.random_premise_graph(
            args.left, args.right, derive_seed(args.seed, i))
        return combinatorics.largeness_check(g)

    rows, ok = [], 0
    for i, res in enumerate(map_ordered(one, list(range(args.graphs)))):
        ok += int(res.conclusion_met)
        rows.append({"graph": i, "edges": res.num_edges,
                     "mean_common": res.mean_common,
                     "premise": res.premise_met, "conclusion": res.conclusion_met})
    results = {"graphs": rows, "holds": ok, "total": args.graphs}
    checks = [{"name": "conclusion_on_all_premise_graphs",
               "passed": ok == args.graphs, "detail": f"{ok}/{args.graphs}"}]
    return make_report("largeness", vars_config(args), results, checks)


def run_hd(args):
    def one(i):
        g = combinatorics.random_hypercube_graph(
            args.n, args.right, args.delta, derive_seed(args.seed, i))
        return g, combinatorics.hd_witness(g, args.delta)

    rows, found = [], 0
    for i, (g, w) in enumerate(map_ordered(one, list(range(args.graphs)))):
        found += int(w is not None)
        row = {"graph": i, "edges": g.num_edges, "found": w is not None}
        if w is not None:
            row.update({"ell": w[0], "ell_prime": w[1], "common": w[2]})
        rows.append(row)
    results = {"graphs": rows, "found": found, "total": args.graphs}
    checks = [{"name": "witness_on_all_premise_graphs",
               "passed": found == args.graphs, "detail": f"{found}/{args.graphs}"}]
    return make_report("hd", vars_config(args), results, checks)


def run_density(args):
    def one(i):
        n = 4 + (i % max(1, args.n - 3))
        rect = density.random_rectangle(n, derive_seed(args.seed, i),
                                        c_max=args.c_max)
        c = -density.density_value(rect)
        support, state = density.extract_support(rect, c)
        increments = [state.density_trace[j + 1] - state.density_trace[j]
                      for j in range(len(state.density_trace) - 1)]
        return {
            "rect": i, "n": n, "deficiency": c,
            "support_size": len(support),
            "projections": len(state.projected_coords),
            "min_increment": min(increments) if increments else None,
            "bound_ok": len(support) >= n - 2 * c - 1e-9,
        }

    rows = map_ordered(one, list(range(args.rects)))
    all_ok = all(r["bound_ok"] for r in rows)
    min_inc = min((r["min_increment"] for r in rows
                   if r["min_increment"] is not None), default=None)
    results = {"rects": rows, "total_projections": sum(r["projections"] for r in rows),
               "min_increment": min_inc}
    checks = [
        {"name": "support_bound_on_all_rects", "passed": all_ok},
        {"name": "increments_at_least_half",
         "passed": min_inc is None or min_inc >= 0.5},
    ]
    return make_report("density", vars_config(args), results, checks)


def run_disj3_attack(args):
    protos = density.disj3_protocol_suite(args.n)
    rows, checks = [], []
    for p in protos:
        rep = density.disj3_attack(p, args.n, args.delta)
        row = {"protocol": p.name, "cost": p.cost,
               "transcript": rep.transcript, "class_size": rep.class_size}
        if rep.witness is not None:
            row["witness"] = rep.witness.to_json_dict(width=args.n)
        else:
            row["failure"] = rep.failure
        rows.append(row)
        checks.append({"name": f"witness[{p.name}]",
                       "passed": rep.witness is not None})
    correct = density.disj3_broadcast_protocol(args.n, args.n)
    rep = density.disj3_attack(correct, args.n, args.delta)
    rows.append({"protocol": correct.name, "cost": correct.cost,
                 "outcome": "no witness found" if rep.witness is None else "witness",
                 "failure": rep.failure})
    checks.append({"name": "correct_protocol_yields_no_witness",
                   "passed": rep.witness is None})
    results = {"n": args.n, "attacks": rows}
    return make_report("disj3-attack", vars_config(args), results, checks)


def run_cor35(args):
    params = cor35_params(args.n, args.k, args.seed)
    bits = params.q.bit_length()
    per_player = params.r * bits
    rng = np.random.Generator(np.random.PCG64(derive_seed(args.seed, 0x35)))
    mism = 0
    for _ in range(args.samples):
        xs = [tuple(int(v) for v in rng.integers(0, params.q, size=params.r))
              for _ in range(params.k)]
        g = g_mod2_eval(params, xs)
        direct = sum(math.prod(x[j] for x in xs) for j in range(params.r)) % params.q % 2
        mism += int(g != direct)
    results = {
        "q": params.q, "prime_bits": bits, "r": params.r, "k": params.k,
        "per_player_bits": per_player,
        "regime_ok": cor35_regime_ok(args.n, args.k),
        "parity_mismatches": mism,
    }
    checks = [
        {"name": "per_player_length_matches",
         "passed": per_player == (args.n // (1 << (args.k + 1))) * (1 << (args.k + 1))},
        {"name": "parity_matches_gadget_mod2", "passed": mism == 0},
    ]
    return make_report("cor35", vars_config(args), results, checks)


# --- wiring ------------------------------------------------------------------

_RUNNERS = {}


def vars_config(args) -> dict:
    skip = {"func", "out", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="noflab",
        description="Forehead-model communication workbench: every "
                    "verification pipeline as a reproducible experiment.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0, help="experiment seed")
        p.add_argument("--out", default=None, help="report path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.set_defaults(func=fn)
        _RUNNERS[name] = fn
        return p

    p = add("occ", run_occ, "one-way two-party cost via distinct matrix rows")
    p.add_argument("--fn", choices=("eq", "ind", "disj2", "file"), default="eq")
    p.add_argument("--q", type=int, default=5, help="matrix size")
    p.add_argument("--path", default=None, help="CSV path for --fn file")

    p = add("nof-search", run_nof_search, "exact brute-force one-way cost")
    p.add_argument("--fn", choices=("eq", "ind"), default="eq")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--max-budget", type=int, default=4)

    p = add("simulate", run_simulate, "build and verify a built-in protocol")
    p.add_argument("--protocol", choices=("lift-upper", "eq-rand", "ind-two-round"),
                   default="lift-upper")
    p.add_argument("--fn", choices=("eq", "ind"), default="eq")
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--t", type=int, default=6, help="repetitions for eq-rand")
    p.add_argument("--samples", type=int, default=100_000)

    p = add("disperser", run_disperser, "value dispersion over dense intersections")
    p.add_argument("--q", type=int, default=17)
    p.add_argument("--r", type=int, default=8)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--sets", type=int, default=20)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--mode", choices=("exact", "mc"), default="mc")
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--min-density", type=float, default=None)

    p = add("chain", run_chain, "character-sum chain bounds, exact enumeration")
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--sets", type=int, default=50)
    p.add_argument("--density", type=float, default=0.5)

    p = add("largeness", run_largeness, "edge-density vs mean common neighborhood")
    p.add_argument("--graphs", type=int, default=100)
    p.add_argument("--left", type=int, default=40)
    p.add_argument("--right", type=int, default=25)

    p = add("hd", run_hd, "far-pair common-neighborhood witnesses on hypercubes")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--right", type=int, default=64)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--graphs", type=int, default=50)

    p = add("density", run_density, "projection increments and support extraction")
    p.add_argument("--rects", type=int, default=200)
    p.add_argument("--n", type=int, default=12, help="largest coordinate count")
    p.add_argument("--c-max", type=float, default=3.0)

    p = add("disj3-attack", run_disj3_attack, "fooling-pair pipeline for disjointness")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--delta", type=float, default=0.05)

    p = add("cor35", run_cor35, "parameter accounting for the parity function")
    p.add_argument("--n", type=int, default=48)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--samples", type=int, default=10_000)

    return ap


def run_experiment(args) -> dict:
    return args.func(args)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    try:
        report = run_experiment(args)
    except (ValueError, TypeError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        emit_report(report, args.format, args.out)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 2
    print(f"runtime: {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
