"""``switchfb`` command-line front end.

Every command prints a human summary (6 decimals) to stdout.  With ``--out DIR`` it also
writes a deterministic payload (``<command>.json`` or one CSV per table) and a separate
``<command>.manifest.json`` carrying input digests, parameters, seed, version, duration
and the digest of every payload file.  Exit codes: 0 success, 2 validation error,
3 non-convergence, 4 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import max_joint_mi
from .channel import FeedforwardProfile, channel_to_document, dump_document, load_channel, load_profile
from .errors import ConvergenceError, ResourceCapError, ValidationError
from .regions import (
    build_example2,
    corollary_region,
    example2_entropy_bound,
    ksp_sum_capacity,
    lemma1_finite_B_region,
    lemma2_outer_region,
    prop1_outer,
    prop2_inner,
    theorem1_region,
)
from .sim import SchemeConfig, run_block_markov, run_no_feedback_baseline, sweep, sweep_to_csv
from .sim.report import SWEEP_COLUMNS, THREADS_ENV, default_threads

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_CAP = 0, 2, 3, 4


def f6(x) -> str:
    return f"{float(x):.6f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _digest(path: str) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


class Result:
    """Structured payload, CSV tables and summary lines of one command."""

    def __init__(self):
        self.payload: dict = {}
        self.tables: dict[str, str] = {}
        self.lines: list[str] = []

    def say(self, *parts):
        self.lines.append(" ".join(str(p) for p in parts))


def _constraints_csv(regions) -> str:
    rows = [[f6(c.a), f6(c.b), f6(c.c), c.label, r.kind, r.label] for r in regions for c in r.constraints]
    return _csv(["a", "b", "c", "label", "kind", "region"], rows)


def _frontier_csv(regions) -> str:
    rows = [[f6(r1), f6(r2), r.kind, r.label] for r in regions for r1, r2 in r.frontier]
    return _csv(["R1", "R2", "kind", "label"], rows)


# --- commands --------------------------------------------------------------------


def cmd_capacity(args, res: Result):
    ch = load_channel(args.channel)
    opt = max_joint_mi(ch, tol=args.tol, max_iter=args.max_iter)
    res.payload = {"max_I": opt.value, "gap_bound": opt.gap_bound, "iterations": opt.iterations,
                   "argmax": opt.argmax}
    rows = [[i, j, f"{opt.argmax[i, j]:.6f}"] for i in range(ch.x1_size) for j in range(ch.x2_size)]
    res.tables["argmax"] = _csv(["x1", "x2", "probability"], rows)
    res.tables["capacity"] = _csv(["max_I", "gap_bound", "iterations"],
                                  [[f6(opt.value), f"{opt.gap_bound:.3e}", opt.iterations]])
    res.say("max I(X1,X2;Y) =", f6(opt.value), "bits")
    res.say("gap bound      =", f"{opt.gap_bound:.3e}")
    res.say("argmax P(x1,x2):")
    for row in opt.argmax:
        res.say("  " + " ".join(f6(v) for v in row))


def _constant_p(profile: FeedforwardProfile) -> float:
    ps = {p for _, _, p in profile.segments}
    if len(ps) != 1:
        raise ValidationError("thm1 needs a constant feedforward profile")
    return float(ps.pop())


def cmd_region(args, res: Result):
    ch = load_channel(args.channel)
    profile = load_profile(args.profile)
    common = dict(u_size=args.u_size, angles=args.angles, restarts=args.restarts, seed=args.seed)
    which = args.which
    extra = {}
    if which == "prop1":
        regions = [prop1_outer(ch, profile)]
    elif which == "prop2":
        regions = [prop2_inner(ch, profile, **common)]
    elif which == "thm1":
        region, report = theorem1_region(ch, _constant_p(profile))
        regions = [region]
        extra = {"condition": report.status, "margin": report.margin, "threshold": report.threshold,
                 "max_I": report.max_I, "max_cond_entropy": report.max_cond_entropy,
                 "R1_corner": region.details["R1_corner"], "R2_corner": region.details["R2_corner"]}
    elif which == "corollary":
        regions = list(corollary_region(ch, profile.p_avg, **common))
    elif which == "lemma1":
        regions = [lemma1_finite_B_region(ch, profile, args.B, args.epsilon, **common)]
    else:
        regions = [lemma2_outer_region(ch, profile, args.B, **common)]
    res.payload = {"which": which, "p_avg": profile.p_avg, "regions": [r.to_document() for r in regions], **extra}
    res.tables["constraints"] = _constraints_csv(regions)
    res.tables["frontier"] = _frontier_csv(regions)
    res.say(f"region {which} at p_avg = {f6(profile.p_avg)}")
    for r in regions:
        res.say(f"  {r.kind:<6} sum rate {f6(r.sum_value)}  ({len(r.constraints)} constraints, "
                f"{len(r.frontier)} frontier points)")
    if which == "thm1":
        res.say(f"  condition {extra['condition']} (margin {f6(extra['margin'])}), "
                f"threshold p <= {f6(extra['threshold'])}")


def cmd_ksp(args, res: Result):
    ch = load_channel(args.channel)
    profile = load_profile(args.profile)
    ev = ksp_sum_capacity(ch, profile, B=args.B, u_size=args.u_size, restarts=args.restarts, seed=args.seed,
                          angles=args.angles)
    rows = [[b + 1, f6(c.p_bar), f6(c.I_cond), f6(c.I_joint)] for b, c in enumerate(ev.per_block)]
    res.tables["blocks"] = _csv(["block", "p_bar", "I_cond", "I_joint"], rows)
    res.tables["objective"] = _csv(["b0", "objective"],
                                   [[b + 1, f6(v)] for b, v in enumerate(ev.objective_by_b0)])
    res.payload = {
        "B": ev.B, "p_avg": profile.p_avg, "inner": ev.sum_value_inner, "outer": ev.sum_value_outer,
        "upper_envelope": ev.upper_envelope, "minimising_b0": ev.tau_star,
        "two_way": {"inner": ev.tw_bounds.sum_inner, "outer": ev.tw_bounds.sum_outer},
        "per_block": [{"p_bar": c.p_bar, "I_cond": c.I_cond, "I_joint": c.I_joint} for c in ev.per_block],
        "objective_by_b0": ev.objective_by_b0,
    }
    res.say(f"known-pattern sum capacity in [{f6(ev.sum_value_inner)}, {f6(ev.sum_value_outer)}]"
            f"  (envelope {f6(ev.upper_envelope)})")
    res.say(f"minimising b0 = {ev.tau_star} of {ev.B + 1}")
    res.say(" block   p_bar   I_cond  I_joint")
    for b, c in enumerate(ev.per_block):
        res.say(f" {b + 1:>5} {f6(c.p_bar)} {f6(c.I_cond)} {f6(c.I_joint)}")


def cmd_example2(args, res: Result):
    ch = build_example2(args.alpha)
    res.payload = channel_to_document(ch)
    res.say(f"example-2 channel alpha={args.alpha}: |X1|=|X2|={ch.x1_size}, |Y|={ch.y_size}; "
            f"H(X1|X2) bound {f6(example2_entropy_bound(args.alpha))}")
    if args.out is None:
        res.lines.append(dump_document(res.payload))


def _parse_values(text: str, axis: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad sweep values {text!r}") from None
    return [int(v) for v in vals] if axis == "n" else vals


def _sim_row(value, r):
    return [value, r.trials, r.block_errors, f6(r.message_error_rate), f6(r.ci_low), f6(r.ci_high),
            r.stage1_errors, r.stage2_errors, r.seed]


def cmd_simulate(args, res: Result):
    ch = load_channel(args.channel)
    if args.trials < 1:
        raise ValidationError("trials must be >= 1")
    P = None
    if args.input_dist is not None:
        P = np.array(json.loads(args.input_dist), dtype=float)
    cfg = SchemeConfig(ch, args.p, args.n, B=args.B, R1=args.R1, R0=args.R0, R2=args.R2, input_dist=P,
                       epsilon=args.epsilon, seed=args.seed, engine=args.engine)
    runner = run_block_markov if args.scheme == "block_markov" else run_no_feedback_baseline
    if args.sweep_axis:
        if not args.sweep_values:
            raise ValidationError("--sweep-axis needs --sweep-values")
        rows = sweep(cfg, args.sweep_axis, _parse_values(args.sweep_values, args.sweep_axis), args.trials,
                     scheme=args.scheme, threads=args.threads)
        res.tables["sweep"] = sweep_to_csv(rows)
        reports = [(row.axis_value, row.report) for row in rows]
    else:
        reports = [(None, runner(cfg, args.trials, args.threads))]
        res.tables["simulate"] = _csv(SWEEP_COLUMNS, [_sim_row("", reports[0][1])])
    res.payload = {"scheme": args.scheme, "config": cfg.describe(),
                   "axis": args.sweep_axis,
                   "reports": [{"axis_value": v, **r.to_document()} for v, r in reports]}
    res.say(f"{args.scheme} on {reports[0][1].engine} engine, effective rate {f6(reports[0][1].effective_rate)}")
    res.say(f"{'axis':>8} {'trials':>7} {'errors':>7} {'rate':>9} {'ci_low':>9} {'ci_high':>9} {'s1':>5} {'s2':>5}")
    for v, r in reports:
        label = "-" if v is None else f"{v:g}"
        res.say(f"{label:>8} {r.trials:>7} {r.block_errors:>7} {f6(r.message_error_rate):>9} {f6(r.ci_low):>9} "
                f"{f6(r.ci_high):>9} {r.stage1_errors:>5} {r.stage2_errors:>5}")
    if args.check == "trend":
        hi = [r.ci_high for _, r in reports]
        ok = len(hi) >= 2 and all(b < a for a, b in zip(hi, hi[1:]))
        res.payload["check"] = {"kind": "trend", "pass": ok}
        res.say("trend check (strictly decreasing CI upper bound):", "PASS" if ok else "FAIL")
    elif args.check == "converse":
        ok = all(r.message_error_rate >= 0.5 for _, r in reports)
        res.payload["check"] = {"kind": "converse", "pass": ok}
        res.say("converse check (error rate >= 0.5):", "PASS" if ok else "FAIL")


# --- plumbing --------------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--format", choices=("csv", "structured"), default="structured",
                   help="payload format written to --out")
    p.add_argument("--out", default=None, help="directory for payload and manifest files")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")


def _optimiser_flags(p: argparse.ArgumentParser):
    p.add_argument("--u-size", type=int, default=None, help="auxiliary alphabet size (default |X1||X2|+1)")
    p.add_argument("--angles", type=int, default=64, help="number of weight directions")
    p.add_argument("--restarts", type=int, default=16, help="random restarts per structured optimum")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switchfb", description="MAC with switched feedback: bounds and simulation")
    ap.add_argument("--version", action="version", version=f"switchfb {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="max I(X1,X2;Y) by Blahut-Arimoto")
    p.add_argument("channel")
    p.add_argument("--tol", type=float, default=1e-9, help="Blahut-Arimoto gap tolerance")
    p.add_argument("--max-iter", type=int, default=100_000, help="iteration cap")
    _common(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("region", help="rate region bounds")
    p.add_argument("channel")
    p.add_argument("profile")
    p.add_argument("--which", choices=("prop1", "prop2", "thm1", "corollary", "lemma1", "lemma2"), required=True)
    p.add_argument("--B", type=int, default=8, help="number of blocks for lemma1/lemma2")
    p.add_argument("--epsilon", type=float, default=0.0, help="feedback-length slack for lemma1")
    _optimiser_flags(p)
    _common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("simulate", help="Monte Carlo error rates")
    p.add_argument("channel")
    p.add_argument("--p", type=float, required=True, help="switch probability")
    p.add_argument("--n", type=int, required=True, help="block length")
    p.add_argument("--B", type=int, default=4)
    p.add_argument("--R1", type=float, default=0.0)
    p.add_argument("--R0", type=float, default=None, help="bin rate (default 0.8 I(X2;Yd))")
    p.add_argument("--R2", type=float, default=0.0, help="encoder-2 rate (baseline only)")
    p.add_argument("--epsilon", type=float, default=0.1, help="typicality slack")
    p.add_argument("--input-dist", default=None, help="JSON |X1|x|X2| table (default: capacity-achieving)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--scheme", choices=("block_markov", "baseline"), default="block_markov")
    p.add_argument("--engine", choices=("auto", "explicit", "ensemble"), default="auto")
    p.add_argument("--sweep-axis", choices=("n", "p", "R1"), default=None)
    p.add_argument("--sweep-values", default=None, help="comma-separated, strictly monotone")
    p.add_argument("--check", choices=("trend", "converse"), default=None, help="flag PASS/FAIL on the reports")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ksp", help="known-switching-pattern sum capacity")
    p.add_argument("channel")
    p.add_argument("profile")
    p.add_argument("--B", type=int, default=16)
    _optimiser_flags(p)
    _common(p)
    p.set_defaults(func=cmd_ksp)

    p = sub.add_parser("example2", help="write the example-2 channel document")
    p.add_argument("--alpha", type=int, default=2)
    _common(p)
    p.set_defaults(func=cmd_example2)
    return ap


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def write_outputs(args, res: Result, duration: float) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if args.format == "structured" or not res.tables:
        path = out / f"{args.command}.json"
        path.write_text(json.dumps(_jsonable(res.payload), indent=2, sort_keys=True) + "\n")
        files.append(path)
    else:
        for name, text in res.tables.items():
            path = out / f"{args.command}.{name}.csv"
            path.write_text(text)
            files.append(path)
    inputs = {getattr(args, k): _digest(getattr(args, k)) for k in ("channel", "profile") if hasattr(args, k)}
    manifest = {
        "command": args.command, "inputs": inputs, "parameters": _params(args), "seed": args.seed,
        "version": __version__, "duration_s": round(duration, 6),
        "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files},
    }
    mpath = out / f"{args.command}.manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files + [mpath]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = default_threads()
        elif args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        t0 = time.perf_counter()
        res = Result()
        args.func(args, res)
        duration = time.perf_counter() - t0
        print("\n".join(res.lines))
        if args.out is not None:
            for path in write_outputs(args, res, duration):
                print(f"wrote {path}")
    except ValidationError as exc:
        print(f"switchfb: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"switchfb: did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ResourceCapError as exc:
        print(f"switchfb: resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
