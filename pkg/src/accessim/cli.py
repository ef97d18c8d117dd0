"""Command-line front end.

    accessim run --preset S1_3 --out results/
    accessim compare --candidate shaped.cfg --reference unshaped.cfg --out cmp/
    accessim scan-n --config S1_6 --reference U1 --n-max 5 --out scan/
    accessim scan-N --config S1_6 --reference U1 --n 3 --N-max 10 --out scan/
    accessim gen-trace --gop 16 --b-frames 3 --bitrate 1.63M --frames 3600 --out t.txt
    accessim presets

Parallelism: set ACCESSIM_JOBS to bound worker processes.
"""

import argparse
import sys
from dataclasses import replace

from .config import (ConfigError, load_preset, parse_config, parse_quantity,
                     preset_names)
from .experiment import (Runner, format_comparison, run_comparison,
                         run_experiment, scan_subscribers, scan_users,
                         write_comparison, write_scan)
from .noninferiority import ToleranceSpec
from .video import gen_synthetic_trace, write_trace


def _load(spec_or_path, overrides, profile="desk"):
    try:
        cfg = load_preset(spec_or_path, profile=profile)
    except ConfigError as exc:
        if "unknown profile" in str(exc):
            raise
        cfg = parse_config(spec_or_path)
    if overrides:
        cfg = replace(cfg, **overrides).validate()
    return cfg


def _run_overrides(args):
    out = {}
    if getattr(args, "seed", None) is not None:
        out["master_seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        out["replications"] = args.reps
    if getattr(args, "duration", None) is not None:
        out["duration"] = args.duration
    if getattr(args, "warmup", None) is not None:
        out["warmup"] = args.warmup
    return out


def cmd_run(args):
    cfg = _load(args.config, _run_overrides(args), args.profile)
    results = run_experiment(cfg, out_dir=args.out)
    print(f"{cfg.config_id}: {len(results)} replications -> {args.out}")
    return 0


def cmd_compare(args):
    overrides = _run_overrides(args)
    candidate = _load(args.candidate, overrides, args.profile)
    reference = _load(args.reference, overrides, args.profile)
    spec = ToleranceSpec(fraction=args.tolerance, alpha=args.alpha)
    report = run_comparison(candidate, reference, spec)
    if args.out:
        write_comparison(report, args.out)
    print(format_comparison(report))
    return 0 if report.outcome.passed else 1


def cmd_scan_n(args):
    overrides = _run_overrides(args)
    shaped = _load(args.config, overrides, args.profile)
    unshaped = _load(args.reference, overrides, args.profile)
    spec = ToleranceSpec(fraction=args.tolerance, alpha=args.alpha)
    result = scan_users(shaped, unshaped, args.n_max, spec, Runner())
    for point in result.points:
        print(f"n={point.value}: {'pass' if point.outcome.passed else 'fail'}")
    print(f"max(n_eqv) = {result.max_equivalent}")
    if args.out:
        write_scan(result, result.max_equivalent, args.out, shaped.config_id)
    return 0


def cmd_scan_N(args):
    overrides = _run_overrides(args)
    shaped = _load(args.config, overrides, args.profile)
    unshaped = _load(args.reference, overrides, args.profile)
    spec = ToleranceSpec(fraction=args.tolerance, alpha=args.alpha)
    result = scan_subscribers(shaped, unshaped, args.n, args.N_max, spec,
                              Runner())
    for point in result.points:
        print(f"N={point.value}: {'pass' if point.outcome.passed else 'fail'}")
    print(f"max(N_eqv) = {result.max_equivalent} "
          f"(total users {args.n * result.max_equivalent})")
    if args.out:
        write_scan(result, args.n, args.out, shaped.config_id)
    return 0


def cmd_gen_trace(args):
    trace = gen_synthetic_trace(args.gop, args.b_frames,
                                parse_quantity(args.bitrate), args.frames,
                                frame_period=1.0 / args.fps, seed=args.seed,
                                name=args.out)
    write_trace(trace, args.out)
    print(f"{args.out}: {len(trace)} frames, "
          f"{trace.mean_bit_rate / 1e6:.3f} Mbit/s")
    return 0


def cmd_presets(args):
    del args
    for name in preset_names():
        cfg = load_preset(name)
        tbf = cfg.group_tbf(cfg.groups[0])
        shaping = (f"tgr={tbf.tgr / 1e6:g}M tbs={tbf.tbs / 1e6:g}MB"
                   if tbf else "unshaped")
        print(f"{name:<6} access={cfg.rates.distribution / 1e6:g}M "
              f"{shaping} groups={len(cfg.groups)}")
    return 0


def _add_run_overrides(p):
    p.add_argument("--profile", default="desk", choices=["desk", "full"],
                   help="run-length profile for presets (default: desk)")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--reps", type=int, help="replication count override")
    p.add_argument("--duration", type=float, help="run length override (s)")
    p.add_argument("--warmup", type=float, help="warmup override (s)")


def _add_tolerance(p):
    p.add_argument("--tolerance", type=float, default=0.10)
    p.add_argument("--alpha", type=float, default=0.05)


def build_parser():
    parser = argparse.ArgumentParser(prog="accessim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("--config", required=True, help="preset name or config file")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    _add_run_overrides(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare", help="non-inferiority comparison")
    p.add_argument("--candidate", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out")
    _add_run_overrides(p)
    _add_tolerance(p)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("scan-n", help="search max users per subscriber")
    p.add_argument("--config", required=True, help="shaped preset/file")
    p.add_argument("--reference", required=True, help="unshaped preset/file")
    p.add_argument("--n-max", type=int, default=4)
    p.add_argument("--out")
    _add_run_overrides(p)
    _add_tolerance(p)
    p.set_defaults(fn=cmd_scan_n)

    p = sub.add_parser("scan-N", help="search max subscriber count")
    p.add_argument("--config", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--n", type=int, required=True, help="users per subscriber")
    p.add_argument("--N-max", type=int, default=8)
    p.add_argument("--out")
    _add_run_overrides(p)
    _add_tolerance(p)
    p.set_defaults(fn=cmd_scan_N)

    p = sub.add_parser("gen-trace", help="write a synthetic video trace")
    p.add_argument("--gop", type=int, default=16)
    p.add_argument("--b-frames", type=int, default=3)
    p.add_argument("--bitrate", default="1.63M", help="bits/s, suffixes ok")
    p.add_argument("--frames", type=int, default=3600)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_trace)

    p = sub.add_parser("presets", help="list built-in configurations")
    p.set_defaults(fn=cmd_presets)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
