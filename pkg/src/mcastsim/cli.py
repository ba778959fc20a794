"""Command line front end: ``run``, ``sweep`` and ``validate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, MulticastMode, load_config
from .experiments import ALL_MODES, SWEEPS, rows_to_csv, run_sweep
from .sim import json_trace_writer, run

EXIT_INVALID = 2


def _cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"{args.config}: {path or '<root>'}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:  # unreadable file or broken YAML
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{args.config}: ok")
    return 0


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.out) if args.out else None
    trace_fh = None
    sink = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if args.trace:
            trace_fh = open(out / "trace.jsonl", "w")
            sink = json_trace_writer(trace_fh)
    try:
        rep = run(cfg, sink)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    row = {"mode": cfg.multicast_mode.value, "seed": cfg.seed, **rep.scalar_row(), "conserved": rep.conserved}
    if out is not None:
        (out / "metrics.json").write_text(json.dumps(rep.to_dict(), sort_keys=True, indent=2, default=vars))
        (out / "metrics.csv").write_text(rows_to_csv([row]))
    print(json.dumps(row, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    modes = [MulticastMode(m) for m in args.modes] if args.modes else list(ALL_MODES)
    kw = {}
    if args.duration is not None:
        kw["duration_s"] = args.duration
    if args.warmup is not None:
        kw["warmup_s"] = args.warmup
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    rows = run_sweep(args.family, modes, seeds, jobs=args.jobs, **kw)
    text = rows_to_csv(rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.family}.csv").write_text(text)
        print(out / f"{args.family}.csv")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcastsim", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate one scenario file")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="directory for metrics.json / metrics.csv")
    r.add_argument("--trace", action="store_true", help="also write trace.jsonl into --out")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="run one experiment family")
    s.add_argument("family", choices=sorted(SWEEPS))
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--first-seed", type=int, default=1)
    s.add_argument("--modes", nargs="+", choices=[m.value for m in MulticastMode])
    s.add_argument("--duration", type=float, help="simulated seconds per point, warm-up included")
    s.add_argument("--warmup", type=float)
    s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    s.add_argument("--out", help="directory for <family>.csv (default: stdout)")
    s.set_defaults(func=_cmd_sweep)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
