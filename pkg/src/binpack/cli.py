"""Command line: ``binpack run``, ``binpack gen`` and ``binpack baseline``."""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .baselines import BASELINES, run_baseline
from .datagen import (generate_full_set, generate_random_instance, read_instances,
                      write_instances)
from .env import SCENARIOS
from .harness import run_suite
from .search import SearchConfig


def parse_duration(text: str) -> float:
    """Seconds from ``"1s"``, ``"250ms"``, ``"2m"`` or a bare number."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*(ms|s|m)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}")
    value = float(m.group(1))
    return value * {"ms": 1e-3, "s": 1.0, "m": 60.0, None: 1.0}[m.group(2)]


def _instances(args):
    if getattr(args, "instances", None):
        return read_instances(args.instances)
    if args.mode == "full-set":
        return [generate_full_set(args.w, args.h, args.sigma, args.seed + i)
                for i in range(args.count)]
    return [generate_random_instance(args.w, args.h, args.items, args.seed + i)
            for i in range(args.count)]


def _add_instance_args(p: argparse.ArgumentParser, file_flag: bool = True) -> None:
    if file_flag:
        p.add_argument("--instances", type=Path, help="JSONL (optionally gzipped) instance file")
    p.add_argument("--mode", choices=("random", "full-set"), default="random",
                   help="generator used when no instance file is given")
    p.add_argument("--w", type=int, default=10)
    p.add_argument("--h", type=int, default=10)
    p.add_argument("--count", type=int, default=100, help="number of instances")
    p.add_argument("--items", type=int, default=40, help="items per random instance")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0, help="seed of the first instance")


def _emit(report, out: Path | None) -> None:
    if out is None:
        for name, agg in report.aggregates().items():
            print(f"{name}: " + ", ".join(f"{k}={v:.2f}" if isinstance(v, float) else f"{k}={v}"
                                          for k, v in agg.items()))
        return
    report.write_csv(out)
    report.write_json(out.with_suffix(".json"))
    print(f"wrote {out} and {out.with_suffix('.json')}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="binpack", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run episodes through the search engine")
    run.add_argument("--scenario", action="append", choices=sorted(SCENARIOS),
                     help="repeatable; default S-R5A3")
    _add_instance_args(run)
    run.add_argument("--rotation", action=argparse.BooleanOptionalAction, default=True)
    run.add_argument("--repack", action=argparse.BooleanOptionalAction, default=False)
    run.add_argument("--full-pack", action="store_true", help="only accept complete packings")
    run.add_argument("--repack-budget", type=parse_duration, default=1.0)
    run.add_argument("--beam", type=int, default=None, help="beam width K (default unpruned)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, help="CSV path; a JSON mirror is written alongside")

    gen = sub.add_parser("gen", help="generate instances")
    _add_instance_args(gen, file_flag=False)
    gen.add_argument("--out", type=Path, default=Path("instances.jsonl"))

    base = sub.add_parser("baseline", help="run a classic heuristic")
    base.add_argument("--name", required=True, type=str.upper,
                      help="first-fit or shelf-next-fit")
    _add_instance_args(base)
    base.add_argument("--out", type=Path)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gen":
        recs = _instances(args)
        write_instances(recs, args.out)
        print(f"wrote {len(recs)} instances to {args.out}")
        return 0
    if args.command == "baseline":
        name = args.name.replace("-", "_")
        if name not in BASELINES:
            print(f"unknown baseline {args.name}; choose from {', '.join(BASELINES)}",
                  file=sys.stderr)
            return 2
        _emit(run_baseline(name, _instances(args)), args.out)
        return 0
    cfg = SearchConfig(beam_width=args.beam, require_full_pack=args.full_pack,
                       use_repack=args.repack, repack_budget=args.repack_budget,
                       rotation=args.rotation, seed=args.seed)
    report = run_suite(_instances(args), args.scenario or ["S-R5A3"], cfg, args.workers)
    _emit(report, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
