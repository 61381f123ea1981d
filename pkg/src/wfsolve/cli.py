"""Command-line front end.

Exit codes: 0 proven optimal (or success), 1 infeasible sequence in
``verify``, 2 time limit reached with an incumbent, 3 input error,
4 backend error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bounds import compute_bounds
from .core import (
    InstanceError,
    SequenceFormatError,
    derive_seed,
    evaluate,
    format_instance,
    generate_instance,
    parse_instance,
    parse_sequence,
    validate,
)
from .model import LEVELS, ProvablyNoImprovement, Settings, build_fixed_length_model, emit_lp, emit_mps
from .solver import CSV_COLUMNS, BackendError, default_solver_cmd, run

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_TIME_LIMIT = 2
EXIT_INPUT = 3
EXIT_BACKEND = 4

DEFAULT_TIME_LIMIT = 1800.0
NORMAL_SIZES = (5, 7, 9, 11, 13, 15)
NORMAL_FACTORS = (2, 3, 4)

log = logging.getLogger("wfsolve")


def _read_instance(path):
    with open(path) as fh:
        return parse_instance(fh.read())


def write_report(report, out_dir: Path, stem: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{stem}.report.json"
    csv_path = out_dir / f"{stem}.log.csv"
    with open(json_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for it in report.iterations:
            writer.writerow(it.csv_row())
    return json_path, csv_path


def cmd_solve(args) -> int:
    try:
        inst = _read_instance(args.instance)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = Settings.preset(args.setting)
    try:
        report = run(inst, cfg, budget=args.time_limit, backend=args.backend, solver_cmd=args.solver_cmd)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    write_report(report, Path(args.out_dir), Path(args.instance).stem)
    flag = "proven-optimal" if report.proven_optimal else "time-limit"
    print(f"{report.objective} {flag}")
    print(f"sequence: {' '.join(map(str, report.sequence.symbols))}")
    return EXIT_OK if report.proven_optimal else EXIT_TIME_LIMIT


def cmd_verify(args) -> int:
    try:
        inst = _read_instance(args.instance)
        with open(args.sequence) as fh:
            seq = parse_sequence(fh.read())
    except (OSError, InstanceError, SequenceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    violations = validate(inst, seq)
    if violations:
        print("infeasible")
        for v in violations:
            print(f"  {v}")
        return EXIT_INFEASIBLE
    ev = evaluate(inst, seq)
    print("symbol  w  D  w*D")
    for i in range(inst.n):
        print(f"a{i + 1:<5} {inst.w[i]:>2} {ev.D[i]:>2} {ev.products[i]:>4}")
    print(f"objective {ev.objective}")
    print("binding " + " ".join(f"a{i}" for i in ev.binding))
    print("feasible")
    return EXIT_OK


def gen_plan(args):
    """(file name, n, T, per-file seed) for every instance to write."""
    plan = []
    if args.preset == "normal":
        index = 0
        for n in NORMAL_SIZES:
            for factor in NORMAL_FACTORS:
                for k in range(args.count or 10):
                    plan.append((f"normal_n{n}_T{factor * n}_{k:02d}.wfs", n, factor * n,
                                 derive_seed(args.seed, index)))
                    index += 1
    else:
        if args.n is None or args.T is None:
            raise InstanceError("header", "gen needs --n and --T (or --preset normal)")
        for k in range(args.count or 1):
            plan.append((f"wfs_n{args.n}_T{args.T}_{k:02d}.wfs", args.n, args.T, derive_seed(args.seed, k)))
    return plan


def cmd_gen(args) -> int:
    try:
        plan = gen_plan(args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, n, T, seed in plan:
            inst = generate_instance(n, T, seed)
            with open(out / name, "w") as fh:
                fh.write(f"# generated n={n} T={T} seed={seed}\n")
                fh.write(format_instance(inst))
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: cannot write instances: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wrote {len(plan)} instances to {args.out_dir}")
    return EXIT_OK


def cmd_emit(args) -> int:
    try:
        inst = _read_instance(args.instance)
        b = compute_bounds(inst, args.length, args.z_star)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        m = build_fixed_length_model(inst, args.length, b, Settings.preset(args.setting))
    except ProvablyNoImprovement as exc:
        print(f"no improving sequence of length {args.length}: {exc}", file=sys.stderr)
        return EXIT_OK
    text = emit_mps(m) if args.format == "mps" else emit_lp(m)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"{len(m.variables)} variables ({m.free_variables()} free), "
              f"{len(m.constraints)} constraints -> {args.out}")
    return EXIT_OK


def _bench_one(job):
    path, setting, time_limit, backend, solver_cmd = job
    inst = _read_instance(path)
    report = run(inst, Settings.preset(setting), budget=time_limit, backend=backend, solver_cmd=solver_cmd)
    return {
        "instance": os.path.basename(path),
        "n": inst.n,
        "T": inst.T,
        "setting": setting,
        "objective": report.objective,
        "proven_optimal": int(report.proven_optimal),
        "seconds": f"{report.seconds:.4f}",
        "nodes": sum(it.nodes for it in report.iterations),
        "skipped": sum(it.skipped for it in report.iterations),
    }


def cmd_bench(args) -> int:
    paths = sorted(p for pattern in args.instances for p in (glob.glob(pattern) or [pattern]))
    if not paths:
        print("error: no instance files", file=sys.stderr)
        return EXIT_INPUT
    try:
        for p in paths:
            _read_instance(p)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    jobs = [(p, s, args.time_limit, args.backend, args.solver_cmd) for s in args.setting for p in paths]
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_bench_one, jobs))
        else:
            rows = [_bench_one(j) for j in jobs]
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    for s in args.setting:
        sel = [r for r in rows if r["setting"] == s]
        total = sum(float(r["seconds"]) for r in sel)
        solved = sum(r["proven_optimal"] for r in sel)
        print(f"{s:9s} solved {solved}/{len(sel)}  total {total:.2f}s")
    return EXIT_OK if all(r["proven_optimal"] for r in rows) else EXIT_TIME_LIMIT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wfsolve", description="Exact solver for weighted fair sequences.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_flags(p, many=False):
        if many:
            p.add_argument("--setting", choices=LEVELS, action="append", default=None,
                           help="repeatable; defaults to every level")
        else:
            p.add_argument("--setting", choices=LEVELS, default="enhanced")
        p.add_argument("--backend", choices=("native", "lp-export"), default="native")
        p.add_argument("--solver-cmd", default=None,
                       help="external solver template with {lp}, {sol}, {time_limit}; "
                            "defaults to $WFS_SOLVER_CMD")
        p.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT)
        p.add_argument("--out-dir", default=".")

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--instance", required=True)
    solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="evaluate a sequence against an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--sequence", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="generate random instances")
    p.add_argument("--n", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("normal",), default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("emit", help="write the fixed-length model as LP or MPS")
    p.add_argument("--instance", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--setting", choices=LEVELS, default="basic")
    p.add_argument("--z-star", type=int, default=None)
    p.add_argument("--format", choices=("lp", "mps"), default="lp")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("bench", help="solve a batch of instances and summarise")
    p.add_argument("--instances", nargs="+", required=True)
    solver_flags(p, many=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "backend", None) == "lp-export" and not args.solver_cmd:
        args.solver_cmd = default_solver_cmd()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench":
        args.setting = args.setting or list(LEVELS)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
