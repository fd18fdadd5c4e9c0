"""Command-line interface: ``qipsolver {generate,solve,oracle,bench,report}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import bench
from .heur import HEURISTIC, RANDOM
from .instances import FAMILIES, GRIDS, generate, write_grid
from .lp import write_lp
from .model import InstanceError, ParseError, parse_instance, write_instance
from .oracle import OracleCapExceeded, OracleStatus, minimax_oracle
from .relax import build_dep
from .search import RELAX_MODES, SearchConfig, Searcher, SearchStatus

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LIMIT = 2


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SystemExit(_fail(f"{path}: cannot read: {exc.strerror or exc}"))
    try:
        return parse_instance(text)
    except (ParseError, InstanceError) as exc:
        raise SystemExit(_fail(f"{path}: {exc}"))


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _bits(xs) -> str:
    return " ".join(str(int(v)) for v in xs)


def _config(args) -> SearchConfig:
    return SearchConfig(sbar=args.sbar, relaxation_mode=args.relax, scenario_mode=args.scenarios, seed=args.seed,
                        node_limit=args.node_limit, time_limit=args.time_limit)


def _searcher(args, inst, trace=None) -> Searcher:
    return Searcher(inst, _config(args), trace)


# ---------------------------------------------------------------- generate

_GEN_KEYS = {"n", "p", "N", "T", "A", "S", "b", "seed"}


def cmd_generate(args) -> int:
    if args.grid:
        manifest = write_grid(args.grid, args.out or f"grid_{args.grid}", args.seeds, args.master_seed)
        print(manifest)
        return EXIT_OK
    if not args.family:
        return _fail("give a family or --grid")
    cls = FAMILIES[args.family][0]
    accepted = {f.name for f in fields(cls)}
    params = {k: getattr(args, k) for k in _GEN_KEYS if getattr(args, k) is not None}
    unknown = set(params) - accepted
    if unknown:
        return _fail(f"{args.family} does not take {', '.join(sorted('--' + k for k in unknown))}")
    try:
        inst = generate(args.family, **params)
    except (TypeError, ValueError) as exc:
        return _fail(str(exc))
    text = f"# {args.family} {json.dumps(params, sort_keys=True)}\n" + write_instance(inst)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------- solve

def cmd_solve(args) -> int:
    code = EXIT_OK
    for path in args.paths:
        inst = _load(path)
        trace = (lambda line: print(line, file=sys.stderr)) if args.trace else None
        try:
            s = _searcher(args, inst, trace)
        except ValueError as exc:
            code = max(code, _fail(f"{path}: {exc}"))
            continue
        res = s.solve()
        if len(args.paths) > 1:
            print(f"== {path}")
        print(f"status: {res.status.value}")
        if res.status is SearchStatus.FEASIBLE:
            print(f"value: {res.value}")
            print(f"first_stage: {_bits(res.first_stage)}")
            print(f"pv: {_bits(res.principal_variation)}")
        elif res.status is SearchStatus.LIMIT:
            print(f"bounds: [{_fmt_bound(res.lower_bound)}, {_fmt_bound(res.upper_bound)}]")
        st = asdict(res.stats)
        print("stats: " + " ".join(f"{k}={v:.3f}" if k == "wall_time" else f"{k}={v}" for k, v in st.items()))
        if args.trace:
            w = csv.writer(sys.stderr, lineterminator="\n")
            w.writerow([Path(path).stem, args.relax, args.sbar, res.stats.decision_nodes, res.stats.conflicts,
                        res.stats.restarts, "" if res.value is None else res.value, f"{res.stats.wall_time:.6f}"])
        if args.dump_dep:
            extra = s._scenario()
            lp, _ = build_dep(inst, list(s.scenarios) + [extra])
            Path(args.dump_dep).write_text(write_lp(lp, f"DEP of {Path(path).name}"))
        if res.status is SearchStatus.LIMIT:
            code = max(code, EXIT_LIMIT)
    return code


def _fmt_bound(b) -> str:
    return "-inf" if b is None else str(b)


# ------------------------------------------------------------------ oracle

def cmd_oracle(args) -> int:
    inst = _load(args.path)
    try:
        res = minimax_oracle(inst, memo=not args.no_memo, cap=args.cap)
    except OracleCapExceeded as exc:
        print(f"status: limit ({exc})")
        return EXIT_LIMIT
    print(f"status: {res.status.value}")
    if res.status is OracleStatus.FEASIBLE:
        print(f"value: {res.value}")
        print(f"pv: {_bits(res.principal_variation)}")
        for fs in sorted(res.optimal_first_stage):
            print(f"optimal_first_stage: {_bits(fs)}")
    print(f"nodes: {res.nodes}")
    return EXIT_OK


# ------------------------------------------------------------------- bench

def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_bench(args) -> int:
    try:
        manifest = bench.load_manifest(args.manifest)
    except (OSError, bench.SchemaError) as exc:
        return _fail(f"{args.manifest}: {exc}")
    modes = [m.strip() for m in args.scenarios.split(",") if m.strip()]
    tasks = bench.plan(manifest, args.relax, _int_list(args.sbars), modes, args.seed, args.node_limit,
                       args.time_limit)
    records = bench.run_bench(tasks, args.workers)
    if args.out:
        bench.write_csv(records, args.out)
    else:
        bench.write_csv(records, sys.stdout)
    if args.dr_out:
        with open(args.dr_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["instance_id", "family", "sbar", "scenario_mode", "nodes", "baseline_nodes", "d_r"])
            for r in bench.dr_table(records):
                w.writerow([r.instance_id, r.family, r.sbar, r.scenario_mode, r.nodes, r.baseline_nodes,
                            f"{r.d_r:.6f}"])
    failed = sum(r.status.startswith("error") for r in records)
    if failed:
        print(f"{failed} run(s) failed", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------ report

def cmd_report(args) -> int:
    if args.target == "heur":
        if not args.path:
            return _fail("report heur needs an instance path")
        return _report_heur(args)
    if args.path:
        return _fail("report takes a single CSV path")
    try:
        records = bench.read_csv(args.target)
    except OSError as exc:
        return _fail(f"{args.target}: {exc.strerror or exc}")
    except bench.SchemaError as exc:
        return _fail(f"{args.target}: {exc}")
    sys.stdout.write(bench.format_report(records))
    return EXIT_OK


def _report_heur(args) -> int:
    """Solve, then dump the heuristic state as CSV sections."""
    inst = _load(args.path)
    s = _searcher(args, inst)
    s.solve()
    h = s.heur
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["section", "var", "vsids0", "vsids1", "killer"])
    for j in range(inst.num_vars):
        killer = h.killer[j]
        if h.vsids[j].any() or killer is not None:
            w.writerow(["var", j + 1, f"{h.vsids[j, 0]:g}", f"{h.vsids[j, 1]:g}", "" if killer is None else killer])
    w.writerow(["section", "prefix", "count", "", ""])
    for prefix, count in h.top(args.top):
        w.writerow(["trie", "".join(map(str, prefix)), count, "", ""])
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--relax", choices=RELAX_MODES, default="s", help="relaxation used for bounds")
    p.add_argument("--sbar", type=int, default=0, help="scenario set capacity")
    p.add_argument("--scenarios", choices=(HEURISTIC, RANDOM), default=HEURISTIC)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float, help="seconds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qipsolver", description="Solve 0/1 quantified integer programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated instance or a whole test grid")
    g.add_argument("family", nargs="?", choices=sorted(FAMILIES))
    for k in ("n", "p", "N", "T", "A", "S", "b", "seed"):
        g.add_argument(f"--{k}", type=int)
    g.add_argument("--grid", choices=sorted(GRIDS))
    g.add_argument("--seeds", type=int, help="instances per grid cell (default: the grid's own)")
    g.add_argument("--master-seed", type=int, default=0)
    g.add_argument("-o", "--out", help="output file (instance) or directory (grid)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the search")
    s.add_argument("paths", nargs="+")
    _solver_flags(s)
    s.add_argument("--dump-dep", metavar="PATH", help="write the root DEP in LP format")
    s.add_argument("--trace", action="store_true", help="restart lines and a stats CSV row on stderr")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exhaustive minimax evaluation")
    o.add_argument("path")
    o.add_argument("--no-memo", action="store_true")
    o.add_argument("--cap", type=int, default=2 ** 24, help="node cap")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="run a manifest under several scenario capacities")
    b.add_argument("manifest")
    b.add_argument("--relax", choices=RELAX_MODES, default="s")
    b.add_argument("--sbars", default=",".join(map(str, bench.DEFAULT_SBARS)))
    b.add_argument("--scenarios", default=f"{HEURISTIC},{RANDOM}", help="comma separated scenario modes")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--node-limit", type=int)
    b.add_argument("--time-limit", type=float)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("-o", "--out", help="CSV path (default stdout)")
    b.add_argument("--dr-out", help="also write the per-instance D_r table")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="tables from a bench CSV; 'report heur INSTANCE' dumps heuristic state")
    r.add_argument("target", help="bench CSV path, or 'heur'")
    r.add_argument("path", nargs="?", help="instance path for 'report heur'")
    _solver_flags(r)
    r.add_argument("--top", type=int, default=20, help="trie entries to list")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
