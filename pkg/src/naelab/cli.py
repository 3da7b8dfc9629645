"""Command-line entry point.

Settings come from, in increasing priority: built-in defaults, the
``--config`` INI file (a ``[global]`` section plus one section per
subcommand, keys named like the long flags), and explicit flags.

Exit codes: 0 success, 2 validation error, 3 budget exceeded;
``verify`` exits 10 for SAT and 20 for UNSAT.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from . import __version__, bench
from .complete import dpll_solve, solve_nae
from .formula import Mode, read_dimacs
from .generate import RejectionBudgetExceeded
from .qaoa.train import DEFAULT_EPOCHS, DEFAULT_LR
from .rng import make_rng
from .sls import DEFAULT_GRID_MAX_FLIPS, SlsConfig, run_sls

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_SAT = 10
EXIT_UNSAT = 20

GLOBAL_KEYS = ("seed", "threads", "out")


def _positive(value):
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return v


def _seed(value):
    v = int(value)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="top-level seed (default 0)")
    common.add_argument("--threads", type=_positive, default=argparse.SUPPRESS, help="worker threads (default 1)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI file with per-command sections")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default .)")

    p = argparse.ArgumentParser(prog="naelab", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a satisfiable random ensemble")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", default="auto", help="clause density or 'auto' for the satisfiability threshold")
    g.add_argument("--count", type=_positive, default=100)
    g.add_argument("--max-attempts", type=_positive, default=10_000, help="rejection budget per instance")

    v = sub.add_parser("verify", parents=[common], help="decide a DIMACS formula with the complete solver")
    v.add_argument("path")

    s = sub.add_parser("sls", parents=[common], help="run one local-search solver on a DIMACS formula")
    s.add_argument("path")
    s.add_argument("--algorithm", default="walksatm2b2")
    s.add_argument("--noise", type=float, default=0.5)
    s.add_argument("--w1", type=float, default=0.5)
    s.add_argument("--max-flips", type=_positive, default=100_000)

    t = sub.add_parser("train", parents=[common], help="train QAOA angles on an ensemble")
    t.add_argument("--ensemble", required=True)
    t.add_argument("--P", dest="P", type=int, required=True, help="circuit depth")
    t.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    t.add_argument("--lr", type=float, default=DEFAULT_LR)
    t.add_argument("--name", help="output file name (default params_P<P>.json)")

    e = sub.add_parser("eval", parents=[common], help="success probabilities and running times")
    e.add_argument("--ensemble", required=True)
    src = e.add_mutually_exclusive_group()
    src.add_argument("--params", help="params JSON from 'train'")
    src.add_argument("--zero-angle", type=_positive, metavar="P", help="use all-zero angles at depth P")
    e.add_argument("--sampling", choices=("geometric", "literal"), default="geometric")
    e.add_argument("--name")

    b = sub.add_parser("bench-sls", parents=[common], help="benchmark a local-search solver on an ensemble")
    b.add_argument("--ensemble", required=True)
    b.add_argument("--algorithm", default="walksatm2b2")
    b.add_argument("--tune", metavar="TRAINSET", help="grid-search the config on this ensemble first")
    b.add_argument("--noise", type=float, default=0.5)
    b.add_argument("--w1", type=float, default=0.5)
    b.add_argument("--max-flips", type=_positive, default=DEFAULT_GRID_MAX_FLIPS)
    b.add_argument("--restarts", type=_positive, default=bench.DEFAULT_RESTARTS)
    b.add_argument("--gave-up-threshold", type=float, default=bench.DEFAULT_GAVE_UP_THRESHOLD)
    b.add_argument("--name")

    f = sub.add_parser("fit", parents=[common], help="scaling exponents from eval and SLS records")
    f.add_argument("records", nargs="+", help="record files or directories")

    r = sub.add_parser("report", parents=[common], help="figure data (CSV) and a summary table")
    r.add_argument("records", nargs="+")
    return p


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # required flags may come from the config file, so find it before the full parse
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        args = parser.parse_args(argv)
    else:
        args = _parse_with_config(parser, argv, known.config)
    for key, default in (("seed", 0), ("threads", 1), ("out", ".")):
        if not hasattr(args, key):
            setattr(args, key, default)
    return args


def _parse_with_config(parser, argv, path):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise bench.ValidationError(f"cannot read config file {path}")
    # config values become flags placed before the user's, so the user's win
    sub_names = set(_subparser_names(parser))
    try:
        idx = next(i for i, a in enumerate(argv) if a in sub_names)
    except StopIteration:
        return parser.parse_args(argv)
    command = argv[idx]
    injected = []
    for section in ("global", command):
        if not cp.has_section(section):
            continue
        sub = _subparser(parser, command)
        actions = {a.dest: a for a in sub._actions if a.option_strings}
        for key, raw in cp.items(section):
            dest = "P" if key == "p" else key.replace("-", "_")
            if dest not in actions or dest == "config" or (section == "global" and dest not in GLOBAL_KEYS):
                raise bench.ValidationError(f"config [{section}]: unknown key {key!r}")
            injected.extend([actions[dest].option_strings[0], raw])
    return parser.parse_args(argv[: idx + 1] + injected + argv[idx + 1:])


def _subparser_names(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return list(action.choices)
    return []


def _emit(path: Path) -> None:
    print(path)


def run(args) -> int:
    out = Path(args.out)
    cmd = args.command
    if cmd == "gen":
        manifest = bench.cmd_gen(out, args.k, args.n, args.r, args.count, args.seed, args.threads, args.max_attempts)
        print(f"{len(manifest['instances'])} instances in {out} (hash {manifest['hash'][:12]})")
    elif cmd == "verify":
        formula = _read(args.path)
        res = solve_nae(formula) if formula.mode is Mode.NAE else dpll_solve(formula)
        if res.satisfiable:
            lits = [(j + 1) if b else -(j + 1) for j, b in enumerate(res.witness)]
            print("SAT")
            print("v " + " ".join(map(str, lits)) + " 0")
            return EXIT_SAT
        print("UNSAT")
        return EXIT_UNSAT
    elif cmd == "sls":
        formula = _read(args.path)
        cfg = _sls_config(args)
        outcome = run_sls(formula, bench.canonical_algorithm(args.algorithm), cfg, make_rng(args.seed))
        witness = None if outcome.witness is None else [int(b) for b in outcome.witness]
        print(json.dumps({"status": outcome.status.value, "flips": outcome.flips_used, "witness": witness}))
    elif cmd == "train":
        rec = bench.cmd_train(args.ensemble, args.P, args.epochs, args.lr, args.seed)
        _emit(bench.write_json(out / (args.name or f"params_P{args.P}.json"), rec))
    elif cmd == "eval":
        if args.params:
            params = bench.read_json(args.params)
        elif args.zero_angle:
            params = bench.zero_angle_params(args.zero_angle)
        else:
            raise bench.ValidationError("eval needs --params or --zero-angle")
        rec = bench.cmd_eval(args.ensemble, params, args.seed, args.sampling)
        name = args.name or f"eval_k{rec['k']}_n{rec['n']}_P{rec['P']}.json"
        _emit(bench.write_json(out / name, rec))
    elif cmd == "bench-sls":
        cfg = None if args.tune else _sls_config(args)
        rec = bench.cmd_bench_sls(args.ensemble, args.algorithm, cfg, args.tune, args.restarts, args.seed,
                                  args.threads, args.gave_up_threshold, args.max_flips)
        name = args.name or f"sls_{rec['algorithm']}_k{rec['k']}_n{rec['n']}.json"
        _emit(bench.write_json(out / name, rec))
        if rec["aggregates"]["gave_up_flagged"]:
            print(f"warning: {rec['aggregates']['gave_up_fraction']:.1%} of runs gave up", file=sys.stderr)
    elif cmd == "fit":
        rec, rows = bench.cmd_fit(bench.load_records(args.records))
        _emit(bench.write_json(out / "fit.json", rec))
        _emit(bench.write_csv(out / "fit.csv", bench.FIT_COLUMNS, rows))
    elif cmd == "report":
        for path in bench.cmd_report(bench.load_records(args.records), out).values():
            _emit(path)
    return EXIT_OK


def _read(path):
    try:
        return read_dimacs(path)
    except FileNotFoundError:
        raise bench.ValidationError(f"no such file {path}") from None


def _sls_config(args) -> SlsConfig:
    try:
        return SlsConfig(noise=args.noise, max_flips=args.max_flips, w1=args.w1, w2=1.0 - args.w1, seed=args.seed)
    except ValueError as e:
        raise bench.ValidationError(str(e)) from None


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return run(args)
    except RejectionBudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
