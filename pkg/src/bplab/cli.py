"""Command-line entry point: ``bplab <subcommand> [--seed N] [--primes 2,3] ...``.

Exit codes: 0 every asserted inequality held, 1 an assertion failed,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .expanders import GraphError, graph_from_edge_list, graph_from_json
from .finite import GenerationError
from .linalg import parse_p
from .mazur import ModulusOfContinuity
from .pipeline import load_decomposition


class UsageError(Exception):
    pass


def _primes(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad prime list {text!r}")


def _p(text: str) -> float:
    try:
        return parse_p(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--primes", type=_primes, default=(2, 3))
    common.add_argument("--p", type=_p, default=2.0)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="bplab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plane", parents=[common], help="dump a finite projective plane")
    sp.add_argument("--l", type=int, default=2)

    sp = sub.add_parser("group", parents=[common], help="enumerate SL(3,F_l) and its pair orbits")
    sp.add_argument("--l", type=int, default=2)
    sp.add_argument("--dump", action="store_true", help="include every group element")

    sp = sub.add_parser("spectral", parents=[common], help="spectrum and Cheeger data of a graph")
    sp.add_argument("--l", type=int, default=2, help="Cayley graph of SL(3,F_l)")
    sp.add_argument("--graph", default=None, help="graph file (.json or edge list)")

    sp = sub.add_parser("mazur", parents=[common], help="Mazur map inequality and modulus suites")
    sp.add_argument("--dims", type=int, nargs=2, default=(2, 16), metavar=("MIN", "MAX"))
    sp.add_argument("--modulus-samples", type=int, default=4000)

    sub.add_parser("lemma21", parents=[common], help="column-norm inequalities on random pairs")
    sub.add_parser("remark22", parents=[common], help="search the l_2 column-norm bound")
    sub.add_parser("coarea", parents=[common], help="co-area inequality on small graphs and Cayley(SL3F2)")

    sp = sub.add_parser("concentration", parents=[common], help="concentration inequalities on Cayley(SL3F2)")
    sp.add_argument("--cloud", choices=("mixed", "orbit", "constant", "random"), default="mixed")
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--modulus-samples", type=int, default=4000)

    sub.add_parser("invariant", parents=[common], help="orbit averages and Kazhdan constants")

    sp = sub.add_parser("pipeline", parents=[common], help="rank lower bound for an approximate diagonal")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--input", default=None, help="tensor decomposition JSON file")
    src.add_argument("--builtin", choices=("exact", "rank1", "truncated", "perturbed", "sweep"), default="exact")
    sp.add_argument("--modulus-samples", type=int, default=4000)

    sp = sub.add_parser("suite", parents=[common], help="run every experiment")
    sp.add_argument("--modulus-samples", type=int, default=4000)
    return parser


DEFAULT_TRIALS = {"lemma21": 1000, "remark22": 1000, "mazur": 1000, "coarea": 500,
                  "concentration": 500, "invariant": 100, "suite": 1000}


def _config(args) -> ex.RunConfig:
    trials = args.trials if args.trials is not None else DEFAULT_TRIALS.get(args.command, 100)
    return ex.RunConfig(
        seed=args.seed,
        primes=args.primes,
        p=args.p,
        trials=trials,
        dims=tuple(getattr(args, "dims", (2, 16))),
        modulus_samples=getattr(args, "modulus_samples", 4000),
        output=args.out,
        fmt=args.format,
    )


def _load_graph(path: str):
    text = Path(path).read_text()
    if path.endswith(".json"):
        try:
            return graph_from_json(json.loads(text))
        except json.JSONDecodeError as err:
            raise GraphError(f"{path}: not valid JSON ({err})")
    return graph_from_edge_list(text)


def _csv_for(command: str, results: dict, extra=None) -> str:
    if command == "pipeline" and extra is not None:
        return extra.summary_csv()
    if command == "spectral":
        return "index,eigenvalue\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(results["eigenvalues"]))
    if command == "mazur":
        fm = results["forward_modulus"]
        mod = ModulusOfContinuity(fm["map"], fm["direction"], fm["domain"], np.array(fm["grid"]),
                                  np.array(fm["envelope"]), fm["samples"])
        return mod.to_csv()
    raise UsageError(f"csv output is not available for '{command}'")


def run(args) -> tuple:
    cfg = _config(args)
    rng = np.random.default_rng(cfg.seed)
    cmd = args.command
    extra = None
    if cmd == "plane":
        results, ok = ex.plane_experiment(args.l, cfg)
    elif cmd == "group":
        results, ok = ex.group_experiment(args.l, cfg, dump=args.dump)
    elif cmd == "spectral":
        graph = _load_graph(args.graph) if args.graph else None
        results, ok = ex.spectral_experiment(cfg, graph=graph, l=args.l)
    elif cmd == "mazur":
        results, ok = ex.mazur_experiment(cfg, rng)
    elif cmd == "lemma21":
        results, ok = ex.column_norm_experiment(cfg, rng)
    elif cmd == "remark22":
        results, ok = ex.l2_column_experiment(cfg, rng)
    elif cmd == "coarea":
        results, ok = ex.coarea_experiment(cfg, rng)
    elif cmd == "concentration":
        results, ok = ex.concentration_experiment(cfg, rng, cloud=args.cloud, scale=args.scale)
    elif cmd == "invariant":
        results, ok = ex.invariant_experiment(cfg, rng)
    elif cmd == "pipeline":
        if args.builtin == "sweep" and not args.input:
            rows, ok = ex.candidate_sweep(cfg, rng)
            results = {"sweep": rows}
        else:
            t = load_decomposition(args.input) if args.input else ex.builtin_decomposition(args.builtin, cfg, rng)
            results, ok, extra = ex.pipeline_experiment(t, cfg)
    elif cmd == "suite":
        results, ok = ex.suite(cfg)
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(cmd)
    return cfg, results, ok, extra


def render(cfg, command, results, ok, extra=None) -> str:
    if cfg.fmt == "csv":
        return _csv_for(command, ex.jsonable(results), extra)
    report = ex.jsonable(ex.envelope(command, cfg, results, ok))
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        cfg, results, ok, extra = run(args)
        text = render(cfg, args.command, results, ok, extra)
    except (UsageError, ValueError, GraphError, GenerationError, OSError) as err:
        print(f"bplab {args.command}: error: {err}", file=sys.stderr)
        return 2
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
