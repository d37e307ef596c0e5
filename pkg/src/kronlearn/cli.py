"""Command line entry point: ``kronlearn {generate,learn,eval,experiment}``.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment as exp
from .exceptions import DisconnectedProduct, LineSearchFailure
from .metrics import CSV_HEADER
from .solver import SolverConfig

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("kronlearn")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _json_arg(text):
    """A JSON object, a path to one, or a bare graph-model name."""
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_experiment_args(p):
    p.add_argument("--config", type=Path, help="ExperimentConfig JSON file")
    p.add_argument("--small", action="store_true",
                   help="desk preset: p1=7, p2=6, n <= 2560, 10 replicates")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--model1", type=_json_arg, help='e.g. \'{"name": "grid", "rows": 4, "cols": 5}\'')
    p.add_argument("--model2", type=_json_arg)
    p.add_argument("--p1", type=int)
    p.add_argument("--p2", type=int)
    p.add_argument("--kind", choices=["kronecker", "strong"])
    p.add_argument("--n-grid", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated sample counts")
    p.add_argument("--replicates", type=int)
    p.add_argument("--base-seed", type=int)
    _add_solver_overrides(p)


def _add_solver_overrides(p):
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--eta0", type=float)
    p.add_argument("--tol-inner", type=float)
    p.add_argument("--tol-outer", type=float)
    p.add_argument("--max-inner", type=int)
    p.add_argument("--max-outer", type=int)


def _solver_overrides(args) -> dict:
    names = ("alpha1", "alpha2", "eta0", "tol_inner", "tol_outer", "max_inner", "max_outer")
    return {k: getattr(args, k) for k in names if getattr(args, k, None) is not None}


def build_experiment_config(args) -> exp.ExperimentConfig:
    """File values first, then the ``--small`` preset, then explicit flags."""
    if args.config is not None:
        d = json.loads(args.config.read_text(encoding="utf-8"))
    else:
        d = {}
    if args.small:
        d = {**exp.small_preset().to_dict(), **{k: v for k, v in d.items() if k != "out_dir"}}
        d["p1"], d["p2"] = 7, 6
        d["n_grid"] = [n for n in d.get("n_grid", exp.default_n_grid(8)) if n <= 2560]
    for flag in ("model1", "model2", "p1", "p2", "kind", "n_grid", "replicates", "base_seed"):
        value = getattr(args, flag)
        if value is not None:
            d[flag] = value
    if args.out_dir is not None:
        d["out_dir"] = str(args.out_dir)
    solver = dict(d.get("solver", {}))
    solver.update(_solver_overrides(args))
    d["solver"] = solver
    config = exp.ExperimentConfig.from_dict(d)
    config.validate()
    return config


def _cmd_generate(args) -> int:
    config = build_experiment_config(args)
    path = exp.cmd_generate(config, force=args.force)
    print(path)
    return EXIT_OK


def _cmd_learn(args) -> int:
    d = json.loads(args.config.read_text(encoding="utf-8")) if args.config else {}
    if "solver" in d:
        d = d["solver"]
    if args.kind is not None:
        d["kind"] = args.kind
    d.update(_solver_overrides(args))
    if "kind" not in d:
        sidecar = json.loads(args.dataset.with_suffix(".json").read_text(encoding="utf-8"))
        d["kind"] = sidecar.get("kind", "kronecker")
    solver = SolverConfig.from_dict(d)
    out_dir = args.out_dir or args.dataset.parent / f"learned_{args.dataset.stem}"
    state = exp.cmd_learn(args.dataset, solver, out_dir)
    print(json.dumps({"out_dir": str(out_dir), "converged": state.converged,
                      "outer_sweeps": state.outer_sweeps,
                      "objective": state.objective_trace[-1]}))
    return EXIT_OK


def _cmd_eval(args) -> int:
    report = exp.cmd_eval(args.learned, args.truth, args.kind, n=args.n, seed=args.seed)
    text = exp.rows_to_csv(CSV_HEADER, [report.csv_row()])
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = build_experiment_config(args)
    result = exp.cmd_experiment(config, workers=args.workers)
    n_failed = sum(1 for r in result["rows"] if r[3] == exp.FAILED)
    print(json.dumps({"out_dir": config.out_dir, "runs": len(result["rows"]),
                      "failed": n_failed, "rates": result["rates"]}, indent=2))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kronlearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write factor graphs, product graph and datasets")
    _add_experiment_args(p)
    p.add_argument("--force", action="store_true", help="overwrite an existing manifest")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("learn", help="learn factor graphs from a dataset CSV")
    p.add_argument("dataset", type=Path)
    p.add_argument("--config", type=Path, help="SolverConfig (or ExperimentConfig) JSON")
    p.add_argument("--kind", choices=["kronecker", "strong"])
    p.add_argument("--out-dir", type=Path)
    _add_solver_overrides(p)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("eval", help="score learned graphs against ground truth")
    p.add_argument("--learned", type=Path, required=True, help="directory written by learn")
    p.add_argument("--truth", type=Path, required=True, help="replicate directory from generate")
    p.add_argument("--kind", choices=["kronecker", "strong"], default="kronecker")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="sweep sample sizes and replicates")
    _add_experiment_args(p)
    p.add_argument("--workers", type=int, help="parallel runs (default: $KRONLEARN_THREADS or 1)")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LineSearchFailure as exc:
        sweep = f" (outer sweep {exc.sweep})" if exc.sweep is not None else ""
        print(f"solver failure{sweep}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DisconnectedProduct as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
