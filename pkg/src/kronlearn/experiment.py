"""Batch harness: generate factor graphs and signals, learn, evaluate, aggregate."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .graphrep import (
    ProductKind,
    ProductSpec,
    WeightVector,
    compose_product,
    read_graph_csv,
    write_graph_csv,
)
from .metrics import CSV_HEADER, evaluate, fit_rate
from .solver import SolverConfig, SolverState, ksgl_solve, product_laplacian
from .synth import (
    Dataset,
    ErdosRenyi,
    generate_product,
    make_rng,
    model_from_dict,
    model_to_dict,
    sample_igmrf,
)

log = logging.getLogger(__name__)

METRICS = CSV_HEADER[3:]
FAILED = "failed"


def default_n_grid(r_max: int = 10) -> list[int]:
    return [10 * 2**r for r in range(r_max + 1)]


@dataclass
class ExperimentConfig:
    model1: object = field(default_factory=lambda: ErdosRenyi(0.3))
    model2: object = field(default_factory=lambda: ErdosRenyi(0.3))
    p1: int = 20
    p2: int = 25
    kind: ProductKind = ProductKind.KRONECKER
    n_grid: list = field(default_factory=default_n_grid)
    replicates: int = 50
    base_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: str = "."

    def __post_init__(self):
        if isinstance(self.model1, (dict, str)):
            self.model1 = model_from_dict(self.model1)
        if isinstance(self.model2, (dict, str)):
            self.model2 = model_from_dict(self.model2)
        if isinstance(self.solver, dict):
            self.solver = SolverConfig.from_dict(self.solver)
        self.kind = ProductKind.parse(self.kind)
        # the experiment's product kind is authoritative for its solver
        self.solver = replace(self.solver, kind=self.kind)
        self.n_grid = [int(n) for n in self.n_grid]
        self.out_dir = str(self.out_dir)

    def validate(self) -> None:
        ProductSpec(self.p1, self.p2, self.kind)
        self.model1.validate(self.p1)
        self.model2.validate(self.p2)
        if not self.n_grid:
            raise ValueError("n_grid is empty")
        if any(n < 1 for n in self.n_grid):
            raise ValueError(f"sample counts must be >= 1, got {self.n_grid}")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError(f"n_grid must be strictly increasing, got {self.n_grid}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    @property
    def spec(self) -> ProductSpec:
        return ProductSpec(self.p1, self.p2, self.kind)

    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.replicates)]

    def to_dict(self) -> dict:
        return {
            "model1": model_to_dict(self.model1),
            "model2": model_to_dict(self.model2),
            "p1": self.p1,
            "p2": self.p2,
            "kind": self.kind.value,
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "solver": self.solver.to_dict(),
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def small_preset(**overrides) -> ExperimentConfig:
    """Desk-scale preset: 7 x 6 factors, n up to 2560."""
    base = dict(p1=7, p2=6, n_grid=default_n_grid(8), replicates=10)
    base.update(overrides)
    return ExperimentConfig(**base)


# --------------------------------------------------------------------------
# Single runs
# --------------------------------------------------------------------------


def true_factors(config: ExperimentConfig, seed: int) -> tuple[WeightVector, WeightVector]:
    return generate_product(config.model1, config.model2, config.spec, seed)


def make_dataset(config: ExperimentConfig, w1, w2, seed: int, n: int) -> Dataset:
    L = product_laplacian(w1, w2, config.kind)
    ds = sample_igmrf(L, n, make_rng(seed, "signal", n), config.spec, seed)
    ds.meta = {"model1": model_to_dict(config.model1), "model2": model_to_dict(config.model2)}
    return ds


def run_one(config: ExperimentConfig, seed: int, n: int) -> list:
    """Generate, learn and score one ``(seed, n)`` cell; returns a raw CSV row."""
    try:
        w1, w2 = true_factors(config, seed)
        ds = make_dataset(config, w1, w2, seed, n)
        state = ksgl_solve(ds, config.solver)
        report = evaluate(state.w1, state.w2, w1, w2, config.kind, n=n, seed=seed)
        return report.csv_row()
    except Exception as exc:  # noqa: BLE001 - partial-failure policy: record and continue
        log.warning("run seed=%d n=%d failed: %s", seed, n, exc)
        return [seed, n, config.kind.value] + [FAILED] * len(METRICS)


def _run_star(args):
    return run_one(*args)


def worker_count() -> int:
    raw = os.environ.get("KRONLEARN_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"KRONLEARN_THREADS must be an integer, got {raw!r}") from None


def run_grid(config: ExperimentConfig, workers: int | None = None) -> list[list]:
    """All raw result rows, ordered by ``(n, seed)`` regardless of worker count."""
    config.validate()
    jobs = [(config, seed, n) for n in config.n_grid for seed in config.seeds()]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [_run_star(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, jobs))


# --------------------------------------------------------------------------
# Tables
# --------------------------------------------------------------------------


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def aggregate(rows, n_grid) -> tuple[list[str], list[list]]:
    """Mean and population std (ddof=0) of every metric per ``n``; failed runs skipped."""
    header = ["n", "n_ok", "n_failed"]
    for m in METRICS:
        header += [f"{m}_mean", f"{m}_std"]
    out = []
    for n in n_grid:
        ok = [r for r in rows if r[1] == n and r[3] != FAILED]
        failed = sum(1 for r in rows if r[1] == n and r[3] == FAILED)
        line = [n, len(ok), failed]
        for k in range(len(METRICS)):
            vals = np.array([float(r[3 + k]) for r in ok])
            if vals.size:
                line += [float(vals.mean()), float(vals.std())]
            else:
                line += [float("nan"), float("nan")]
        out.append(line)
    return header, out


def rate_summary(agg_header, agg_rows) -> dict:
    """Log-log slope of each metric's mean against ``n``; ``None`` where undefined."""
    ns = [row[0] for row in agg_rows]
    slopes = {}
    for m in METRICS:
        col = agg_header.index(f"{m}_mean")
        vals = [row[col] for row in agg_rows]
        try:
            slopes[m] = fit_rate(ns, vals)
        except ValueError:
            slopes[m] = None
    return slopes


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


class ManifestExists(FileExistsError):
    pass


def replicate_dir(out_dir, seed: int) -> Path:
    return Path(out_dir) / f"seed_{seed}"


def cmd_generate(config: ExperimentConfig, force: bool = False) -> Path:
    """Write factor graphs, product graph and datasets for every replicate and ``n``."""
    config.validate()
    out = Path(config.out_dir)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not force:
        raise ManifestExists(f"{manifest_path} exists; pass force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    replicates = []
    for seed in config.seeds():
        rdir = replicate_dir(out, seed)
        rdir.mkdir(exist_ok=True)
        w1, w2 = true_factors(config, seed)
        write_graph_csv(w1, rdir / "factor1.csv")
        write_graph_csv(w2, rdir / "factor2.csv")
        write_graph_csv(compose_product(w1, w2, config.kind), rdir / "product.csv")
        files = []
        for n in config.n_grid:
            ds = make_dataset(config, w1, w2, seed, n)
            name = f"data_n{n}.csv"
            ds.to_csv(rdir / name)
            files.append(str((rdir / name).relative_to(out)))
        replicates.append({"seed": seed, "dir": str(rdir.relative_to(out)), "datasets": files})
    manifest = {"config": config.to_dict(), "replicates": replicates}
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def cmd_learn(dataset_path, solver: SolverConfig, out_dir) -> SolverState:
    """Learn from a dataset CSV and write ``state.json`` plus learned graph CSVs."""
    ds = Dataset.from_csv(dataset_path)
    if ds.spec.kind is not solver.kind:
        raise ValueError(f"dataset was generated for a {ds.spec.kind.value} product but the "
                         f"solver is configured for {solver.kind.value}")
    state = ksgl_solve(ds, solver)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "state.json").write_text(state.to_json() + "\n", encoding="utf-8")
    (out / "solver_config.json").write_text(solver.to_json() + "\n", encoding="utf-8")
    write_graph_csv(WeightVector(ds.spec.p1, state.w1), out / "learned_factor1.csv")
    write_graph_csv(WeightVector(ds.spec.p2, state.w2), out / "learned_factor2.csv")
    write_graph_csv(compose_product(state.w1, state.w2, solver.kind), out / "learned_product.csv")
    return state


def cmd_eval(learned_dir, truth_dir, kind, n: int = 0, seed: int = 0):
    learned, truth = Path(learned_dir), Path(truth_dir)
    w1_hat = read_graph_csv(learned / "learned_factor1.csv")
    w2_hat = read_graph_csv(learned / "learned_factor2.csv")
    w1 = read_graph_csv(truth / "factor1.csv")
    w2 = read_graph_csv(truth / "factor2.csv")
    if (w1_hat.p, w2_hat.p) != (w1.p, w2.p):
        raise ValueError(f"learned factor sizes {(w1_hat.p, w2_hat.p)} differ from truth "
                         f"{(w1.p, w2.p)}")
    return evaluate(w1_hat, w2_hat, w1, w2, kind, n=n, seed=seed)


def cmd_experiment(config: ExperimentConfig, workers: int | None = None) -> dict:
    """Run the full grid; writes ``results.csv``, ``aggregate.csv`` and ``rates.json``."""
    rows = run_grid(config, workers)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_to_csv(CSV_HEADER, rows), encoding="utf-8")
    agg_header, agg_rows = aggregate(rows, config.n_grid)
    (out / "aggregate.csv").write_text(rows_to_csv(agg_header, agg_rows), encoding="utf-8")
    slopes = rate_summary(agg_header, agg_rows)
    (out / "rates.json").write_text(json.dumps(slopes, indent=2) + "\n", encoding="utf-8")
    (out / "experiment_config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n",
                                                encoding="utf-8")
    return {"rows": rows, "aggregate": (agg_header, agg_rows), "rates": slopes}
