"""Metrics and the repeated-run experiment harness."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CLASSIFICATION, REGRESSION, Problem
from .data import (DatasetOracle, ExternalOracle, SyntheticOracle, load_csv)
from .engine import STRATEGIES, AcquisitionConfig, EngineConfig, run
from .predictor import MLP, MlpConfig

log = logging.getLogger(__name__)

REPORT_FORMAT = "ideal-report/1"
PROBLEMS = ("quartic-sine", "circle", "circle-constrained", "dataset", "external")


def rmse(truth, pred) -> float:
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.size == 0:
        raise ValueError("rmse of an empty set")
    if truth.shape != pred.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {pred.shape}")
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def accuracy(truth, pred) -> float:
    """Share of rows whose predicted class matches.

    Single-column targets are thresholded at 0.5, wider ones compared by
    argmax.
    """
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape[0] == 0:
        raise ValueError("accuracy of an empty set")
    truth = truth.reshape(truth.shape[0], -1)
    pred = pred.reshape(truth.shape)
    if truth.shape[1] == 1:
        hits = (truth[:, 0] > 0.5) == (pred[:, 0] > 0.5)
    else:
        hits = np.argmax(truth, axis=1) == np.argmax(pred, axis=1)
    return float(np.mean(hits))


@dataclass
class ExperimentConfig:
    problem: str = "quartic-sine"
    strategy: str = "ideal"
    delta: float = 0.0
    omega: float = 0.0
    n_init: int = 4
    n_max: int = 30
    batch: int = 1
    runs: int = 50
    seed: int = 0
    noise: float = 0.0
    pool_size: int = 1000
    hidden: Optional[list] = None
    activation: str = "logistic"
    warm_start: Optional[bool] = None
    max_epochs: int = 3000
    learning_rate: float = 0.01
    l2: float = 1e-2
    input_half_width: float = 2.0
    k_nn: Optional[int] = None
    workers: int = 1
    # dataset problems
    csv: Optional[str] = None
    schema: Optional[dict] = None
    task: str = "regression"
    # external problems
    cmd: Optional[str] = None
    bounds: Optional[dict] = None
    timeout: float = 60.0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.problem == "dataset" and (self.csv is None or self.schema is None):
            raise ValueError("dataset problems need csv and schema")
        if self.problem == "external" and (self.cmd is None or self.bounds is None):
            raise ValueError("external problems need cmd and bounds")
        # fail early on bad engine settings
        EngineConfig(self.n_init, self.n_max, self.batch, self.strategy)
        AcquisitionConfig(self.delta, self.omega)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(kw)
        return ExperimentConfig(**d)

    @property
    def is_classification(self) -> bool:
        if self.problem in ("circle", "circle-constrained"):
            return True
        return self.problem == "dataset" and self.task == "classification"


@dataclass
class Experiment:
    """One run's problem instance: what to query and how to score.

    ``evaluate(model, state)`` returns the metric after a refit.
    """
    problem: Problem
    oracle: object
    evaluate: object
    metric: str
    close: object = None


def _mlp_config(cfg: ExperimentConfig) -> MlpConfig:
    if cfg.is_classification:
        hidden = (10, 10) if cfg.problem != "dataset" else (10, 10, 10)
        warm = True
        output = "logistic"
    else:
        hidden, warm, output = (5, 5), False, "linear"
    if cfg.problem == "dataset" and cfg.task == "regression":
        warm = True
    return MlpConfig(
        hidden=tuple(cfg.hidden) if cfg.hidden else hidden,
        activation=cfg.activation,
        output=output,
        l2_penalty=cfg.l2,
        max_epochs=cfg.max_epochs,
        learning_rate=cfg.learning_rate,
        warm_start=warm if cfg.warm_start is None else cfg.warm_start,
        input_half_width=cfg.input_half_width,
    )


def _load_dataset(cfg: ExperimentConfig):
    schema = cfg.schema
    return load_csv(cfg.csv, schema["target"], schema.get("categorical", ()),
                    schema.get("ignore", ()), schema.get("task", cfg.task))


def build_experiment(cfg: ExperimentConfig, pool_rng, noise_rng, dataset=None) -> Experiment:
    if cfg.problem == "quartic-sine":
        grid = np.linspace(-3.0, 3.0, cfg.pool_size)[:, None]
        oracle = SyntheticOracle("quartic-sine", cfg.noise, noise_rng)
        problem = Problem.from_pool(grid, 1, REGRESSION)
        truth = oracle.truth(problem.pool)
        return Experiment(problem, oracle,
                          lambda model, state: rmse(truth, model.predict(problem.pool)), "rmse")

    if cfg.problem in ("circle", "circle-constrained"):
        pool = pool_rng.uniform(-2.0, 2.0, (cfg.pool_size, 2))
        oracle = SyntheticOracle(cfg.problem)
        problem = Problem.from_pool(pool, 1, CLASSIFICATION)
        truth = oracle.truth(problem.pool)
        keep = np.isfinite(truth[:, 0])
        Xe, Ye = problem.pool[keep], truth[keep]
        return Experiment(problem, oracle,
                          lambda model, state: accuracy(Ye, model.predict(Xe)), "accuracy")

    if cfg.problem == "dataset":
        ds = dataset if dataset is not None else _load_dataset(cfg)
        kind = CLASSIFICATION if ds.task == "classification" else REGRESSION
        problem = Problem.from_pool(ds.X, ds.n_targets, kind)
        labels = ds.Y[problem.pool_origin]
        oracle = DatasetOracle(problem.pool, labels)
        score = accuracy if kind == CLASSIFICATION else rmse
        return Experiment(problem, oracle,
                          lambda model, state: score(labels, model.predict(problem.pool)),
                          "accuracy" if kind == CLASSIFICATION else "rmse")

    b = cfg.bounds
    n_targets = int(b.get("n_targets", 1))
    problem = Problem.from_box(b["x_min"], b["x_max"], n_targets, REGRESSION)
    oracle = ExternalOracle(cfg.cmd, timeout=cfg.timeout)

    def in_sample(model, state):
        X, Y = state.labeled()
        return rmse(Y, model.predict(X))

    return Experiment(problem, oracle, in_sample, "rmse", close=oracle.close)


def run_seeds(seed: int, run_index: int):
    """Independent generators for (engine, predictor, noise, pool) of one run.

    They depend on the master seed and run index only, so every strategy
    sees the same pool, initial design and first network initialization.
    """
    ss = np.random.SeedSequence([int(seed), int(run_index)])
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def run_single(cfg: ExperimentConfig, run_index: int, dataset=None) -> dict:
    engine_rng, model_rng, noise_rng, pool_rng = run_seeds(cfg.seed, run_index)
    exp = build_experiment(cfg, pool_rng, noise_rng, dataset)
    model = MLP(_mlp_config(cfg), model_rng)
    engine = EngineConfig(cfg.n_init, cfg.n_max, cfg.batch, cfg.strategy, k_nn=cfg.k_nn)
    acq = AcquisitionConfig(cfg.delta, cfg.omega)
    try:
        result = run(exp.problem, exp.oracle, model, engine, acq, engine_rng, exp.evaluate)
    finally:
        if exp.close is not None:
            exp.close()
    st = result.state
    post = st.query_count - result.n_init_total
    post_infeasible = sum(1 for r in result.trace.records
                          if r.phase == "select" and not r.feasible)
    return {
        "run": run_index,
        "seed": [cfg.seed, run_index],
        "success": result.success,
        "queries": st.query_count,
        "n_init_total": result.n_init_total,
        "infeasible": st.n_infeasible,
        "post_init_queries": post if result.success else 0,
        "post_init_infeasible": post_infeasible,
        "curve": [[int(q), float(v)] for q, v in result.trace.curve],
        "metric": exp.metric,
    }


def median_curve(curves) -> list:
    """Median metric per query count over the runs that have that count."""
    by_count: dict = {}
    for curve in curves:
        for q, v in curve:
            by_count.setdefault(int(q), []).append(float(v))
    return [[q, float(np.median(by_count[q]))] for q in sorted(by_count)]


@dataclass
class ExperimentReport:
    config: dict
    strategy: str
    metric: str
    runs: list = field(default_factory=list)

    @property
    def successful(self) -> list:
        return [r for r in self.runs if r["success"]]

    @property
    def init_failures(self) -> int:
        return sum(1 for r in self.runs if not r["success"])

    @property
    def median_curve(self) -> list:
        return median_curve(r["curve"] for r in self.successful)

    def finals(self) -> np.ndarray:
        return np.array([r["curve"][-1][1] for r in self.successful if r["curve"]])

    def initials(self) -> np.ndarray:
        return np.array([r["curve"][0][1] for r in self.successful if r["curve"]])

    @property
    def median_final(self) -> Optional[float]:
        f = self.finals()
        return float(np.median(f)) if f.size else None

    @property
    def median_initial(self) -> Optional[float]:
        f = self.initials()
        return float(np.median(f)) if f.size else None

    def post_init_infeasible_fractions(self) -> np.ndarray:
        return np.array([r["post_init_infeasible"] / r["post_init_queries"]
                         for r in self.successful if r["post_init_queries"]])

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "config": self.config,
            "strategy": self.strategy,
            "metric": self.metric,
            "runs": self.runs,
            "init_failures": self.init_failures,
            "median_curve": self.median_curve,
            "median_final": self.median_final,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError("not an experiment report")
        return cls(d["config"], d["strategy"], d["metric"], d["runs"])

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, out_dir, stem: Optional[str] = None) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or f"{self.config['problem']}-{self.strategy}"
        path = out / f"{stem}.json"
        path.write_text(self.dumps(), encoding="utf-8")
        with open(out / f"{stem}_curves.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["strategy", "run", "queries", self.metric])
            for r in self.runs:
                for q, v in r["curve"]:
                    w.writerow([self.strategy, r["run"], q, repr(v)])
        with open(out / f"{stem}_median.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["queries", f"median_{self.metric}"])
            for q, v in self.median_curve:
                w.writerow([q, repr(v)])
        return path


def _task(args):
    cfg, run_index = args
    return run_single(cfg, run_index)


def run_benchmark(cfg: ExperimentConfig, runs: Optional[int] = None,
                  seed: Optional[int] = None, workers: Optional[int] = None) -> ExperimentReport:
    """Run ``runs`` seeded sessions of one strategy and collect their curves."""
    updates = {}
    if runs is not None:
        updates["runs"] = runs
    if seed is not None:
        updates["seed"] = seed
    if updates:
        cfg = cfg.replace(**updates)
    workers = cfg.workers if workers is None else workers
    tasks = [(cfg, i) for i in range(cfg.runs)]
    dataset = _load_dataset(cfg) if cfg.problem == "dataset" else None
    if workers > 1 and cfg.problem != "external":
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [run_single(c, i, dataset) for c, i in tasks]
    results.sort(key=lambda r: r["run"])
    metric = results[0]["metric"]
    echo = cfg.to_dict()
    echo.pop("workers")
    if cfg.problem == "dataset" and dataset is not None and dataset.labels:
        echo["class_order"] = list(dataset.labels)
    for r in results:
        r.pop("metric")
    return ExperimentReport(echo, cfg.strategy, metric, results)


def compare(cfg: ExperimentConfig, strategies=STRATEGIES, **kw) -> dict:
    return {s: run_benchmark(cfg.replace(strategy=s), **kw) for s in strategies}
