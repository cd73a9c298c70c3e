"""Experiment orchestration: many seeded search + fine-tune runs and their metrics."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hamiltonians import VqeParams, build_vqe_hamiltonian, build_vqls_system
from .mcts import SearchConfig, reward_vqe, reward_vqls, search
from .toy_detector import generate_event, qubits_for, size_label, table1_sizes
from .vqe import AdamConfig, adam_minimize, optimize_adam, vqe_cost, vqe_gradient
from .vqls import make_problem, solve_vqls, vqls_cost, vqls_gradient

log = logging.getLogger(__name__)

FORMULATIONS = ("VQE", "VQLS")
VQLS_MAX_DIM = 64
SEED_ENV = "TRACKQAS_SEED"
SUMMARY_HEADER = ("formulation", "size", "eff_mean", "eff_std", "fault_mean", "fault_std",
                  "gates_mean", "gates_std", "param_gates_mean", "param_gates_std")


class SizeCapError(ValueError):
    pass


@dataclass
class RunResult:
    formulation: str
    size_label: str
    seed: int
    efficiency: float
    fault_rate: float
    total_gates: int
    parameterized_gates: int
    best_reward: float
    wall_time: float = 0.0
    run_index: int = 0
    event_seed: int = 0
    final_cost: float = float("nan")
    prediction: list[int] = field(default_factory=list)
    circuit: str = ""
    error: str | None = None

    def to_dict(self, with_timing: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if not with_timing:
            d.pop("wall_time")
        return d


@dataclass
class VqlsParams:
    epsilon: float = VqeParams.epsilon
    zeta: float | None = None
    eta: float = 1.0


@dataclass
class ExperimentConfig:
    formulation: str = "VQE"
    n_particles: int = 2
    n_layers: int = 3
    runs: int = 100
    mcts: SearchConfig | None = None
    adam: AdamConfig = field(default_factory=AdamConfig)
    vqe_params: VqeParams = field(default_factory=VqeParams)
    vqls_params: VqlsParams = field(default_factory=VqlsParams)
    output_path: str | None = None
    seed: int = 0
    fixed_event: bool = False
    workers: int = 1

    def __post_init__(self):
        self.formulation = self.formulation.upper()
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}")
        if self.mcts is None:
            self.mcts = SearchConfig(budget=default_budget(qubits_for(self.n_particles, self.n_layers)))

    @property
    def n_segments(self) -> int:
        return self.n_particles ** 2 * (self.n_layers - 1)

    @property
    def size_label(self) -> str:
        return size_label(self.n_particles, self.n_layers)

    def to_dict(self) -> dict:
        return {
            "formulation": self.formulation,
            "n_particles": self.n_particles,
            "n_layers": self.n_layers,
            "runs": self.runs,
            "mcts": self.mcts.to_dict(),
            "adam": dataclasses.asdict(self.adam),
            "vqe_params": dataclasses.asdict(self.vqe_params),
            "vqls_params": dataclasses.asdict(self.vqls_params),
            "output_path": self.output_path,
            "seed": self.seed,
            "fixed_event": self.fixed_event,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if "mcts" in doc:
            doc["mcts"] = SearchConfig.from_dict(doc["mcts"])
        if "adam" in doc:
            doc["adam"] = AdamConfig(**doc["adam"])
        if "vqe_params" in doc:
            doc["vqe_params"] = VqeParams(**doc["vqe_params"])
        if "vqls_params" in doc:
            doc["vqls_params"] = VqlsParams(**doc["vqls_params"])
        return cls(**doc)


def default_budget(n_qubits: int) -> int:
    return 10_000 if n_qubits <= 5 else 100_000


def seed_from_env(seed: int) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else seed


def efficiency(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    n_true = int((truth == 1).sum())
    if n_true == 0:
        raise ValueError("truth has no track segments")
    return int(((pred == 1) & (truth == 1)).sum()) / n_true


def fault_rate(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    n_false = int((truth == 0).sum())
    if n_false == 0:
        raise ValueError("truth has no non-track segments")
    return int(((pred == 1) & (truth == 0)).sum()) / n_false


def run_seed(seed: int, run_index: int) -> int:
    return int(np.random.SeedSequence([seed, run_index]).generate_state(1)[0])


def check_size(cfg: ExperimentConfig) -> None:
    if cfg.formulation == "VQLS" and cfg.n_segments > VQLS_MAX_DIM:
        raise SizeCapError(
            f"VQLS is limited to {VQLS_MAX_DIM}x{VQLS_MAX_DIM} systems; "
            f"{cfg.size_label} requested")


def run_single(cfg: ExperimentConfig, run_index: int) -> RunResult:
    """One independent run: event, encoding, search, fine-tuning, metrics."""
    seed_r = run_seed(cfg.seed, run_index)
    event_seed = run_seed(cfg.seed, 0) if cfg.fixed_event else seed_r
    t0 = time.perf_counter()
    result = RunResult(cfg.formulation, cfg.size_label, seed_r, math.nan, math.nan, 0, 0,
                       math.nan, run_index=run_index, event_seed=event_seed)
    try:
        event = generate_event(cfg.n_particles, cfg.n_layers, event_seed)
        n = qubits_for(cfg.n_particles, cfg.n_layers)
        mcts_cfg = dataclasses.replace(cfg.mcts, seed=seed_r)
        tune_cfg = dataclasses.replace(cfg.adam, max_iters=cfg.mcts.tune_iters)
        if cfg.formulation == "VQE":
            h = build_vqe_hamiltonian(event, cfg.vqe_params)
            cost = lambda c: vqe_cost(c, h)  # noqa: E731
            found = search(lambda c: reward_vqe(c, h), n, mcts_cfg,
                           tuner=lambda c: adam_minimize(
                               c, cost, tune_cfg, lambda cc: vqe_gradient(cc, h)).circuit)
            tuned = optimize_adam(found.best_circuit, h, cfg.adam)
            best_reward = -tuned.final_cost
        else:
            p = cfg.vqls_params
            prob = make_problem(build_vqls_system(event, p.epsilon, p.zeta, p.eta))
            cost = lambda c: vqls_cost(c, prob)  # noqa: E731
            grad = lambda c: vqls_gradient(c, prob)  # noqa: E731
            found = search(lambda c: reward_vqls(c, prob), n, mcts_cfg,
                           tuner=lambda c: adam_minimize(c, cost, tune_cfg, grad).circuit)
            tuned = solve_vqls(prob, found.best_circuit, cfg.adam)
            best_reward = math.exp(-tuned.final_cost)
        pred = tuned.prediction
        result.efficiency = efficiency(pred, event.truth)
        result.fault_rate = fault_rate(pred, event.truth)
        result.total_gates = tuned.circuit.depth
        result.parameterized_gates = tuned.circuit.n_parameters()
        result.best_reward = best_reward
        result.final_cost = tuned.final_cost
        result.prediction = [int(v) for v in pred]
        result.circuit = tuned.circuit.to_text()
    except Exception as exc:  # recorded per run, excluded from aggregates
        log.warning("run %d failed: %s", run_index, exc)
        result.error = f"{type(exc).__name__}: {exc}"
    result.wall_time = time.perf_counter() - t0
    return result


def _run_job(args: tuple[ExperimentConfig, int]) -> RunResult:
    return run_single(*args)


def run_experiment(cfg: ExperimentConfig) -> list[RunResult]:
    check_size(cfg)
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    results.sort(key=lambda r: r.run_index)
    failed = sum(r.error is not None for r in results)
    if failed:
        log.warning("%d of %d runs failed", failed, len(results))
    if cfg.output_path:
        write_results(results, cfg)
    return results


def _mean_std(values: list[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def aggregate(results: list[RunResult]) -> list[dict]:
    """Per (formulation, size) means and sample standard deviations.

    Failed runs are dropped; groups with nothing left are omitted.
    """
    groups: dict[tuple[str, str], list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.formulation, r.size_label), []).append(r)
    rows = []
    for (form, size), rs in groups.items():
        ok = [r for r in rs if r.error is None]
        if not ok:
            log.warning("no successful runs for %s %s; row omitted", form, size)
            continue
        row = {"formulation": form, "size": size, "runs": len(ok), "failed": len(rs) - len(ok)}
        for key, attr in (("eff", "efficiency"), ("fault", "fault_rate"),
                          ("gates", "total_gates"), ("param_gates", "parameterized_gates")):
            row[f"{key}_mean"], row[f"{key}_std"] = _mean_std([float(getattr(r, attr)) for r in ok])
        rows.append(row)
    return rows


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in rows:
        writer.writerow([row[k] if k in ("formulation", "size") else repr(float(row[k]))
                         for k in SUMMARY_HEADER])
    return buf.getvalue()


def result_filename(r: RunResult) -> str:
    return f"{r.formulation.lower()}_{r.size_label}_run{r.run_index:04d}.json"


def write_results(results: list[RunResult], cfg: ExperimentConfig) -> Path:
    """One JSON per run plus ``summary.csv`` and ``config.json``.

    Wall-clock times go to ``timings.csv`` so the result files themselves
    are reproducible byte for byte.
    """
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        (out / result_filename(r)).write_text(json.dumps(r.to_dict(), indent=1, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    (out / "summary.csv").write_text(summary_csv(aggregate(results)))
    with open(out / "timings.csv", "w") as fh:
        fh.write("formulation,size,run_index,wall_time\n")
        for r in results:
            fh.write(f"{r.formulation},{r.size_label},{r.run_index},{r.wall_time:.3f}\n")
    return out


def load_results(path: str | Path) -> list[RunResult]:
    path = Path(path)
    files = sorted(path.glob("*_run*.json")) if path.is_dir() else [path]
    fields = {f.name for f in dataclasses.fields(RunResult)}
    return [RunResult(**{k: v for k, v in json.loads(f.read_text()).items() if k in fields})
            for f in files]


def table2_configs(runs: int, seed: int, output_root: str | None, workers: int = 1,
                   budget: int | None = None, max_depth: int = 50) -> list[ExperimentConfig]:
    """Preset sweep: VQE on every problem size, VQLS up to the 64x64 cap."""
    configs = []
    for form in FORMULATIONS:
        for p, l in table1_sizes():
            if form == "VQLS" and p * p * (l - 1) > VQLS_MAX_DIM:
                continue
            b = budget or default_budget(qubits_for(p, l))
            out = None if output_root is None else str(Path(output_root) / f"{form.lower()}_{size_label(p, l)}")
            configs.append(ExperimentConfig(
                formulation=form, n_particles=p, n_layers=l, runs=runs, seed=seed,
                mcts=SearchConfig(budget=b, max_depth=max_depth), output_path=out, workers=workers))
    return configs
