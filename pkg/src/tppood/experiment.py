"""Detectability sweeps: scenario x delta x seed cells, each scored with every statistic.

A sweep is described by a flat config file::

    [experiment]
    mode = gof            ; gof (reference = model samples) or ood (reference = training data)
    model = true          ; gof: true scenario model; ood: poisson | hawkes, fitted on training data
    statistics = all
    seeds = 0-9
    n_train = 1000
    n_test_id = 1000
    n_test_ood = 1000
    t_max = 100

    [scenario rate]
    deltas = 0, 0.5, 1

Each finished cell is appended to ``cells.jsonl`` in the output directory, so
an interrupted sweep picks up where it stopped.
"""

from __future__ import annotations

import configparser
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Dataset
from .detect import (ExperimentReport, ReportRow, content_hash, run_gof_many,
                     run_ood_many)
from .errors import InvalidDelta, ValidationError
from .fit import FitConfig, fit_hawkes, fit_poisson
from .model import ConstantPoisson, ExpHawkes, serialize
from .rng import RngHandle
from .simulate import (DEFAULT_T_MAX, SERVER_INFLUENCE, SERVER_MU, Scenario,
                       ScenarioSpec, id_sampler, ood_sampler, sample_dataset)
from .stats import StatisticKind

logger = logging.getLogger(__name__)

LEDGER_NAME = "cells.jsonl"
REPORT_NAME = "report.csv"
SUMMARY_NAME = "summary.csv"
PLOT_DATA_NAME = "plot_data.csv"

# stream roles under a (seed, scenario) root
ROLE_TEST_ID, ROLE_TEST_OOD, ROLE_TRAIN = 0, 1, 2

_SCENARIO_CODE = {kind: i for i, kind in enumerate(Scenario)}


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class ScenarioBlock:
    kind: Scenario
    deltas: Tuple[float, ...]


@dataclass
class ExperimentConfig:
    scenarios: List[ScenarioBlock]
    mode: str = "gof"
    model: str = "true"
    statistics: Tuple[StatisticKind, ...] = tuple(StatisticKind)
    seeds: Tuple[int, ...] = tuple(range(10))
    n_train: int = 1000
    n_test_id: int = 1000
    n_test_ood: int = 1000
    t_max: float = DEFAULT_T_MAX
    workers: int = 1
    plots: bool = True
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.mode not in ("gof", "ood"):
            raise ConfigError(f"mode must be gof or ood, got {self.mode!r}")
        allowed = ("true",) if self.mode == "gof" else ("poisson", "hawkes")
        if self.mode == "gof" and self.model not in allowed:
            raise ConfigError("gof mode tests against the true scenario model (model = true)")
        if self.mode == "ood" and self.model not in allowed:
            raise ConfigError(f"ood mode fits poisson or hawkes, got {self.model!r}")
        for name in ("n_train", "n_test_id", "n_test_ood", "workers"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not self.scenarios:
            raise ConfigError("at least one scenario block is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.statistics:
            raise ConfigError("at least one statistic is required")
        for block in self.scenarios:
            if not block.deltas:
                raise ConfigError(f"scenario {block.kind.value} has an empty delta grid")
            for d in block.deltas:
                ScenarioSpec(block.kind, d, self.t_max)  # raises InvalidDelta

    def cells(self) -> List[Tuple[Scenario, float, int]]:
        return [(b.kind, d, s) for b in self.scenarios for d in b.deltas for s in self.seeds]

    def to_record(self) -> dict:
        return {
            "mode": self.mode, "model": self.model,
            "statistics": [k.value for k in self.statistics], "seeds": list(self.seeds),
            "n_train": self.n_train, "n_test_id": self.n_test_id, "n_test_ood": self.n_test_ood,
            "t_max": self.t_max,
            "scenarios": [[b.kind.value, list(b.deltas)] for b in self.scenarios],
            "fit": vars(self.fit),
        }

    def digest(self) -> str:
        return content_hash(json.dumps(self.to_record(), sort_keys=True))


def parse_seeds(text: str) -> Tuple[int, ...]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    sec = parser["experiment"]
    known = {"mode", "model", "statistics", "seeds", "n_train", "n_test_id", "n_test_ood",
             "t_max", "workers", "plots", "max_iterations", "step_size", "convergence_tol",
             "fit_seed", "fit_decay"}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown keys in [experiment]: {sorted(unknown)}")
    scenarios = []
    for name in parser.sections():
        if not name.startswith("scenario"):
            if name != "experiment":
                raise ConfigError(f"unknown section [{name}]")
            continue
        block = parser[name]
        kind = block.get("kind", name[len("scenario"):].strip())
        try:
            scenarios.append(ScenarioBlock(Scenario.parse(kind), _parse_floats(block.get("deltas", "0"))))
        except ValueError as exc:
            raise ConfigError(f"[{name}]: {exc}") from exc
    try:
        fit = FitConfig(max_iterations=sec.getint("max_iterations", 2000),
                        step_size=sec.getfloat("step_size", 0.05),
                        convergence_tol=sec.getfloat("convergence_tol", 1e-8),
                        seed=sec.getint("fit_seed", 0),
                        fit_decay=sec.getboolean("fit_decay", True))
        return ExperimentConfig(
            scenarios=scenarios,
            mode=sec.get("mode", "gof").strip().lower(),
            model=sec.get("model", "true").strip().lower(),
            statistics=tuple(StatisticKind.parse_list(sec.get("statistics", "all"))),
            seeds=parse_seeds(sec.get("seeds", "0-9")),
            n_train=sec.getint("n_train", 1000),
            n_test_id=sec.getint("n_test_id", 1000),
            n_test_ood=sec.getint("n_test_ood", 1000),
            t_max=sec.getfloat("t_max", DEFAULT_T_MAX),
            workers=sec.getint("workers", 1),
            plots=sec.getboolean("plots", True),
            fit=fit,
        )
    except (ConfigError, InvalidDelta):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --- one cell ------------------------------------------------------------------


def true_model(kind: Scenario):
    """The exact in-distribution model of a scenario, or None when it has no closed form."""
    if kind.is_spp_null:
        return ConstantPoisson((1.0,))
    if kind in (Scenario.SERVER_STOP, Scenario.SERVER_OVERLOAD):
        return ExpHawkes(tuple(SERVER_MU), SERVER_INFLUENCE, 1.0)
    return None


def scenario_root(kind: Scenario, seed: int) -> RngHandle:
    return RngHandle(seed, (_SCENARIO_CODE[kind],))


def delta_code(delta: float) -> int:
    return int(round(delta * 1e9))


def training_data(config: ExperimentConfig, kind: Scenario, seed: int) -> Dataset:
    spec = ScenarioSpec(kind, 0.0, config.t_max)
    return sample_dataset(id_sampler(spec), config.n_train, scenario_root(kind, seed).spawn(ROLE_TRAIN),
                          kind.num_marks)


def cell_model(config: ExperimentConfig, kind: Scenario, seed: int, d_train: Dataset = None):
    if config.mode == "gof":
        model = true_model(kind)
        if model is not None:
            return model
        # no closed-form ID model (latency): test against a Poisson fitted on ID data
        return fit_poisson(d_train if d_train is not None else training_data(config, kind, seed))
    d_train = d_train if d_train is not None else training_data(config, kind, seed)
    if config.model == "poisson":
        return fit_poisson(d_train)
    return fit_hawkes(d_train, config.fit)


def run_cell(config: ExperimentConfig, kind: Scenario, delta: float, seed: int,
             model=None) -> List[ReportRow]:
    """AUC of every configured statistic for one (scenario, delta, seed) cell.

    The ID test set and the training / model-sample set depend only on
    (scenario, seed), so all deltas of a scenario share them.
    """
    spec = ScenarioSpec(kind, delta, config.t_max)
    root = scenario_root(kind, seed)
    k = kind.num_marks
    d_id = sample_dataset(id_sampler(spec), config.n_test_id, root.spawn(ROLE_TEST_ID), k)
    d_ood = sample_dataset(ood_sampler(spec), config.n_test_ood,
                           root.spawn(ROLE_TEST_OOD, delta_code(delta)), k)
    d_train = None
    if config.mode == "ood":
        d_train = training_data(config, kind, seed)
    if model is None:
        model = cell_model(config, kind, seed, d_train)
    if config.mode == "gof":
        ref_rng = root.spawn(ROLE_TRAIN, 1)
        d_ref = Dataset([model.sample(config.t_max, ref_rng.spawn(i))
                         for i in range(config.n_train)], k)
        results = run_gof_many(config.statistics, model, d_ref, d_id, d_ood)
    else:
        results = run_ood_many(config.statistics, model, d_train, d_id, d_ood)
    return [ReportRow(kind.value, float(delta), stat.value, results[stat].auc,
                      config.n_test_id, config.n_test_ood, int(seed))
            for stat in config.statistics]


# --- sweep ---------------------------------------------------------------------


def _cell_key(kind, delta, seed) -> str:
    return f"{kind.value}|{delta!r}|{seed}"


def _read_ledger(path, digest) -> Dict[str, List[ReportRow]]:
    done = {}
    if not os.path.exists(path):
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                # a partially written last line from an interrupted run
                continue
            if rec.get("config") != digest:
                continue
            done[rec["cell"]] = [ReportRow(*r) for r in rec["rows"]]
    return done


def _append_ledger(path, digest, key, rows) -> None:
    rec = {"config": digest, "cell": key,
           "rows": [[r.scenario, r.delta, r.statistic, r.auc, r.n_id, r.n_ood, r.seed]
                    for r in rows]}
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def _run_scenario_seed(args):
    config, kind, seed, deltas = args
    model = cell_model(config, kind, seed) if config.mode == "ood" or true_model(kind) is None else None
    return [(delta, run_cell(config, kind, delta, seed, model)) for delta in deltas]


def run_experiment(config: ExperimentConfig, out_dir, max_cells: Optional[int] = None,
                   progress=None) -> ExperimentReport:
    """Run (or resume) a sweep and write report, summary, plot data and figures to ``out_dir``.

    ``max_cells`` stops after that many newly computed cells, leaving the sweep
    resumable; the report files are only written once every cell is done.
    """
    os.makedirs(out_dir, exist_ok=True)
    digest = config.digest()
    ledger = os.path.join(out_dir, LEDGER_NAME)
    done = _read_ledger(ledger, digest)

    # group pending cells by (scenario, seed) so a fitted model is reused across deltas
    jobs = []
    for block in config.scenarios:
        for seed in config.seeds:
            pending = [d for d in block.deltas if _cell_key(block.kind, d, seed) not in done]
            if pending:
                jobs.append((config, block.kind, seed, pending))

    computed = 0
    budget_left = lambda: max_cells is None or computed < max_cells

    def record(results, kind, seed):
        nonlocal computed
        for delta, rows in results:
            if not budget_left():
                return
            key = _cell_key(kind, delta, seed)
            _append_ledger(ledger, digest, key, rows)
            done[key] = rows
            computed += 1
            if progress is not None:
                progress(key)

    if config.workers > 1 and max_cells is None:
        with ProcessPoolExecutor(config.workers) as pool:
            for job, results in zip(jobs, pool.map(_run_scenario_seed, jobs)):
                record(results, job[1], job[2])
    else:
        for job in jobs:
            if not budget_left():
                break
            cfg, kind, seed, pending = job
            if max_cells is not None:
                pending = pending[:max_cells - computed]
            record(_run_scenario_seed((cfg, kind, seed, pending)), kind, seed)

    report = ExperimentReport(metadata={"config_hash": digest})
    missing = 0
    for kind, delta, seed in config.cells():
        rows = done.get(_cell_key(kind, delta, seed))
        if rows is None:
            missing += 1
            continue
        for row in rows:
            report.add(row)
    if missing:
        logger.info("sweep incomplete: %d cells pending", missing)
        return report

    report.write_csv(os.path.join(out_dir, REPORT_NAME))
    summary = summarize(report)
    write_summary(summary, os.path.join(out_dir, SUMMARY_NAME))
    write_plot_data(summary, [k.value for k in config.statistics],
                    os.path.join(out_dir, PLOT_DATA_NAME))
    if config.plots:
        from .plotting import plot_sweep
        plot_sweep(summary, [k.value for k in config.statistics], out_dir)
    return report


def is_complete(config: ExperimentConfig, out_dir) -> bool:
    done = _read_ledger(os.path.join(out_dir, LEDGER_NAME), config.digest())
    return all(_cell_key(k, d, s) in done for k, d, s in config.cells())


# --- aggregation ---------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    delta: float
    statistic: str
    mean_auc: float
    se_auc: float
    n_seeds: int


def summarize(report: ExperimentReport) -> List[SummaryRow]:
    """Mean and standard error of the AUC over seeds, in first-appearance order."""
    groups: Dict[tuple, list] = {}
    for row in report.rows:
        groups.setdefault((row.scenario, row.delta, row.statistic), []).append(row.auc)
    out = []
    for (scenario, delta, stat), aucs in groups.items():
        a = np.asarray(aucs)
        se = float(a.std(ddof=1) / np.sqrt(len(a))) if len(a) > 1 else 0.0
        out.append(SummaryRow(scenario, delta, stat, float(a.mean()), se, len(a)))
    return out


def summary_lookup(summary: Sequence[SummaryRow]) -> Dict[tuple, SummaryRow]:
    return {(r.scenario, r.delta, r.statistic): r for r in summary}


def write_summary(summary: Sequence[SummaryRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("scenario,delta,statistic,mean_auc,se_auc,n_seeds\n")
        for r in summary:
            fh.write(f"{r.scenario},{r.delta!r},{r.statistic},{r.mean_auc!r},{r.se_auc!r},{r.n_seeds}\n")


def write_plot_data(summary: Sequence[SummaryRow], statistics: Sequence[str], path) -> None:
    """Wide table: one row per (scenario, delta), one mean-AUC column per statistic."""
    table = summary_lookup(summary)
    keys = []
    for r in summary:
        if (r.scenario, r.delta) not in keys:
            keys.append((r.scenario, r.delta))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["scenario", "delta", *statistics]) + "\n")
        for scenario, delta in keys:
            vals = [repr(table[(scenario, delta, s)].mean_auc) for s in statistics]
            fh.write(",".join([scenario, repr(delta), *vals]) + "\n")


def model_record_hash(model) -> str:
    return content_hash(serialize(model))
