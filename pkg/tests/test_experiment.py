import csv
import os

import pytest

from tppood import experiment as exp
from tppood.cli import BUNDLED_CONFIGS, bundled_config_text
from tppood.errors import InvalidDelta
from tppood.simulate import Scenario
from tppood.stats import StatisticKind

SMALL = """
[experiment]
mode = gof
statistics = 3s, ks-arrival, loglik
seeds = 0-1
n_train = 60
n_test_id = 50
n_test_ood = 40
t_max = 30

[scenario rate]
deltas = 0, 1

[scenario hawkes]
deltas = 0.5
"""

SMALL_OOD = """
[experiment]
mode = ood
model = hawkes
statistics = 3s
seeds = 3
n_train = 40
n_test_id = 30
n_test_ood = 30
t_max = 50
max_iterations = 40
plots = no

[scenario server-stop]
deltas = 0, 1
"""


def test_parse_config():
    cfg = exp.parse_config(SMALL)
    assert cfg.mode == "gof" and cfg.model == "true"
    assert cfg.statistics == (StatisticKind.THREE_S, StatisticKind.KS_ARRIVAL, StatisticKind.LOG_LIKELIHOOD)
    assert cfg.seeds == (0, 1)
    assert [(b.kind, b.deltas) for b in cfg.scenarios] == [(Scenario.RATE, (0.0, 1.0)),
                                                           (Scenario.HAWKES, (0.5,))]
    assert len(cfg.cells()) == 6
    assert cfg.digest() == exp.parse_config(SMALL).digest()
    assert cfg.digest() != exp.parse_config(SMALL.replace("seeds = 0-1", "seeds = 0,1,2")).digest()


def test_parse_seeds():
    assert exp.parse_seeds("0-3") == (0, 1, 2, 3)
    assert exp.parse_seeds("5, 7,9-10") == (5, 7, 9, 10)


def test_scenario_kind_key_overrides_section_name():
    text = "[experiment]\n[scenario first]\nkind = stopping\ndeltas = 0.2\n"
    assert exp.parse_config(text).scenarios[0].kind is Scenario.STOPPING


@pytest.mark.parametrize("text, error", [
    ("[scenario rate]\ndeltas = 0\n", exp.ConfigError),
    ("[experiment]\n", exp.ConfigError),
    ("[experiment]\nbogus = 1\n[scenario rate]\n", exp.ConfigError),
    ("[experiment]\nmode = gof\nmodel = hawkes\n[scenario rate]\n", exp.ConfigError),
    ("[experiment]\nmode = ood\nmodel = true\n[scenario rate]\n", exp.ConfigError),
    ("[experiment]\nn_train = 0\n[scenario rate]\n", exp.ConfigError),
    ("[experiment]\nstatistics = stein\n[scenario rate]\n", exp.ConfigError),
    ("[experiment]\n[scenario nonsense]\n", exp.ConfigError),
    ("[experiment]\n[scenario rate]\ndeltas = 1.5\n", InvalidDelta),
    ("[experiment]\n[scenario renewal]\ndeltas = 1\n", InvalidDelta),
    ("[experiment]\n[other]\n", exp.ConfigError),
    ("not a config", exp.ConfigError),
])
def test_config_errors(text, error):
    with pytest.raises(error):
        exp.parse_config(text)


@pytest.mark.parametrize("name", BUNDLED_CONFIGS)
def test_bundled_configs_parse(name):
    cfg = exp.parse_config(bundled_config_text(name))
    assert cfg.seeds == tuple(range(10))
    assert cfg.n_test_id == cfg.n_test_ood == 1000


def test_bundled_spp_config_covers_all_spp_scenarios():
    cfg = exp.parse_config(bundled_config_text("spp_gof"))
    assert {b.kind for b in cfg.scenarios} == {s for s in Scenario if s.is_spp_null}
    fisher = exp.parse_config(bundled_config_text("fisher"))
    assert StatisticKind.FISHER_ARRIVAL in fisher.statistics


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    report = exp.run_experiment(exp.parse_config(SMALL), str(out))
    return out, report


def test_sweep_writes_outputs(full_run):
    out, report = full_run
    assert len(report.rows) == 6 * 3
    for name in (exp.REPORT_NAME, exp.SUMMARY_NAME, exp.PLOT_DATA_NAME, exp.LEDGER_NAME,
                 "auc_rate.png", "auc_hawkes.png"):
        assert os.path.getsize(out / name) > 0
    with open(out / exp.PLOT_DATA_NAME, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["scenario", "delta", "3s", "ks-arrival", "loglik"]
    assert [r[:2] for r in rows[1:]] == [["rate", "0.0"], ["rate", "1.0"], ["hawkes", "0.5"]]
    summary = list(csv.DictReader(open(out / exp.SUMMARY_NAME, encoding="utf-8")))
    assert len(summary) == 9 and all(s["n_seeds"] == "2" for s in summary)
    assert all(0.0 <= r.auc <= 1.0 for r in report.rows)


def test_sweep_is_byte_deterministic(full_run, tmp_path):
    out, _ = full_run
    exp.run_experiment(exp.parse_config(SMALL), str(tmp_path))
    for name in (exp.REPORT_NAME, exp.SUMMARY_NAME, exp.PLOT_DATA_NAME):
        assert read(tmp_path / name) == read(out / name)


def test_resumed_sweep_matches_uninterrupted(full_run, tmp_path):
    out, _ = full_run
    cfg = exp.parse_config(SMALL)
    exp.run_experiment(cfg, str(tmp_path), max_cells=2)
    assert not exp.is_complete(cfg, str(tmp_path))
    assert not os.path.exists(tmp_path / exp.REPORT_NAME)
    # a torn final line, as left by a kill mid-write
    with open(tmp_path / exp.LEDGER_NAME, "a", encoding="utf-8") as fh:
        fh.write('{"config": "trunc')
    exp.run_experiment(cfg, str(tmp_path), max_cells=3)
    exp.run_experiment(cfg, str(tmp_path))
    assert exp.is_complete(cfg, str(tmp_path))
    assert read(tmp_path / exp.REPORT_NAME) == read(out / exp.REPORT_NAME)


def test_changed_config_does_not_reuse_cells(full_run, tmp_path):
    out, _ = full_run
    cfg = exp.parse_config(SMALL)
    exp.run_experiment(cfg, str(tmp_path), max_cells=6)
    other = exp.parse_config(SMALL.replace("n_test_ood = 40", "n_test_ood = 41"))
    report = exp.run_experiment(other, str(tmp_path))
    assert {r.n_ood for r in report.rows} == {41}


def test_worker_pool_gives_same_report(full_run, tmp_path):
    out, _ = full_run
    cfg = exp.parse_config(SMALL.replace("mode = gof", "mode = gof\nworkers = 2"))
    exp.run_experiment(cfg, str(tmp_path))
    assert read(tmp_path / exp.REPORT_NAME) == read(out / exp.REPORT_NAME)


def test_ood_sweep_fits_once_per_seed(tmp_path):
    cfg = exp.parse_config(SMALL_OOD)
    report = exp.run_experiment(cfg, str(tmp_path))
    assert [(r.scenario, r.delta) for r in report.rows] == [("server-stop", 0.0), ("server-stop", 1.0)]
    assert not any(p.endswith(".png") for p in os.listdir(tmp_path))
    # the cell runner alone reproduces the sweep's numbers
    model = exp.cell_model(cfg, Scenario.SERVER_STOP, 3)
    rows = exp.run_cell(cfg, Scenario.SERVER_STOP, 1.0, 3, model)
    assert rows == [report.rows[1]]


def test_gof_latency_falls_back_to_fitted_poisson():
    cfg = exp.parse_config("[experiment]\nn_train = 20\n[scenario latency]\n")
    model = exp.cell_model(cfg, Scenario.LATENCY, 0)
    assert model.kind == "constant-poisson" and model.num_marks == 2
