"""Command line: ``tppood {simulate,fit,test,experiment}``.

Exit codes: 0 success, 1 runtime failure, 2 bad usage.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from importlib import resources

import numpy as np

from . import experiment as exp
from .core import Dataset, load_jsonl, save_jsonl
from .detect import ReferenceDistribution, ReferenceSource, p_values, roc_auc, statistic_table, two_sided
from .errors import InvalidDelta, TppError
from .fit import FitConfig, fit_hawkes_detailed, fit_poisson
from .model import deserialize, serialize
from .rng import RngHandle
from .simulate import Scenario, ScenarioSpec, id_sampler, ood_sampler, sample_dataset
from .stats import StatisticKind

logger = logging.getLogger("tppood")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Flag values that parse but make no sense together."""


def _scenario(text):
    try:
        return Scenario.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown scenario {text!r}; choose from {', '.join(s.value for s in Scenario)}")


def _statistics(text):
    try:
        return StatisticKind.parse_list(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown statistic in {text!r}; choose from all, "
            + ", ".join(k.value for k in StatisticKind))


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


# --- simulate --------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        spec = ScenarioSpec(args.scenario, args.delta, args.t_max)
    except (InvalidDelta, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    # same streams as the experiment runner's test sets
    root = exp.scenario_root(spec.kind, args.seed)
    if args.ood:
        data = sample_dataset(ood_sampler(spec), args.n,
                              root.spawn(exp.ROLE_TEST_OOD, exp.delta_code(spec.delta)),
                              spec.kind.num_marks)
    else:
        data = sample_dataset(id_sampler(spec), args.n, root.spawn(exp.ROLE_TEST_ID),
                              spec.kind.num_marks)
    save_jsonl(data, args.out)
    logger.info("wrote %d sequences to %s", len(data), args.out)
    return EXIT_OK


# --- fit -------------------------------------------------------------------------


def cmd_fit(args) -> int:
    data = load_jsonl(args.data)
    data.require_nonempty()
    if args.model == "poisson":
        model = fit_poisson(data)
        trace = [float(np.mean([model.log_likelihood(s) for s in data]))]
    else:
        config = FitConfig(max_iterations=args.max_iterations, step_size=args.step_size,
                           convergence_tol=args.convergence_tol, seed=args.seed,
                           fit_decay=not args.freeze_decay)
        result = fit_hawkes_detailed(data, config)
        model, trace = result.model, result.trace
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize(model) + "\n")
    log_path = args.log or args.out + ".log.csv"
    with open(log_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,mean_loglik\n")
        for i, value in enumerate(trace):
            fh.write(f"{i},{value!r}\n")
    logger.info("fitted %s model; mean log-likelihood %.6g", model.kind, trace[-1])
    return EXIT_OK


# --- test ------------------------------------------------------------------------

TEST_HEADER = ["set", "index", "statistic", "score", "p_value", "auc"]


def cmd_test(args) -> int:
    if args.mode == "ood" and (args.test_ood is None or args.ref_data is None):
        raise UsageError("ood mode needs --ref-data (training data) and --test-ood")
    with open(args.model, encoding="utf-8") as fh:
        model = deserialize(fh.read())
    d_id = load_jsonl(args.test_id)
    d_ood = load_jsonl(args.test_ood) if args.test_ood else None
    if args.ref_data:
        d_ref = load_jsonl(args.ref_data)
    else:
        # gof without a reference file: draw model samples
        rng = RngHandle(args.seed, (len(Scenario),))
        d_ref = Dataset([model.sample(args.t_max, rng.spawn(i)) for i in range(args.n_ref)],
                        model.num_marks)
    source = ReferenceSource.MODEL_SAMPLES if args.mode == "gof" else ReferenceSource.TRAINING_DATA
    kinds = args.statistic
    ref_tab = statistic_table(kinds, model, d_ref)
    id_tab = statistic_table(kinds, model, d_id)
    ood_tab = statistic_table(kinds, model, d_ood) if d_ood is not None else None

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TEST_HEADER)
        for kind in kinds:
            ref = ReferenceDistribution(ref_tab[kind], source)
            p_id = p_values(ref, id_tab[kind])
            for i, (s, p) in enumerate(zip(id_tab[kind], two_sided(p_id))):
                writer.writerow(["id", i, kind.value, repr(float(s)), repr(float(p)), ""])
            if ood_tab is None:
                continue
            p_ood = p_values(ref, ood_tab[kind])
            for i, (s, p) in enumerate(zip(ood_tab[kind], two_sided(p_ood))):
                writer.writerow(["ood", i, kind.value, repr(float(s)), repr(float(p)), ""])
            auc = roc_auc(p_id, p_ood)
            writer.writerow(["summary", "", kind.value, "", "", repr(auc)])
            print(f"{kind.value}: AUC {auc:.4f}")
    return EXIT_OK


# --- experiment --------------------------------------------------------------------

BUNDLED_CONFIGS = ("spp_gof", "fisher", "server_ood")


def bundled_config_text(name: str) -> str:
    return resources.files("tppood").joinpath("configs", f"{name}.cfg").read_text(encoding="utf-8")


def cmd_experiment(args) -> int:
    if os.path.exists(args.config):
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    elif args.config in BUNDLED_CONFIGS:
        text = bundled_config_text(args.config)
    else:
        raise UsageError(f"config {args.config!r} is neither a file nor one of "
                         f"{', '.join(BUNDLED_CONFIGS)}")
    try:
        config = exp.parse_config(text)
    except (exp.ConfigError, InvalidDelta) as exc:
        raise UsageError(f"bad config: {exc}") from exc
    if args.seeds:
        config.seeds = exp.parse_seeds(args.seeds)
    if args.no_plots:
        config.plots = False
    report = exp.run_experiment(config, args.out_dir, max_cells=args.max_cells,
                                progress=lambda key: logger.info("done %s", key))
    if not exp.is_complete(config, args.out_dir):
        print(f"sweep paused with {len(report.rows)} rows; rerun to resume", file=sys.stderr)
        return EXIT_OK
    print(f"wrote {len(report.rows)} rows to {os.path.join(args.out_dir, exp.REPORT_NAME)}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tppood", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a scenario dataset as JSONL")
    p.add_argument("--scenario", type=_scenario, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--t-max", type=_positive_float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ood", action="store_true", help="sample the alternative instead of the ID process")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit on a JSONL dataset")
    p.add_argument("--model", choices=("poisson", "hawkes"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="objective trace CSV (default: OUT.log.csv)")
    p.add_argument("--max-iterations", type=_positive_int, default=2000)
    p.add_argument("--step-size", type=_positive_float, default=0.05)
    p.add_argument("--convergence-tol", type=_positive_float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--freeze-decay", action="store_true", help="keep the decay fixed at 1")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="per-sequence p-values and AUC")
    p.add_argument("--mode", choices=("gof", "ood"), required=True)
    p.add_argument("--statistic", type=_statistics, default=[StatisticKind.THREE_S],
                   help="statistic name, comma list, or 'all'")
    p.add_argument("--model", required=True, help="serialized model (JSON)")
    p.add_argument("--ref-data", help="reference sequences: model samples (gof) or training data (ood)")
    p.add_argument("--test-id", required=True)
    p.add_argument("--test-ood")
    p.add_argument("--n-ref", type=_positive_int, default=1000,
                   help="model samples to draw in gof mode when --ref-data is absent")
    p.add_argument("--t-max", type=_positive_float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("experiment", help="run or resume a detectability sweep")
    p.add_argument("config", help="config file, or a bundled name: " + ", ".join(BUNDLED_CONFIGS))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seeds", help="override the seed list, e.g. 0-2")
    p.add_argument("--max-cells", type=_positive_int, help="stop after this many new cells")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tppood {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TppError, OSError, ValueError) as exc:
        print(f"tppood {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
