"""Goodness-of-fit testing and out-of-distribution detection for event sequences."""

from .core import Dataset, EventSequence, TransformedSequence, load_jsonl, save_jsonl, validate
from .detect import (ExperimentReport, ReferenceDistribution, ReportRow, build_reference,
                     p_value, p_values, roc_auc, run_gof, run_ood)
from .fit import FitConfig, fit_hawkes, fit_poisson, loglik_gradient
from .model import (ConstantPoisson, ExpHawkes, GammaRenewal, SelfCorrecting,
                    SineInhomogeneousPoisson, TppModel, deserialize, serialize)
from .rng import RngHandle
from .simulate import Scenario, ScenarioSpec, make_scenario_pair
from .stats import StatisticKind, compute, spp_moments, stat_3s
from .transform import time_rescale

__version__ = "0.1.0"
