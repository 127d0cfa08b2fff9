"""Maximum-likelihood fitting of Poisson and exponential Hawkes models."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import _kernels
from .core import Dataset, EventSequence
from .errors import EmptyDataset, NonFiniteObjective
from .model import ConstantPoisson, ExpHawkes

logger = logging.getLogger(__name__)

RATE_FLOOR = 1e-12


@dataclass
class FitConfig:
    max_iterations: int = 2000
    step_size: float = 0.05
    convergence_tol: float = 1e-8
    seed: int = 0
    fit_decay: bool = True
    initial_influence: float = 0.1
    initial_decay: float = 1.0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.step_size <= 0 or self.convergence_tol <= 0:
            raise ValueError("max_iterations, step_size and convergence_tol must be positive")


@dataclass
class FitResult:
    model: object
    trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def fit_poisson(data: Dataset) -> ConstantPoisson:
    """Closed-form MLE: events of each mark over total observed time."""
    if len(data) == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    counts = np.zeros(data.num_marks)
    for seq in data:
        counts += np.bincount(seq.mark_array(), minlength=data.num_marks)
    exposure = sum(seq.t_max for seq in data)
    return ConstantPoisson(tuple(np.maximum(counts / exposure, RATE_FLOOR)))


@dataclass(frozen=True)
class HawkesGradient:
    loglik: float
    mu: np.ndarray
    influence: np.ndarray
    decay: float


def loglik_gradient(model: ExpHawkes, seq: EventSequence) -> HawkesGradient:
    """Log-likelihood of ``seq`` and its partial derivatives w.r.t. every parameter."""
    ll, g_mu, g_infl, g_decay = _kernels.hawkes_loglik_grad(
        seq.arrival_times, seq.mark_array(), model.mu_array, model.influence_array,
        model.decay, seq.t_max, True)
    return HawkesGradient(float(ll), g_mu, g_infl, float(g_decay))


class _PackedData:
    """A dataset flattened into contiguous arrays for the compiled objective."""

    def __init__(self, data: Dataset):
        self.times = np.concatenate([s.arrival_times for s in data] + [np.empty(0)])
        self.marks = np.concatenate([s.mark_array() for s in data] + [np.empty(0, np.int64)])
        self.offsets = np.concatenate(([0], np.cumsum([len(s) for s in data]))).astype(np.int64)
        self.t_maxes = np.array([s.t_max for s in data], dtype=np.float64)
        self.n = len(data)

    def objective(self, mu, infl, decay, want_grad):
        """Mean log-likelihood, its gradient, and the empirical Fisher diagonal."""
        ll, g_mu, g_infl, g_decay, sq_mu, sq_infl, sq_decay = \
            _kernels.hawkes_dataset_loglik_grad(self.times, self.marks, self.offsets,
                                                self.t_maxes, mu, infl, decay, want_grad)
        grad = np.concatenate((g_mu, g_infl.ravel(), [g_decay])) / self.n
        fisher = np.concatenate((sq_mu, sq_infl.ravel(), [sq_decay])) / self.n
        return ll / self.n, grad, fisher


def _unpack(theta, k):
    """Log-parameter vector -> (mu, influence, decay)."""
    mu = np.exp(theta[:k])
    infl = np.exp(theta[k:k + k * k]).reshape(k, k)
    decay = math.exp(theta[-1])
    return mu, infl, decay


def fit_hawkes_detailed(data: Dataset, config: FitConfig = None) -> FitResult:
    """Gradient ascent on log-parameters with step halving; keeps the best iterate.

    The gradient is scaled coordinate-wise by the inverse diagonal of the
    empirical Fisher information (mean squared per-sequence gradient), which
    puts rates, influences and decay on a common footing. Only first
    derivatives are used.
    """
    config = config or FitConfig()
    if len(data) == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    k = data.num_marks
    packed = _PackedData(data)
    floor = math.log(RATE_FLOOR)

    mu0 = np.asarray(fit_poisson(data).rates)
    theta = np.concatenate((np.log(mu0), np.full(k * k, math.log(config.initial_influence)),
                            [math.log(config.initial_decay)]))

    def evaluate(th, want_grad):
        mu, infl, decay = _unpack(th, k)
        ll, grad, fisher = packed.objective(mu, infl, decay, want_grad)
        # chain rule for the log parameterization
        scale = np.exp(th)
        grad = grad * scale
        fisher = fisher * scale * scale
        # diagonal empirical-Fisher scaling; coordinates without information keep a unit scale
        direction = np.where(fisher > 0.0, grad / np.where(fisher > 0.0, fisher, 1.0), grad)
        if not config.fit_decay:
            direction[-1] = 0.0
        return ll, direction

    value, direction = evaluate(theta, True)
    if not math.isfinite(value):
        raise NonFiniteObjective("log-likelihood is not finite at the initial parameters")
    trace = [value]
    step = config.step_size
    accepts = 0
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        candidate = np.maximum(theta + step * direction, floor)
        new_value, _ = evaluate(candidate, False)
        if math.isfinite(new_value) and new_value >= value:
            improvement = new_value - value
            theta = candidate
            value, direction = evaluate(theta, True)
            trace.append(value)
            accepts += 1
            if accepts % 5 == 0:
                step *= 1.1
            if improvement <= config.convergence_tol * max(1.0, abs(value)):
                converged = True
                break
        else:
            step *= 0.5
            accepts = 0
            if step < 1e-30:
                converged = True
                break
    mu, infl, decay = _unpack(theta, k)
    logger.info("hawkes fit: %d iterations, mean loglik %.6f, converged=%s", it, value, converged)
    return FitResult(ExpHawkes(tuple(mu), infl, decay), trace, it, converged)


def fit_hawkes(data: Dataset, config: FitConfig = None) -> ExpHawkes:
    return fit_hawkes_detailed(data, config).model
