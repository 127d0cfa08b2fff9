"""Parametric temporal point process models with analytic compensators.

Every model exposes, for a history ``seq``:

* ``intensity(mark, t, seq)`` – conditional intensity given events strictly before t,
* ``compensator_at(mark, t, seq)`` – its integral over [0, t],
* ``rescale(seq)`` – own-mark compensator values at each event plus per-mark totals,
* ``log_likelihood(seq)``,
* ``sample(t_max, rng)``.

Model records are JSON objects ``{"kind": ..., "num_marks": K, "params": {...}}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import ClassVar, Dict, Type

import numpy as np

from . import _kernels, simulate
from .core import EventSequence
from .errors import (
    MarkCountMismatch,
    MarkOutOfRange,
    ParameterDomainError,
    TimeOutOfRange,
    UnknownModelKind,
)
from .special import gamma_cumulative_hazard, gamma_log_hazard

__all__ = [
    "TppModel",
    "ConstantPoisson",
    "SineInhomogeneousPoisson",
    "GammaRenewal",
    "ExpHawkes",
    "SelfCorrecting",
    "compensator_at",
    "log_likelihood",
    "serialize",
    "deserialize",
    "model_from_record",
]

_REGISTRY: Dict[str, Type["TppModel"]] = {}


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ParameterDomainError(f"{name} must be positive and finite, got {value}")
    return value


def _nonnegative(name, value):
    value = float(value)
    if not (math.isfinite(value) and value >= 0):
        raise ParameterDomainError(f"{name} must be nonnegative and finite, got {value}")
    return value


class TppModel:
    kind: ClassVar[str]
    num_marks: int = 1

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        _REGISTRY[cls.kind] = cls

    # -- interface -------------------------------------------------------

    def intensity(self, mark: int, t: float, seq: EventSequence) -> float:
        raise NotImplementedError

    def compensator_at(self, mark: int, t: float, seq: EventSequence) -> float:
        self._check_query(mark, t, seq)
        return float(self._compensator(mark, t, seq))

    def rescale(self, seq: EventSequence):
        """Return ``(values, totals)``: Lambda_{m_i}(t_i) per event and Lambda_k(T) per mark."""
        self._check_marks(seq)
        return self._rescale(seq)

    def log_likelihood(self, seq: EventSequence) -> float:
        self._check_marks(seq)
        return float(self._log_likelihood(seq))

    def sample(self, t_max: float, rng) -> EventSequence:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    # -- helpers ---------------------------------------------------------

    def _check_marks(self, seq):
        if seq.num_marks != self.num_marks:
            raise MarkCountMismatch(
                f"model has {self.num_marks} marks, sequence has {seq.num_marks}")

    def _check_query(self, mark, t, seq):
        self._check_marks(seq)
        if not 0 <= mark < self.num_marks:
            raise MarkOutOfRange(f"mark {mark} outside [0, {self.num_marks})")
        if not 0.0 <= t <= seq.t_max:
            raise TimeOutOfRange(f"t={t} outside [0, {seq.t_max}]")

    def _rescale(self, seq):
        # univariate default
        t = seq.arrival_times
        values = self._compensator_many(t, seq)
        total = self._compensator_many(np.array([seq.t_max]), seq)
        return values, total

    def _compensator(self, mark, t, seq):
        return self._compensator_many(np.array([t]), seq)[0]

    def to_record(self) -> dict:
        return {"kind": self.kind, "num_marks": self.num_marks, "params": self.params()}


@dataclass(frozen=True)
class ConstantPoisson(TppModel):
    """Independent homogeneous Poisson processes, one rate per mark."""

    rates: tuple
    kind: ClassVar[str] = "constant-poisson"

    def __post_init__(self):
        rates = tuple(_positive("rate", r) for r in np.atleast_1d(self.rates))
        if not rates:
            raise ParameterDomainError("at least one rate required")
        object.__setattr__(self, "rates", rates)

    @property
    def num_marks(self):
        return len(self.rates)

    def intensity(self, mark, t, seq):
        return self.rates[mark]

    def _compensator(self, mark, t, seq):
        return self.rates[mark] * t

    def _rescale(self, seq):
        rates = np.asarray(self.rates)
        return rates[seq.mark_array()] * seq.arrival_times, rates * seq.t_max

    def _log_likelihood(self, seq):
        rates = np.asarray(self.rates)
        counts = np.bincount(seq.mark_array(), minlength=self.num_marks)
        return float(np.dot(counts, np.log(rates)) - rates.sum() * seq.t_max)

    def sample(self, t_max, rng):
        if self.num_marks == 1:
            return simulate.sample_poisson(self.rates[0], t_max, rng)
        zero = np.zeros((self.num_marks, self.num_marks))
        return simulate.sample_hawkes(np.asarray(self.rates), zero, 1.0, t_max, rng)

    def params(self):
        return {"rates": list(self.rates)}


@dataclass(frozen=True)
class SineInhomogeneousPoisson(TppModel):
    """Poisson process with intensity max(0, 1 + beta sin(omega t))."""

    beta: float
    omega: float
    kind: ClassVar[str] = "sine-poisson"

    def __post_init__(self):
        object.__setattr__(self, "beta", _nonnegative("beta", self.beta))
        object.__setattr__(self, "omega", _positive("omega", self.omega))

    def intensity(self, mark, t, seq):
        return float(simulate.sine_intensity(t, self.beta, self.omega))

    def _compensator_many(self, t, seq):
        b, w = self.beta, self.omega
        t = np.asarray(t, dtype=np.float64)
        if b <= 1.0:
            return t + (b / w) * (1.0 - np.cos(w * t))
        # intensity vanishes on (pi + a, 2 pi - a) within each period, a = arcsin(1/b)
        a = math.asin(1.0 / b)

        def antideriv(theta):
            return theta - b * np.cos(theta)

        lo, hi = math.pi + a, 2 * math.pi - a
        per_period = (antideriv(lo) - antideriv(0.0)) + (antideriv(2 * math.pi) - antideriv(hi))
        phase = w * t
        periods = np.floor(phase / (2 * math.pi))
        theta = phase - periods * 2 * math.pi
        partial = antideriv(np.minimum(theta, lo)) - antideriv(0.0)
        partial = partial + np.where(theta > hi, antideriv(theta) - antideriv(hi), 0.0)
        return (periods * per_period + partial) / w

    def _log_likelihood(self, seq):
        lam = simulate.sine_intensity(seq.arrival_times, self.beta, self.omega)
        if np.any(lam <= 0):
            return -math.inf
        return float(np.sum(np.log(lam)) - self._compensator(0, seq.t_max, seq))

    def sample(self, t_max, rng):
        return simulate.sample_inhomogeneous_sine(self.beta, self.omega, t_max, rng)

    def params(self):
        return {"beta": self.beta, "omega": self.omega}


@dataclass(frozen=True)
class GammaRenewal(TppModel):
    """Renewal process with Gamma(shape, scale) inter-event times, renewed at 0."""

    shape: float
    scale: float
    kind: ClassVar[str] = "gamma-renewal"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def _last_event(self, t, seq):
        starts = np.concatenate(([0.0], seq.arrival_times))
        idx = np.searchsorted(seq.arrival_times, t, side="left")
        return starts[idx], idx

    def intensity(self, mark, t, seq):
        last, _ = self._last_event(np.array([t]), seq)
        return float(np.exp(gamma_log_hazard(t - last[0], self.shape, self.scale)))

    def _compensator_many(self, t, seq):
        times = seq.arrival_times
        gaps = np.diff(np.concatenate(([0.0], times)))
        completed = np.concatenate(([0.0], np.cumsum(
            gamma_cumulative_hazard(gaps, self.shape, self.scale))))
        last, idx = self._last_event(np.asarray(t, dtype=np.float64), seq)
        return completed[idx] + gamma_cumulative_hazard(t - last, self.shape, self.scale)

    def _log_likelihood(self, seq):
        times = seq.arrival_times
        gaps = np.diff(np.concatenate(([0.0], times)))
        log_h = gamma_log_hazard(gaps, self.shape, self.scale)
        if np.any(np.isnan(log_h) | (log_h == -np.inf)):
            return -math.inf
        return float(np.sum(log_h) - self._compensator(0, seq.t_max, seq))

    def sample(self, t_max, rng):
        return simulate.sample_gamma_renewal(self.shape, self.scale, t_max, rng)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class ExpHawkes(TppModel):
    """Multivariate Hawkes process with kernel ``influence[i, j] * exp(-decay dt)``.

    ``influence[i, j]`` is the effect of a mark-j event on the intensity of mark i.
    """

    mu: tuple
    influence: tuple
    decay: float = 1.0
    kind: ClassVar[str] = "exp-hawkes"

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        infl = np.atleast_2d(np.asarray(self.influence, dtype=np.float64))
        decay = _positive("decay", self.decay)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(infl))):
            raise ParameterDomainError("Hawkes parameters must be finite")
        if np.any(mu < 0) or np.any(infl < 0):
            raise ParameterDomainError("mu and influence must be nonnegative")
        if infl.shape != (len(mu), len(mu)):
            raise ParameterDomainError(f"influence must be {len(mu)}x{len(mu)}")
        simulate.check_hawkes_params(mu, infl, decay)
        object.__setattr__(self, "mu", tuple(mu.tolist()))
        object.__setattr__(self, "influence", tuple(tuple(r) for r in infl.tolist()))
        object.__setattr__(self, "decay", decay)

    @property
    def num_marks(self):
        return len(self.mu)

    @property
    def mu_array(self):
        return np.array(self.mu)

    @property
    def influence_array(self):
        return np.array(self.influence).reshape(self.num_marks, self.num_marks)

    def intensity(self, mark, t, seq):
        times, marks = seq.arrival_times, seq.mark_array()
        past = times < t
        kern = np.exp(-self.decay * (t - times[past]))
        return float(self.mu[mark] + np.sum(self.influence_array[mark, marks[past]] * kern))

    def _compensator(self, mark, t, seq):
        times, marks = seq.arrival_times, seq.mark_array()
        past = times < t
        jumps = self.influence_array[mark, marks[past]] / self.decay
        return float(self.mu[mark] * t
                     + np.sum(jumps * -np.expm1(-self.decay * (t - times[past]))))

    def _rescale(self, seq):
        return _kernels.hawkes_rescale(seq.arrival_times, seq.mark_array(), self.mu_array,
                                       self.influence_array, self.decay, seq.t_max)

    def _log_likelihood(self, seq):
        ll, *_ = _kernels.hawkes_loglik_grad(seq.arrival_times, seq.mark_array(), self.mu_array,
                                             self.influence_array, self.decay, seq.t_max, False)
        return ll

    def sample(self, t_max, rng):
        return simulate.sample_hawkes(self.mu_array, self.influence_array, self.decay, t_max, rng)

    def params(self):
        return {"mu": list(self.mu), "influence": [list(r) for r in self.influence],
                "decay": self.decay}


@dataclass(frozen=True)
class SelfCorrecting(TppModel):
    """Intensity exp(mu t - alpha * #events before t)."""

    mu: float
    alpha: float
    kind: ClassVar[str] = "self-correcting"

    def __post_init__(self):
        object.__setattr__(self, "mu", _positive("mu", self.mu))
        object.__setattr__(self, "alpha", _nonnegative("alpha", self.alpha))

    def intensity(self, mark, t, seq):
        n = np.searchsorted(seq.arrival_times, t, side="left")
        return math.exp(self.mu * t - self.alpha * n)

    def _compensator_many(self, t, seq):
        mu, alpha = self.mu, self.alpha
        starts = np.concatenate(([0.0], seq.arrival_times))
        # integral over [t_n, t_{n+1}] of exp(mu u - alpha n), written with expm1 for small mu
        pieces = np.exp(mu * starts[:-1] - alpha * np.arange(len(starts) - 1)) \
            * np.expm1(mu * np.diff(starts)) / mu
        completed = np.concatenate(([0.0], np.cumsum(pieces)))
        t = np.asarray(t, dtype=np.float64)
        n = np.searchsorted(seq.arrival_times, t, side="left")
        last = starts[n]
        return completed[n] + np.exp(mu * last - alpha * n) * np.expm1(mu * (t - last)) / mu

    def _log_likelihood(self, seq):
        n = np.arange(len(seq.arrival_times))
        log_lam = self.mu * seq.arrival_times - self.alpha * n
        return float(np.sum(log_lam) - self._compensator(0, seq.t_max, seq))

    def sample(self, t_max, rng):
        return simulate.sample_self_correcting(self.mu, self.alpha, t_max, rng)

    def params(self):
        return {"mu": self.mu, "alpha": self.alpha}


def compensator_at(model: TppModel, mark: int, t: float, seq: EventSequence) -> float:
    return model.compensator_at(mark, t, seq)


def log_likelihood(model: TppModel, seq: EventSequence) -> float:
    """Marked log-likelihood; -inf if some event has zero intensity under the model."""
    return model.log_likelihood(seq)


def model_from_record(rec: dict) -> TppModel:
    if not isinstance(rec, dict) or "kind" not in rec:
        raise UnknownModelKind("model record lacks a 'kind' tag")
    cls = _REGISTRY.get(rec["kind"])
    if cls is None:
        raise UnknownModelKind(f"unknown model kind {rec['kind']!r}")
    params = rec.get("params", {})
    try:
        model = cls(**params)
    except TypeError as exc:
        raise ParameterDomainError(f"bad parameters for {rec['kind']}: {exc}") from None
    if "num_marks" in rec and int(rec["num_marks"]) != model.num_marks:
        raise ParameterDomainError(
            f"record declares {rec['num_marks']} marks, parameters imply {model.num_marks}")
    return model


def serialize(model: TppModel) -> str:
    return json.dumps(model.to_record(), indent=2) + "\n"


def deserialize(text: str) -> TppModel:
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnknownModelKind(f"model record is not valid JSON: {exc.msg}") from None
    return model_from_record(rec)
