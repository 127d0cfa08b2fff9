"""Samplers for the standard Poisson process and the alternative scenarios.

Each sampler takes an :class:`~tppood.rng.RngHandle` (or a numpy Generator)
and returns an :class:`~tppood.core.EventSequence`. Dataset builders derive
one independent stream per sequence from the handle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from . import _kernels
from .core import Dataset, EventSequence
from .errors import InvalidDelta, NonStationaryParameters, ParameterDomainError
from .rng import RngHandle, as_generator

DEFAULT_T_MAX = 100.0
SINE_OMEGA = 2 * math.pi / 50

SERVER_MU = np.array([3.0, 0.0, 0.0])
SERVER_INFLUENCE = np.array([[0.0, 0.0, 0.0],
                             [1.0, 0.0, 0.0],
                             [1.0, 0.0, 0.0]])
SERVER_STOP_INFLUENCE = np.array([[0.0, 0.0, 0.0],
                                  [0.0, 0.0, 0.0],
                                  [1.0, 0.0, 0.0]])
SERVER_OVERLOAD_INFLUENCE = np.array([[0.0, 0.0, 0.0],
                                      [0.0, 0.0, 0.0],
                                      [2.0, 0.0, 0.0]])
LATENCY_TRIGGER_RATE = 3.0
LATENCY_SIGMA = 0.1


class Scenario(str, enum.Enum):
    RATE = "rate"
    STOPPING = "stopping"
    RENEWAL = "renewal"
    HAWKES = "hawkes"
    INHOMOGENEOUS = "inhomogeneous"
    SELF_CORRECTING = "self-correcting"
    INCREASING_RATE = "increasing-rate"
    RENEWAL_B = "renewal-b"
    SERVER_STOP = "server-stop"
    SERVER_OVERLOAD = "server-overload"
    LATENCY = "latency"

    @classmethod
    def parse(cls, name) -> "Scenario":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {"selfcorrecting": "self-correcting", "increasingrate": "increasing-rate",
                   "renewalb": "renewal-b", "serverstop": "server-stop",
                   "serveroverload": "server-overload"}
        key = aliases.get(key, key)
        return cls(key)

    @property
    def is_spp_null(self) -> bool:
        """Whether the in-distribution process is the standard Poisson process."""
        return self not in (Scenario.SERVER_STOP, Scenario.SERVER_OVERLOAD, Scenario.LATENCY)

    @property
    def num_marks(self) -> int:
        if self in (Scenario.SERVER_STOP, Scenario.SERVER_OVERLOAD):
            return 3
        if self is Scenario.LATENCY:
            return 2
        return 1


SPP_SCENARIOS = tuple(s for s in Scenario if s.is_spp_null)


@dataclass(frozen=True)
class ScenarioSpec:
    kind: Scenario
    delta: float
    t_max: float = DEFAULT_T_MAX

    def __post_init__(self):
        object.__setattr__(self, "kind", Scenario.parse(self.kind))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "t_max", float(self.t_max))
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidDelta(f"delta must lie in [0, 1], got {self.delta}")
        if self.kind in (Scenario.RENEWAL, Scenario.RENEWAL_B) and self.delta >= 1.0:
            raise InvalidDelta(
                f"{self.kind.value} is degenerate at delta=1 (Gamma shape or scale hits 0)")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")


# --- elementary samplers ---------------------------------------------------


def _unit_exponential_arrivals(gen, t_max):
    """Cumulative sums of unit exponentials truncated at t_max."""
    chunk = int(t_max + 5 * math.sqrt(t_max) + 10)
    out = []
    t = 0.0
    while True:
        gaps = gen.exponential(1.0, size=chunk)
        times = t + np.cumsum(gaps)
        if times[-1] > t_max:
            out.append(times[times <= t_max])
            break
        out.append(times)
        t = times[-1]
    return np.concatenate(out)


def sample_spp(t_max: float, rng) -> EventSequence:
    """Standard (unit-rate) Poisson process on [0, t_max]."""
    gen = as_generator(rng)
    while True:
        times = _unit_exponential_arrivals(gen, t_max)
        if len(times) < 2 or np.all(np.diff(times) > 0):
            return EventSequence(times, t_max)


def sample_poisson(rate: float, t_max: float, rng) -> EventSequence:
    """Homogeneous Poisson process with the given rate (time-scaled SPP)."""
    if rate <= 0:
        return EventSequence(np.empty(0), t_max)
    gen = as_generator(rng)
    while True:
        times = _unit_exponential_arrivals(gen, rate * t_max) / rate
        times = times[(times > 0) & (times <= t_max)]
        if len(times) < 2 or np.all(np.diff(times) > 0):
            return EventSequence(times, t_max)


def sine_intensity(t, beta, omega):
    return np.maximum(0.0, 1.0 + beta * np.sin(omega * np.asarray(t, dtype=float)))


def sample_inhomogeneous_sine(beta: float, omega: float, t_max: float, rng) -> EventSequence:
    """Poisson process with intensity max(0, 1 + beta sin(omega t)) by thinning."""
    gen = as_generator(rng)
    bound = 1.0 + beta
    while True:
        candidates = _unit_exponential_arrivals(gen, bound * t_max) / bound
        candidates = candidates[(candidates > 0) & (candidates <= t_max)]
        u = gen.random(len(candidates))
        times = candidates[u * bound <= sine_intensity(candidates, beta, omega)]
        if len(times) < 2 or np.all(np.diff(times) > 0):
            return EventSequence(times, t_max)


def sample_gamma_renewal(shape: float, scale: float, t_max: float, rng) -> EventSequence:
    """Renewal process with i.i.d. Gamma(shape, scale) gaps starting at 0.

    For small shapes many gaps are below double resolution; such an event is
    placed one ulp after its predecessor rather than redrawn, which would
    bias the event count downwards.
    """
    gen = as_generator(rng)
    mean_gap = shape * scale
    chunk = int(t_max / mean_gap + 5 * math.sqrt(t_max / mean_gap + 1) + 10)
    out = []
    t = 0.0
    while t <= t_max:
        gaps = gen.gamma(shape, scale, size=chunk)
        for g in gaps:
            t_new = t + g
            if t_new <= t:
                t_new = math.nextafter(t, math.inf)
            if t_new > t_max:
                t = t_new
                break
            out.append(t_new)
            t = t_new
    return EventSequence(np.array(out, dtype=np.float64), t_max)


def _spectral_radius(matrix):
    return float(np.max(np.abs(np.linalg.eigvals(matrix)))) if matrix.size else 0.0


def check_hawkes_params(mu, influence, decay):
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    influence = np.atleast_2d(np.asarray(influence, dtype=np.float64))
    k = len(mu)
    if influence.shape != (k, k):
        raise ParameterDomainError(f"influence must be {k}x{k}, got {influence.shape}")
    if np.any(mu < 0) or np.any(influence < 0) or not decay > 0:
        raise ParameterDomainError("Hawkes parameters must be nonnegative with decay > 0")
    # an immigrant-free process never fires, so any branching ratio is harmless
    if np.any(mu > 0) and _spectral_radius(influence / decay) >= 1.0:
        raise NonStationaryParameters(
            f"spectral radius of influence/decay is {_spectral_radius(influence / decay):.4g} >= 1")
    return mu, influence


def hawkes_sampler(mu, influence, decay: float, t_max: float,
                   switch_time: float = math.inf, influence_after=None):
    """Validate Hawkes parameters once and return ``rng -> EventSequence``.

    ``influence[i, j]`` is the jump in the intensity of mark i caused by an
    event of mark j; the kernel is ``influence[i, j] * exp(-decay * dt)``.
    Events at or after ``switch_time`` excite through ``influence_after``;
    excitation from earlier events keeps decaying under the old matrix.
    """
    mu, influence = check_hawkes_params(mu, influence, decay)
    if influence_after is None:
        influence_after = influence
    else:
        _, influence_after = check_hawkes_params(mu, influence_after, decay)
    influence = np.ascontiguousarray(influence)
    influence_after = np.ascontiguousarray(influence_after)
    k = len(mu)
    switch_time, decay, t_max = float(switch_time), float(decay), float(t_max)

    def draw(rng) -> EventSequence:
        times, marks = _kernels.hawkes_thinning(as_generator(rng), mu, influence,
                                                influence_after, switch_time, decay, t_max)
        return EventSequence(times, t_max, marks if k > 1 else None, k)

    return draw


def sample_hawkes(mu, influence, decay: float, t_max: float, rng,
                  switch_time: float = math.inf, influence_after=None) -> EventSequence:
    """Multivariate exponential Hawkes process by Ogata thinning (see :func:`hawkes_sampler`)."""
    return hawkes_sampler(mu, influence, decay, t_max, switch_time, influence_after)(rng)


def sample_self_correcting(mu: float, alpha: float, t_max: float, rng) -> EventSequence:
    """Self-correcting process with intensity exp(mu t - alpha * #past events), exact inversion."""
    if not mu > 0 or alpha < 0:
        raise ParameterDomainError("self-correcting process needs mu > 0 and alpha >= 0")
    gen = as_generator(rng)
    return EventSequence(_kernels.self_correcting_inversion(gen, float(mu), float(alpha),
                                                           float(t_max)), t_max)


def sample_latency(offset_mean: float, t_max: float, rng,
                   trigger_rate: float = LATENCY_TRIGGER_RATE,
                   sigma: float = LATENCY_SIGMA) -> EventSequence:
    """Triggers (mark 0) from a Poisson process; each spawns a response (mark 1)
    after a Normal(offset_mean, sigma) delay. Responses outside (0, t_max] are dropped."""
    gen = as_generator(rng)
    while True:
        triggers = _unit_exponential_arrivals(gen, trigger_rate * t_max) / trigger_rate
        triggers = triggers[(triggers > 0) & (triggers <= t_max)]
        responses = triggers + gen.normal(offset_mean, sigma, size=len(triggers))
        responses = responses[(responses > 0) & (responses <= t_max)]
        times = np.concatenate((triggers, responses))
        marks = np.concatenate((np.zeros(len(triggers), np.int64),
                                np.ones(len(responses), np.int64)))
        order = np.argsort(times, kind="stable")
        times, marks = times[order], marks[order]
        if len(times) < 2 or np.all(np.diff(times) > 0):
            return EventSequence(times, t_max, marks, 2)


# --- scenarios ---------------------------------------------------------------


def _stopped(seq: EventSequence, t_stop: float) -> EventSequence:
    keep = seq.arrival_times < t_stop
    marks = None if seq.marks is None else seq.marks[keep]
    return EventSequence(seq.arrival_times[keep], seq.t_max, marks, seq.num_marks)


def id_sampler(spec: ScenarioSpec) -> Callable[[RngHandle], EventSequence]:
    """Sampler for the in-distribution process of a scenario."""
    T = spec.t_max
    if spec.kind.is_spp_null:
        return lambda rng: sample_spp(T, rng)
    if spec.kind is Scenario.LATENCY:
        return lambda rng: sample_latency(1.0, T, rng)
    return hawkes_sampler(SERVER_MU, SERVER_INFLUENCE, 1.0, T)


def ood_sampler(spec: ScenarioSpec) -> Callable[[RngHandle], EventSequence]:
    """Sampler for the delta-parameterized alternative of a scenario."""
    T, d, kind = spec.t_max, spec.delta, spec.kind
    if kind is Scenario.RATE:
        return lambda rng: sample_poisson(1.0 - 0.5 * d, T, rng)
    if kind is Scenario.INCREASING_RATE:
        return lambda rng: sample_poisson(1.0 + 0.5 * d, T, rng)
    if kind is Scenario.STOPPING:
        t_stop = T * (1.0 - 0.3 * d)
        return lambda rng: _stopped(sample_spp(T, rng), t_stop)
    if kind is Scenario.RENEWAL:
        return lambda rng: sample_gamma_renewal(1.0 - d, 1.0 / (1.0 - d), T, rng)
    if kind is Scenario.RENEWAL_B:
        return lambda rng: sample_gamma_renewal(1.0 / (1.0 - d), 1.0 - d, T, rng)
    if kind is Scenario.HAWKES:
        return hawkes_sampler([1.0 - d], [[d]], 1.0, T)
    if kind is Scenario.INHOMOGENEOUS:
        return lambda rng: sample_inhomogeneous_sine(2.0 * d, SINE_OMEGA, T, rng)
    if kind is Scenario.SELF_CORRECTING:
        return lambda rng: sample_self_correcting(d + 1e-5, d, T, rng)
    if kind in (Scenario.SERVER_STOP, Scenario.SERVER_OVERLOAD):
        after = SERVER_STOP_INFLUENCE if kind is Scenario.SERVER_STOP else SERVER_OVERLOAD_INFLUENCE
        t_stop = T * (1.0 - 0.5 * d)
        return hawkes_sampler(SERVER_MU, SERVER_INFLUENCE, 1.0, T,
                              switch_time=t_stop, influence_after=after)
    if kind is Scenario.LATENCY:
        return lambda rng: sample_latency(1.0 + 0.5 * d, T, rng)
    raise ValueError(f"unknown scenario {kind}")


def sample_dataset(sampler: Callable, n: int, rng: RngHandle, num_marks: int = 1) -> Dataset:
    """Draw ``n`` sequences, the i-th from stream ``rng.spawn(i)``."""
    if n <= 0:
        raise ValueError("n must be positive")
    return Dataset([sampler(rng.spawn(i)) for i in range(n)], num_marks)


ROLE_ID, ROLE_OOD = 0, 1


def make_scenario_pair(spec: ScenarioSpec, n_id: int, n_ood: int,
                       rng: RngHandle) -> Tuple[Dataset, Dataset]:
    """In-distribution and OoD datasets for one scenario, on disjoint streams."""
    k = spec.kind.num_marks
    d_id = sample_dataset(id_sampler(spec), n_id, rng.spawn(ROLE_ID), k)
    d_ood = sample_dataset(ood_sampler(spec), n_ood, rng.spawn(ROLE_OOD), k)
    return d_id, d_ood
