"""Test statistics for (transformed) event sequences.

All SPP statistics take a :class:`~tppood.core.TransformedSequence` on
``[0, V]`` and use the spacings ``w_i = v_i - v_{i-1}`` with ``v_0 = 0`` and
``v_{N+1} = V``.
"""

from __future__ import annotations

import enum
import functools
import math
from typing import Dict, Iterable

import numpy as np

from .core import EventSequence, TransformedSequence
from .rng import as_generator
from .special import log_kolmogorov_sf, log_poisson_cdf, log_poisson_sf_inclusive
from .transform import time_rescale


class StatisticKind(str, enum.Enum):
    THREE_S = "3s"
    KS_ARRIVAL = "ks-arrival"
    KS_INTEREVENT = "ks-interevent"
    CHI_SQUARED = "chi2"
    LOG_LIKELIHOOD = "loglik"
    FISHER_ARRIVAL = "fisher-arrival"
    FISHER_INTEREVENT = "fisher-interevent"

    @classmethod
    def parse(cls, name) -> "StatisticKind":
        if isinstance(name, cls):
            return name
        return cls(str(name).strip().lower())

    @classmethod
    def parse_list(cls, names) -> list:
        """Parse a comma list or iterable of names; ``all`` expands to every kind."""
        if isinstance(names, str):
            names = [n for n in names.split(",") if n.strip()]
        out = []
        for name in names:
            if str(name).strip().lower() == "all":
                out.extend(k for k in cls if k not in out)
            else:
                k = cls.parse(name)
                if k not in out:
                    out.append(k)
        return out


ALL_STATISTICS = tuple(StatisticKind)


def stat_3s(z: TransformedSequence) -> float:
    """Sum of squared spacings divided by V; lies in [V/(N+1), V]."""
    w = z.spacings()
    return float(np.dot(w, w) / z.v_max)


def spp_moments(v_max: float):
    """Mean and variance of the 3S statistic for the SPP on [0, v_max]."""
    v = float(v_max)
    e = math.exp(-v)
    mean = 2.0 / v * (v + e - 1.0)
    var = 4.0 / v ** 2 * (2.0 * v - 7.0 + e * (2.0 * v * v + 4.0 * v + 8.0 - e))
    return mean, var


def _ks_uniform_sup(u: np.ndarray) -> float:
    """sup |F_hat - F| for sorted CDF values ``u``, evaluated on both sides of each step."""
    n = len(u)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def stat_ks_arrival(z: TransformedSequence) -> float:
    n = len(z.points)
    if n == 0:
        return 0.0
    return math.sqrt(n) * _ks_uniform_sup(z.points / z.v_max)


def stat_ks_interevent(z: TransformedSequence) -> float:
    """sqrt(N) times the KS distance between the N + 1 spacings and Exponential(1)."""
    n = len(z.points)
    if n == 0:
        return 0.0
    w = np.sort(z.spacings())
    return math.sqrt(n) * _ks_uniform_sup(-np.expm1(-w))


def stat_chi_squared(z: TransformedSequence, buckets: int = 10, expected: str = "count") -> float:
    """Pearson statistic of the bucket counts over ``buckets`` equal-width bins of [0, V].

    ``expected="count"`` compares against N / B per bucket, so only the placement
    of the points matters; ``expected="interval"`` uses V / B, which also reacts
    to the total count. Bins are right-open except the last. With the count
    expectation an empty sequence scores 0.
    """
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    if expected == "count":
        n = len(z.points)
        if n == 0:
            return 0.0
        per_bucket = n / buckets
    elif expected == "interval":
        per_bucket = z.v_max / buckets
    else:
        raise ValueError(f"expected must be 'count' or 'interval', got {expected!r}")
    # search explicit edges so a point on a boundary lands right of it exactly
    edges = z.v_max * (np.arange(buckets + 1) / buckets)
    idx = np.clip(np.searchsorted(edges, z.points, side="right") - 1, 0, buckets - 1)
    counts = np.bincount(idx, minlength=buckets)
    return float(np.sum((counts - per_bucket) ** 2) / per_bucket)


@functools.lru_cache(maxsize=4096)
def _log_two_sided_poisson_p(n: int, mean: float) -> float:
    lower = log_poisson_cdf(n, mean)
    upper = log_poisson_sf_inclusive(n, mean)
    return min(0.0, math.log(2.0) + min(lower, upper))


def _fisher_from_ks(n: int, v_max: float, ks: float) -> float:
    log_p_count = _log_two_sided_poisson_p(n, v_max)
    log_p_ks = 0.0 if n == 0 else min(0.0, log_kolmogorov_sf(ks))
    return -2.0 * (log_p_count + log_p_ks)


def stat_fisher(z: TransformedSequence, variant: str = "arrival") -> float:
    """Fisher combination -2 (log p_N + log p_KS) of the count and KS p-values."""
    if variant == "arrival":
        ks = stat_ks_arrival(z)
    elif variant == "interevent":
        ks = stat_ks_interevent(z)
    else:
        raise ValueError(f"unknown Fisher variant {variant!r}")
    return _fisher_from_ks(len(z.points), z.v_max, ks)


def stat_loglik(model, seq: EventSequence) -> float:
    return model.log_likelihood(seq)


_SPP_STATISTICS = {
    StatisticKind.THREE_S: stat_3s,
    StatisticKind.KS_ARRIVAL: stat_ks_arrival,
    StatisticKind.KS_INTEREVENT: stat_ks_interevent,
    StatisticKind.CHI_SQUARED: stat_chi_squared,
    StatisticKind.FISHER_ARRIVAL: lambda z: stat_fisher(z, "arrival"),
    StatisticKind.FISHER_INTEREVENT: lambda z: stat_fisher(z, "interevent"),
}


def spp_statistic(kind, z: TransformedSequence) -> float:
    kind = StatisticKind.parse(kind)
    if kind is StatisticKind.LOG_LIKELIHOOD:
        raise ValueError("log-likelihood needs the model and the original sequence")
    return _SPP_STATISTICS[kind](z)


def compute(kind, model, seq: EventSequence) -> float:
    """Statistic of ``seq``: time-rescale by ``model`` then apply, or evaluate the log-likelihood."""
    kind = StatisticKind.parse(kind)
    if kind is StatisticKind.LOG_LIKELIHOOD:
        return stat_loglik(model, seq)
    return _SPP_STATISTICS[kind](time_rescale(model, seq, strict=False))


def compute_many(kinds: Iterable, model, seq: EventSequence) -> Dict[StatisticKind, float]:
    """Several statistics of one sequence, sharing one time rescaling and the KS values."""
    kinds = [StatisticKind.parse(k) for k in kinds]
    out = {}
    z = None
    ks = {}
    for kind in kinds:
        if kind is StatisticKind.LOG_LIKELIHOOD:
            out[kind] = stat_loglik(model, seq)
            continue
        if z is None:
            z = time_rescale(model, seq, strict=False)
        if kind in (StatisticKind.KS_ARRIVAL, StatisticKind.FISHER_ARRIVAL):
            if "arrival" not in ks:
                ks["arrival"] = stat_ks_arrival(z)
            value = ks["arrival"]
        elif kind in (StatisticKind.KS_INTEREVENT, StatisticKind.FISHER_INTEREVENT):
            if "interevent" not in ks:
                ks["interevent"] = stat_ks_interevent(z)
            value = ks["interevent"]
        else:
            out[kind] = _SPP_STATISTICS[kind](z)
            continue
        if kind in (StatisticKind.FISHER_ARRIVAL, StatisticKind.FISHER_INTEREVENT):
            value = _fisher_from_ks(len(z.points), z.v_max, value)
        out[kind] = value
    return out


def spp_3s_samples(v_max: float, size: int, rng) -> np.ndarray:
    """Draws of the 3S statistic for the SPP on [0, v_max].

    Given N ~ Poisson(V), the normalized spacings are flat-Dirichlet, i.e.
    ``E_i / sum(E)`` for N + 1 unit exponentials.
    """
    gen = as_generator(rng)
    counts = gen.poisson(v_max, size=size)
    width = int(counts.max()) + 1
    e = gen.exponential(1.0, size=(size, width))
    e[np.arange(width)[None, :] > counts[:, None]] = 0.0
    return v_max * np.sum(e * e, axis=1) / np.sum(e, axis=1) ** 2
