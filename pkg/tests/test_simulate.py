import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import gamma as gamma_dist

from tppood.core import validate
from tppood.detect import roc_auc
from tppood.errors import InvalidDelta, NonStationaryParameters, ParameterDomainError
from tppood.rng import RngHandle
from tppood.simulate import (SINE_OMEGA, SPP_SCENARIOS, Scenario, ScenarioSpec, id_sampler,
                             make_scenario_pair, ood_sampler, sample_dataset, sample_gamma_renewal,
                             sample_hawkes, sample_inhomogeneous_sine, sample_latency,
                             sample_poisson, sample_self_correcting, sample_spp)
from tppood.stats import stat_3s
from tppood.core import TransformedSequence


def counts(sampler, n, seed=0):
    return sample_dataset(sampler, n, RngHandle(seed)).event_counts()


def renewal_mean_count(shape, scale, t_max):
    """E[N(T)] = sum_n P(S_n <= T) with S_n ~ Gamma(n shape, scale)."""
    n = np.arange(1, 20 * int(t_max / (shape * scale)) + 200)
    return float(gamma_dist.cdf(t_max, n * shape, scale=scale).sum())


def test_spp_count_moments():
    c = counts(lambda r: sample_spp(100.0, r), 10_000)
    assert abs(c.mean() - 100) < 1.0
    assert abs(c.var(ddof=1) - 100) < 5.0


def test_spp_is_deterministic():
    a = sample_spp(100.0, RngHandle(3, 1))
    b = sample_spp(100.0, RngHandle(3, 1))
    assert a == b and len(a) > 0


def test_inhomogeneous_beta_zero_matches_spp():
    t = 100.0
    a = sample_dataset(lambda r: sample_inhomogeneous_sine(0.0, SINE_OMEGA, t, r), 1000, RngHandle(1))
    b = sample_dataset(lambda r: sample_spp(t, r), 1000, RngHandle(2))
    s = lambda d: [stat_3s(TransformedSequence(x.arrival_times, t)) for x in d]
    assert abs(roc_auc(s(a), s(b)) - 0.5) < 0.03


def test_inhomogeneous_clamped_mean_count():
    expected, _ = integrate.quad(lambda u: max(0.0, 1 + 2 * math.sin(SINE_OMEGA * u)), 0, 100, limit=200)
    c = counts(lambda r: sample_inhomogeneous_sine(2.0, SINE_OMEGA, 100.0, r), 10_000)
    assert abs(c.mean() - expected) < 0.01 * expected


def test_inhomogeneous_has_no_events_where_intensity_is_zero():
    d = sample_dataset(lambda r: sample_inhomogeneous_sine(2.0, SINE_OMEGA, 100.0, r), 200, RngHandle(4))
    t = np.concatenate([s.arrival_times for s in d])
    assert np.all(1 + 2 * np.sin(SINE_OMEGA * t) > -1e-9)


def test_gamma_renewal_exponential_case():
    c = counts(lambda r: sample_gamma_renewal(1.0, 1.0, 100.0, r), 10_000)
    assert abs(c.mean() - 100) < 1.0


def test_gamma_renewal_mean_gap_one():
    c = counts(lambda r: sample_gamma_renewal(0.5, 2.0, 100.0, r), 10_000)
    assert abs(c.mean() - 100) < 2.0


@pytest.mark.parametrize("delta", [0.5, 0.9, 0.95])
def test_gamma_renewal_matches_renewal_function(delta):
    shape, scale = 1 - delta, 1 / (1 - delta)
    c = counts(lambda r: sample_gamma_renewal(shape, scale, 100.0, r), 4000, seed=11)
    se = c.std(ddof=1) / math.sqrt(len(c))
    assert abs(c.mean() - renewal_mean_count(shape, scale, 100.0)) < 4 * se


def test_gamma_renewal_deterministic():
    assert sample_gamma_renewal(0.3, 3.0, 50.0, RngHandle(9)) == sample_gamma_renewal(0.3, 3.0, 50.0, RngHandle(9))


def test_hawkes_preserves_mean_count():
    c = counts(lambda r: sample_hawkes([0.5], [[0.5]], 1.0, 100.0, r), 10_000)
    assert abs(c.mean() - 100) < 2.0


def test_hawkes_without_excitation_is_poisson():
    c = counts(lambda r: sample_hawkes([0.7], [[0.0]], 1.0, 100.0, r), 5000)
    assert abs(c.mean() - 70) < 4 * math.sqrt(70 / 5000)
    assert abs(c.var(ddof=1) / c.mean() - 1) < 0.1


def test_server_branching_ratio():
    d = sample_dataset(id_sampler(ScenarioSpec(Scenario.SERVER_STOP, 0.0)), 1000, RngHandle(3), 3)
    m = np.concatenate([s.marks for s in d])
    c = np.bincount(m, minlength=3)
    assert abs(c[1] / c[0] - 1) < 0.05
    assert abs(c[2] / c[0] - 1) < 0.05


def test_server_workers_only_follow_server_events():
    s = id_sampler(ScenarioSpec(Scenario.SERVER_OVERLOAD, 0.0))(RngHandle(5))
    first_server = s.arrival_times[s.marks == 0][0]
    assert np.all(s.arrival_times[s.marks > 0] > first_server)


def test_hawkes_stationarity_checked():
    with pytest.raises(NonStationaryParameters):
        sample_hawkes([1.0], [[1.5]], 1.0, 10.0, RngHandle(0))
    with pytest.raises(ParameterDomainError):
        sample_hawkes([-1.0], [[0.5]], 1.0, 10.0, RngHandle(0))


def test_hawkes_without_immigrants_is_empty():
    assert len(sample_hawkes([0.0], [[1.0]], 1.0, 100.0, RngHandle(0))) == 0


def test_self_correcting_mean_count():
    c = counts(lambda r: sample_self_correcting(1.0 + 1e-5, 1.0, 100.0, r), 10_000)
    assert abs(c.mean() - 100) < 3.0


def test_self_correcting_near_poisson_limit():
    c = counts(lambda r: sample_self_correcting(1e-5, 0.0, 100.0, r), 5000)
    # intensity exp(1e-5 t) integrates to 100.05
    assert abs(c.mean() - 100.05) < 4 * math.sqrt(100 / 5000)


def test_self_correcting_is_regular():
    d = sample_dataset(lambda r: sample_self_correcting(1.0 + 1e-5, 1.0, 100.0, r), 500, RngHandle(2))
    gaps = np.concatenate([np.diff(s.arrival_times) for s in d])
    assert gaps.std() / gaps.mean() < 1.0


def test_latency_responses_follow_triggers():
    s = sample_latency(1.0, 100.0, RngHandle(3))
    assert s.num_marks == 2
    n_trig = int(np.sum(s.marks == 0))
    n_resp = int(np.sum(s.marks == 1))
    assert n_resp <= n_trig and n_trig - n_resp < 15


def test_stopping_has_no_late_events():
    spec = ScenarioSpec(Scenario.STOPPING, 1.0)
    _, ood = make_scenario_pair(spec, 10, 1000, RngHandle(0))
    assert all(s.t_max == 100.0 for s in ood)
    assert all(len(s) == 0 or s.arrival_times[-1] < 70.0 for s in ood)


def test_rate_halves_event_count():
    _, ood = make_scenario_pair(ScenarioSpec(Scenario.RATE, 1.0), 10, 1000, RngHandle(0))
    assert abs(ood.event_counts().mean() - 50) < 2


@pytest.mark.parametrize("kind, delta", [
    (Scenario.HAWKES, 0.5), (Scenario.SELF_CORRECTING, 0.5),
    (Scenario.INHOMOGENEOUS, 0.5), (Scenario.RENEWAL, 0.5), (Scenario.RENEWAL, 0.75),
    (Scenario.RENEWAL_B, 0.5), (Scenario.RENEWAL_B, 0.95)])
def test_mean_count_preserved(kind, delta):
    c = sample_dataset(ood_sampler(ScenarioSpec(kind, delta)), 10_000, RngHandle(21)).event_counts()
    assert abs(c.mean() - 100) < 3.0


def hawkes_mean_count(mu, alpha, decay, t_max):
    """E[N(T)] for a univariate exponential Hawkes process started empty."""
    r = decay - alpha
    stationary = mu * decay / r
    return stationary * t_max + (mu - stationary) * (1 - math.exp(-r * t_max)) / r


@pytest.mark.parametrize("delta", [0.5, 0.9])
def test_hawkes_mean_count_matches_transient_oracle(delta):
    c = sample_dataset(ood_sampler(ScenarioSpec(Scenario.HAWKES, delta)), 10_000, RngHandle(5)).event_counts()
    se = c.std(ddof=1) / math.sqrt(len(c))
    assert abs(c.mean() - hawkes_mean_count(1 - delta, delta, 1.0, 100.0)) < 4 * se


def test_renewal_rejects_delta_one():
    for kind in (Scenario.RENEWAL, Scenario.RENEWAL_B):
        with pytest.raises(InvalidDelta):
            ScenarioSpec(kind, 1.0)
    with pytest.raises(InvalidDelta):
        ScenarioSpec(Scenario.RATE, 1.5)


def test_scenario_pair_streams_are_disjoint_and_reproducible():
    spec = ScenarioSpec(Scenario.RATE, 0.0)
    a_id, a_ood = make_scenario_pair(spec, 5, 5, RngHandle(1))
    b_id, b_ood = make_scenario_pair(spec, 5, 5, RngHandle(1))
    assert a_id == b_id and a_ood == b_ood
    assert a_id[0] != a_ood[0]


def test_every_sampler_output_validates():
    """Fuzz: 10^4 random simulator calls, all outputs valid."""
    gen = np.random.default_rng(2024)
    kinds = list(Scenario)
    for i in range(10_000):
        kind = kinds[i % len(kinds)]
        hi = 0.999 if kind in (Scenario.RENEWAL, Scenario.RENEWAL_B) else 1.0
        delta = float(gen.uniform(0, hi))
        t_max = float(gen.choice([1.0, 10.0, 37.5, 100.0]))
        spec = ScenarioSpec(kind, delta, t_max)
        sampler = ood_sampler(spec) if i % 2 else id_sampler(spec)
        seq = sampler(RngHandle(i))
        assert seq.num_marks == kind.num_marks
        validate(seq)
