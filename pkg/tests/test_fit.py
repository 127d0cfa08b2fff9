import math

import numpy as np
import pytest

from conftest import seq
from tppood.core import Dataset
from tppood.errors import EmptyDataset
from tppood.fit import RATE_FLOOR, FitConfig, fit_hawkes, fit_hawkes_detailed, fit_poisson, loglik_gradient
from tppood.model import ExpHawkes
from tppood.rng import RngHandle
from tppood.simulate import SERVER_INFLUENCE, SERVER_MU, sample_dataset, sample_hawkes, sample_poisson


def reference_loglik(times, marks, mu, infl, decay, t_max):
    """Direct O(N^2) Hawkes log-likelihood, independent of the recursive kernel."""
    ll = 0.0
    for e, (t, m) in enumerate(zip(times, marks)):
        past = times[:e]
        lam = mu[m] + np.sum(infl[m, marks[:e]] * np.exp(-decay * (t - past)))
        ll += math.log(lam)
    ll -= np.sum(mu) * t_max
    for t, m in zip(times, marks):
        ll -= np.sum(infl[:, m]) / decay * (1 - math.exp(-decay * (t_max - t)))
    return ll


def random_case(gen, i):
    k = int(gen.integers(1, 4))
    decay = gen.uniform(0.5, 2.0)
    infl = gen.uniform(0.0, 1.0, (k, k))
    infl *= gen.uniform(0.2, 0.9) * decay / np.abs(np.linalg.eigvals(infl)).max()
    model = ExpHawkes(tuple(gen.uniform(0.2, 1.5, k)), infl, decay)
    return model, model.sample(gen.uniform(5.0, 30.0), RngHandle(21, (i,)))


def central_difference(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


@pytest.mark.parametrize("i", range(100))
def test_gradient_matches_finite_differences(i):
    gen = np.random.default_rng(1000 + i)
    model, s = random_case(gen, i)
    times, marks, t_max = s.arrival_times, s.mark_array(), s.t_max
    mu, infl, decay = model.mu_array, model.influence_array, model.decay
    g = loglik_gradient(model, s)
    assert g.loglik == pytest.approx(reference_loglik(times, marks, mu, infl, decay, t_max), rel=1e-10)

    def check(analytic, f, x):
        h = 1e-5 * max(abs(x), 1.0)
        fd = central_difference(f, x, h)
        # the absolute floor covers coordinates whose derivative is near zero
        assert abs(analytic - fd) <= 1e-4 * max(abs(fd), 1.0)

    for k in range(len(mu)):
        def f_mu(x, k=k):
            m = mu.copy()
            m[k] = x
            return reference_loglik(times, marks, m, infl, decay, t_max)
        check(g.mu[k], f_mu, mu[k])
        for j in range(len(mu)):
            def f_a(x, k=k, j=j):
                a = infl.copy()
                a[k, j] = x
                return reference_loglik(times, marks, mu, a, decay, t_max)
            check(g.influence[k, j], f_a, infl[k, j])
    check(g.decay, lambda x: reference_loglik(times, marks, mu, infl, x, t_max), decay)


def test_gradient_special_cases():
    s = seq([0.5, 1.5, 4.0], 6.0)
    g = loglik_gradient(ExpHawkes((0.7,), [[0.0]], 1.0), s)
    assert g.mu[0] == pytest.approx(3 / 0.7 - 6.0, rel=1e-14)
    empty = seq([], 6.0, marks=[], k=2)
    g = loglik_gradient(ExpHawkes((0.7, 0.3), [[0.1, 0.2], [0.0, 0.3]], 1.0), empty)
    np.testing.assert_array_equal(g.mu, [-6.0, -6.0])
    np.testing.assert_array_equal(g.influence, np.zeros((2, 2)))
    assert g.loglik == pytest.approx(-6.0)


# --- Poisson --------------------------------------------------------------------


def test_fit_poisson_closed_form():
    data = Dataset([seq([1, 2, 3], 10.0), seq([1, 2, 3, 4, 5], 10.0)])
    assert fit_poisson(data).rates == (0.4,)


def test_fit_poisson_recovers_rate():
    data = sample_dataset(lambda r: sample_poisson(1.0, 100.0, r), 1000, RngHandle(12))
    assert abs(fit_poisson(data).rates[0] - 1.0) < 0.01


def test_fit_poisson_floors_empty_marks():
    data = Dataset([seq([1.0, 2.0], 4.0, marks=[0, 0], k=3)], 3)
    assert fit_poisson(data).rates == (0.5, RATE_FLOOR, RATE_FLOOR)


def test_fit_rejects_empty_dataset():
    with pytest.raises(EmptyDataset):
        fit_poisson(Dataset([]))
    with pytest.raises(EmptyDataset):
        fit_hawkes(Dataset([]))


@pytest.mark.parametrize("kwargs", [dict(max_iterations=0), dict(step_size=0.0),
                                    dict(convergence_tol=-1.0)])
def test_fit_config_validation(kwargs):
    with pytest.raises(ValueError):
        FitConfig(**kwargs)


# --- Hawkes ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def server_fit():
    data = sample_dataset(lambda r: sample_hawkes(SERVER_MU, SERVER_INFLUENCE, 1.0, 100.0, r),
                          1000, RngHandle(31), 3)
    return fit_hawkes_detailed(data, FitConfig())


def assert_recovered(estimate, truth):
    estimate, truth = np.asarray(estimate), np.asarray(truth, dtype=float)
    nonzero = truth != 0
    np.testing.assert_array_less(np.abs(estimate[nonzero] - truth[nonzero]), 0.1 * truth[nonzero])
    np.testing.assert_array_less(np.abs(estimate[~nonzero]), 0.05)


@pytest.mark.slow
def test_hawkes_fit_recovers_server_parameters(server_fit):
    model = server_fit.model
    assert_recovered(model.mu, SERVER_MU)
    assert_recovered(model.influence_array, SERVER_INFLUENCE)
    assert abs(model.decay - 1.0) < 0.1


@pytest.mark.slow
def test_hawkes_fit_trace_is_monotone(server_fit):
    trace = np.asarray(server_fit.trace)
    assert np.all(np.diff(trace) >= -1e-9)
    assert server_fit.converged
    assert len(trace) <= server_fit.iterations + 1


def test_hawkes_fit_on_poisson_data():
    data = sample_dataset(lambda r: sample_poisson(1.0, 100.0, r), 300, RngHandle(13))
    model = fit_hawkes(data)
    assert abs(model.mu[0] - 1.0) < 0.05
    assert model.influence_array.max() < 0.05


def test_hawkes_fit_is_deterministic():
    data = sample_dataset(lambda r: sample_hawkes([0.5], [[0.5]], 1.0, 50.0, r), 50, RngHandle(14))
    a = fit_hawkes_detailed(data, FitConfig(max_iterations=50))
    b = fit_hawkes_detailed(data, FitConfig(max_iterations=50))
    assert a.model == b.model and a.trace == b.trace


def test_hawkes_fit_with_frozen_decay():
    data = sample_dataset(lambda r: sample_hawkes([0.5], [[0.5]], 1.0, 50.0, r), 100, RngHandle(15))
    result = fit_hawkes_detailed(data, FitConfig(fit_decay=False, max_iterations=300))
    assert result.model.decay == 1.0
    assert result.trace[-1] > result.trace[0]


def test_hawkes_fit_on_single_empty_sequence():
    result = fit_hawkes_detailed(Dataset([seq([], 10.0)]))
    assert result.model.mu[0] == pytest.approx(RATE_FLOOR, rel=1e-9)
    assert math.isfinite(result.trace[-1])
    # no events, so the influence gradient is exactly zero and it keeps its start value
    assert result.model.influence_array[0, 0] == pytest.approx(FitConfig().initial_influence)
