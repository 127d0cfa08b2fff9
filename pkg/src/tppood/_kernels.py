"""Compiled inner loops for the sequential samplers and exponential-Hawkes recursions.

Hawkes excitation is tracked per *source* mark: ``R[j](t) = sum over events
of mark j before t of exp(-decay * (t - t_l))``, so that
``lambda_i(t) = mu_i + sum_j A[i, j] R[j](t)``. All recursions are O(N K).
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _grow(arr, n):
    out = np.empty(max(16, 2 * n), dtype=arr.dtype)
    out[:n] = arr[:n]
    return out


@njit(cache=True)
def hawkes_thinning(rng, mu, infl_pre, infl_post, t_switch, decay, t_max):
    """Ogata thinning. Events before ``t_switch`` excite through ``infl_pre``,
    later events through ``infl_post``; the bound is the current total intensity."""
    k = mu.shape[0]
    r_pre = np.zeros(k)
    r_post = np.zeros(k)
    col_pre = infl_pre.sum(axis=0)
    col_post = infl_post.sum(axis=0)
    mu_total = mu.sum()
    times = np.empty(64)
    marks = np.empty(64, dtype=np.int64)
    n = 0
    t = 0.0
    lam_i = np.empty(k)
    while True:
        bound = mu_total
        for j in range(k):
            bound += col_pre[j] * r_pre[j] + col_post[j] * r_post[j]
        if bound <= 0.0:
            break
        dt = rng.exponential(1.0) / bound
        t_new = t + dt
        if t_new > t_max:
            break
        f = math.exp(-decay * dt)
        for j in range(k):
            r_pre[j] *= f
            r_post[j] *= f
        t = t_new
        total = 0.0
        for i in range(k):
            li = mu[i]
            for j in range(k):
                li += infl_pre[i, j] * r_pre[j] + infl_post[i, j] * r_post[j]
            lam_i[i] = li
            total += li
        u = rng.random() * bound
        if u > total:
            continue
        if n > 0 and t <= times[n - 1]:
            # floating-point tie with the previous event: reject and redraw
            continue
        acc = 0.0
        m = k - 1
        for i in range(k):
            acc += lam_i[i]
            if u <= acc:
                m = i
                break
        if n == times.shape[0]:
            times = _grow(times, n)
            marks = _grow(marks, n)
        times[n] = t
        marks[n] = m
        n += 1
        if t < t_switch:
            r_pre[m] += 1.0
        else:
            r_post[m] += 1.0
    return times[:n].copy(), marks[:n].copy()


@njit(cache=True)
def self_correcting_inversion(rng, mu, alpha, t_max):
    times = np.empty(128)
    n = 0
    t = 0.0
    while True:
        e = rng.exponential(1.0)
        # solves exp(-alpha n) (exp(mu t') - exp(mu t)) / mu = e, written stably
        t_new = t + math.log1p(mu * e * math.exp(alpha * n - mu * t)) / mu
        if t_new > t_max:
            break
        if t_new <= t:
            continue
        if n == times.shape[0]:
            times = _grow(times, n)
        times[n] = t_new
        n += 1
        t = t_new
    return times[:n].copy()


@njit(cache=True)
def hawkes_rescale(times, marks, mu, infl, decay, t_max):
    """Per-event own-mark compensator values and per-mark totals at t_max."""
    k = mu.shape[0]
    n = times.shape[0]
    r = np.zeros(k)
    counts = np.zeros(k)
    out = np.empty(n)
    t_prev = 0.0
    for e in range(n):
        t = times[e]
        f = math.exp(-decay * (t - t_prev))
        for j in range(k):
            r[j] *= f
        m = marks[e]
        val = mu[m] * t
        for j in range(k):
            val += infl[m, j] * (counts[j] - r[j]) / decay
        out[e] = val
        r[m] += 1.0
        counts[m] += 1.0
        t_prev = t
    f = math.exp(-decay * (t_max - t_prev))
    totals = np.empty(k)
    for j in range(k):
        r[j] *= f
    for i in range(k):
        val = mu[i] * t_max
        for j in range(k):
            val += infl[i, j] * (counts[j] - r[j]) / decay
        totals[i] = val
    return out, totals


@njit(cache=True)
def hawkes_loglik_grad(times, marks, mu, infl, decay, t_max, want_grad):
    """Log-likelihood and (optionally) its gradient w.r.t. mu, influence, decay.

    Returns ``(ll, g_mu, g_infl, g_decay)``; ll is -inf when an event has
    nonpositive intensity under its own mark.
    """
    k = mu.shape[0]
    n = times.shape[0]
    r = np.zeros(k)
    s = np.zeros(k)  # s[j] = sum (t - t_l) exp(-decay (t - t_l)) = -dR/d(decay)
    counts = np.zeros(k)
    g_mu = np.zeros(k)
    g_infl = np.zeros((k, k))
    g_decay = 0.0
    ll = 0.0
    t_prev = 0.0
    for e in range(n):
        t = times[e]
        dt = t - t_prev
        f = math.exp(-decay * dt)
        for j in range(k):
            s[j] = f * (s[j] + dt * r[j])
            r[j] *= f
        m = marks[e]
        lam = mu[m]
        for j in range(k):
            lam += infl[m, j] * r[j]
        if not lam > 0.0:
            return -np.inf, g_mu, g_infl, g_decay
        ll += math.log(lam)
        if want_grad:
            inv = 1.0 / lam
            g_mu[m] += inv
            for j in range(k):
                g_infl[m, j] += r[j] * inv
                g_decay -= infl[m, j] * s[j] * inv
        r[m] += 1.0
        counts[m] += 1.0
        t_prev = t
    dt = t_max - t_prev
    f = math.exp(-decay * dt)
    for j in range(k):
        s[j] = f * (s[j] + dt * r[j])
        r[j] *= f
    for i in range(k):
        ll -= mu[i] * t_max
        for j in range(k):
            ll -= infl[i, j] * (counts[j] - r[j]) / decay
    if want_grad:
        for i in range(k):
            g_mu[i] -= t_max
            for j in range(k):
                g_infl[i, j] -= (counts[j] - r[j]) / decay
                # d/d(decay) of (counts - r) / decay = s / decay - (counts - r) / decay^2
                g_decay -= infl[i, j] * (s[j] / decay - (counts[j] - r[j]) / (decay * decay))
    return ll, g_mu, g_infl, g_decay


@njit(cache=True)
def hawkes_dataset_loglik_grad(times, marks, offsets, t_maxes, mu, infl, decay, want_grad):
    """Sum of per-sequence log-likelihoods and gradients, in sequence order.

    Sequence s occupies ``times[offsets[s]:offsets[s + 1]]``. Also returns the
    sums of squared per-sequence gradients (mu, influence, decay), the
    diagonal of the empirical Fisher information up to normalization.
    """
    k = mu.shape[0]
    total = 0.0
    g_mu = np.zeros(k)
    g_infl = np.zeros((k, k))
    g_decay = 0.0
    sq_mu = np.zeros(k)
    sq_infl = np.zeros((k, k))
    sq_decay = 0.0
    for s in range(t_maxes.shape[0]):
        a, b = offsets[s], offsets[s + 1]
        ll, gm, gi, gd = hawkes_loglik_grad(times[a:b], marks[a:b], mu, infl, decay,
                                            t_maxes[s], want_grad)
        total += ll
        if want_grad:
            g_mu += gm
            g_infl += gi
            g_decay += gd
            sq_mu += gm * gm
            sq_infl += gi * gi
            sq_decay += gd * gd
    return total, g_mu, g_infl, g_decay, sq_mu, sq_infl, sq_decay
