"""Closed-form performance measures for the collector setting.

Everything here treats links as independent attempt processes: link i
attempts with probability tau_i each slot, picks one of M channels
uniformly, and a tagged attempt survives when no other attempt lands on
the same channel. The attempt-count distribution is Poisson binomial;
the rest of the chain (throughput, service moments, delay, collisions,
energy) is exact given that distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PerfReport:
    """Per-link analytic performance at a fixed policy.

    ``success_prob`` is per attempt (the tagged link's attempt survives
    everyone else), so service and energy figures chain off it together
    with the attempt probability.
    """

    throughput: float
    success_prob: np.ndarray
    mean_service: np.ndarray
    second_moment_service: np.ndarray
    delay: np.ndarray
    stable: np.ndarray
    expected_collisions: np.ndarray
    energy_per_success: np.ndarray


def _check_tau(tau):
    t = np.asarray(tau, dtype=float)
    if t.ndim != 1:
        raise ValueError("tau must be one-dimensional")
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise ValueError("tau entries must lie in [0, 1]")
    return t


def poisson_binomial(tau):
    """Distribution of the number of simultaneous attempts.

    Evaluates the characteristic function on the N+1 roots of unity and
    inverts with a direct DFT (O(N^2), exact up to rounding). Raises if
    the inversion leaves an imaginary residue above 1e-10; tiny negative
    masses (>= -1e-12) are clamped and the pmf renormalized.
    """
    t = _check_tau(tau)
    size = t.size + 1
    omega = 2.0 * np.pi / size
    grid = np.arange(size)
    phases = np.exp(1j * omega * grid)
    char = np.prod(1.0 - t[:, None] + t[:, None] * phases[None, :], axis=0)
    kernel = np.exp(-1j * omega * np.outer(grid, grid))
    pmf_c = kernel @ char / size
    residue = float(np.abs(pmf_c.imag).max())
    if residue > 1e-10:
        raise ValueError(f"DFT inversion left imaginary residue {residue:g}")
    pmf = pmf_c.real
    if pmf.min() < -1e-12:
        raise ValueError(f"DFT inversion produced mass {pmf.min():g}")
    pmf = np.clip(pmf, 0.0, None)
    return pmf / pmf.sum()


def system_throughput(pmf, channel_count):
    """Expected successful transmissions per slot.

    Conditional on k attempts, each survives the other k-1 with
    probability (1 - 1/M)^(k-1) because channels are picked uniformly
    and independently.
    """
    m = int(channel_count)
    if m < 1:
        raise ValueError("channel_count must be >= 1")
    p = np.asarray(pmf, dtype=float)
    k = np.arange(p.size, dtype=float)
    base = 1.0 - 1.0 / m
    # exponent clamp keeps k=0 away from base**(-1); that term is zero anyway
    factors = np.power(base, np.maximum(k - 1.0, 0.0))
    return float(np.sum(p * k * factors))


def tagged_success_prob(tau, link, channel_count):
    """Probability one attempt by `link` survives all other links."""
    t = _check_tau(tau)
    m = int(channel_count)
    if m < 1:
        raise ValueError("channel_count must be >= 1")
    if not 0 <= link < t.size:
        raise ValueError(f"link index {link} out of range")
    others = np.delete(t, link)
    return float(np.prod(1.0 - others / m))


def service_moments(tau_i, p_i):
    """Mean and second moment of the geometric service time.

    A head-of-line packet departs a given slot with probability
    x = tau_i * p_i, so service is geometric on {1, 2, ...}. Zero
    success rate yields infinite moments, not an error.
    """
    x = float(tau_i) * float(p_i)
    if not 0.0 <= x <= 1.0:
        raise ValueError("tau_i * p_i must lie in [0, 1]")
    if x == 0.0:
        return math.inf, math.inf
    return 1.0 / x, (2.0 - x) / x**2


def total_delay(arrival_rate, mean_service, second_moment_service):
    """Mean sojourn time of a queued packet (service plus waiting).

    Standard M/G/1 waiting term on top of the service mean; an unstable
    load (arrival_rate * mean_service >= 1) returns inf as a value so
    reports can flag the row instead of failing.
    """
    lam = float(arrival_rate)
    if lam < 0:
        raise ValueError("arrival_rate must be nonnegative")
    if not math.isfinite(mean_service):
        return math.inf
    rho = lam * mean_service
    if rho >= 1.0:
        return math.inf
    return mean_service + lam * second_moment_service / (2.0 * (1.0 - rho))


def collisions_and_energy(p, e_tx):
    """Expected collisions and transmit energy per delivered packet.

    Attempts repeat until one survives, so the attempt count is
    geometric with mean 1/p; all but the last collide.
    """
    prob = np.asarray(p, dtype=float)
    if prob.ndim == 0:
        prob = prob[None]
        scalar = True
    else:
        scalar = False
    if prob.size and (prob.min() < 0.0 or prob.max() > 1.0):
        raise ValueError("success probabilities must lie in [0, 1]")
    if e_tx < 0:
        raise ValueError("e_tx must be nonnegative")
    with np.errstate(divide="ignore"):
        attempts = np.where(prob > 0, 1.0 / prob, np.inf)
    collisions = attempts - 1.0
    energy = float(e_tx) * attempts
    if scalar:
        return float(collisions[0]), float(energy[0])
    return collisions, energy


def perf_report(tau, channel_count, arrival_rates=None, e_tx=1.0):
    """Assemble the full analytic report for a policy.

    ``arrival_rates`` defaults to zero everywhere, which reduces delay
    to the bare service mean. Unstable links get delay inf and
    stable=False; the rows stay in the report.
    """
    t = _check_tau(tau)
    m = int(channel_count)
    n = t.size
    if arrival_rates is None:
        lam = np.zeros(n)
    else:
        lam = np.asarray(arrival_rates, dtype=float)
        if lam.shape != (n,):
            raise ValueError("arrival_rates must match the link count")
        if n and lam.min() < 0:
            raise ValueError("arrival rates must be nonnegative")
    pmf = poisson_binomial(t)
    throughput = system_throughput(pmf, m)
    p = np.array([tagged_success_prob(t, i, m) for i in range(n)])
    mean = np.empty(n)
    second = np.empty(n)
    delay = np.empty(n)
    for i in range(n):
        mean[i], second[i] = service_moments(t[i], p[i])
        delay[i] = total_delay(lam[i], mean[i], second[i])
    stable = np.array([lam[i] * mean[i] < 1.0 if math.isfinite(mean[i])
                       else False for i in range(n)], dtype=bool)
    collisions, energy = collisions_and_energy(p, e_tx)
    return PerfReport(
        throughput=throughput,
        success_prob=p,
        mean_service=mean,
        second_moment_service=second,
        delay=delay,
        stable=stable,
        expected_collisions=collisions,
        energy_per_success=energy,
    )
