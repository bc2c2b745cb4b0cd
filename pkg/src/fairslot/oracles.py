"""Slow reference implementations used to cross-check the fast paths.

Everything in this module is deliberately naive: plain loops, explicit
convolutions, exhaustive enumeration, finite differences. The test suite
and the ``validate`` command compare these against the production code,
so nothing here may import from the modules it checks.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def success_count_pmf_conv(tau):
    """PMF of the number of simultaneous transmitters, by direct convolution."""
    pmf = np.array([1.0])
    for t in np.asarray(tau, dtype=float):
        pmf = np.convolve(pmf, [1.0 - t, t])
    return pmf


def throughput_by_enumeration(tau, channel_count):
    """Expected successes per slot in a collector group, fully enumerated.

    Walks every transmit pattern and every channel assignment; a
    transmission succeeds when no other transmitter picked the same
    channel. Exponential in the number of links, so keep inputs small.
    """
    tau = np.asarray(tau, dtype=float)
    n = tau.size
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=n):
        prob = 1.0
        for i, bit in enumerate(pattern):
            prob *= tau[i] if bit else 1.0 - tau[i]
        senders = [i for i in range(n) if pattern[i]]
        if prob == 0.0 or not senders:
            continue
        mean_wins = 0.0
        k = len(senders)
        for channels in itertools.product(range(channel_count), repeat=k):
            for j in range(k):
                if all(channels[j] != channels[o] for o in range(k) if o != j):
                    mean_wins += 1.0
        total += prob * mean_wins / channel_count**k
    return total


def conflicts_by_predicates(links, interference):
    """Classify every ordered link pair straight from the two definitions.

    A pair conflicts primarily when the endpoint sets intersect. An
    endpoint-disjoint pair conflicts secondarily when either transmitter
    lies within interference range of the other pair's receiver.
    """
    prim = [set() for _ in links]
    sec = [set() for _ in links]
    for a, (n, m) in enumerate(links):
        for b, (l, k) in enumerate(links):
            if b == a:
                continue
            if {l, k} & {n, m}:
                prim[a].add(b)
            elif (m in interference[l]) or (k in interference[n]):
                sec[a].add(b)
    return prim, sec


def objective_by_terms(primary, secondary_only, weights, tau, channel_count):
    """Weighted log-utility recomputed term by term with scalar loops."""
    total = 0.0
    for i, wi in enumerate(weights):
        if wi == 0.0:
            continue
        mu = tau[i]
        for j in primary[i]:
            mu *= 1.0 - tau[j]
        for j in secondary_only[i]:
            mu *= 1.0 - tau[j] / channel_count
        if mu <= 0.0:
            return float("-inf")
        total += wi * math.log(mu)
    return total


def fd_gradient(f, x, step=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return grad


def fd_second_directional(f, x, direction, eps=1e-4):
    """Second difference of f along a direction; <= 0 for concave f."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    return (f(x + eps * d) - 2.0 * f(x) + f(x - eps * d)) / eps**2


def fd_hessian_diag(f, x, eps=1e-4):
    """Diagonal of the Hessian by coordinate-wise second differences."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    fx = f(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        out[i] = (f(x + e) - 2.0 * fx + f(x - e)) / eps**2
    return out


def collector_optimum_by_grid(weights, channel_count, step=1e-3):
    """Maximize the collector log-utility over a step-spaced grid.

    The utility splits into independent per-link terms
    ``w_j*ln(t) + (W - w_j)*ln(1 - t/M)``, so the grid maximum subject to
    ``sum(tau) <= M`` is found exactly by dynamic programming over the
    discretized budget instead of enumerating the full grid. Returns
    ``(best_value, best_tau)`` with every entry a multiple of ``step``.
    """
    w = np.asarray(weights, dtype=float)
    total_w = w.sum()
    m = channel_count
    levels = int(round(1.0 / step))
    budget = int(round(m / step))
    vals = step * np.arange(1, levels + 1)
    prev = np.full(budget + 1, -np.inf)
    prev[0] = 0.0
    choices = []
    for wj in w:
        rest = total_w - wj
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = rest * np.log1p(-vals / m) if rest > 0 else 0.0
            phi = wj * np.log(vals) + cross
        best = np.full(budget + 1, -np.inf)
        choice = np.zeros(budget + 1, dtype=np.int64)
        for u in range(1, min(levels, budget) + 1):
            cand = prev[:-u] + phi[u - 1]
            better = cand > best[u:]
            idx = np.nonzero(better)[0] + u
            best[idx] = cand[better]
            choice[idx] = u
        choices.append(choice)
        prev = best
    b = int(np.argmax(prev))
    value = prev[b]
    tau = np.zeros(w.size)
    for j in range(w.size - 1, -1, -1):
        u = choices[j][b]
        tau[j] = u * step
        b -= u
    return float(value), tau


def general_optimum_by_grid(primary, secondary_only, weights, channel_count,
                            step=0.02):
    """Exhaustive grid search for the neighborhood-constrained program.

    Evaluates the weighted log-utility at every grid point with all
    coordinates in {step, 2*step, ..., 1}, discards points violating any
    per-link constraint ``tau_i + sum over conflicting tau_j <= M``, and
    returns ``(best_value, best_tau)``. Contribution tables per axis keep
    it tractable; memory is chunked over the first axis. Use only for a
    handful of links.
    """
    w = np.asarray(weights, dtype=float)
    s = w.size
    if s > 6:
        raise ValueError("grid oracle limited to 6 links")
    m = channel_count
    levels = int(round(1.0 / step))
    vals = step * np.arange(1, levels + 1)

    # Reverse maps built by plain loops; no symmetry assumption.
    hit_prim = [set() for _ in range(s)]
    hit_sec = [set() for _ in range(s)]
    for i in range(s):
        for j in primary[i]:
            hit_prim[j].add(i)
        for j in secondary_only[i]:
            hit_sec[j].add(i)
    tables = []
    for j in range(s):
        a = sum(w[i] for i in hit_prim[j])
        b = sum(w[i] for i in hit_sec[j])
        with np.errstate(divide="ignore", invalid="ignore"):
            tab = w[j] * np.log(vals)
            if a > 0:
                tab = tab + a * np.log1p(-vals)
            if b > 0:
                tab = tab + b * np.log1p(-vals / m)
        tables.append(tab)

    neighborhoods = [sorted({i} | set(primary[i]) | set(secondary_only[i]))
                     for i in range(s)]
    tail_shape = (levels,) * (s - 1)
    best_val = -np.inf
    best_tau = None
    for u0 in range(levels):
        acc = np.full(tail_shape, tables[0][u0])
        for j in range(1, s):
            shape = [1] * (s - 1)
            shape[j - 1] = levels
            acc = acc + tables[j].reshape(shape)
        feasible = np.ones(tail_shape, dtype=bool)
        for i in range(s):
            g = vals[u0] if 0 in neighborhoods[i] else 0.0
            for j in neighborhoods[i]:
                if j == 0:
                    continue
                shape = [1] * (s - 1)
                shape[j - 1] = levels
                g = g + vals.reshape(shape)
            feasible &= g <= m + 1e-12
        acc = np.where(feasible, acc, -np.inf)
        idx = np.unravel_index(np.argmax(acc), tail_shape)
        if acc[idx] > best_val:
            best_val = float(acc[idx])
            best_tau = np.array([vals[u0]] + [vals[k] for k in idx])
    return best_val, best_tau


def geometric_moments_by_series(x, tail=1e-12):
    """First two moments of Geometric(x) on {1, 2, ...} by summation."""
    mean = 0.0
    second = 0.0
    n = 1
    survivor = 1.0  # probability the service lasts at least n slots
    while survivor > tail:
        p_n = survivor * x
        mean += n * p_n
        second += n * n * p_n
        survivor *= 1.0 - x
        n += 1
    return mean, second
