"""Shared builders for the test suite."""

import numpy as np

from fairslot.topology import conflict_sets, random_network


def random_instance(seed, n_lo=2, n_hi=6, channels=(1, 2, 3, 5)):
    """Random topology with at least one link, plus its conflict sets."""
    rng = np.random.default_rng(seed)
    for bump in range(100):
        n = int(rng.integers(n_lo, n_hi + 1))
        density = float(rng.uniform(0.2, 0.9))
        m = int(rng.choice(channels))
        net = random_network(n, density, seed * 1000 + bump, m)
        if net.link_count:
            return net, conflict_sets(net)
    raise AssertionError(f"no links after 100 draws (seed {seed})")


def neighborhood_matrix(conflicts):
    """0/1 matrix with row i marking link i's closed conflict neighborhood."""
    s = conflicts.link_count
    mat = np.eye(s)
    for i in range(s):
        for j in conflicts.primary[i] | conflicts.secondary_only[i]:
            mat[i, j] = 1.0
    return mat


def feasible_points(conflicts, m, count, rng):
    """Random policies satisfying every neighborhood constraint."""
    mat = neighborhood_matrix(conflicts)
    points = []
    for _ in range(count):
        tau = rng.uniform(0.01, 1.0, size=conflicts.link_count)
        worst = float((mat @ tau).max()) / m
        if worst > 1.0:
            tau *= 0.999 / worst
        points.append(tau)
    return points
