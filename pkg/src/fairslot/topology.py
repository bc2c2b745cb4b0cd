"""Network description and pairwise link conflict classification.

A network is a set of nodes, per-node relay targets (which induce the
directed links), and a symmetric interference relation. Two links
conflict primarily when they share an endpoint node: they can never be
active in the same slot, on any channel pair. Endpoint-disjoint links
within interference range conflict secondarily: they fail only when
active in the same slot on the same channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Link = tuple[int, int]


@dataclass(frozen=True)
class NetworkModel:
    """Immutable topology: nodes, channel count, relay and interference sets.

    ``links`` is the induced list of directed (transmitter, receiver)
    pairs in transmitter-major order; link indices used everywhere else
    in the package refer to positions in this tuple.
    """

    node_count: int
    channel_count: int
    relays: tuple[frozenset[int], ...]
    interference: tuple[frozenset[int], ...]
    links: tuple[Link, ...]

    @property
    def link_count(self) -> int:
        return len(self.links)


@dataclass(frozen=True)
class ConflictSets:
    """Per-link conflict sets, indexed by link position.

    ``primary[i]`` holds links sharing an endpoint with link i;
    ``secondary_only[i]`` holds endpoint-disjoint links that interfere
    with link i and collide only on a shared channel. The two sets are
    disjoint and never contain i itself.
    """

    primary: tuple[frozenset[int], ...]
    secondary_only: tuple[frozenset[int], ...]

    @property
    def link_count(self) -> int:
        return len(self.primary)


def _normalize_sets(node_count, spec, what):
    out = [set() for _ in range(node_count)]
    if isinstance(spec, dict):
        items = list(spec.items())
    else:
        items = list(enumerate(spec))
        if len(items) > node_count:
            raise ValueError(f"{what}: got {len(items)} entries for "
                             f"{node_count} nodes")
    for n, targets in items:
        if not isinstance(n, (int, np.integer)) or not 0 <= n < node_count:
            raise ValueError(f"{what}: invalid node id {n!r}")
        for t in targets:
            if not isinstance(t, (int, np.integer)) or not 0 <= t < node_count:
                raise ValueError(f"{what}[{n}]: invalid node id {t!r}")
            out[n].add(int(t))
    return out


def build_network(node_count, channel_count, relays, interference):
    """Validate and assemble a NetworkModel.

    ``relays`` and ``interference`` may be dicts keyed by node id or
    sequences aligned with node ids. Requirements: relay targets are
    distinct nodes within the relay node's interference set, and the
    interference relation is symmetric (asymmetric input is rejected, not
    repaired). Self entries in interference sets are dropped.
    """
    node_count = int(node_count)
    channel_count = int(channel_count)
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    if channel_count < 1:
        raise ValueError("channel_count must be >= 1")
    rel = _normalize_sets(node_count, relays, "relays")
    inter = _normalize_sets(node_count, interference, "interference")
    for n in range(node_count):
        inter[n].discard(n)
    for n in range(node_count):
        if n in rel[n]:
            raise ValueError(f"relays[{n}]: node cannot relay to itself")
        extra = rel[n] - inter[n]
        if extra:
            raise ValueError(f"relays[{n}]: targets {sorted(extra)} missing "
                             "from the node's interference set")
        for k in inter[n]:
            if n not in inter[k]:
                raise ValueError(f"interference is asymmetric: {n} lists {k} "
                                 f"but {k} does not list {n}")
    links = tuple((n, m) for n in range(node_count) for m in sorted(rel[n]))
    return NetworkModel(
        node_count=node_count,
        channel_count=channel_count,
        relays=tuple(frozenset(s) for s in rel),
        interference=tuple(frozenset(s) for s in inter),
        links=links,
    )


def _check_link_index(net, link):
    if not 0 <= link < net.link_count:
        raise ValueError(f"link index {link} out of range "
                         f"(network has {net.link_count} links)")


def primary_conflicts(net, link):
    """Links sharing an endpoint with the given link (itself excluded)."""
    _check_link_index(net, link)
    n, m = net.links[link]
    ours = {n, m}
    return frozenset(j for j, (l, k) in enumerate(net.links)
                     if j != link and ({l, k} & ours))


def secondary_conflicts(net, link):
    """Endpoint-disjoint links that interfere with the given link.

    These are the secondary-only conflicts: members collide with the
    given link just when both pick the same channel in the same slot.
    """
    _check_link_index(net, link)
    n, m = net.links[link]
    ours = {n, m}
    out = set()
    for j, (l, k) in enumerate(net.links):
        if j == link or ({l, k} & ours):
            continue
        if m in net.interference[l] or k in net.interference[n]:
            out.add(j)
    return frozenset(out)


def conflict_sets(net):
    """Classify every link pair of the network; O(S^2)."""
    prim = tuple(primary_conflicts(net, i) for i in range(net.link_count))
    sec = tuple(secondary_conflicts(net, i) for i in range(net.link_count))
    return ConflictSets(primary=prim, secondary_only=sec)


def conflict_matrix(conflicts):
    """Dense byte matrix: 0 no conflict, 1 primary, 2 secondary-only."""
    s = conflicts.link_count
    mat = np.zeros((s, s), dtype=np.int8)
    for i in range(s):
        for j in conflicts.primary[i]:
            mat[i, j] = 1
        for j in conflicts.secondary_only[i]:
            mat[i, j] = 2
    return mat


def is_collector(conflicts):
    """True when no pair is primary and every pair is secondary-only.

    This is the data-collection shape: the budget-constrained solver and
    the closed-form analytics apply exactly to it.
    """
    s = conflicts.link_count
    if s == 0:
        return False
    everyone = frozenset(range(s))
    return all(not conflicts.primary[i]
               and conflicts.secondary_only[i] == everyone - {i}
               for i in range(s))


def star_network(n, channel_count):
    """Collector topology with n uplinks into a multi-radio sink.

    The sink is modeled as one co-located receive port per uplink (a
    border router listening on all channels at once), so the n links are
    node-disjoint yet all mutually within interference range: no primary
    conflicts, every pair secondary-only. Transmitters are nodes 0..n-1,
    ports n..2n-1, and link i carries transmitter i.
    """
    if n < 1:
        raise ValueError("star topology needs n >= 1")
    total = 2 * n
    relays = {i: [n + i] for i in range(n)}
    everyone = set(range(total))
    interference = {v: sorted(everyone - {v}) for v in range(total)}
    return build_network(total, channel_count, relays, interference)


def chain_network(n, channel_count):
    """Line of n nodes forwarding toward node n-1, adjacent interference.

    Consecutive links share a node (primary conflict); links two hops
    apart interfere secondarily; farther pairs are independent.
    """
    if n < 2:
        raise ValueError("chain topology needs n >= 2")
    relays = {i: [i + 1] for i in range(n - 1)}
    interference = {i: [j for j in (i - 1, i + 1) if 0 <= j < n]
                    for i in range(n)}
    return build_network(n, channel_count, relays, interference)


def random_network(n, density, seed, channel_count):
    """Random symmetric interference graph with one relay per node.

    Each unordered node pair interferes with probability ``density``;
    every node with at least one neighbor relays to a uniformly chosen
    neighbor. Fully determined by ``seed``.
    """
    if n < 2:
        raise ValueError("random topology needs n >= 2")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    inter = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density:
                inter[a].add(b)
                inter[b].add(a)
    relays = {}
    for a in range(n):
        if inter[a]:
            relays[a] = [int(rng.choice(sorted(inter[a])))]
    return build_network(n, channel_count, relays, inter)
