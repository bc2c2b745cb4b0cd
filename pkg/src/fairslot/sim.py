"""Slot-level event simulator with reproducible random streams.

Random numbers are drawn in fixed blocks of CHUNK slots from named
substreams (one per link for attempt/channel draws, one shared stream
for arrivals), so a trace depends only on the seed, the topology, and
the policy, never on how many slots the caller asked for beyond the
prefix, on queue occupancy, or on epoch boundaries. Per link and block
the uniforms are drawn first, channel indices second; draws happen even
for slots where gating suppresses the attempt.

Modes:
  saturated: every link always has traffic; queues are not modeled.
  queued: Poisson arrivals land before the transmit decision, a link
    attempts only when backlogged, one departure per success.
  adaptive: queued dynamics, plus the policy is re-solved from
    ln(1 + queue) weights at every epoch boundary, including slot 0.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .fairness import TransmitPolicy, solve_general, solve_star, weights_from_queues
from .topology import conflict_matrix, is_collector

CHUNK = 32768
RING_CAP = 4096  # queued packets per link with a tracked arrival stamp
HIST_MAX = 4096  # service lengths above this land in the overflow bin

MODES = ("saturated", "queued", "adaptive")


@dataclass(frozen=True)
class SimConfig:
    mode: str
    slots: int
    seed: int
    arrival_rates: np.ndarray | None = None
    epoch_length: int = 10_000
    e_tx: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.slots) < 1:
            raise ValueError("slots must be >= 1")
        object.__setattr__(self, "slots", int(self.slots))
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "seed", seed)
        if self.arrival_rates is not None:
            lam = np.array(self.arrival_rates, dtype=float)
            if lam.ndim != 1:
                raise ValueError("arrival_rates must be one-dimensional")
            if lam.size and lam.min() < 0:
                raise ValueError("arrival rates must be nonnegative")
            lam.flags.writeable = False
            object.__setattr__(self, "arrival_rates", lam)
        if int(self.epoch_length) < 1:
            raise ValueError("epoch_length must be >= 1")
        object.__setattr__(self, "epoch_length", int(self.epoch_length))
        if float(self.e_tx) < 0:
            raise ValueError("e_tx must be nonnegative")
        object.__setattr__(self, "e_tx", float(self.e_tx))


@dataclass(frozen=True)
class SimTrace:
    """Everything a single run produced.

    ``sojourn_times``/``sojourn_links`` list per-packet sojourns (arrival
    slot through departure slot, inclusive) in departure order; empty in
    saturated mode. ``service_hist[i, s]`` counts head-of-line services
    of length s (overflow bin at the end, index 0 unused).
    ``ring_overflow`` marks links whose backlog outgrew the arrival-stamp
    ring; their later sojourn entries are dropped, counts stay exact.
    """

    mode: str
    slots: int
    successes: np.ndarray
    attempts: np.ndarray
    collisions: np.ndarray
    arrivals: np.ndarray
    final_queues: np.ndarray
    sojourn_times: np.ndarray
    sojourn_links: np.ndarray
    service_hist: np.ndarray
    tau_history: np.ndarray
    ring_overflow: np.ndarray
    energy: np.ndarray

    @property
    def total_successes(self) -> int:
        return int(self.successes.sum())

    @property
    def empirical_throughput(self) -> float:
        return self.total_successes / self.slots


@dataclass(frozen=True)
class Estimate:
    mean: object
    std: object
    se: object


@dataclass(frozen=True)
class ReplicationStats:
    replications: int
    throughput: Estimate
    link_success_rate: Estimate
    link_attempt_rate: Estimate
    attempt_success_ratio: Estimate
    sojourn_mean: Estimate
    energy_per_success: Estimate


@njit(cache=True, nogil=True)
def _sim_block(u, ch, arr, tau, ctype, saturated, slot0,
               queue, ring, ring_head, ring_len, head_since,
               successes, attempts, collisions,
               soj_out, soj_link_out, hist, overflow):
    n_slots, n = u.shape
    cap = ring.shape[1]
    hmax = hist.shape[1] - 2
    att_idx = np.empty(n, np.int64)
    att_ch = np.empty(n, np.int64)
    n_soj = 0
    for s in range(n_slots):
        g = slot0 + s
        if not saturated:
            for i in range(n):
                a = arr[s, i]
                if a > 0:
                    if queue[i] == 0:
                        head_since[i] = g
                    for _ in range(a):
                        if ring_len[i] < cap:
                            pos = ring_head[i] + ring_len[i]
                            if pos >= cap:
                                pos -= cap
                            ring[i, pos] = g
                            ring_len[i] += 1
                        else:
                            overflow[i] = 1
                    queue[i] += a
        k = 0
        for i in range(n):
            if u[s, i] < tau[i] and (saturated or queue[i] > 0):
                att_idx[k] = i
                att_ch[k] = ch[s, i]
                k += 1
        for a1 in range(k):
            i = att_idx[a1]
            attempts[i] += 1
            ok = True
            for a2 in range(k):
                if a2 == a1:
                    continue
                c = ctype[i, att_idx[a2]]
                if c == 1 or (c == 2 and att_ch[a1] == att_ch[a2]):
                    ok = False
                    break
            if ok:
                successes[i] += 1
                if not saturated:
                    svc = g - head_since[i] + 1
                    if svc > hmax:
                        hist[i, hmax + 1] += 1
                    else:
                        hist[i, svc] += 1
                    if ring_len[i] > 0:
                        stamp = ring[i, ring_head[i]]
                        ring_head[i] += 1
                        if ring_head[i] >= cap:
                            ring_head[i] = 0
                        ring_len[i] -= 1
                        soj_out[n_soj] = g - stamp + 1
                        soj_link_out[n_soj] = i
                        n_soj += 1
                    queue[i] -= 1
                    if queue[i] > 0:
                        head_since[i] = g + 1
            else:
                collisions[i] += 1
    return n_soj


def _link_streams(seed, n):
    return [np.random.default_rng([seed, 1, i]) for i in range(n)]


def _draw_block(link_rngs, m, n):
    u = np.empty((CHUNK, n))
    ch = np.empty((CHUNK, n), dtype=np.int64)
    for i, rng in enumerate(link_rngs):
        u[:, i] = rng.random(CHUNK)
        ch[:, i] = rng.integers(0, m, size=CHUNK)
    return u, ch


def _resolve_policy(net, conflicts, queues, m):
    w = weights_from_queues(queues.astype(float))
    if is_collector(conflicts):
        return solve_star(w, m).policy
    return solve_general(net, conflicts, w, m).policy


def run(config, net, conflicts, policy=None):
    """Simulate one seeded trace.

    saturated/queued need a policy matching the network; adaptive
    computes its own from the queues each epoch and requires
    ``policy=None``. queued/adaptive need ``config.arrival_rates``.
    """
    n = net.link_count
    if n == 0:
        raise ValueError("network has no links to simulate")
    if conflicts.link_count != n:
        raise ValueError("conflicts do not match the network")
    saturated = config.mode == "saturated"
    adaptive = config.mode == "adaptive"
    if adaptive:
        if policy is not None:
            raise ValueError("adaptive mode derives its own policy; "
                             "pass policy=None")
        m = net.channel_count
    else:
        if policy is None:
            raise ValueError(f"{config.mode} mode requires a policy")
        if policy.link_count != n:
            raise ValueError("policy does not match the network")
        m = policy.channel_count
    if not saturated:
        if config.arrival_rates is None:
            raise ValueError(f"{config.mode} mode requires arrival_rates")
        if config.arrival_rates.shape != (n,):
            raise ValueError("arrival_rates must match the link count")

    ctype = conflict_matrix(conflicts)
    link_rngs = _link_streams(config.seed, n)
    arrival_rng = np.random.default_rng([config.seed, 0])

    queue = np.zeros(n, dtype=np.int64)
    ring = np.zeros((n, RING_CAP if not saturated else 1), dtype=np.int64)
    ring_head = np.zeros(n, dtype=np.int64)
    ring_len = np.zeros(n, dtype=np.int64)
    head_since = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    attempts = np.zeros(n, dtype=np.int64)
    collisions = np.zeros(n, dtype=np.int64)
    hist = np.zeros((n, (HIST_MAX + 2) if not saturated else 2),
                    dtype=np.int64)
    overflow = np.zeros(n, dtype=np.uint8)
    soj_out = np.empty(n * CHUNK if not saturated else 1, dtype=np.int64)
    soj_link_out = np.empty_like(soj_out)
    arr_dummy = np.zeros((1, n), dtype=np.int64)

    sojourns = []
    sojourn_links = []
    arrivals_total = np.zeros(n, dtype=np.int64)
    tau_rows = []
    if not adaptive:
        tau = policy.tau.astype(float)
        tau_rows.append(tau.copy())
    else:
        tau = np.zeros(n)

    slots = config.slots
    epoch = config.epoch_length
    done = 0
    while done < slots:
        u, ch = _draw_block(link_rngs, m, n)
        if not saturated:
            arr = arrival_rng.poisson(config.arrival_rates, size=(CHUNK, n))
            arr = arr.astype(np.int64)
            consumed = min(CHUNK, slots - done)
            arrivals_total += arr[:consumed].sum(axis=0)
        else:
            arr = arr_dummy
            consumed = min(CHUNK, slots - done)
        off = 0
        while off < consumed:
            g0 = done + off
            if adaptive and g0 % epoch == 0:
                tau = _resolve_policy(net, conflicts, queue, m).tau.copy()
                tau_rows.append(tau.copy())
            if adaptive:
                next_boundary = (g0 // epoch + 1) * epoch
                seg_end = min(consumed, next_boundary - done)
            else:
                seg_end = consumed
            n_soj = _sim_block(
                u[off:seg_end], ch[off:seg_end],
                arr[off:seg_end] if not saturated else arr_dummy,
                tau, ctype, saturated, g0,
                queue, ring, ring_head, ring_len, head_since,
                successes, attempts, collisions,
                soj_out, soj_link_out, hist, overflow)
            if n_soj:
                sojourns.append(soj_out[:n_soj].copy())
                sojourn_links.append(soj_link_out[:n_soj].copy())
            off = seg_end
        done += consumed

    if sojourns:
        soj_arr = np.concatenate(sojourns)
        soj_links_arr = np.concatenate(sojourn_links)
    else:
        soj_arr = np.empty(0, dtype=np.int64)
        soj_links_arr = np.empty(0, dtype=np.int64)
    return SimTrace(
        mode=config.mode,
        slots=slots,
        successes=successes,
        attempts=attempts,
        collisions=collisions,
        arrivals=arrivals_total,
        final_queues=queue.copy(),
        sojourn_times=soj_arr,
        sojourn_links=soj_links_arr,
        service_hist=hist,
        tau_history=np.array(tau_rows),
        ring_overflow=overflow.astype(bool),
        energy=attempts * config.e_tx,
    )


def _estimate(values, reps):
    arr = np.asarray(values, dtype=float)
    mean = arr.mean(axis=0)
    if reps > 1:
        std = arr.std(axis=0, ddof=1)
    else:
        std = np.zeros_like(mean)
    se = std / math.sqrt(reps)
    if arr.ndim == 1:
        return Estimate(float(mean), float(std), float(se))
    return Estimate(mean, std, se)


def run_replications(config, net, conflicts, policy=None, replications=1):
    """Run independent replications seeded seed, seed+1, ...

    Aggregates mean, sample std (zero for a single replication), and
    standard error of each metric across replications.
    """
    reps = int(replications)
    if reps < 1:
        raise ValueError("replications must be >= 1")
    tp = np.empty(reps)
    succ_rate = np.empty((reps, net.link_count))
    att_rate = np.empty((reps, net.link_count))
    ratio = np.empty((reps, net.link_count))
    soj = np.empty(reps)
    energy = np.empty((reps, net.link_count))
    for r in range(reps):
        cfg = dataclasses.replace(config, seed=config.seed + r)
        trace = run(cfg, net, conflicts, policy)
        tp[r] = trace.empirical_throughput
        succ_rate[r] = trace.successes / trace.slots
        att_rate[r] = trace.attempts / trace.slots
        with np.errstate(invalid="ignore"):
            ratio[r] = np.where(trace.attempts > 0,
                                trace.successes / np.maximum(trace.attempts, 1),
                                np.nan)
            energy[r] = np.where(trace.successes > 0,
                                 trace.energy / np.maximum(trace.successes, 1),
                                 np.nan)
        soj[r] = (float(trace.sojourn_times.mean())
                  if trace.sojourn_times.size else np.nan)
    return ReplicationStats(
        replications=reps,
        throughput=_estimate(tp, reps),
        link_success_rate=_estimate(succ_rate, reps),
        link_attempt_rate=_estimate(att_rate, reps),
        attempt_success_ratio=_estimate(ratio, reps),
        sojourn_mean=_estimate(soj, reps),
        energy_per_success=_estimate(energy, reps),
    )
