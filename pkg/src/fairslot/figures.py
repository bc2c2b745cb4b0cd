"""Optional figure rendering next to the delimited reports.

Everything is drawn headless with fixed sizes and explicit metadata so
a rerun writes byte-identical PNGs. These are convenience views of the
same numbers the CSV carries; the CSV stays the primary output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE = dict(dpi=120, metadata={"Software": "fairslot"})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def solve_figure(tau, weights, path):
    """Per-link transmit probabilities and their relation to weights."""
    idx = np.arange(len(tau))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.bar(idx, tau, color="#4878a8")
    ax1.set_xlabel("link")
    ax1.set_ylabel("transmit probability")
    ax1.set_title("policy")
    ax2.plot(weights, tau, "o", ms=4, color="#a85448")
    ax2.set_xlabel("weight")
    ax2.set_ylabel("transmit probability")
    ax2.set_title("probability vs weight")
    return _finish(fig, path)


def analyze_figure(report, tau, path):
    """Service, delay, and energy per link at a fixed policy."""
    idx = np.arange(len(tau))
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].bar(idx, report.mean_service, color="#4878a8")
    axes[0].set_xlabel("link")
    axes[0].set_ylabel("mean service (slots)")
    delay = np.where(np.isfinite(report.delay), report.delay, np.nan)
    axes[1].bar(idx, delay, color="#6a9a58")
    axes[1].set_xlabel("link")
    axes[1].set_ylabel("mean sojourn (slots)")
    axes[2].bar(idx, report.energy_per_success, color="#a85448")
    axes[2].set_xlabel("link")
    axes[2].set_ylabel("energy per delivery")
    return _finish(fig, path)


def simulate_figure(stats, path):
    """Replication means with standard-error bars per link."""
    n = np.asarray(stats.link_success_rate.mean).size
    idx = np.arange(n)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.errorbar(idx, stats.link_success_rate.mean,
                 yerr=stats.link_success_rate.se, fmt="o", ms=3,
                 color="#4878a8")
    ax1.set_xlabel("link")
    ax1.set_ylabel("successes per slot")
    ax2.errorbar(idx, stats.attempt_success_ratio.mean,
                 yerr=stats.attempt_success_ratio.se, fmt="o", ms=3,
                 color="#a85448")
    ax2.set_xlabel("link")
    ax2.set_ylabel("success per attempt")
    return _finish(fig, path)


def sweep_figure(points, path):
    """Throughput against network size, one curve per channel count.

    ``points`` is a list of dicts with keys channels, links,
    throughput_analytic, throughput_sim_mean.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    by_m = {}
    for row in points:
        by_m.setdefault(row["channels"], []).append(row)
    for m in sorted(by_m):
        rows = sorted(by_m[m], key=lambda r: r["links"])
        ns = [r["links"] for r in rows]
        ax.plot(ns, [r["throughput_analytic"] for r in rows],
                "-", label=f"M={m} analytic")
        sims = [r.get("throughput_sim_mean") for r in rows]
        if all(v is not None for v in sims):
            ax.plot(ns, sims, "o", ms=3, label=f"M={m} simulated")
    ax.set_xlabel("links")
    ax.set_ylabel("throughput (deliveries per slot)")
    ax.legend(fontsize=8)
    return _finish(fig, path)
