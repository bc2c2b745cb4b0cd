"""Command-line interface.

Subcommands: solve, analyze, simulate, sweep, validate. Every command
reads a scenario file, writes one delimited report (stdout by default,
a file when the scenario or --out names one), and exits 0 on success,
1 on usage or scenario errors, 2 when a solver fails to converge, and
3 when validation checks fail.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analytics
from .fairness import (TransmitPolicy, concavity_selftest, link_success_prob,
                       solve_general, solve_star)
from .report import resolve_output_path, write_report
from .scenario import (ScenarioError, load_scenario, realize, scenario_hash,
                       _broadcast)
from .sim import SimConfig, run, run_replications
from .topology import is_collector

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_VALIDATION = 3


def _solve_policy(realized, channels=None):
    """Route to the collector fast path when the structure allows it."""
    if is_collector(realized.conflicts):
        m = realized.net.channel_count if channels is None else channels
        return solve_star(realized.weights, m)
    return solve_general(realized.net, realized.conflicts, realized.weights,
                         channels)


def _figure_path(out_path):
    if out_path is None:
        raise ScenarioError("--figures",
                            "figure rendering needs a file output "
                            "(--out or output.path)")
    return out_path.with_suffix(".png")


def _comment(sc, seed, replications=None):
    h = scenario_hash(sc, seed=seed, replications=replications)
    text = f"scenario={h} seed={seed}"
    if replications is not None:
        text += f" replications={replications}"
    return text


def cmd_solve(sc, args, out_path):
    realized = realize(sc)
    rep = _solve_policy(realized)
    tau = rep.policy.tau
    w = realized.weights
    gamma = rep.dual_variable if rep.dual_variable is not None else math.nan
    rows = []
    for i in range(realized.net.link_count):
        mu = link_success_prob(realized.net, realized.conflicts, rep.policy, i)
        rows.append([i, float(w[i]), float(tau[i]), mu, rep.objective_value,
                     gamma, rep.kkt_residual, rep.iterations, rep.converged])
    header = ["link", "weight", "tau", "success_prob", "objective",
              "dual_gamma", "kkt_residual", "iterations", "converged"]
    seed = args.seed if args.seed is not None else sc.seed
    written = write_report(header, rows, _comment(sc, seed), out_path)
    if args.figures:
        from . import figures
        figures.solve_figure(tau, w, _figure_path(written))
    return EXIT_OK if rep.converged else EXIT_NO_CONVERGENCE


def _effective_policy(sc, realized):
    """Fixed policy from the scenario, else the solved one."""
    if realized.policy is not None:
        return realized.policy, EXIT_OK
    rep = _solve_policy(realized)
    return rep.policy, (EXIT_OK if rep.converged else EXIT_NO_CONVERGENCE)


def cmd_analyze(sc, args, out_path):
    realized = realize(sc)
    policy, status = _effective_policy(sc, realized)
    lam = realized.arrival_rates
    perf = analytics.perf_report(policy.tau, policy.channel_count,
                                 arrival_rates=lam, e_tx=sc.e_tx)
    lam_out = lam if lam is not None else np.zeros(policy.link_count)
    rows = []
    for i in range(policy.link_count):
        rows.append([
            i, float(policy.tau[i]), float(lam_out[i]),
            float(perf.success_prob[i]), float(perf.mean_service[i]),
            float(perf.second_moment_service[i]), float(perf.delay[i]),
            bool(perf.stable[i]), float(perf.expected_collisions[i]),
            float(perf.energy_per_success[i]), perf.throughput,
        ])
    header = ["link", "tau", "arrival_rate", "success_prob", "mean_service",
              "second_moment_service", "delay", "stable",
              "expected_collisions", "energy_per_success", "throughput"]
    seed = args.seed if args.seed is not None else sc.seed
    written = write_report(header, rows, _comment(sc, seed), out_path)
    if args.figures:
        from . import figures
        figures.analyze_figure(perf, policy.tau, _figure_path(written))
    return status


def cmd_simulate(sc, args, out_path):
    realized = realize(sc)
    status = EXIT_OK
    if sc.mode == "adaptive":
        policy = None
    else:
        policy, status = _effective_policy(sc, realized)
    seed = args.seed if args.seed is not None else sc.seed
    reps = args.replications if args.replications is not None \
        else sc.replications
    cfg = SimConfig(mode=sc.mode, slots=sc.slots, seed=seed,
                    arrival_rates=realized.arrival_rates,
                    epoch_length=sc.epoch_length, e_tx=sc.e_tx)
    stats = run_replications(cfg, realized.net, realized.conflicts, policy,
                             replications=reps)
    rows = []
    for i in range(realized.net.link_count):
        rows.append([
            i,
            float(np.asarray(stats.link_success_rate.mean)[i]),
            float(np.asarray(stats.link_success_rate.se)[i]),
            float(np.asarray(stats.link_attempt_rate.mean)[i]),
            float(np.asarray(stats.link_attempt_rate.se)[i]),
            float(np.asarray(stats.attempt_success_ratio.mean)[i]),
            float(np.asarray(stats.attempt_success_ratio.se)[i]),
            float(np.asarray(stats.energy_per_success.mean)[i]),
            float(np.asarray(stats.energy_per_success.se)[i]),
            stats.throughput.mean, stats.throughput.se,
            stats.sojourn_mean.mean, stats.sojourn_mean.se,
        ])
    header = ["link", "success_rate_mean", "success_rate_se",
              "attempt_rate_mean", "attempt_rate_se",
              "attempt_success_ratio_mean", "attempt_success_ratio_se",
              "energy_per_success_mean", "energy_per_success_se",
              "throughput_mean", "throughput_se",
              "sojourn_mean", "sojourn_se"]
    written = write_report(header, rows, _comment(sc, seed, reps), out_path)
    if args.figures:
        from . import figures
        figures.simulate_figure(stats, _figure_path(written))
    return status


def _sweep_point(sc, seed, reps, m, n):
    realized = realize(sc, links=n, channels=m)
    rep = _solve_policy(realized, channels=m)
    tau = rep.policy.tau
    pmf = analytics.poisson_binomial(tau)
    t_analytic = analytics.system_throughput(pmf, m)
    sum_tau = float(tau.sum())
    att_per_succ = sum_tau / t_analytic if t_analytic > 0 else math.inf
    if realized.arrival_rates is not None:
        delays = []
        for i in range(tau.size):
            p_i = analytics.tagged_success_prob(tau, i, m)
            mean, second = analytics.service_moments(tau[i], p_i)
            delays.append(analytics.total_delay(realized.arrival_rates[i],
                                                mean, second))
        delay_analytic = float(np.mean(delays))
    else:
        delay_analytic = math.nan
    policy = None if sc.mode == "adaptive" else rep.policy
    cfg = SimConfig(mode=sc.mode, slots=sc.slots, seed=seed,
                    arrival_rates=realized.arrival_rates,
                    epoch_length=sc.epoch_length, e_tx=sc.e_tx)
    stats = run_replications(cfg, realized.net, realized.conflicts, policy,
                             replications=reps)
    att_total = float(np.sum(np.asarray(stats.link_attempt_rate.mean)))
    succ_total = stats.throughput.mean
    att_per_succ_sim = att_total / succ_total if succ_total > 0 else math.inf
    return {
        "channels": m, "links": n,
        "tau_mean": float(tau.mean()), "sum_tau": sum_tau,
        "throughput_analytic": t_analytic,
        "throughput_sim_mean": stats.throughput.mean,
        "throughput_sim_se": stats.throughput.se,
        "attempts_per_success_analytic": att_per_succ,
        "attempts_per_success_sim": att_per_succ_sim,
        "delay_analytic": delay_analytic,
        "converged": rep.converged,
    }


def cmd_sweep(sc, args, out_path):
    if sc.sweep is None:
        raise ScenarioError("sweep", "scenario has no sweep block")
    seed = args.seed if args.seed is not None else sc.seed
    reps = args.replications if args.replications is not None \
        else sc.replications
    grid = [(m, n) for m in sc.sweep["channels"] for n in sc.sweep["links"]]
    workers = args.workers or min(8, os.cpu_count() or 1)
    # warm the jit kernel once before fanning out
    _sweep_point(sc, seed, 1, grid[0][0], grid[0][1])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(
                lambda mn: _sweep_point(sc, seed, reps, mn[0], mn[1]), grid))
    else:
        points = [_sweep_point(sc, seed, reps, m, n) for m, n in grid]
    header = ["channels", "links", "tau_mean", "sum_tau",
              "throughput_analytic", "throughput_sim_mean",
              "throughput_sim_se", "attempts_per_success_analytic",
              "attempts_per_success_sim", "delay_analytic", "converged"]
    rows = [[pt[h] for h in header] for pt in points]
    written = write_report(header, rows, _comment(sc, seed, reps), out_path)
    if args.figures:
        from . import figures
        figures.sweep_figure(points, _figure_path(written))
    if all(pt["converged"] for pt in points):
        return EXIT_OK
    return EXIT_NO_CONVERGENCE


def _run_checks(sc, args):
    """Validation suite; each check yields (name, passed, detail)."""
    checks = []

    def add(name, passed, detail):
        checks.append((name, bool(passed), detail))

    # realize without the fixed policy so an out-of-range tau reaches the
    # domain check instead of blowing up construction
    realized = realize(dataclasses.replace(sc, policy_tau=None))
    net, conflicts = realized.net, realized.conflicts
    w = realized.weights
    m = net.channel_count

    ok = bool(np.all(np.isfinite(w)) and (w.size == 0 or w.min() >= 0))
    add("weights-domain", ok, f"min={w.min():.6g}" if w.size else "empty")

    raw_tau = sc.policy_tau
    if raw_tau is None:
        add("policy-domain", True, "skipped: no fixed policy")
        policy = None
    else:
        vals = np.asarray(raw_tau if isinstance(raw_tau, list)
                          else [raw_tau], dtype=float)
        ok = bool(vals.min() >= 0.0 and vals.max() <= 1.0)
        add("policy-domain", ok,
            f"range [{vals.min():.6g} .. {vals.max():.6g}]")
        if ok:
            tau_arr = _broadcast(raw_tau, net.link_count, "policy.tau")
            policy = TransmitPolicy(tau_arr, net.channel_count)
        else:
            policy = None

    rep = _solve_policy(realized)
    add("solver-convergence", rep.converged and rep.kkt_residual <= 1e-6,
        f"kkt={rep.kkt_residual:.3g} iterations={rep.iterations}")
    tau = rep.policy.tau

    n_mat_gap = -math.inf
    for i in range(net.link_count):
        load = tau[i] + sum(tau[j] for j in conflicts.primary[i]) \
            + sum(tau[j] for j in conflicts.secondary_only[i])
        n_mat_gap = max(n_mat_gap, load - m)
    add("solver-feasibility", n_mat_gap <= 1e-9,
        f"worst constraint excess {n_mat_gap:.3g}")

    if is_collector(conflicts) and w.min() > 0 and tau.max() < 1.0:
        ratios = tau / w
        spread = float(ratios.max() / ratios.min() - 1.0)
        add("proportionality", spread <= 1e-6, f"max spread {spread:.3g}")
    else:
        add("proportionality", True, "skipped: clamped or non-collector")

    scaled = dataclasses.replace(realized, weights=realized.weights * 3.0)
    rep_scaled = _solve_policy(scaled)
    diff = float(np.max(np.abs(rep_scaled.policy.tau - tau))) \
        if tau.size else 0.0
    add("scale-covariance", diff <= 1e-9, f"max tau shift {diff:.3g}")

    pmf = analytics.poisson_binomial(tau)
    mean_gap = abs(float(np.sum(np.arange(pmf.size) * pmf)) - tau.sum())
    add("pmf-normalization",
        abs(pmf.sum() - 1.0) <= 1e-12 and mean_gap <= 1e-9,
        f"sum err {abs(pmf.sum() - 1.0):.3g}; mean err {mean_gap:.3g}")

    t_sys = analytics.system_throughput(pmf, m)
    t_sum = sum(tau[i] * analytics.tagged_success_prob(tau, i, m)
                for i in range(tau.size))
    add("throughput-identity", abs(t_sys - t_sum) <= 1e-9,
        f"|T - sum(tau*p)| = {abs(t_sys - t_sum):.3g}")

    conc = concavity_selftest(net, conflicts, w, trials=args.trials)
    add("concavity", conc.passed,
        f"violations={conc.directional_violations} "
        f"hessian mismatch {conc.worst_hessian_mismatch:.3g}")

    sim_policy = policy if policy is not None else rep.policy
    slots = min(sc.slots, 20_000)
    cfg = SimConfig(mode="saturated", slots=slots, seed=sc.seed)
    tr1 = run(cfg, net, conflicts, sim_policy)
    tr2 = run(cfg, net, conflicts, sim_policy)
    same = (np.array_equal(tr1.successes, tr2.successes)
            and np.array_equal(tr1.attempts, tr2.attempts))
    add("sim-determinism", same, f"{slots} saturated slots rerun identical")

    # analytic reference at the policy that actually ran
    sim_tau = sim_policy.tau
    t_at_sim = analytics.system_throughput(
        analytics.poisson_binomial(sim_tau), m)
    p_bar = t_at_sim / sim_tau.sum() if sim_tau.sum() > 0 else 0.0
    att_total = int(tr1.attempts.sum())
    if att_total > 0:
        ratio = tr1.successes.sum() / att_total
        se = math.sqrt(max(p_bar * (1 - p_bar), 1e-12) / att_total)
        add("mode-consistency", abs(ratio - p_bar) <= 3 * se + 1e-12,
            f"success/attempt {ratio:.6g} vs analytic {p_bar:.6g}")
    else:
        add("mode-consistency", True, "skipped: no attempts")

    if realized.arrival_rates is not None:
        cfg_q = SimConfig(mode="queued", slots=slots, seed=sc.seed,
                          arrival_rates=realized.arrival_rates)
        tr_q = run(cfg_q, net, conflicts, sim_policy)
        conserved = np.array_equal(tr_q.arrivals,
                                   tr_q.successes + tr_q.final_queues)
        add("sim-conservation", conserved,
            f"{int(tr_q.arrivals.sum())} arrivals accounted")
    else:
        add("sim-conservation", True, "skipped: no arrivals block")

    return checks


def cmd_validate(sc, args, out_path):
    checks = _run_checks(sc, args)
    rows = [[name, passed, detail] for name, passed, detail in checks]
    header = ["check", "passed", "detail"]
    seed = args.seed if args.seed is not None else sc.seed
    write_report(header, rows, _comment(sc, seed), out_path)
    if all(passed for _, passed, _ in checks):
        return EXIT_OK
    return EXIT_VALIDATION


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fairslot",
        description="Fair transmit probabilities for multichannel slotted "
                    "aloha: solve policies, evaluate analytics, simulate.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("solve", "solve the fairness program for a scenario"),
            ("analyze", "closed-form performance at the scenario policy"),
            ("simulate", "run seeded replications of the scenario"),
            ("sweep", "solve+simulate over the scenario's size grid"),
            ("validate", "run the scenario through the check suite")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=True,
                       help="path to the scenario YAML file")
        p.add_argument("--out", default=None,
                       help="output file (default: scenario output.path, "
                            "else stdout); relative paths honor FAIRSLOT_OUT")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--replications", type=int, default=None,
                       help="override the scenario replication count")
        p.add_argument("--figures", action="store_true",
                       help="also render PNG figures next to the output file")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=None,
                           help="thread pool size for grid points")
        if name == "validate":
            p.add_argument("--trials", type=int, default=20,
                           help="concavity self-test trials")
    return parser


COMMANDS = {
    "solve": cmd_solve,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, but 2 means solver
        # non-convergence here; remap (--help keeps its clean exit)
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer",
              file=sys.stderr)
        return EXIT_USAGE
    if args.replications is not None and args.replications < 1:
        print("error: --replications must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        sc = load_scenario(args.scenario)
        out_path = args.out if args.out is not None else sc.output_path
        if args.figures and resolve_output_path(out_path) is None:
            print("error: --figures needs a file output "
                  "(--out or output.path)", file=sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](sc, args, out_path)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
