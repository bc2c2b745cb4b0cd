"""Proportionally fair transmit probabilities for multichannel slotted
aloha, with closed-form performance analytics and a seeded slot-level
simulator."""

from .analytics import (PerfReport, collisions_and_energy, perf_report,
                        poisson_binomial, service_moments, system_throughput,
                        tagged_success_prob, total_delay)
from .fairness import (ConcavityReport, SolverReport, TransmitPolicy,
                       concavity_selftest, link_success_prob, objective,
                       objective_gradient, solve_general, solve_star,
                       star_dual_function, weights_from_queues)
from .scenario import (Realized, Scenario, ScenarioError, load_scenario,
                       parse_scenario, realize, scenario_hash)
from .sim import (CHUNK, Estimate, ReplicationStats, SimConfig, SimTrace,
                  run, run_replications)
from .topology import (ConflictSets, NetworkModel, build_network,
                       chain_network, conflict_matrix, conflict_sets,
                       is_collector, primary_conflicts, random_network,
                       secondary_conflicts, star_network)

__version__ = "0.1.0"

__all__ = [
    "CHUNK",
    "ConcavityReport",
    "ConflictSets",
    "Estimate",
    "NetworkModel",
    "PerfReport",
    "Realized",
    "ReplicationStats",
    "Scenario",
    "ScenarioError",
    "SimConfig",
    "SimTrace",
    "SolverReport",
    "TransmitPolicy",
    "build_network",
    "chain_network",
    "collisions_and_energy",
    "concavity_selftest",
    "conflict_matrix",
    "conflict_sets",
    "is_collector",
    "link_success_prob",
    "load_scenario",
    "objective",
    "objective_gradient",
    "parse_scenario",
    "perf_report",
    "poisson_binomial",
    "primary_conflicts",
    "random_network",
    "realize",
    "run",
    "run_replications",
    "scenario_hash",
    "secondary_conflicts",
    "service_moments",
    "solve_general",
    "solve_star",
    "star_dual_function",
    "star_network",
    "system_throughput",
    "tagged_success_prob",
    "total_delay",
    "weights_from_queues",
]
