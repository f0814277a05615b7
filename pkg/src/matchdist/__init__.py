"""Distributional many-to-many matching with contracts: metrics, outcomes,
block audits, finite-market search and discretization diagnostics."""
from .blocks import (
    PAIRWISE,
    AuditReport,
    BlockCertificate,
    BlockShape,
    assemble_Z,
    audit_stability,
    audit_stability_mc,
    enumerate_shapes,
    is_g_block,
    is_individual_block,
    perturbation_failures,
    perturbation_margin,
)
from .market import MatchedType, MatchingProblem, feasible_contracts, finite_problem, is_feasible_choice, utility
from .measure import CountingMeasure, DiscreteMeasure, marginal, product_power, star_measure, w1_distance
from .multispace import (
    EMPTY,
    Multiset,
    SidedContract,
    canonicalize,
    d_star,
    enumerate_submultisets,
    is_submultiset,
    sided,
    union,
)
from .outcome import Outcome, ValidationReport, balance_deficit, positive_mass_subtypes, validate_outcome
from .solver import SolverConfig, brute_force_stable, certify, heuristic_stable
from .approx import ApproximationSchedule, discretize_contracts, discretize_population, run_pipeline

__version__ = "0.1.0"
