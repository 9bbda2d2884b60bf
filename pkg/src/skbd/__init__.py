"""Keyboard-family dose-finding designs with kernel-weighted borrowing.

The package provides the interval-based decision engine (key construction,
strongest-key transitions, elimination, isotonic MTD selection), the
information-sharing posterior built from kernel-weighted pseudo-counts, the
adaptive dose-insertion and time-to-event extensions, scenario catalogs and
generators, a reproducible Monte Carlo simulator for operating
characteristics, a CLI, and an HTTP service for the companion web UI.
"""

__version__ = "0.1.0"

from .core import (
    Action,
    DesignConfig,
    InvalidDesign,
    TrialData,
    TrialState,
    build_keys,
    decide,
    decision_table,
    select_mtd,
    strongest_key,
)
from .engine import (
    OCSummary,
    TiteConfig,
    TrialRecord,
    oc_metrics,
    replicate_rng,
    run_trial,
    run_trials,
)
from .insertion import InsertionConfig, TriggerKind, check_insertion
from .kernels import (
    DoseGrid,
    KernelSpec,
    calibrate_kernel,
    kernel_eval,
    pseudo_counts,
    standardize_doses,
)
from .numerics import BetaParams, beta_interval_prob, pava, reg_inc_beta
from .scenarios import (
    EmaxParams,
    Scenario,
    emax_curve,
    fixed_scenarios,
    insertion_scenarios,
    random_scenario,
)

__all__ = [
    "__version__",
    "Action",
    "BetaParams",
    "DesignConfig",
    "DoseGrid",
    "EmaxParams",
    "InsertionConfig",
    "InvalidDesign",
    "KernelSpec",
    "OCSummary",
    "Scenario",
    "TiteConfig",
    "TrialData",
    "TrialRecord",
    "TrialState",
    "TriggerKind",
    "beta_interval_prob",
    "build_keys",
    "calibrate_kernel",
    "check_insertion",
    "decide",
    "decision_table",
    "emax_curve",
    "fixed_scenarios",
    "insertion_scenarios",
    "kernel_eval",
    "oc_metrics",
    "pava",
    "pseudo_counts",
    "random_scenario",
    "reg_inc_beta",
    "replicate_rng",
    "run_trial",
    "run_trials",
    "select_mtd",
    "standardize_doses",
    "strongest_key",
]
