"""Round-based model of proof-of-work mining fairness.

Computes fork rates, tie-break win probabilities, stationary round-initiation
shares, reward shares and mining profit rates for a set of miners, together
with the closed-form first-order approximation ``MPR_i ~ 2f(alpha_i - sum alpha^2)``
and the harnesses used to check it (Monte Carlo rounds, random-delay
ensembles, a two-group propagation game).
"""

from .errors import ConvergenceError, FitError, ScenarioError
from .scenario import (
    ExplicitMatrix,
    FixedUniform,
    GroupedFixed,
    LogisticRandom,
    PoolDistributionSpec,
    Scenario,
    TieBreak,
    derive_seed,
    expand_pool_distribution,
    load_scenario,
    realize_delays,
)
from .engine import (
    FairnessReport,
    fairness_from_delays,
    fairness_report,
    fork_matrix,
    reward_shares,
    stationary_round_initiation,
    transition_matrix,
    win_matrix,
)
from .theory import (
    LinearFit,
    TheoryPrediction,
    fit_mpr_line,
    naive_mpr,
    predict_mpr,
    predict_round_initiation,
    zero_point_identity_check,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "ExplicitMatrix",
    "FairnessReport",
    "FitError",
    "FixedUniform",
    "GroupedFixed",
    "LinearFit",
    "LogisticRandom",
    "PoolDistributionSpec",
    "Scenario",
    "ScenarioError",
    "TheoryPrediction",
    "TieBreak",
    "derive_seed",
    "expand_pool_distribution",
    "fairness_from_delays",
    "fairness_report",
    "fit_mpr_line",
    "fork_matrix",
    "load_scenario",
    "naive_mpr",
    "predict_mpr",
    "predict_round_initiation",
    "realize_delays",
    "reward_shares",
    "stationary_round_initiation",
    "transition_matrix",
    "win_matrix",
    "zero_point_identity_check",
]
