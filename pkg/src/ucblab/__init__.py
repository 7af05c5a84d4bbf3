"""UCB1 bandit laboratory.

Simulation of UCB1 with a general exploration rate, the deterministic
fixed-point description of its arm pulls and regret, Monte-Carlo checks of
both, and inference on the adaptively collected data.
"""

from ucblab.bandit import (
    UCB1,
    BanditInstance,
    EventReport,
    Trajectory,
    TrajectoryBatch,
    UcbConfig,
    compute_W,
    event_report,
    pseudo_regret,
    simulate_batch,
    simulate_ucb1,
    vanilla_regret,
)
from ucblab.oracle import (
    ErrorBudget,
    GrowthCurve,
    OracleSolution,
    classify_regime,
    error_budget,
    growth_curve,
    lai_robbins_regret,
    minimax_instance,
    oracle_solution,
    solve_n_star,
)

__version__ = "0.1.0"

__all__ = [
    "UCB1",
    "BanditInstance",
    "EventReport",
    "Trajectory",
    "TrajectoryBatch",
    "UcbConfig",
    "compute_W",
    "event_report",
    "pseudo_regret",
    "simulate_batch",
    "simulate_ucb1",
    "vanilla_regret",
    "ErrorBudget",
    "GrowthCurve",
    "OracleSolution",
    "classify_regime",
    "error_budget",
    "growth_curve",
    "lai_robbins_regret",
    "minimax_instance",
    "oracle_solution",
    "solve_n_star",
]
