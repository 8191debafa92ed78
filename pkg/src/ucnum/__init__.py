"""Completely uncoupled utility-maximization dynamics on finite games.

Two engines (a windowed trial-and-error rule and a price-driven framed
rule), deterministic baselines, brute-force and convex oracles, and an
exact perturbed-Markov-chain analyzer for desk-scale instances.
"""

from .baselines import (
    exact_gradient_run,
    loglinear_baseline_run,
    loglinear_framed_run,
    max_weight_oracle,
)
from .chain import PerturbedChain, all_roots_arborescence, min_arborescence_weight
from .cnum import CNumConfig, flow_control_solve, run_cnum
from .errors import ConfigError, InvariantViolation
from .games import (
    GameEnvironment,
    GameFormatError,
    OccupationMeasure,
    UtilitySpec,
    average_payoff,
    check_interdependence,
    load_game,
    make_game,
    random_interior_game,
    save_game,
    two_node_benchmark,
)
from .gnum import GNumConfig, run_gnum
from .harness import (
    ExperimentConfig,
    analyze,
    run_experiment,
    suggest_frame_size,
    sweep,
    verify,
)
from .oracles import brute_force_gnum_optimum, concave_optimum, dual_value
from .trace import RunTrace, __version__, config_hash

__all__ = [
    "__version__",
    "CNumConfig",
    "ConfigError",
    "ExperimentConfig",
    "GNumConfig",
    "GameEnvironment",
    "GameFormatError",
    "InvariantViolation",
    "OccupationMeasure",
    "PerturbedChain",
    "RunTrace",
    "UtilitySpec",
    "all_roots_arborescence",
    "analyze",
    "average_payoff",
    "brute_force_gnum_optimum",
    "check_interdependence",
    "concave_optimum",
    "config_hash",
    "dual_value",
    "exact_gradient_run",
    "flow_control_solve",
    "load_game",
    "loglinear_baseline_run",
    "loglinear_framed_run",
    "make_game",
    "max_weight_oracle",
    "min_arborescence_weight",
    "random_interior_game",
    "run_cnum",
    "run_experiment",
    "run_gnum",
    "save_game",
    "suggest_frame_size",
    "sweep",
    "two_node_benchmark",
    "verify",
]
