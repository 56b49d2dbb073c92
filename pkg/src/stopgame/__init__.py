"""Exact and simulation-based solvers for zero-sum controller-stopper games."""

from importlib import resources

from .environments import (ActuatorSpec, make_actuator_chain, make_hazard_grid,
                           make_random_game, solve_restricted_mdp)
from .features import FeatureMap, RankDeficientFeatures
from .game import (EvaluationReport, InvalidGameError, Policy, StochasticGame,
                   StopSet, evaluate_pair, evaluate_random_stoppage, load_game,
                   save_game, transition_sample, validate_game)
from .learner import (LearnDiagnostics, LearnerState, LearningDiverged,
                      error_bounds, greedy_from_weights, project,
                      projected_fixed_point, run_learning,
                      stationary_distribution, td_update)
from .oracle import (InstanceTooLarge, MinimaxReport, adversarial_value,
                     backward_induction, best_response_stop, enumerate_minimax)
from .solver import (GameSolution, apply_F, bellman_apply, continuation_value,
                     extract_policy, extract_stop_set, solve, solve_Q,
                     value_iterate)

__version__ = "0.1.0"


def bundled_game(name: str) -> StochasticGame:
    """Load one of the game files shipped with the package (``actuator_chain``, ``one_state``)."""
    return load_game(resources.files(__name__) / "data" / f"{name}.json")
