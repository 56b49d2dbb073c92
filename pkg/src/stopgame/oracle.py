"""Brute-force checks for small games.

Nothing here calls into the value-iteration solver: backward induction is
written out directly and the minimax enumeration evaluates every pair of
deterministic stationary policy and stop region.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .game import (Policy, StochasticGame, StopSet, evaluate_pair,
                   policy_kernel, validate_policy)

MAX_PAIRS = 10**6


class InstanceTooLarge(ValueError):
    pass


@dataclass
class MinimaxReport:
    upper_value: np.ndarray
    lower_value: np.ndarray
    gap: float
    best_pair: tuple
    n_pairs: int = 0

    def to_dict(self) -> dict:
        policy, stop = self.best_pair
        return {
            "upper_value": self.upper_value.tolist(),
            "lower_value": self.lower_value.tolist(),
            "gap": self.gap,
            "best_policy": policy.to_list(),
            "best_stop_set": stop.stop.tolist(),
            "n_pairs": self.n_pairs,
        }


def backward_induction(game: StochasticGame, horizon: int) -> np.ndarray:
    """Value of the game truncated after ``horizon`` steps, with terminal value G.

    Each step is the finite-horizon minimax recursion
    ``V <- min(max_a [R + discount * P V], G)``.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    P, R, G, gamma = game.transition, game.reward, game.bequest, game.discount
    V = G.copy()
    for _ in range(horizon):
        cont = np.empty(game.n_states)
        for s in range(game.n_states):
            best = -np.inf
            for a in range(game.n_actions):
                best = max(best, R[s, a] + gamma * float(P[a, s] @ V))
            cont[s] = best
        V = np.minimum(cont, G)
    return V


def truncation_bound(game: StochasticGame, horizon: int) -> float:
    """Sup-norm distance bound between ``backward_induction`` and the value."""
    c = np.abs(game.reward).max() / (1.0 - game.discount) + np.abs(game.bequest).max()
    return game.discount**horizon * c


def _all_policies(game):
    return itertools.product(range(game.n_actions), repeat=game.n_states)


def _all_regions(n_states):
    # lexicographic over (False, True)^n
    return np.array(list(itertools.product((False, True), repeat=n_states)), dtype=bool)


def _evaluate_regions(game, policy, regions, tol, max_iter=1_000_000):
    """Evaluate ``policy`` against every region at once; returns (n_regions, S)."""
    r_pi, P_pi = policy_kernel(game, policy)
    G = game.bequest
    J = np.where(regions, G, 0.0)
    for _ in range(max_iter):
        new = np.where(regions, G, r_pi + game.discount * (J @ P_pi.T))
        done = np.max(np.abs(new - J)) <= tol
        J = new
        if done:
            break
    return J


def enumerate_minimax(game: StochasticGame, eval_tol: float = 1e-9) -> MinimaxReport:
    """Upper and lower values by exhaustive search over stationary strategies.

    ``lower_value[s] = max_pi min_stop J(s)`` and
    ``upper_value[s] = min_stop max_pi J(s)``, each taken pointwise over all
    ``n_actions**n_states`` deterministic policies and ``2**n_states`` stop
    regions.

    Raises
    ------
    InstanceTooLarge
        If the number of pairs exceeds ``MAX_PAIRS``.
    """
    if eval_tol <= 0:
        raise ValueError("eval_tol must be positive")
    n_pol = game.n_actions ** game.n_states
    n_reg = 2 ** game.n_states
    n_pairs = n_pol * n_reg
    if n_pairs > MAX_PAIRS:
        raise InstanceTooLarge(
            f"enumeration needs {n_pol} policies x {n_reg} stop regions = "
            f"{n_pairs} evaluations, above the limit of {MAX_PAIRS}")
    regions = _all_regions(game.n_states)
    inner_tol = eval_tol / 10.0

    values = np.empty((n_pol, n_reg, game.n_states))
    policies = []
    for i, acts in enumerate(_all_policies(game)):
        pol = Policy(np.array(acts))
        policies.append(pol)
        values[i] = _evaluate_regions(game, pol, regions, inner_tol)

    worst_case = values.min(axis=1)           # (n_pol, S)
    lower = worst_case.max(axis=0)
    best_case = values.max(axis=0)            # (n_reg, S)
    upper = best_case.min(axis=0)
    gap = float(np.max(np.abs(upper - lower)))

    # strict comparisons keep the first pair in enumeration order
    i_best = 0
    for i in range(1, n_pol):
        if worst_case[i].sum() > worst_case[i_best].sum():
            i_best = i
    row = values[i_best]
    j_best = 0
    for j in range(1, n_reg):
        if row[j].sum() < row[j_best].sum():
            j_best = j
    best_pair = (policies[i_best], StopSet(regions[j_best]))
    return MinimaxReport(upper, lower, gap, best_pair, n_pairs)


def best_response_stop(game: StochasticGame, policy: Policy, tol: float = 1e-12,
                       max_iter: int = 1_000_000) -> StopSet:
    """Stopper's best response to a fixed controller policy.

    Solves the one-player stopping problem ``V = min(G, r_pi + discount P_pi V)``
    and stops where ``G`` does not exceed the continuation.
    """
    validate_policy(game, policy)
    r_pi, P_pi = policy_kernel(game, policy)
    G = game.bequest
    V = G.copy()
    for _ in range(max_iter):
        new = np.minimum(G, r_pi + game.discount * (P_pi @ V))
        done = np.max(np.abs(new - V)) <= tol
        V = new
        if done:
            break
    return StopSet(G <= r_pi + game.discount * (P_pi @ V))


def best_response_stop_enumerated(game: StochasticGame, policy: Policy,
                                  tol: float = 1e-12) -> StopSet:
    """Exhaustive version of ``best_response_stop`` (first minimiser of the sum)."""
    regions = _all_regions(game.n_states)
    values = _evaluate_regions(game, policy, regions, tol)
    return StopSet(regions[int(np.argmin(values.sum(axis=1)))])


def adversarial_value(game: StochasticGame, policy: Policy,
                      tol: float = 1e-12) -> np.ndarray:
    """Value of ``policy`` when the stopper plays its best response."""
    stop = best_response_stop(game, policy, tol=tol)
    return evaluate_pair(game, policy, stop, tol=tol).value
