"""Exact tabular solution of the controller-stopper game.

The game operator is

    (TJ)(s) = min( max_a [R[s, a] + discount * P[a, s] @ J], G[s] )

and its fixed point is the equilibrium value. The continuation operator

    (FQ)(s) = max_a [R[s, a] + discount * P[a, s] @ min(G, Q)]

has the continuation value as its fixed point, and the two are linked by
``J* = min(Q*, G)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import Policy, StochasticGame, StopSet


@dataclass
class GameSolution:
    value: np.ndarray
    q_value: np.ndarray
    policy: Policy
    stop_set: StopSet
    residual: float
    iterations: int
    tol: float = 0.0
    residual_history: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "value": self.value.tolist(),
            "q_value": self.q_value.tolist(),
            "policy": self.policy.to_list(),
            "stop_set": self.stop_set.stop.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _expected_next(P, J):
    # row-wise reduction over a contiguous last axis: any subset of states gives bit-identical rows
    return (P * J).sum(axis=-1)


def action_values(game: StochasticGame, J) -> np.ndarray:
    """One-step lookahead ``R[s, a] + discount * P[a, s] @ J`` as an (S, A) array."""
    J = np.asarray(J, dtype=float)
    return game.reward + game.discount * _expected_next(game.transition, J).T


def continuation_value(game: StochasticGame, J, s: int) -> float:
    """Best one-step continuation payoff at state ``s`` against ``J``."""
    J = np.asarray(J, dtype=float)
    vals = game.reward[s] + game.discount * _expected_next(game.transition[:, s, :], J)
    return float(vals.max())


def continuation_values(game: StochasticGame, J) -> np.ndarray:
    return action_values(game, J).max(axis=1)


def bellman_apply(game: StochasticGame, J) -> np.ndarray:
    """Apply the game operator ``T`` once."""
    return np.minimum(continuation_values(game, J), game.bequest)


def apply_F(game: StochasticGame, Q) -> np.ndarray:
    """Apply the continuation operator ``F`` once."""
    Q = np.asarray(Q, dtype=float)
    return continuation_values(game, np.minimum(game.bequest, Q))


def extract_policy(game: StochasticGame, J) -> Policy:
    """Greedy controller policy against ``J``; ties go to the lowest action."""
    return Policy(np.argmax(action_values(game, J), axis=1))


def extract_stop_set(game: StochasticGame, J) -> StopSet:
    """Stop wherever the bequest does not exceed the continuation value."""
    return StopSet(game.bequest <= continuation_values(game, J))


def _iterate(op, x0, tol, max_iter):
    x = np.asarray(x0, dtype=float)
    history = []
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        nxt = op(x)
        residual = float(np.abs(nxt - x).max())
        history.append(residual)
        x = nxt
        if residual <= tol:
            break
    return x, residual, it, history


def value_iterate(game: StochasticGame, J0=None, tol: float = 1e-9,
                  max_iter: int = 1_000_000) -> GameSolution:
    """Iterate ``T`` to its fixed point and extract both players' strategies.

    The returned value is within ``tol / (1 - discount)`` of the equilibrium
    value in sup norm. When ``max_iter`` is reached first the last iterate is
    returned and ``converged`` is False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if J0 is None:
        J0 = np.zeros(game.n_states)
    J, residual, it, history = _iterate(lambda x: bellman_apply(game, x),
                                        J0, tol, max_iter)
    return GameSolution(
        value=J,
        q_value=continuation_values(game, J),
        policy=extract_policy(game, J),
        stop_set=extract_stop_set(game, J),
        residual=residual,
        iterations=it,
        tol=tol,
        residual_history=history,
    )


def solve_Q(game: StochasticGame, tol: float = 1e-9, max_iter: int = 1_000_000,
            Q0=None, return_info: bool = False):
    """Fixed point of ``F``, the continuation value ``Q*``.

    With ``return_info`` the result is ``(Q, residual, iterations)``;
    non-convergence is visible as ``residual > tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if Q0 is None:
        Q0 = np.zeros(game.n_states)
    Q, residual, it, _ = _iterate(lambda x: apply_F(game, x), Q0, tol, max_iter)
    if return_info:
        return Q, residual, it
    return Q


def solve(game: StochasticGame, tol: float = 1e-9,
          max_iter: int = 1_000_000) -> GameSolution:
    """Value iteration followed by an independent ``F`` solve for ``Q*``."""
    sol = value_iterate(game, tol=tol, max_iter=max_iter)
    Q, q_res, q_it = solve_Q(game, tol=tol, max_iter=max_iter, return_info=True)
    sol.q_value = Q
    sol.residual = max(sol.residual, q_res)
    sol.iterations = max(sol.iterations, q_it)
    return sol
