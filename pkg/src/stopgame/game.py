"""Game data model for controller-stopper games.

A game is a finite discounted MDP for the controller plus a bequest vector
``G``: the stopper may halt the process at any state ``s`` and the
controller then receives ``G[s]`` instead of continuing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-12
FILE_ROW_SUM_TOL = 1e-9


class InvalidGameError(ValueError):
    """Raised when a game, policy or stop set violates its invariants."""


@dataclass(frozen=True, eq=False)
class StochasticGame:
    """Finite zero-sum game between a controller and a stopper.

    Attributes
    ----------
    transition : ndarray, shape (n_actions, n_states, n_states)
        ``transition[a, s, t]`` is the probability of moving from ``s`` to
        ``t`` under action ``a``.
    reward : ndarray, shape (n_states, n_actions)
    bequest : ndarray, shape (n_states,)
        Payoff to the controller when the game is stopped at a state.
    discount : float
        Discount factor in ``[0, 1)``.
    """

    transition: np.ndarray
    reward: np.ndarray
    bequest: np.ndarray
    discount: float
    features: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("transition", "reward", "bequest"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.features is not None:
            feats = np.array(self.features, dtype=float)
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]

    def replace(self, **changes) -> "StochasticGame":
        kw = dict(transition=self.transition, reward=self.reward,
                  bequest=self.bequest, discount=self.discount,
                  features=self.features)
        kw.update(changes)
        return StochasticGame(**kw)

    def __eq__(self, other):
        if not isinstance(other, StochasticGame):
            return NotImplemented
        same_feats = (self.features is None and other.features is None) or (
            self.features is not None and other.features is not None
            and np.array_equal(self.features, other.features))
        return (self.discount == other.discount
                and np.array_equal(self.transition, other.transition)
                and np.array_equal(self.reward, other.reward)
                and np.array_equal(self.bequest, other.bequest)
                and same_feats)

    __hash__ = None


@dataclass(frozen=True)
class Policy:
    """Markov controller policy.

    ``action`` holds the deterministic choice per state. When
    ``probabilities`` is given it takes precedence and ``action`` is its
    row-wise argmax.
    """

    action: np.ndarray
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "action", np.asarray(self.action, dtype=np.int64))
        if self.probabilities is not None:
            object.__setattr__(self, "probabilities",
                               np.asarray(self.probabilities, dtype=float))

    @classmethod
    def stochastic(cls, probabilities) -> "Policy":
        probs = np.asarray(probabilities, dtype=float)
        return cls(np.argmax(probs, axis=1), probs)

    def matrix(self, n_actions: int) -> np.ndarray:
        """Return ``pi[s, a]`` as a dense probability matrix."""
        if self.probabilities is not None:
            return self.probabilities
        out = np.zeros((self.action.size, n_actions))
        out[np.arange(self.action.size), self.action] = 1.0
        return out

    def to_list(self):
        if self.probabilities is not None:
            return self.probabilities.tolist()
        return self.action.tolist()


@dataclass(frozen=True)
class StopSet:
    """Stationary stopping rule: halt on first entry into ``stop``."""

    stop: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "stop", np.asarray(self.stop, dtype=bool))

    @classmethod
    def never(cls, n_states: int) -> "StopSet":
        return cls(np.zeros(n_states, dtype=bool))

    @classmethod
    def always(cls, n_states: int) -> "StopSet":
        return cls(np.ones(n_states, dtype=bool))


@dataclass
class EvaluationReport:
    value: np.ndarray
    residual: float
    iterations: int
    tol: float = 0.0

    @property
    def converged(self) -> bool:
        return self.residual <= self.tol


def validate_game(game: StochasticGame, row_tol: float = ROW_SUM_TOL) -> None:
    """Check the model invariants, raising on the first violation.

    Raises
    ------
    InvalidGameError
        Naming the offending row or field.
    """
    P, R, G = game.transition, game.reward, game.bequest
    if P.ndim != 3 or P.shape[1] != P.shape[2]:
        raise InvalidGameError(f"transition must have shape (A, S, S), got {P.shape}")
    n_actions, n_states = P.shape[0], P.shape[1]
    if n_states < 1 or n_actions < 1:
        raise InvalidGameError("need at least one state and one action")
    if R.shape != (n_states, n_actions):
        raise InvalidGameError(
            f"reward must have shape ({n_states}, {n_actions}), got {R.shape}")
    if G.shape != (n_states,):
        raise InvalidGameError(f"bequest must have shape ({n_states},), got {G.shape}")
    if not np.isfinite(P).all():
        raise InvalidGameError("transition contains non-finite entries")
    for a in range(n_actions):
        for s in range(n_states):
            row = P[a, s]
            if (row < 0).any():
                t = int(np.argmax(row < 0))
                raise InvalidGameError(
                    f"transition[{a}][{s}][{t}] = {row[t]} is negative")
            total = float(row.sum())
            if abs(total - 1.0) > row_tol:
                raise InvalidGameError(
                    f"transition[{a}][{s}] row sum {total!r} != 1")
    if not np.isfinite(R).all():
        s, a = np.argwhere(~np.isfinite(R))[0]
        raise InvalidGameError(f"reward[{s}][{a}] is not finite")
    if not np.isfinite(G).all():
        s = int(np.argmax(~np.isfinite(G)))
        raise InvalidGameError(f"bequest[{s}] is not finite")
    if not 0.0 <= game.discount < 1.0:
        raise InvalidGameError(f"discount must be < 1 and >= 0, got {game.discount}")
    if game.features is not None:
        F = game.features
        if F.ndim != 2 or F.shape[0] != n_states:
            raise InvalidGameError(
                f"features must have shape ({n_states}, D), got {F.shape}")
        if not np.isfinite(F).all():
            raise InvalidGameError("features contain non-finite entries")


def validate_policy(game: StochasticGame, policy: Policy) -> None:
    if policy.action.shape != (game.n_states,):
        raise InvalidGameError("policy length does not match n_states")
    if ((policy.action < 0) | (policy.action >= game.n_actions)).any():
        raise InvalidGameError("policy action index out of range")
    if policy.probabilities is not None:
        probs = policy.probabilities
        if probs.shape != (game.n_states, game.n_actions):
            raise InvalidGameError("policy probability matrix has wrong shape")
        if (probs < 0).any() or np.abs(probs.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise InvalidGameError("policy probability rows must sum to 1")


def _check_state(game, s, name="state"):
    if not 0 <= s < game.n_states:
        raise IndexError(f"{name} {s} out of range for {game.n_states} states")


def transition_sample(game: StochasticGame, s: int, a: int,
                      rng: np.random.Generator) -> int:
    """Draw a successor of ``s`` under action ``a``."""
    _check_state(game, s)
    if not 0 <= a < game.n_actions:
        raise IndexError(f"action {a} out of range for {game.n_actions} actions")
    cdf = np.cumsum(game.transition[a, s])
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, game.n_states - 1)


def sample_next_states(P_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised inverse-CDF sampling: one draw per row of ``P_rows``."""
    cdf = np.cumsum(P_rows, axis=-1)
    idx = (cdf < (u * cdf[..., -1])[..., None]).sum(axis=-1)
    return np.minimum(idx, P_rows.shape[-1] - 1)


def policy_kernel(game: StochasticGame, policy: Policy):
    """Return the reward vector and transition matrix induced by ``policy``."""
    pi = policy.matrix(game.n_actions)
    r_pi = np.einsum("sa,sa->s", pi, game.reward)
    P_pi = np.einsum("sa,ast->st", pi, game.transition)
    return r_pi, P_pi


def evaluate_pair(game: StochasticGame, policy: Policy, stop: StopSet,
                  tol: float = 1e-10, max_iter: int = 1_000_000) -> EvaluationReport:
    """Value of a fixed (policy, stopping region) pair by fixed-point sweeps.

    Solves ``J = G`` on the stop region and
    ``J = r_pi + discount * P_pi J`` elsewhere.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    validate_policy(game, policy)
    mask = stop.stop
    if mask.shape != (game.n_states,):
        raise InvalidGameError("stop set length does not match n_states")
    r_pi, P_pi = policy_kernel(game, policy)
    G = game.bequest
    J = np.where(mask, G, 0.0)
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        new = np.where(mask, G, r_pi + game.discount * (P_pi @ J))
        residual = float(np.max(np.abs(new - J)))
        J = new
        if residual <= tol:
            break
    return EvaluationReport(J, residual, it, tol)


def evaluate_random_stoppage(game: StochasticGame, policy: Policy, hazard: float,
                             horizon: int, n_rollouts: int,
                             rng: np.random.Generator, start: int = 0):
    """Monte Carlo value of ``policy`` when the system fails at random.

    The failure time is geometric with per-step probability ``hazard``
    (failure can happen at ``t = 0``) and is truncated at ``horizon``. On
    failure at time ``t`` the rollout collects ``discount**t * G[s_t]``.

    Returns
    -------
    mean, stderr : float
    """
    if not 0.0 <= hazard <= 1.0:
        raise ValueError("hazard must lie in [0, 1]")
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    validate_policy(game, policy)
    _check_state(game, start, "start")
    pi = policy.matrix(game.n_actions)
    pi_cdf = np.cumsum(pi, axis=1)
    gamma = game.discount

    states = np.full(n_rollouts, start, dtype=np.int64)
    alive = np.ones(n_rollouts, dtype=bool)
    total = np.zeros(n_rollouts)
    disc = 1.0
    for t in range(horizon + 1):
        fail = rng.random(n_rollouts) < hazard
        if t == horizon:
            fail[:] = True
        stopping = alive & fail
        total[stopping] += disc * game.bequest[states[stopping]]
        alive &= ~fail
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        s = states[idx]
        u_a = rng.random(idx.size)
        acts = np.minimum((pi_cdf[s] < u_a[:, None]).sum(axis=1), game.n_actions - 1)
        total[idx] += disc * game.reward[s, acts]
        states[idx] = sample_next_states(game.transition[acts, s], rng.random(idx.size))
        disc *= gamma
    mean = float(total.mean())
    stderr = float(total.std(ddof=1) / np.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0
    return mean, stderr


# -- game definition files -------------------------------------------------

def game_to_dict(game: StochasticGame) -> dict:
    out = {
        "n_states": game.n_states,
        "n_actions": game.n_actions,
        "transition": game.transition.tolist(),
        "reward": game.reward.tolist(),
        "bequest": game.bequest.tolist(),
        "discount": game.discount,
    }
    if game.features is not None:
        out["features"] = game.features.tolist()
    return out


def game_from_dict(data: dict) -> StochasticGame:
    """Build and validate a game from its JSON document form."""
    missing = [k for k in ("n_states", "n_actions", "transition", "reward",
                           "bequest", "discount") if k not in data]
    if missing:
        raise InvalidGameError(f"missing field(s): {', '.join(missing)}")
    try:
        game = StochasticGame(
            transition=np.asarray(data["transition"], dtype=float),
            reward=np.asarray(data["reward"], dtype=float),
            bequest=np.asarray(data["bequest"], dtype=float),
            discount=float(data["discount"]),
            features=data.get("features"),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidGameError(f"malformed numeric field: {exc}") from exc
    if game.transition.ndim != 3:
        raise InvalidGameError("transition must be nested as [a][s][s']")
    if (game.n_states, game.n_actions) != (data["n_states"], data["n_actions"]):
        raise InvalidGameError(
            f"declared n_states={data['n_states']}, n_actions={data['n_actions']} "
            f"but transition has shape {game.transition.shape}")
    validate_game(game, row_tol=FILE_ROW_SUM_TOL)
    sums = game.transition.sum(axis=2, keepdims=True)
    if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
        # absorb decimal round-off so downstream strict checks hold
        game = game.replace(transition=game.transition / sums)
    return game


def save_game(game: StochasticGame, path) -> None:
    from .io import write_json
    write_json(path, game_to_dict(game))


def load_game(path) -> StochasticGame:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidGameError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InvalidGameError(f"{path}: top level must be an object")
    return game_from_dict(data)
