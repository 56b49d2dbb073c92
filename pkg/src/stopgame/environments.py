"""Benchmark game constructors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import EvaluationReport, StochasticGame, validate_game

SAFE_BEQUEST = 1e9

LEFT, RIGHT = 0, 1


def solve_restricted_mdp(game: StochasticGame, allowed, tol: float = 1e-10,
                         max_iter: int = 1_000_000) -> EvaluationReport:
    """Optimal value of the controller's MDP using only ``allowed`` actions.

    The stopper and the bequest play no part here.
    """
    allowed = sorted(set(int(a) for a in allowed))
    if not allowed:
        raise ValueError("allowed action set must be nonempty")
    if allowed[0] < 0 or allowed[-1] >= game.n_actions:
        raise IndexError("allowed action out of range")
    P = game.transition[allowed]
    R = game.reward[:, allowed]
    V = np.zeros(game.n_states)
    residual, it = np.inf, 0
    while it < max_iter:
        it += 1
        new = (R + game.discount * np.einsum("ast,t->sa", P, V)).max(axis=1)
        residual = float(np.max(np.abs(new - V)))
        V = new
        if residual <= tol:
            break
    return EvaluationReport(V, residual, it, tol)


@dataclass
class ActuatorSpec:
    """A 1-D chain where the stopper decides when actuators fail.

    Actions are ``0`` (left) and ``1`` (right); a move succeeds with
    probability ``success`` and otherwise the agent stays put. Walls clamp.
    ``step_reward`` maps ``(cell, action)`` to a reward; unlisted pairs pay 0.
    The default pays 1 for pushing right in the last cell and 0.2 for pushing
    left in the first, so the nominal policy heads right while the
    post-failure (left-only) value is highest near the left wall.
    After failure only ``surviving_actions`` remain usable, and the value of
    the best such policy becomes the bequest.
    """

    n_cells: int = 5
    full_actions: int = 2
    surviving_actions: tuple = (LEFT,)
    step_reward: dict | None = None
    success: float = 0.9
    discount: float = 0.9

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("n_cells must be >= 1")
        if self.full_actions != 2:
            raise ValueError("the actuator chain has exactly two actions (left, right)")
        surv = tuple(sorted(set(self.surviving_actions)))
        if not surv:
            raise ValueError("surviving_actions must be nonempty")
        if not set(surv) <= set(range(self.full_actions)):
            raise ValueError("surviving_actions must be a subset of the action set")
        self.surviving_actions = surv
        if self.step_reward is None:
            self.step_reward = {(self.n_cells - 1, RIGHT): 1.0, (0, LEFT): 0.2}
        for (cell, action) in self.step_reward:
            if not (0 <= cell < self.n_cells and 0 <= action < self.full_actions):
                raise ValueError(f"step_reward key {(cell, action)} out of range")


def chain_mdp(spec: ActuatorSpec) -> StochasticGame:
    """The full-action chain with a placeholder bequest of zero."""
    n = spec.n_cells
    P = np.zeros((2, n, n))
    for s in range(n):
        for a, step in ((LEFT, -1), (RIGHT, 1)):
            t = min(max(s + step, 0), n - 1)
            P[a, s, t] += spec.success
            P[a, s, s] += 1.0 - spec.success
    R = np.zeros((n, 2))
    for (cell, action), r in spec.step_reward.items():
        R[cell, action] = r
    return StochasticGame(P, R, np.zeros(n), spec.discount)


def make_actuator_chain(spec: ActuatorSpec | None = None, tol: float = 1e-12) -> StochasticGame:
    """Chain game whose bequest is the post-failure (restricted) optimal value.

    Because the controller can always mimic the restricted policy, the
    equilibrium value equals the bequest everywhere and the stopper is
    indifferent to failing at once. What the game adds is the controller's
    policy: it avoids states where a failure would be most costly.
    """
    spec = spec or ActuatorSpec()
    base = chain_mdp(spec)
    restricted = solve_restricted_mdp(base, spec.surviving_actions, tol=tol)
    if not restricted.converged:
        raise RuntimeError("restricted MDP did not converge")
    game = base.replace(bequest=restricted.value)
    validate_game(game)
    return game


def make_hazard_grid(width: int, height: int, hazard_cells=(), hazard_bequest: float = -1.0,
                     goal_reward: float = 1.0, slip: float = 0.0, discount: float = 0.9,
                     goal=None) -> StochasticGame:
    """Gridworld with an absorbing goal and hazard cells where stopping bites.

    States are numbered row-major, ``s = y * width + x``. Actions are
    N, S, E, W; the intended move happens with probability ``1 - slip`` and
    each lateral move with ``slip / 2``. Moves into walls stay put. Entering
    the goal pays ``goal_reward`` (as an expected one-step reward); the goal
    is absorbing with zero reward. The bequest is ``hazard_bequest`` on
    hazard cells and ``SAFE_BEQUEST`` elsewhere.
    """
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    if not 0.0 <= slip <= 1.0:
        raise ValueError("slip must lie in [0, 1]")
    n = width * height
    if goal is None:
        goal = (width - 1, height - 1)
    gx, gy = goal
    if not (0 <= gx < width and 0 <= gy < height):
        raise ValueError(f"goal {goal} outside the grid")
    g = gy * width + gx
    moves = [(0, -1), (0, 1), (1, 0), (-1, 0)]          # N S E W
    lateral = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}

    def target(s, m):
        x, y = s % width, s // width
        dx, dy = moves[m]
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height:
            return ny * width + nx
        return s

    P = np.zeros((4, n, n))
    for s in range(n):
        for a in range(4):
            if s == g:
                P[a, s, s] = 1.0
                continue
            P[a, s, target(s, a)] += 1.0 - slip
            for m in lateral[a]:
                P[a, s, target(s, m)] += slip / 2.0
    R = goal_reward * P[:, :, g].T.copy()
    R[g] = 0.0
    G = np.full(n, SAFE_BEQUEST)
    for cell in hazard_cells:
        hx, hy = cell
        if not (0 <= hx < width and 0 <= hy < height):
            raise ValueError(f"hazard cell {cell} outside the grid")
        G[hy * width + hx] = hazard_bequest
    game = StochasticGame(P, R, G, discount)
    validate_game(game)
    return game


def make_random_game(n_states: int, n_actions: int, reward_scale: float = 1.0,
                     seed: int = 0, discount: float = 0.9) -> StochasticGame:
    """Random game for property tests; identical seeds give identical games.

    Transition rows are Dirichlet(1) draws, rewards are uniform on
    ``[-reward_scale, reward_scale]`` and bequests uniform on
    ``[-reward_scale / (1 - discount), reward_scale / (1 - discount)]`` so
    that stopping is sometimes, but not always, attractive.
    """
    if n_states < 1 or n_actions < 1:
        raise ValueError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    P /= P.sum(axis=2, keepdims=True)
    R = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    span = reward_scale / (1.0 - discount)
    G = rng.uniform(-span, span, size=n_states)
    game = StochasticGame(P, R, G, discount)
    validate_game(game)
    return game
