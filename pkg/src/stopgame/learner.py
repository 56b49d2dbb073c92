"""Simulation-based value iteration with a linear basis.

The learner tunes weights ``r`` so that ``Phi r`` approximates the
continuation value ``Q*`` (the fixed point of ``F``). Its limit is the
projected fixed point ``Pi F(Phi r*) = Phi r*``, where ``Pi`` is the
least-squares projection weighted by the stationary distribution of the
sampling chain.

The sampling chain follows uniformly random actions and restarts at a
uniformly random state with probability ``1 / restart_period`` per step, so
it is irreducible on any game.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .features import FeatureMap
from .game import EvaluationReport, Policy, StochasticGame, StopSet, evaluate_pair
from .io import write_csv
from .solver import action_values, apply_F

DEFAULT_STEP_SIZE = (100.0, 100.0)
DEFAULT_RESTART_PERIOD = 100
DIVERGENCE_FACTOR = 1e6
_CHUNK = 1 << 17


class LearningDiverged(RuntimeError):
    """Weights blew up; carries the partial diagnostics."""

    def __init__(self, message, state, diagnostics):
        super().__init__(message)
        self.state = state
        self.diagnostics = diagnostics


@dataclass
class LearnerState:
    """Weights plus the Robbins-Monro schedule ``alpha_t = a / (b + t)``."""

    weights: np.ndarray
    step: int = 0
    a: float = DEFAULT_STEP_SIZE[0]
    b: float = DEFAULT_STEP_SIZE[1]
    residual: float | None = None

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        if not np.isfinite(self.weights).all():
            raise ValueError("weights must be finite")
        if self.a <= 0 or self.b < 0:
            raise ValueError("step size needs a > 0 and b >= 0")

    @property
    def alpha(self) -> float:
        return self.a / (self.b + self.step)


@dataclass
class LearnDiagnostics:
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    weight_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    td_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_weights: np.ndarray | None = None
    bellman_error: float = float("nan")
    visits: np.ndarray | None = None
    n_updates: int = 0
    n_transitions: int = 0

    @property
    def weight_trajectory_norms(self) -> np.ndarray:
        return self.weight_errors

    def rows(self):
        return [(int(t), float(e), float(d))
                for t, e, d in zip(self.steps, self.weight_errors, self.td_errors)]

    def to_csv(self, path) -> None:
        write_csv(path, ("step", "weight_error", "td_error"), self.rows())


# -- measures ----------------------------------------------------------------

def mu_norm(f, mu) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(np.sum(mu * f * f)))


def mu_inner(f, g, mu) -> float:
    return float(np.sum(mu * np.asarray(f) * np.asarray(g)))


def behavior_kernel(game: StochasticGame, behavior: Policy | None = None,
                    restart_prob: float = 1.0 / DEFAULT_RESTART_PERIOD) -> np.ndarray:
    """Transition matrix of the sampling chain, restarts included."""
    if behavior is None:
        base = game.transition.mean(axis=0)
    else:
        base = np.einsum("sa,ast->st", behavior.matrix(game.n_actions), game.transition)
    return (1.0 - restart_prob) * base + restart_prob / game.n_states


def stationary_distribution(game: StochasticGame, behavior: Policy | None = None,
                            tol: float = 1e-13, max_iter: int = 1_000_000,
                            restart_prob: float = 1.0 / DEFAULT_RESTART_PERIOD,
                            return_info: bool = False):
    """Stationary law of the sampling chain by power iteration.

    ``behavior=None`` means uniformly random actions. With ``return_info``
    an :class:`EvaluationReport` (``value`` holds ``mu``) is returned so that
    non-convergence is visible.
    """
    K = behavior_kernel(game, behavior, restart_prob)
    mu = np.full(game.n_states, 1.0 / game.n_states)
    residual, it = np.inf, 0
    while it < max_iter:
        it += 1
        new = mu @ K
        new /= new.sum()
        residual = float(np.abs(new - mu).sum())
        mu = new
        if residual <= tol:
            break
    if return_info:
        return EvaluationReport(mu, residual, it, tol)
    return mu


# -- projection ----------------------------------------------------------------

def projection_weights(fmap: FeatureMap, mu, Q) -> np.ndarray:
    """Weights ``r`` of the ``mu``-weighted least-squares fit ``Phi r ~ Q``."""
    mu = np.asarray(mu, dtype=float)
    fmap.check_rank(mu)
    Phi = fmap.matrix
    gram = Phi.T @ (mu[:, None] * Phi)
    rhs = Phi.T @ (mu * np.asarray(Q, dtype=float))
    return np.linalg.solve(gram, rhs)


def project(fmap: FeatureMap, mu, Q) -> np.ndarray:
    """``Pi Q``: orthogonal projection onto span(Phi) in the ``mu`` inner product."""
    return fmap.values(projection_weights(fmap, mu, Q))


def projected_fixed_point(game: StochasticGame, fmap: FeatureMap, mu,
                          tol: float = 1e-10, max_iter: int = 100_000,
                          r0=None) -> LearnerState:
    """Solve ``Pi F(Phi r) = Phi r`` by iterating ``r <- weights(Pi F(Phi r))``.

    The returned state's ``residual`` is ``||Pi F(Phi r) - Phi r||_mu``;
    ``step`` counts iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu = np.asarray(mu, dtype=float)
    fmap.check_rank(mu)
    r = np.zeros(fmap.n_features) if r0 is None else np.array(r0, dtype=float)
    residual, it = np.inf, 0
    while it < max_iter:
        it += 1
        nxt = projection_weights(fmap, mu, apply_F(game, fmap.values(r)))
        residual = mu_norm(fmap.values(nxt) - fmap.values(r), mu)
        if residual <= tol:
            break
        r = nxt
    return LearnerState(r, step=it, residual=residual)


def greedy_from_weights(game: StochasticGame, fmap: FeatureMap, r):
    """Controller policy and stop region implied by approximate weights.

    Stop where ``G <= Phi r``; the controller is greedy against
    ``R + discount * P min(G, Phi r)`` with ties to the lowest action.
    """
    q = fmap.values(r)
    stop = StopSet(game.bequest <= q)
    policy = Policy(np.argmax(action_values(game, np.minimum(game.bequest, q)), axis=1))
    return policy, stop


@dataclass
class BoundReport:
    weight_error: float          # ||Phi r* - Q*||_mu
    weight_bound: float          # (1 - g^2)^(-1/2) ||Pi Q* - Q*||_mu
    performance_loss: float      # E_mu[J* - J(approx pair)]
    performance_bound: float     # 2 / ((1 - g) sqrt(1 - g^2)) ||Pi Q* - Q*||_mu
    projection_error: float
    atol: float = 1e-9

    @property
    def weight_ok(self) -> bool:
        return self.weight_error <= self.weight_bound + self.atol

    @property
    def performance_ok(self) -> bool:
        return self.performance_loss <= self.performance_bound + self.atol

    def to_dict(self) -> dict:
        return {
            "projection_error": self.projection_error,
            "weight_error": self.weight_error,
            "weight_bound": self.weight_bound,
            "weight_ok": self.weight_ok,
            "performance_loss": self.performance_loss,
            "performance_bound": self.performance_bound,
            "performance_ok": self.performance_ok,
        }


def error_bounds(game: StochasticGame, fmap: FeatureMap, mu, q_star,
                 r_star, tol: float = 1e-12, atol: float = 1e-9) -> BoundReport:
    """Compare the approximation and performance errors with their bounds.

    ``r_star`` may be a :class:`LearnerState` or a weight vector.
    """
    weights = r_star.weights if isinstance(r_star, LearnerState) else np.asarray(r_star)
    mu = np.asarray(mu, dtype=float)
    q_star = np.asarray(q_star, dtype=float)
    gamma = game.discount
    approx = fmap.values(weights)
    proj_err = mu_norm(project(fmap, mu, q_star) - q_star, mu)

    policy, stop = greedy_from_weights(game, fmap, weights)
    j_approx = evaluate_pair(game, policy, stop, tol=tol).value
    j_star = np.minimum(q_star, game.bequest)
    root = math.sqrt(1.0 - gamma**2)
    return BoundReport(
        weight_error=mu_norm(approx - q_star, mu),
        weight_bound=proj_err / root,
        performance_loss=float(np.sum(mu * (j_star - j_approx))),
        performance_bound=2.0 * proj_err / ((1.0 - gamma) * root),
        projection_error=proj_err,
        atol=atol,
    )


# -- stochastic updates ------------------------------------------------------

def td_update(learner: LearnerState, fmap: FeatureMap, game: StochasticGame,
              s: int, s_next: int, action: int | None = None,
              alpha: float | None = None) -> LearnerState:
    """One stochastic step towards ``F(Phi r)`` along the transition ``s -> s_next``.

    The target is ``reward + discount * min(Phi r(s_next), G(s_next))`` where
    ``reward`` is ``R[s, action]``, or ``max_a R[s, a]`` when no action is
    given.
    """
    phi_s = fmap.phi(s)
    r = learner.weights
    reward = game.reward[s].max() if action is None else game.reward[s, action]
    cont = min(float(fmap.phi(s_next) @ r), float(game.bequest[s_next]))
    delta = reward + game.discount * cont - float(phi_s @ r)
    step = learner.alpha if alpha is None else alpha
    return LearnerState(r + step * delta * phi_s, learner.step + 1,
                        learner.a, learner.b)


def greedy_action(game: StochasticGame, fmap: FeatureMap, r, s: int) -> int:
    """Maximiser of ``R[s, a] + discount * P[a, s] @ min(G, Phi r)``."""
    m = np.minimum(game.bequest, fmap.values(r))
    vals = game.reward[s] + game.discount * (game.transition[:, s, :] @ m)
    return int(np.argmax(vals))


@numba.njit(cache=True)
def _learn_chunk(P, cdf, R, G, gamma, Phi, r, t, a_coef, b_coef, u, s, restart_prob,
                 greedy, r_star, has_star, record_every, guard, visits,
                 rec_step, rec_err, rec_td, n_rec, n_moves):
    n_actions, n_states = R.shape[1], R.shape[0]
    D = Phi.shape[1]
    m = np.empty(n_states)
    last_td = 0.0
    for i in range(u.shape[0]):
        n_moves += 1
        a_beh = min(int(u[i, 0] * n_actions), n_actions - 1)
        row = cdf[a_beh, s]
        x = u[i, 1] * row[n_states - 1]
        s_next = n_states - 1
        for k in range(n_states):
            if row[k] > x:
                s_next = k
                break
        do_update = True
        if greedy:
            for k in range(n_states):
                acc = 0.0
                for j in range(D):
                    acc += Phi[k, j] * r[j]
                m[k] = min(G[k], acc)
            best_a, best_v = 0, -np.inf
            for a in range(n_actions):
                acc = 0.0
                for k in range(n_states):
                    acc += P[a, s, k] * m[k]
                v = R[s, a] + gamma * acc
                if v > best_v:
                    best_v, best_a = v, a
            do_update = a_beh == best_a
            reward = R[s, best_a]
        else:
            reward = R[s, 0]
            for a in range(1, n_actions):
                reward = max(reward, R[s, a])
        if do_update:
            q_s = 0.0
            q_n = 0.0
            for j in range(D):
                q_s += Phi[s, j] * r[j]
                q_n += Phi[s_next, j] * r[j]
            delta = reward + gamma * min(q_n, G[s_next]) - q_s
            alpha = a_coef / (b_coef + t)
            norm2 = 0.0
            for j in range(D):
                r[j] += alpha * delta * Phi[s, j]
                norm2 += r[j] * r[j]
            t += 1
            visits[s] += 1
            last_td = delta
            if record_every > 0 and t % record_every == 0 and n_rec < rec_step.shape[0]:
                err = np.nan
                if has_star:
                    e2 = 0.0
                    for j in range(D):
                        e2 += (r[j] - r_star[j]) ** 2
                    err = np.sqrt(e2)
                rec_step[n_rec] = t
                rec_err[n_rec] = err
                rec_td[n_rec] = last_td
                n_rec += 1
            if not np.sqrt(norm2) <= guard:
                return s, t, n_rec, n_moves, 1
        if u[i, 2] < restart_prob:
            s = min(int(u[i, 3] * n_states), n_states - 1)
        else:
            s = s_next
    return s, t, n_rec, n_moves, 0


def run_learning(game: StochasticGame, fmap: FeatureMap, n_steps: int,
                 restart_period: int = DEFAULT_RESTART_PERIOD,
                 step_size=DEFAULT_STEP_SIZE, seed: int = 0, r0=None,
                 r_star=None, target: str = "greedy", record_every: int = 1000,
                 mu=None):
    """Simulate the sampling chain for ``n_steps`` transitions, updating ``r``.

    Parameters
    ----------
    target : {"greedy", "max_reward"}
        ``"greedy"`` updates only on transitions whose behaviour action equals
        the controller's greedy action under the current weights, using that
        action's reward; the expected update then points along
        ``F(Phi r) - Phi r`` for any kernel. ``"max_reward"`` updates on every
        transition with ``max_a R[s, a]`` as the reward, whose expected target
        uses the action-averaged kernel rather than ``F``.
    r_star : array, optional
        Reference weights for the ``||r_t - r*||`` series.
    mu : array, optional
        Measure for the final projected Bellman error; defaults to the
        stationary law of the sampling chain.

    Returns
    -------
    LearnerState, LearnDiagnostics

    Raises
    ------
    LearningDiverged
        If ``||r_t||`` exceeds ``1e6 * (1 + ||r_0||)``.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if restart_period < 1:
        raise ValueError("restart_period must be >= 1")
    if target not in ("greedy", "max_reward"):
        raise ValueError(f"unknown target {target!r}")
    if fmap.n_states != game.n_states:
        raise ValueError("feature map and game disagree on the number of states")
    a_coef, b_coef = (float(x) for x in step_size)
    r = np.zeros(fmap.n_features) if r0 is None else np.array(r0, dtype=float)
    LearnerState(r, 0, a_coef, b_coef)  # validates the schedule
    if b_coef == 0:
        raise ValueError("b must be positive so that alpha_0 is finite")
    restart_prob = 1.0 / restart_period
    if mu is None:
        mu = stationary_distribution(game, restart_prob=restart_prob)
    fmap.check_rank(mu)

    rng = np.random.default_rng(seed)
    s = int(rng.integers(game.n_states))
    cdf = np.cumsum(game.transition, axis=2)
    has_star = r_star is not None
    star = np.zeros(fmap.n_features) if r_star is None else np.asarray(r_star, dtype=float)
    guard = DIVERGENCE_FACTOR * (1.0 + float(np.linalg.norm(r)))
    n_rec_max = n_steps // record_every + 1 if record_every > 0 else 0
    rec_step = np.zeros(n_rec_max, dtype=np.int64)
    rec_err = np.zeros(n_rec_max)
    rec_td = np.zeros(n_rec_max)
    visits = np.zeros(game.n_states, dtype=np.int64)
    t, n_rec, n_moves, status = 0, 0, 0, 0
    remaining = n_steps
    Phi = np.ascontiguousarray(fmap.matrix)
    while remaining > 0 and status == 0:
        size = min(_CHUNK, remaining)
        u = rng.random((size, 4))
        s, t, n_rec, n_moves, status = _learn_chunk(
            game.transition, cdf, game.reward, game.bequest, game.discount, Phi, r, t, a_coef,
            b_coef, u, s, restart_prob, target == "greedy", star, has_star,
            record_every, guard, visits, rec_step, rec_err, rec_td, n_rec, n_moves)
        remaining -= size

    state = LearnerState(r, t, a_coef, b_coef)
    diag = LearnDiagnostics(
        steps=rec_step[:n_rec].copy(),
        weight_errors=rec_err[:n_rec].copy(),
        td_errors=rec_td[:n_rec].copy(),
        final_weights=r.copy(),
        visits=visits,
        n_updates=t,
        n_transitions=n_moves,
    )
    if status:
        raise LearningDiverged(
            f"weights exceeded {guard:.3g} after {t} updates; step sizes too large "
            "or features ill-conditioned", state, diag)
    diag.bellman_error = mu_norm(project(fmap, mu, apply_F(game, fmap.values(r)))
                                 - fmap.values(r), mu)
    return state, diag
