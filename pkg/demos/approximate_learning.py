"""Learn a continuation value from simulation with two linear features.

The learner only sees sampled transitions of a chain driven by random
actions. With a polynomial basis it converges to the projected fixed point,
and the greedy strategies it implies lose no more than the error bound
allows.
"""
import numpy as np

from stopgame import (error_bounds, make_random_game, projected_fixed_point,
                      run_learning, solve_Q, stationary_distribution)
from stopgame.features import polynomial
from stopgame.learner import mu_norm

game = make_random_game(5, 2, seed=0)
fmap = polynomial(5, 1)
mu = stationary_distribution(game)
q_star = solve_Q(game, tol=1e-12)
r_star = projected_fixed_point(game, fmap, mu, tol=1e-12)

state, diag = run_learning(game, fmap, 10**6, seed=1, r_star=r_star.weights,
                           record_every=100_000)
print("projected fixed point weights", np.round(r_star.weights, 4))
print("learned weights              ", np.round(state.weights, 4))
for t, e in zip(diag.steps, diag.weight_errors):
    print(f"  after {t:7d} updates  ||r - r*|| = {e:.4f}")

print("mu-distance to fixed point   ", round(mu_norm(fmap.values(state.weights)
                                                     - fmap.values(r_star.weights), mu), 5))
rep = error_bounds(game, fmap, mu, q_star, r_star)
print(f"approximation error {rep.weight_error:.4f}  bound {rep.weight_bound:.4f}")
print(f"performance loss    {rep.performance_loss:.4f}  bound {rep.performance_bound:.4f}")
