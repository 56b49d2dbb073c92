"""A controller that plans for actuator failure.

On a five-cell chain the agent earns 1 per step for pushing right at the
right wall. If the right actuator fails the agent can only move left, where
pushing against the left wall pays 0.2. The stopper chooses when the failure
happens, so the bequest is the post-failure value. The nominal policy heads
right; the game policy stays where a failure costs the least.
"""
import numpy as np

from stopgame import (adversarial_value, evaluate_random_stoppage,
                      make_actuator_chain, value_iterate)
from stopgame.cli import nominal_policy

game = make_actuator_chain()
nominal = nominal_policy(game)
robust = value_iterate(game, tol=1e-12).policy
print("post-failure value", np.round(game.bequest, 3))
print("nominal actions   ", nominal.action)
print("game actions      ", robust.action)
print()
print("worst-case value when the stopper picks the failure time")
print("  nominal", np.round(adversarial_value(game, nominal), 3))
print("  game   ", np.round(adversarial_value(game, robust), 3))

# with failures arriving at random rather than adversarially the ranking can flip
rng = np.random.default_rng(0)
print()
print("random failures (hazard 0.1 per step), start in cell 0")
for name, pol in (("nominal", nominal), ("game", robust)):
    mean, se = evaluate_random_stoppage(game, pol, 0.1, 500, 20_000, rng, start=0)
    print(f"  {name:8s}{mean:.3f} +/- {se:.3f}")
