"""Solve a small random game exactly and certify it by brute force.

Value iteration gives the equilibrium value and both players' strategies.
On a three-state game we can also enumerate every stationary policy and
stop region and confirm that max-min and min-max coincide.
"""
import numpy as np

from stopgame import backward_induction, enumerate_minimax, make_random_game, solve

game = make_random_game(3, 2, seed=4)
sol = solve(game, tol=1e-12)
print("value J*      ", np.round(sol.value, 6))
print("controller    ", sol.policy.action)
print("stop region   ", sol.stop_set.stop)
print("min(Q*, G)    ", np.round(np.minimum(sol.q_value, game.bequest), 6))

# exhaustive check over 2**3 policies x 2**3 stop regions
rep = enumerate_minimax(game)
print("max-min       ", np.round(rep.lower_value, 6))
print("min-max       ", np.round(rep.upper_value, 6))
print("duality gap    %.2e" % rep.gap)

# truncated horizons approach the same value geometrically fast
for h in (5, 20, 80):
    err = np.max(np.abs(backward_induction(game, h) - sol.value))
    print(f"horizon {h:3d}   sup error {err:.2e}")
