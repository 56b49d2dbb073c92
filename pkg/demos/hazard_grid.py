"""Gridworld where failure is only possible on hazard cells.

The bequest is effectively infinite on safe cells, so the stopper can only
act on hazards. A harsh hazard bequest pushes the controller to route
around them.
"""
import numpy as np

from stopgame import make_hazard_grid, value_iterate

arrows = np.array(list("^v><"))
for bequest in (5.0, -5.0):
    game = make_hazard_grid(4, 3, [(1, 1), (2, 1)], hazard_bequest=bequest, slip=0.1)
    sol = value_iterate(game, tol=1e-12)
    print(f"hazard bequest {bequest:+.0f}")
    print(np.round(sol.value.reshape(3, 4), 3))
    grid = arrows[sol.policy.action].reshape(3, 4)
    grid[sol.stop_set.stop.reshape(3, 4)] = "x"
    grid[2, 3] = "G"
    print("\n".join(" ".join(row) for row in grid))
    print()
