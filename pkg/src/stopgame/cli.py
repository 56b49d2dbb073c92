"""Command-line front end.

Exit codes
----------
0  success
1  malformed input file or unknown generator
2  residual above tolerance (solve) or duality gap / value mismatch (oracle-check)
3  learner divergence guard tripped
4  instance refused by the enumeration size guard
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import features as feats
from .environments import (ActuatorSpec, make_actuator_chain, make_hazard_grid,
                           make_random_game, solve_restricted_mdp)
from .game import (InvalidGameError, Policy, StopSet, evaluate_pair,
                   evaluate_random_stoppage, load_game, save_game)
from .io import write_json
from .learner import (LearningDiverged, error_bounds, projected_fixed_point,
                      run_learning, stationary_distribution)
from .oracle import (InstanceTooLarge, backward_induction, best_response_stop,
                     enumerate_minimax, truncation_bound)
from .solver import extract_policy, solve, solve_Q, value_iterate

EXIT_OK, EXIT_INPUT, EXIT_RESIDUAL, EXIT_DIVERGED, EXIT_TOO_LARGE = 0, 1, 2, 3, 4


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load(path):
    try:
        return load_game(path)
    except FileNotFoundError:
        _err(f"{path}: no such file")
    except InvalidGameError as exc:
        _err(f"{path}: {exc}")
    return None


def cmd_solve(args) -> int:
    game = _load(args.input)
    if game is None:
        return EXIT_INPUT
    sol = solve(game, tol=args.tol, max_iter=args.max_iter)
    write_json(args.output, sol.to_dict())
    if not sol.converged:
        _err(f"residual {sol.residual:.3g} above tol {args.tol:g}")
        return EXIT_RESIDUAL
    return EXIT_OK


def cmd_learn(args) -> int:
    game = _load(args.input)
    if game is None:
        return EXIT_INPUT
    try:
        fmap = feats.from_spec(args.features, game.n_states, game)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    restart_prob = 1.0 / args.restart_period
    mu = stationary_distribution(game, restart_prob=restart_prob)
    q_star = solve_Q(game, tol=args.tol, max_iter=args.max_iter)
    r_star = projected_fixed_point(game, fmap, mu, tol=args.tol, max_iter=args.max_iter)
    diag_path = args.diagnostics or str(Path(args.output).with_suffix(".csv"))
    report = {
        "features": args.features,
        "mu": mu,
        "q_star": q_star,
        "r_star": r_star.weights,
        "r_star_residual": r_star.residual,
        "diagnostics_csv": diag_path,
    }
    try:
        state, diag = run_learning(game, fmap, args.steps,
                                   restart_period=args.restart_period,
                                   step_size=(args.a, args.b), seed=args.seed,
                                   r_star=r_star.weights, target=args.target,
                                   record_every=args.record_every, mu=mu)
    except LearningDiverged as exc:
        exc.diagnostics.to_csv(diag_path)
        report.update(status="diverged", message=str(exc), weights=exc.state.weights)
        write_json(args.output, report)
        _err(str(exc))
        return EXIT_DIVERGED
    diag.to_csv(diag_path)
    bounds = error_bounds(game, fmap, mu, q_star, r_star)
    report.update(
        status="ok",
        weights=state.weights,
        updates=state.step,
        transitions=diag.n_transitions,
        visits=diag.visits,
        bellman_error=diag.bellman_error,
        bounds=bounds.to_dict(),
    )
    write_json(args.output, report)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    game = _load(args.input)
    if game is None:
        return EXIT_INPUT
    try:
        rep = enumerate_minimax(game, eval_tol=args.eval_tol)
    except InstanceTooLarge as exc:
        write_json(args.output, {"passed": False, "refused": str(exc)})
        _err(str(exc))
        return EXIT_TOO_LARGE
    vi_tol = args.eval_tol * (1.0 - game.discount) / 10.0
    sol = value_iterate(game, tol=vi_tol, max_iter=args.max_iter)
    mismatch = max(float(np.max(np.abs(rep.upper_value - sol.value))),
                   float(np.max(np.abs(rep.lower_value - sol.value))))
    out = rep.to_dict()
    out.update(value_iteration=sol.value, value_mismatch=mismatch,
               eval_tol=args.eval_tol)
    ok = rep.gap <= args.eval_tol and mismatch <= args.eval_tol
    if args.horizon is not None:
        bi = backward_induction(game, args.horizon)
        bound = truncation_bound(game, args.horizon)
        bi_gap = float(np.max(np.abs(bi - sol.value)))
        out.update(backward_induction=bi, backward_induction_gap=bi_gap,
                   truncation_bound=bound)
        ok = ok and bi_gap <= bound + args.eval_tol
    out["passed"] = ok
    write_json(args.output, out)
    if not ok:
        _err(f"gap {rep.gap:.3g}, mismatch {mismatch:.3g} exceed {args.eval_tol:g}")
        return EXIT_RESIDUAL
    return EXIT_OK


def nominal_policy(game) -> Policy:
    """Greedy policy of the plain MDP, ignoring the stopper."""
    v = solve_restricted_mdp(game, range(game.n_actions), tol=1e-12).value
    return extract_policy(game, v)


def cmd_compare(args) -> int:
    game = _load(args.input)
    if game is None:
        return EXIT_INPUT
    if not 0 <= args.start < game.n_states:
        _err(f"start state {args.start} out of range")
        return EXIT_INPUT
    sol = value_iterate(game, tol=args.tol, max_iter=args.max_iter)
    rng = np.random.default_rng(args.seed)
    rows = []
    for name, pol in (("nominal", nominal_policy(game)), ("fault_tolerant", sol.policy)):
        stop = best_response_stop(game, pol)
        adv = evaluate_pair(game, pol, stop, tol=1e-12).value
        no_stop = evaluate_pair(game, pol, StopSet.never(game.n_states), tol=1e-12).value
        mean, se = evaluate_random_stoppage(game, pol, args.hazard, args.horizon,
                                            args.rollouts, rng, start=args.start)
        rows.append({
            "policy": name,
            "actions": pol.action,
            "adversarial_value": adv,
            "adversarial_value_at_start": float(adv[args.start]),
            "stop_region": stop.stop,
            "random_stoppage_mean": mean,
            "random_stoppage_stderr": se,
            "no_stop_value_at_start": float(no_stop[args.start]),
        })
    write_json(args.output, {"start": args.start, "hazard": args.hazard,
                             "horizon": args.horizon, "rollouts": args.rollouts,
                             "game_value": sol.value, "rows": rows})
    for row in rows:
        print(f"{row['policy']:>15}  adversarial {row['adversarial_value_at_start']:.6f}  "
              f"random {row['random_stoppage_mean']:.6f} +/- {row['random_stoppage_stderr']:.6f}")
    return EXIT_OK


def _parse_cells(text):
    cells = []
    for part in filter(None, text.split(";")):
        x, y = part.split(",")
        cells.append((int(x), int(y)))
    return cells


def cmd_gen_env(args) -> int:
    try:
        if args.generator == "actuator":
            spec = ActuatorSpec(n_cells=args.cells, discount=args.discount)
            game = make_actuator_chain(spec)
        elif args.generator == "grid":
            size = args.params or args.size
            try:
                w, h = (int(v) for v in size.lower().split("x"))
            except ValueError:
                raise ValueError(f"grid size must look like 3x3, got {size!r}") from None
            game = make_hazard_grid(w, h, _parse_cells(args.hazard_cells),
                                    hazard_bequest=args.hazard_bequest,
                                    goal_reward=args.goal_reward, slip=args.slip,
                                    discount=args.discount)
        elif args.generator == "random":
            game = make_random_game(args.states, args.actions, args.reward_scale,
                                    seed=args.seed, discount=args.discount)
        else:
            _err(f"unknown generator {args.generator!r} (choose actuator, grid, random)")
            return EXIT_INPUT
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    save_game(game, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", required=True)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--max-iter", type=int, default=10**6)
    common.add_argument("--seed", type=int, default=0)

    with_input = argparse.ArgumentParser(add_help=False, parents=[common])
    with_input.add_argument("--input", required=True)

    parser = argparse.ArgumentParser(prog="stopgame",
                                     description="Controller-stopper game solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[with_input], help="exact value iteration")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", parents=[with_input], help="simulation-based learning")
    p.add_argument("--steps", type=int, default=10**5)
    p.add_argument("--features", default="onehot")
    p.add_argument("--restart-period", type=int, default=100)
    p.add_argument("--a", type=float, default=100.0)
    p.add_argument("--b", type=float, default=100.0)
    p.add_argument("--target", choices=("greedy", "max_reward"), default="greedy")
    p.add_argument("--record-every", type=int, default=1000)
    p.add_argument("--diagnostics", help="CSV path (default: OUTPUT with .csv suffix)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("oracle-check", parents=[with_input],
                       help="certify the game value by enumeration")
    p.add_argument("--eval-tol", type=float, default=1e-6)
    p.add_argument("--horizon", type=int, default=None,
                   help="also cross-check against backward induction to this depth")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("compare", parents=[with_input],
                       help="nominal vs fault-tolerant policy")
    p.add_argument("--hazard", type=float, default=0.1)
    p.add_argument("--horizon", type=int, default=500)
    p.add_argument("--rollouts", type=int, default=10_000)
    p.add_argument("--start", type=int, default=0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-env", parents=[common], help="write a benchmark game file")
    p.add_argument("generator", help="actuator, grid or random")
    p.add_argument("params", nargs="?", help="grid size shorthand, e.g. 3x3")
    p.add_argument("--cells", type=int, default=5)
    p.add_argument("--size", default="3x3")
    p.add_argument("--hazard-cells", default="", help='e.g. "1,1;2,0"')
    p.add_argument("--hazard-bequest", type=float, default=-1.0)
    p.add_argument("--goal-reward", type=float, default=1.0)
    p.add_argument("--slip", type=float, default=0.1)
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--actions", type=int, default=2)
    p.add_argument("--reward-scale", type=float, default=1.0)
    p.add_argument("--discount", type=float, default=0.9)
    p.set_defaults(func=cmd_gen_env)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol <= 0:
        _err("--tol must be positive")
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
