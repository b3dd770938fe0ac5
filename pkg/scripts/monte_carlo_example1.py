#!/usr/bin/env python3
"""Compare a Monte Carlo estimate of the optimal policy's cost with V(pi0)."""

import argparse

from optsample.cli import load_scenario
from optsample.sim import change_time_chisquare, monte_carlo_evaluate
from optsample.solver import make_grid, value_iterate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="example1")
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = load_scenario(args.scenario)
    model, pi0 = cfg.model, cfg.initial_belief
    sol = value_iterate(model, grid=make_grid(model.X, cfg.grid_points), tol=cfg.tol)
    v0 = float(sol.values[sol.grid.nearest(pi0)[0]])
    mc = monte_carlo_evaluate(model, sol.policy, pi0, args.runs, seed=args.seed, workers=args.workers)
    for name, mu in mc.means.items():
        print(f"{name:>12s}: {mu:9.4f} +/- {mc.std_errors[name]:.4f}")
    z = (mc.total - v0) / mc.std_errors["total"]
    print(f"value at pi0: {v0:.4f}  (MC - V) / SE = {z:+.2f}")
    _, p = change_time_chisquare(mc.change_times, model.A, pi0)
    print(f"change-time goodness of fit p = {p:.3f}; runaway episodes {mc.runaway}")


if __name__ == "__main__":
    main()
