#!/usr/bin/env python3
"""Solve the four bundled examples and write policy tables (and plots).

Usage: python3 scripts/reproduce_examples.py [--out results/] [--plot]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from optsample.bounds import myopic_stop_set, myopic_upper, verify_policy_bounds
from optsample.cli import load_scenario
from optsample.costs import a7_alpha, build_action_costs
from optsample.solver import analyze_stopping_set, extract_thresholds, make_grid, value_iterate

EXAMPLES = ("example1", "example1_swapped", "example2", "example3", "example4")


def solve(name):
    cfg = load_scenario(name)
    model = cfg.model
    grid = make_grid(model.X, cfg.grid_points)
    sol = value_iterate(model, grid=grid, tol=cfg.tol)
    C = build_action_costs(model)
    alpha = cfg.alpha if cfg.alpha is not None else a7_alpha(model)
    upper = myopic_upper(model, C, grid, alpha)
    ustop = myopic_stop_set(C, grid)
    check = verify_policy_bounds(sol.policy, upper, "upper", mask=ustop, myopic_stop=ustop)
    return cfg, sol, upper, check, alpha


def write_table(path, sol, upper):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        X = sol.grid.X
        w.writerow([f"pi{i + 1}" for i in range(X)] + ["value", "action", "upper_action"])
        for b, v, a, ua in zip(sol.grid.points, sol.values, sol.policy.actions, upper.actions):
            w.writerow([f"{p:.6f}" for p in b] + [f"{v:.8f}", int(a), int(ua)])


def plot(path, name, sol, upper):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3))
    if sol.grid.X == 2:
        p1 = sol.grid.points[:, 0]
        ax.step(p1, sol.policy.actions, where="mid", label="optimal")
        ax.step(p1, upper.actions, where="mid", ls="--", label="myopic upper")
        ax.set_xlabel("pi(1)")
        ax.set_ylabel("action")
        ax.legend()
    else:
        pts = sol.grid.points
        sc = ax.scatter(pts[:, 1], pts[:, 2], c=sol.policy.actions, s=4, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="action")
        ax.set_xlabel("pi(2)")
        ax.set_ylabel("pi(3)")
    ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--plot", action="store_true", help="also save PNG figures (needs matplotlib)")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in EXAMPLES:
        cfg, sol, upper, check, alpha = solve(name)
        conv = analyze_stopping_set(sol.policy)
        print(f"{name}: {sol.grid.size} points, {sol.iterations} sweeps, gap {sol.gap:.2e}")
        if cfg.model.X == 2:
            th = extract_thresholds(sol.policy)
            if th.monotone:
                print("  thresholds " + ", ".join(f"{t:.6f}" for t in th.thresholds))
            else:
                print("  policy is not monotone in the belief")
        print(f"  stopping set convex: {conv.convex}; upper bound (alpha={alpha:.4g}) "
              f"violations {check.violation_count}, myopic stop set inside S: {check.subset_ok}")
        write_table(args.out / f"{name}.csv", sol, upper)
        if args.plot:
            plot(args.out / f"{name}.png", name, sol, upper)
    print(f"tables written to {args.out}/")


if __name__ == "__main__":
    main()
