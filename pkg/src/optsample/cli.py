"""Command-line front end: scenario files in, JSON/CSV artifacts out.

Exit codes: 0 success, 1 analysis failure (assumption, bound, convergence or
runaway simulation), 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import analysis, bounds, costs, models, sim, solver

FORMAT_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("optsample")


class ConfigError(ValueError):
    """Malformed scenario or artifact; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# Scenario configuration


@dataclass
class ScenarioConfig:
    name: str
    model: models.SamplingModel
    grid_points: Optional[int]
    tol: float
    max_iter: int
    alpha: Optional[float]
    initial_belief: np.ndarray
    raw: dict

    @property
    def X(self) -> int:
        return self.model.X


def _req(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _matrix(value, path: str, shape=None) -> np.ndarray:
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric matrix") from None
    if M.ndim != 2 or (shape is not None and M.shape != shape):
        raise ConfigError(path, f"expected shape {shape}, got {M.shape}")
    return M


def _observations(block: dict, X: int) -> models.ObservationModel:
    kind = _req(block, "type", "observations")
    try:
        if kind == "discrete":
            B = _matrix(_req(block, "matrix", "observations"), "observations.matrix")
            if B.shape[0] != X:
                raise ConfigError("observations.matrix", f"needs {X} rows")
            models._check_stochastic(B, "observation matrix")
            return models.discrete_observations(B)
        if kind == "gaussian":
            return models.gaussian_observations(
                _req(block, "means", "observations"), _req(block, "variances", "observations"),
                nodes=int(block.get("nodes", 101)), span=float(block.get("span", 5.0)),
                lo=block.get("lo"), hi=block.get("hi"))
        if kind == "poisson":
            return models.poisson_observations(_req(block, "rates", "observations"),
                                               tail=float(block.get("tail", 1e-10)),
                                               support=block.get("support"))
    except models.ModelError as exc:
        raise ConfigError("observations", str(exc)) from None
    raise ConfigError("observations.type", f"unknown type {kind!r} (discrete, gaussian, poisson)")


def _cost_spec(block: dict, A: np.ndarray, intervals) -> costs.CostSpec:
    mode = block.get("mode", "quickest")
    X, L = A.shape[0], len(intervals)
    meas = block.get("measurement", 0.0)
    try:
        m = np.broadcast_to(np.asarray(meas, dtype=float), (X, L)).copy()
    except (TypeError, ValueError):
        raise ConfigError("costs.measurement", f"expected a scalar or a {X}x{L} matrix") from None
    try:
        if mode == "quickest":
            return costs.build_qd_costs(float(_req(block, "f", "costs")), float(_req(block, "d", "costs")),
                                        m, A, intervals)
        if mode == "generic":
            c = _matrix(_req(block, "c", "costs"), "costs.c", (X, L + 1))
            return costs.CostSpec(c=c, m=m, mode="generic")
    except models.ModelError as exc:
        raise ConfigError("costs", str(exc)) from None
    raise ConfigError("costs.mode", f"unknown mode {mode!r} (quickest, generic)")


def parse_scenario(data: Any) -> ScenarioConfig:
    """Validate a scenario dictionary and build the model it describes."""
    if not isinstance(data, dict):
        raise ConfigError("$", "scenario must be a JSON object")
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError("format_version", f"unsupported version {version!r}")
    A = _matrix(_req(data, "transition_matrix", ""), "transition_matrix")
    X = int(data.get("states", A.shape[0]))
    if A.shape != (X, X):
        raise ConfigError("transition_matrix", f"expected {X}x{X}, got {A.shape}")
    try:
        models.check_transition_matrix(A)
    except models.ModelError as exc:
        raise ConfigError("transition_matrix", str(exc)) from None
    intervals = _req(data, "intervals", "")
    if not isinstance(intervals, list) or not all(isinstance(v, int) for v in intervals):
        raise ConfigError("intervals", "expected a list of integers")
    obs = _observations(_req(data, "observations", ""), X)
    spec = _cost_spec(_req(data, "costs", ""), A, intervals)
    try:
        model = models.SamplingModel(A, obs, tuple(intervals), spec)
    except models.ModelError as exc:
        raise ConfigError("intervals", str(exc)) from None
    sv = data.get("solver", {})
    pi0 = data.get("initial_belief", [0.0] * (X - 1) + [1.0])
    try:
        pi0 = models.as_belief(pi0)
    except (models.ModelError, ValueError) as exc:
        raise ConfigError("initial_belief", str(exc)) from None
    if pi0.size != X:
        raise ConfigError("initial_belief", f"needs {X} entries")
    alpha = data.get("alpha")
    return ScenarioConfig(
        name=str(data.get("name", "scenario")), model=model,
        grid_points=sv.get("grid_points"), tol=float(sv.get("tol", 1e-6)),
        max_iter=int(sv.get("max_iter", 100_000)),
        alpha=None if alpha is None else float(alpha), initial_belief=pi0, raw=data)


def bundled_scenarios() -> list[str]:
    root = resources.files("optsample") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str) -> ScenarioConfig:
    """Load a scenario from a path, or by name from the bundled set."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        bundled = resources.files("optsample") / "scenarios" / f"{ref}.json"
        if not bundled.is_file():
            raise ConfigError("$", f"no such scenario file or bundled name: {ref}")
        text = bundled.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON ({exc})") from None
    return parse_scenario(data)


# ---------------------------------------------------------------------------
# Output helpers


def r12(x):
    """Round floats (recursively) to 12 significant digits for stable output."""
    if isinstance(x, dict):
        return {k: r12(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [r12(v) for v in x]
    if isinstance(x, np.ndarray):
        return r12(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}")
    return x


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(r12(payload), indent=2) + "\n")


def _render_report(report: bounds.AssumptionReport) -> str:
    lines = []
    for name, v in report.verdicts.items():
        if not v.applicable:
            continue
        extra = ""
        if v.witness:
            extra = f" witness={tuple(v.witness)} margin={v.margin:.6g}" if v.margin is not None else f" witness={tuple(v.witness)}"
        note = f"  ({v.note})" if v.note else ""
        lines.append(f"  {name:7s} {v.status}{extra}{note}")
    return "\n".join(lines)


def _grid_for(cfg: ScenarioConfig, override: Optional[int]) -> solver.BeliefGrid:
    return solver.make_grid(cfg.X, override if override is not None else cfg.grid_points)


def _alpha_for(cfg: ScenarioConfig, override: Optional[float]) -> Optional[float]:
    if override is not None:
        return override
    return cfg.alpha


# ---------------------------------------------------------------------------
# Commands


def cmd_check(args) -> int:
    cfg = load_scenario(args.scenario)
    C = costs.build_action_costs(cfg.model)
    alpha = _alpha_for(cfg, args.alpha)
    report = bounds.check_assumptions(cfg.model, C, alpha)
    if not args.no_solve:
        sol = solver.value_iterate(cfg.model, C, _grid_for(cfg, args.grid), cfg.tol, cfg.max_iter)
        report.record_solution(sol)
    print(f"assumptions for {cfg.name}:")
    print(_render_report(report))
    print("overall:", "pass" if report.passed else "fail")
    if args.out:
        write_json(Path(args.out), {"format_version": FORMAT_VERSION, "scenario": cfg.name, **report.to_dict()})
    return EXIT_OK if report.passed else EXIT_FAIL


def _policy_payload(cfg, sol: solver.Solution, overlay: Optional[solver.Policy], alpha) -> dict:
    grid = sol.grid
    out = {
        "format_version": FORMAT_VERSION,
        "scenario": cfg.name,
        "grid": {"X": grid.X, "n": grid.n, "points": grid.size},
        "iterations": sol.iterations,
        "final_gap": sol.gap,
        "beliefs": grid.points,
        "actions": sol.policy.actions,
        "values": sol.values,
    }
    rep = solver.analyze_stopping_set(sol.policy)
    out["stopping_set"] = {"size": int(rep.members.sum()), "convex": rep.convex,
                           "contains_target": rep.contains_target,
                           "interval": None if rep.interval is None else list(rep.interval)}
    if grid.X == 2:
        th = solver.extract_thresholds(sol.policy)
        out["thresholds"] = {"monotone": th.monotone,
                             "values": None if th.thresholds is None else list(th.thresholds)}
    if overlay is not None:
        out["myopic_upper"] = {"alpha": alpha, "actions": overlay.actions}
    return out


def _write_csv(path: Path, sol: solver.Solution, overlay: Optional[solver.Policy]) -> None:
    X = sol.grid.X
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        head = [f"pi_{i + 1}" for i in range(X)] + ["action", "value"]
        if overlay is not None:
            head.append("myopic_upper")
        w.writerow(head)
        for k in range(sol.grid.size):
            row = [f"{p:.12g}" for p in sol.grid.points[k]] + [int(sol.policy.actions[k]), f"{sol.values[k]:.12g}"]
            if overlay is not None:
                row.append(int(overlay.actions[k]))
            w.writerow(row)


def cmd_solve(args) -> int:
    cfg = load_scenario(args.scenario)
    grid = _grid_for(cfg, args.grid)
    tol = args.tol if args.tol is not None else cfg.tol
    C = costs.build_action_costs(cfg.model)
    try:
        sol = solver.value_iterate(cfg.model, C, grid, tol, cfg.max_iter)
    except solver.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    alpha = args.alpha
    overlay = None
    if alpha is not None:
        overlay = bounds.myopic_upper(cfg.model, C, grid, alpha)
    payload = _policy_payload(cfg, sol, overlay, alpha)
    out = Path(args.out or f"{cfg.name}_policy.json")
    write_json(out, payload)
    _write_csv(out.with_suffix(".csv"), sol, overlay)
    print(f"{cfg.name}: {grid.size} grid points, {sol.iterations} sweeps, gap {sol.gap:.3e}")
    if "thresholds" in payload:
        th = payload["thresholds"]
        vals = ", ".join(f"{v:.6g}" for v in th["values"]) if th["values"] else "-"
        print(f"monotone: {th['monotone']}  thresholds: {vals}")
    print(f"stopping set: {payload['stopping_set']['size']} points, convex: {payload['stopping_set']['convex']}")
    print(f"wrote {out} and {out.with_suffix('.csv')}")
    return EXIT_OK


def load_policy(path: str, grid_X: int) -> solver.Policy:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("policy-file", str(exc)) from None
    g = data.get("grid", {})
    if g.get("X") != grid_X:
        raise ConfigError("policy-file.grid.X", f"policy is for X={g.get('X')}, scenario has X={grid_X}")
    grid = solver.make_grid(grid_X, int(g["n"]))
    actions = np.asarray(data["actions"], dtype=int)
    if actions.size != grid.size:
        raise ConfigError("policy-file.actions", f"expected {grid.size} actions")
    return solver.Policy(grid, actions)


def _resolve_policy(cfg, args) -> solver.Policy:
    grid = _grid_for(cfg, args.grid)
    C = costs.build_action_costs(cfg.model)
    if args.policy == "optimal":
        return solver.value_iterate(cfg.model, C, grid, cfg.tol, cfg.max_iter).policy
    if args.policy == "myopic-lower":
        return bounds.myopic_lower(C, grid)
    if args.policy == "myopic-upper":
        alpha = _alpha_for(cfg, args.alpha)
        if alpha is None:
            alpha = costs.a7_alpha(cfg.model)
        return bounds.myopic_upper(cfg.model, C, grid, alpha)
    if args.policy == "file":
        if not args.policy_file:
            raise ConfigError("--policy-file", "required with --policy file")
        return load_policy(args.policy_file, cfg.X)
    raise ConfigError("--policy", f"unknown policy source {args.policy!r}")


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.scenario)
    policy = _resolve_policy(cfg, args)
    summary = sim.monte_carlo_evaluate(cfg.model, policy, cfg.initial_belief, args.runs, args.seed,
                                       workers=args.workers)
    print(f"{cfg.name}: {args.runs} episodes, seed {args.seed}, policy {args.policy}")
    for name in sim.COMPONENTS:
        print(f"  {name:12s} {summary.means[name]:.12g} +/- {summary.std_errors[name]:.12g}")
    payload = {"format_version": FORMAT_VERSION, "scenario": cfg.name, "policy": args.policy,
               "initial_belief": cfg.initial_belief, **summary.to_dict()}
    if args.out:
        write_json(Path(args.out), payload)
    if summary.runaway:
        print(f"error: {summary.runaway} runaway episodes", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_compare(args) -> int:
    a, b = load_scenario(args.scenario_a), load_scenario(args.scenario_b)
    ma, mb = a.model, b.model
    if ma.X != mb.X or ma.intervals != mb.intervals:
        print("error: scenarios differ in X or sampling intervals", file=sys.stderr)
        return EXIT_INPUT
    try:
        ma, mb = analysis._align(ma, mb)
    except models.ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    grid = _grid_for(a, args.grid)
    dom = analysis.compare_optimal_costs(ma, mb, grid)
    payload = {"format_version": FORMAT_VERSION, "theta": a.name, "theta_bar": b.name,
               "dominance": {"transition_order": dom.transition_order, "blackwell": dom.blackwell.holds,
                             "blackwell_residual": dom.blackwell.residual, "implied": dom.implied,
                             "values_ordered": dom.values_ok, "violations": int(dom.violations.size),
                             "min_difference": dom.worst_gap}}
    print(f"theta = {a.name}, theta_bar = {b.name}")
    print(f"  A >= A_bar (transition order): {dom.transition_order}")
    print(f"  B = B_bar R (garbling):        {dom.blackwell.holds}")
    print(f"  V(theta) >= V(theta_bar):      {dom.values_ok} ({dom.violations.size} violations)")
    if ma.Y == mb.Y:
        sens = analysis.sensitivity_bound(ma, mb)
        payload["sensitivity"] = sens.to_dict()
        print(f"  sensitivity: norm {sens.norm:.12g}, rho {sens.rho:.12g}, bound {sens.bound:.12g}")
        if np.allclose(ma.A, mb.A, atol=1e-12, rtol=0):
            kl = analysis.mismatch_norm_kl(ma, mb)
            payload["kl"] = kl.to_dict()
            kb = analysis.sensitivity_bound(ma, mb, norm=kl.kl)
            payload["kl"]["bound"] = kb.bound
            print(f"  KL norm {kl.kl:.12g} (bound {kb.bound:.12g}), TV norm {kl.tv:.12g}")
            if kl.gaussian_printed is not None:
                gp = analysis.sensitivity_bound(ma, mb, norm=kl.gaussian_printed)
                gs = analysis.sensitivity_bound(ma, mb, norm=kl.gaussian_standard)
                payload["kl"]["gaussian_closed_form_bound"] = gp.bound
                payload["kl"]["gaussian_standard_kl_bound"] = gs.bound
                print(f"  Gaussian closed form (sd ratio) {kl.gaussian_printed:.12g}, "
                      f"standard KL form (variance ratio) {kl.gaussian_standard:.12g}")
                print("  note: the two forms differ; the variance-ratio form is the one implied by the KL divergence")
    if args.out:
        write_json(Path(args.out), payload)
    return EXIT_OK if (not dom.implied or dom.values_ok) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optsample", description="Optimal measurement sampling for noisy Markov chains.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="evaluate the structural assumptions")
    c.add_argument("scenario")
    c.add_argument("--alpha", type=float)
    c.add_argument("--grid", type=int)
    c.add_argument("--no-solve", action="store_true", help="skip the solve that checks e_1 stops")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="value iteration on the belief grid")
    s.add_argument("scenario")
    s.add_argument("--out")
    s.add_argument("--grid", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--alpha", type=float, help="also export the myopic upper-bound policy")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="Monte Carlo cost estimate for a policy")
    m.add_argument("scenario")
    m.add_argument("--policy", default="optimal", choices=["optimal", "myopic-lower", "myopic-upper", "file"])
    m.add_argument("--policy-file")
    m.add_argument("--runs", type=int, default=10_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--grid", type=int)
    m.add_argument("--alpha", type=float)
    m.add_argument("--out")
    m.set_defaults(func=cmd_simulate)

    k = sub.add_parser("compare", help="optimal-cost ordering and misspecification bound")
    k.add_argument("scenario_a")
    k.add_argument("scenario_b")
    k.add_argument("--grid", type=int)
    k.add_argument("--out")
    k.set_defaults(func=cmd_compare)

    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda a: (print("\n".join(bundled_scenarios())), EXIT_OK)[1])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (models.ModelError, models.StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
