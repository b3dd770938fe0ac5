"""Monte Carlo simulation of the measurement-sampling protocol."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .models import ModelError, SamplingModel, as_belief, change_time_pmf
from .solver import Policy

EPISODE_CAP = 10**6


class RunawayEpisodeError(RuntimeError):
    """The policy did not stop within the time cap."""


@dataclass
class EpisodeTrace:
    change_time: Optional[int]  # first t with x_t = e_1, None if not reached by the cap
    epochs: list
    actions: list
    observations: list  # 0-based symbol indices, one per epoch
    delay_cost: float  # running cost c(x_t, u) summed over elapsed time units
    false_alarm_cost: float  # terminal cost c(x, 0) at the stop
    measurement_cost: float
    stop_state: int

    @property
    def total(self) -> float:
        return self.delay_cost + self.false_alarm_cost + self.measurement_cost

    @property
    def false_alarm(self) -> bool:
        return self.stop_state != 0


def _policy_lookup(policy: Policy):
    grid = policy.grid
    actions = policy.actions
    if grid.X == 2:
        top = grid.divisions

        def lookup(pi):
            return int(actions[int(round(pi[0] * top))])
        return lookup
    return lambda pi: int(actions[grid.nearest(pi)[0]])


def _draw(rng: np.random.Generator, cdf_row: np.ndarray) -> int:
    return min(int(np.searchsorted(cdf_row, rng.random(), side="right")), cdf_row.size - 1)


def simulate_episode(model: SamplingModel, policy: Policy, pi0, rng: np.random.Generator,
                     cap: int = EPISODE_CAP, track_change: bool = True) -> EpisodeTrace:
    """Run one episode: observe at tau_1 = 0, then act, wait D_u, observe, ...

    The first observation only corrects the prior (no prediction step).
    Every continue decision pays m(x, u) and accrues c(x_t, u) for each of
    the D_u elapsed time units; stopping pays c(x, 0) and nothing else.
    With ``track_change`` the chain keeps running after the stop until it
    first enters state 1, so the change time is always reported.

    Raises:
        RunawayEpisodeError: if the policy has not stopped after ``cap`` units.
    """
    spec = model.costs
    if spec is None:
        raise ModelError("model has no cost specification")
    pi0 = as_belief(pi0)
    Acdf = np.cumsum(model.A, axis=1)
    Bcdf = np.cumsum(model.B, axis=1)
    c, m = spec.c, spec.m
    powers = [model.interval_power(u).T for u in range(1, model.L + 1)]
    lookup = _policy_lookup(policy)

    x = _draw(rng, np.cumsum(pi0))
    t = 0
    change = 0 if x == 0 else None
    y = _draw(rng, Bcdf[x])
    pi = model.B[:, y] * pi0
    pi = pi / pi.sum()
    epochs, actions, obs = [0], [], [y]
    delay = meas = 0.0
    while True:
        u = lookup(pi)
        actions.append(u)
        if u == 0:
            break
        if t >= cap:
            raise RunawayEpisodeError(f"no stop within {cap} time units")
        meas += m[x, u - 1]
        for _ in range(model.intervals[u - 1]):
            delay += c[x, u]
            x = _draw(rng, Acdf[x])
            t += 1
            if change is None and x == 0:
                change = t
        y = _draw(rng, Bcdf[x])
        un = model.B[:, y] * (powers[u - 1] @ pi)
        pi = un / un.sum()
        epochs.append(t)
        obs.append(y)
    stop_state = x
    alarm = float(c[x, 0])
    if track_change and change is None:
        limit = t + cap
        while x != 0 and t < limit:
            x = _draw(rng, Acdf[x])
            t += 1
        if x == 0:
            change = t
    return EpisodeTrace(change, epochs, actions, obs, float(delay), alarm, float(meas), int(stop_state))


def episode_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for episode ``index``, fixed by the master seed alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass
class MonteCarloSummary:
    episodes: int
    seed: int
    means: dict
    std_errors: dict
    runaway: int
    change_times: np.ndarray = field(repr=False)

    @property
    def total(self) -> float:
        return self.means["total"]

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "seed": self.seed, "runaway": self.runaway,
                "mean": dict(self.means), "std_error": dict(self.std_errors)}


COMPONENTS = ("delay", "false_alarm", "measurement", "total")


def _run_block(args):
    model, policy, pi0, seed, start, stop, cap = args
    out = np.full((stop - start, 4), np.nan)
    changes = np.full(stop - start, -1, dtype=np.int64)
    for k, i in enumerate(range(start, stop)):
        try:
            tr = simulate_episode(model, policy, pi0, episode_rng(seed, i), cap)
        except RunawayEpisodeError:
            continue
        out[k] = (tr.delay_cost, tr.false_alarm_cost, tr.measurement_cost, tr.total)
        if tr.change_time is not None:
            changes[k] = tr.change_time
    return start, out, changes


def monte_carlo_evaluate(model: SamplingModel, policy: Policy, pi0, episodes: int, seed: int = 0,
                         workers: int = 1, cap: int = EPISODE_CAP) -> MonteCarloSummary:
    """Estimate each cost component and the total over independent episodes.

    Episode i always uses :func:`episode_rng` (seed, i) and the per-episode
    results are reduced in index order with exact summation, so the summary
    is the same for any ``workers``.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    workers = max(1, int(workers))
    blocks = max(1, min(episodes, 4 * workers))
    edges = np.linspace(0, episodes, blocks + 1).astype(int)
    jobs = [(model, policy, pi0, seed, int(a), int(b), cap) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers == 1:
        results = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, jobs))
    results.sort(key=lambda r: r[0])
    data = np.concatenate([r[1] for r in results])
    changes = np.concatenate([r[2] for r in results])
    ok = ~np.isnan(data[:, 0])
    runaway = int((~ok).sum())
    good = data[ok]
    n = good.shape[0]
    means, ses = {}, {}
    for j, name in enumerate(COMPONENTS):
        col = good[:, j].tolist()
        mu = math.fsum(col) / n if n else math.nan
        var = math.fsum((v - mu) ** 2 for v in col) / (n - 1) if n > 1 else 0.0
        means[name] = mu
        ses[name] = math.sqrt(var / n) if n else math.nan
    return MonteCarloSummary(episodes, seed, means, ses, runaway, changes)


def change_time_chisquare(change_times, A, pi0, lags: int = 50, min_expected: float = 5.0):
    """Chi-square goodness of fit of simulated change times to the phase-type law.

    Bins are t = 0..lags-1 plus one tail bin; adjacent bins are pooled until
    each expects at least ``min_expected`` counts.  Returns (statistic, p-value).
    """
    t = np.asarray(change_times)
    t = t[t >= 0]
    n = t.size
    probs = np.array([change_time_pmf(A, pi0, k) for k in range(lags)])
    counts = np.bincount(np.minimum(t, lags), minlength=lags + 1)[: lags + 1].astype(float)
    expected = np.append(probs, max(0.0, 1.0 - probs.sum())) * n
    obs_b, exp_b = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_b.append(acc_o)
            exp_b.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_b:
            obs_b[-1] += acc_o
            exp_b[-1] += acc_e
        else:
            obs_b.append(acc_o)
            exp_b.append(acc_e)
    obs_b, exp_b = np.array(obs_b), np.array(exp_b)
    exp_b *= obs_b.sum() / exp_b.sum()
    res = stats.chisquare(obs_b, exp_b)
    return float(res.statistic), float(res.pvalue)
