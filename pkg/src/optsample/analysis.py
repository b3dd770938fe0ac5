"""Cross-model comparisons: optimal-cost dominance and misspecification bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .costs import build_action_costs
from .models import (
    BlackwellResult,
    ModelError,
    ObservationModel,
    SamplingModel,
    blackwell_geq,
    gaussian_observations,
    poisson_observations,
    transition_order_geq,
    unit,
)
from .solver import BeliefGrid, Policy, make_grid, policy_evaluate, value_iterate


@dataclass
class DominanceVerdict:
    """Result of comparing the optimal costs of theta and theta-bar.

    ``implied`` says whether the orderings that guarantee the value comparison
    were verified; ``values_ok`` is the pointwise check itself.
    """

    transition_order: bool
    blackwell: BlackwellResult
    values_a: np.ndarray
    values_b: np.ndarray
    worst_gap: float
    violations: np.ndarray

    @property
    def implied(self) -> bool:
        return bool(self.transition_order and self.blackwell.holds)

    @property
    def values_ok(self) -> bool:
        return self.violations.size == 0

    @property
    def passed(self) -> bool:
        return self.implied and self.values_ok


def common_observations(a: ObservationModel, b: ObservationModel) -> tuple[ObservationModel, ObservationModel]:
    """Rebuild two continuous observation models on one shared support.

    Discrete models, and pairs of different kinds, are returned unchanged.
    """
    if a.kind != b.kind:
        return a, b
    if a.kind == "gaussian":
        means = np.array(a.params["means"] + b.params["means"])
        sd = np.sqrt(np.array(a.params["variances"] + b.params["variances"]))
        span = max(a.params["span"], b.params["span"])
        nodes = max(a.params["nodes"], b.params["nodes"])
        lo = float(means.min() - span * sd.max())
        hi = float(means.max() + span * sd.max())
        return (gaussian_observations(a.params["means"], a.params["variances"], nodes, span, lo, hi),
                gaussian_observations(b.params["means"], b.params["variances"], nodes, span, lo, hi))
    if a.kind == "poisson":
        n = max(a.params["support"], b.params["support"])
        return (poisson_observations(a.params["rates"], a.params["tail"], support=n),
                poisson_observations(b.params["rates"], b.params["tail"], support=n))
    return a, b


def _align(theta: SamplingModel, theta_bar: SamplingModel):
    if theta.X != theta_bar.X:
        raise ModelError("models must share the state dimension")
    if theta.intervals != theta_bar.intervals:
        raise ModelError("models must share the sampling intervals")
    a, b = common_observations(theta.obs, theta_bar.obs)
    return theta.with_observations(a), theta_bar.with_observations(b)


def compare_optimal_costs(theta: SamplingModel, theta_bar: SamplingModel,
                          grid: Optional[BeliefGrid] = None, tol: float = 1e-8,
                          solver_tol: float = 1e-9) -> DominanceVerdict:
    """Solve both models on one grid and check V(.; theta) >= V(.; theta_bar) - tol.

    The comparison is a consequence of A >= A-bar in the transition order and
    B = B-bar R (theta observes through a garbled channel).  Both are checked
    and reported; the values are compared regardless.  Each model is solved
    with the costs built from its own transition matrix.
    """
    theta, theta_bar = _align(theta, theta_bar)
    grid = grid if grid is not None else make_grid(theta.X)
    order = transition_order_geq(theta.A, theta_bar.A)
    bw = blackwell_geq(theta.B, theta_bar.B)
    va = value_iterate(theta, grid=grid, tol=solver_tol).values
    vb = value_iterate(theta_bar, grid=grid, tol=solver_tol).values
    diff = va - vb
    return DominanceVerdict(order, bw, va, vb, float(diff.min()), np.nonzero(diff < -tol)[0])


# ---------------------------------------------------------------------------
# Sensitivity to a misspecified model


@dataclass
class SensitivityReport:
    y_star: Optional[int]
    rho: float
    norm: float
    bound: float
    stop_cost: float
    tail_condition: bool  # P(y <= y*) > 0, equivalently rho < 1

    def to_dict(self) -> dict:
        return {"y_star": None if self.y_star is None else self.y_star + 1, "rho": self.rho,
                "norm": self.norm, "bound": self.bound, "max_stop_cost": self.stop_cost,
                "tail_condition": self.tail_condition}


def tv_norm(theta: SamplingModel, theta_bar: SamplingModel) -> float:
    """max_{i,u} sum_{j,y} |B_jy A^{D_u}_ij - Bbar_jy Abar^{D_u}_ij|."""
    best = 0.0
    for u in range(1, theta.L + 1):
        P = theta.interval_power(u)[:, :, None] * theta.B[None, :, :]
        Pb = theta_bar.interval_power(u)[:, :, None] * theta_bar.B[None, :, :]
        best = max(best, float(np.abs(P - Pb).sum(axis=(1, 2)).max()))
    return best


def _stop_index(theta, theta_bar, C, pi) -> Optional[int]:
    """Smallest y with (C_ub - C_0)' T(pi, y, u) <= 0 under both models, all u, ub."""
    gaps = C.C[1:] - C.C[0]  # (L, X)
    ok = np.ones(theta.Y, dtype=bool)
    for model in (theta, theta_bar):
        for u in range(1, model.L + 1):
            pred = model.interval_power(u).T @ pi
            un = model.B * pred[:, None]  # X x Y unnormalized posteriors
            sig = un.sum(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                T = np.where(sig > 0, un / np.where(sig > 0, sig, 1.0), 0.0)
            worst = (gaps @ T).max(axis=0)
            # impossible observations impose no constraint for this model and u
            ok &= (worst <= 1e-12) | (sig <= 0)
    hits = np.nonzero(ok)[0]
    return int(hits[0]) if hits.size else None


def implicit_discount(theta: SamplingModel, theta_bar: SamplingModel, pi, C=None
                      ) -> tuple[Optional[int], float]:
    """(y*, rho) evaluated from belief ``pi``; the bound itself uses pi = e_X.

    rho = max_u sum_{y >= y*} sigma(pi, y, u; theta), and 1 if no y qualifies.
    """
    C = C if C is not None else build_action_costs(theta)
    pi = np.asarray(pi, dtype=float)
    ys = _stop_index(theta, theta_bar, C, pi)
    if ys is None:
        return None, 1.0
    rho = max(float((theta.interval_power(u).T @ pi) @ theta.B[:, ys:].sum(axis=1))
              for u in range(1, theta.L + 1))
    return ys, min(1.0, rho)


def sensitivity_bound(theta: SamplingModel, theta_bar: SamplingModel, norm: Optional[float] = None
                      ) -> SensitivityReport:
    """Bound on sup |J_mu(theta) - J_mu(theta_bar)| for mu optimal under theta.

    ``norm`` defaults to the total-variation distance :func:`tv_norm`; pass
    a KL-based value from :func:`mismatch_norm_kl` to get that variant.
    If no observation qualifies the implicit discount is 1 and the bound is
    infinite (reported, not raised).
    """
    theta, theta_bar = _align(theta, theta_bar)
    if theta.Y != theta_bar.Y:
        raise ModelError("models must share the observation alphabet")
    C = build_action_costs(theta)
    stop_cost = float(C.C[0].max())
    norm = tv_norm(theta, theta_bar) if norm is None else float(norm)
    ys, rho = implicit_discount(theta, theta_bar, unit(theta.X - 1, theta.X), C)
    tail = rho < 1.0 - 1e-12
    if norm == 0.0:
        bound = 0.0
    elif not tail:
        bound = math.inf
    else:
        bound = stop_cost * norm / (1.0 - rho)
    return SensitivityReport(ys, rho, norm, bound, stop_cost, tail)


@dataclass
class KLNorms:
    kl: float
    tv: float
    infinite: bool
    gaussian_printed: Optional[float] = None
    gaussian_standard: Optional[float] = None

    def to_dict(self) -> dict:
        return {"kl_norm": self.kl, "tv_norm": self.tv, "infinite": self.infinite,
                "gaussian_closed_form": self.gaussian_printed,
                "gaussian_standard_kl": self.gaussian_standard}


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """sum p ln(p/q); inf if q vanishes where p does not."""
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    return float(max(0.0, np.sum(p[pos] * np.log(p[pos] / q[pos]))))


def gaussian_scale_norms(sd: float, sd_bar: float) -> tuple[float, float]:
    """Closed-form mismatch norms for a variance change with equal means.

    Returns ``(printed, standard)``: the first uses the ratio sd/sd_bar,
    the second the variance ratio r = sd^2/sd_bar^2, which is what
    sqrt(2 KL) actually equals, namely (r - ln r - 1)^(1/2).
    """
    s = sd / sd_bar
    r = s * s
    return math.sqrt(max(0.0, s - math.log(s) - 1.0)), math.sqrt(max(0.0, r - math.log(r) - 1.0))


def mismatch_norm_kl(theta: SamplingModel, theta_bar: SamplingModel, tol: float = 1e-12) -> KLNorms:
    """sqrt(2) max_{i,u} sum_j A^{D_u}_ij sqrt(D(B_j || Bbar_j)) for models sharing A."""
    if theta.A.shape != theta_bar.A.shape or np.max(np.abs(theta.A - theta_bar.A)) > tol:
        raise ModelError("the KL norm needs identical transition matrices")
    theta, theta_bar = _align(theta, theta_bar)
    if theta.Y != theta_bar.Y:
        raise ModelError("models must share the observation alphabet")
    div = np.array([kl_divergence(theta.B[j], theta_bar.B[j]) for j in range(theta.X)])
    infinite = bool(np.any(np.isinf(div)))
    if infinite:
        kl = math.inf
    else:
        root = np.sqrt(div)
        kl = math.sqrt(2.0) * max(float((theta.interval_power(u) @ root).max())
                                  for u in range(1, theta.L + 1))
    out = KLNorms(kl, tv_norm(theta, theta_bar), infinite)
    if theta.obs.kind == "gaussian" and theta_bar.obs.kind == "gaussian":
        sd = np.sqrt(theta.obs.params["variances"])
        sdb = np.sqrt(theta_bar.obs.params["variances"])
        same_means = np.allclose(theta.obs.params["means"], theta_bar.obs.params["means"])
        if same_means and np.allclose(sd, sd[0]) and np.allclose(sdb, sdb[0]):
            out.gaussian_printed, out.gaussian_standard = gaussian_scale_norms(float(sd[0]), float(sdb[0]))
    return out


def misspecification_gap(theta: SamplingModel, theta_bar: SamplingModel,
                         grid: Optional[BeliefGrid] = None, tol: float = 1e-9) -> tuple[np.ndarray, Policy]:
    """|J_mu(pi; theta) - J_mu(pi; theta_bar)| on the grid, mu optimal for theta."""
    theta, theta_bar = _align(theta, theta_bar)
    grid = grid if grid is not None else make_grid(theta.X)
    sol = value_iterate(theta, grid=grid, tol=tol)
    J = policy_evaluate(theta, sol.policy, tol=tol)
    Jb = policy_evaluate(theta_bar, sol.policy, tol=tol)
    return np.abs(J - Jb), sol.policy


def random_model_pair(rng: np.random.Generator, share_transition: bool = True,
                      eps: float = 0.05, max_tries: int = 1000):
    """Draw a small two-state quickest-detection pair for sensitivity experiments.

    theta has a geometric change time, a random TP2 observation matrix and
    constant sampling cost; theta-bar perturbs each observation row by up to
    ``eps`` in total variation (and, unless ``share_transition``, the stay
    probability too).  Draws whose implicit discount is 1 are rejected.
    """
    from .bounds import random_tp2
    from .costs import build_qd_costs
    from .models import discrete_observations, is_tp2

    for _ in range(max_tries):
        Y = int(rng.integers(2, 5))
        L = int(rng.integers(2, 4))
        D = tuple(sorted(rng.choice(np.arange(1, 7), size=L, replace=False).tolist()))
        a22 = float(rng.uniform(0.5, 0.95))
        f, d, m = float(rng.uniform(5, 20)), float(rng.uniform(0.2, 1.0)), float(rng.uniform(0, 2))
        B = random_tp2(rng, 2, Y)
        noise = rng.dirichlet(np.ones(Y), size=2)
        Bb = (1 - eps / 2) * B + (eps / 2) * noise
        b22 = a22 if share_transition else float(np.clip(a22 + rng.uniform(-eps, eps), 0.01, 0.99))
        A = np.array([[1.0, 0.0], [1 - a22, a22]])
        Ab = np.array([[1.0, 0.0], [1 - b22, b22]])
        if not (is_tp2(B) and is_tp2(Bb)):
            continue
        th = SamplingModel(A, discrete_observations(B), D, build_qd_costs(f, d, m, A, D))
        tb = SamplingModel(Ab, discrete_observations(Bb), D, build_qd_costs(f, d, m, Ab, D))
        if sensitivity_bound(th, tb).tail_condition:
            return th, tb
    raise RuntimeError("no admissible pair found")
