"""Per-action cost vectors and the two cost transformations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .models import ModelError, SamplingModel, StructureError


@dataclass(frozen=True)
class CostSpec:
    """Instantaneous costs of the sampling problem.

    ``c[x, 0]`` is the terminal cost of stopping in state x and ``c[x, u]``
    the per-time-unit running cost under continue action u; ``m[x, u-1]`` is
    the sampling cost paid when action u is chosen in state x.
    """

    c: np.ndarray
    m: np.ndarray
    mode: str = "generic"
    f: Optional[float] = None
    d: Optional[float] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if c.ndim != 2 or m.ndim != 2 or c.shape[0] != m.shape[0] or c.shape[1] != m.shape[1] + 1:
            raise ModelError(f"cost shapes inconsistent: c {c.shape}, m {m.shape}")
        if np.any(c < 0) or np.any(m < 0) or not (np.all(np.isfinite(c)) and np.all(np.isfinite(m))):
            raise ModelError("costs must be finite and nonnegative")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "m", m)

    @property
    def quickest(self) -> bool:
        return self.mode == "quickest"


@dataclass(frozen=True)
class ActionCostVectors:
    """Rows ``C[u]`` are the X-vectors with C(pi, u) = C[u] . pi, u = 0..L."""

    C: np.ndarray

    @property
    def L(self) -> int:
        return self.C.shape[0] - 1

    def __call__(self, pi, u: int) -> float:
        return float(self.C[u] @ np.asarray(pi, dtype=float))

    def on(self, beliefs: np.ndarray) -> np.ndarray:
        """Costs of every action at each belief row; shape (N, L+1)."""
        return np.asarray(beliefs) @ self.C.T


def build_qd_costs(f: float, d: float, m, A, intervals: Sequence[int]) -> CostSpec:
    """Quickest-detection costs: false alarm f, delay d per unit, sampling cost m.

    ``m`` is a scalar or an X x L matrix; states 2..X must share their
    sampling costs since they only shape the change-time law.
    """
    A = np.asarray(A, dtype=float)
    X = A.shape[0]
    L = len(intervals)
    if f < 0 or d < 0:
        raise ModelError("false-alarm and delay costs must be nonnegative")
    m = np.broadcast_to(np.asarray(m, dtype=float), (X, L)).copy()
    if np.any(m < 0):
        raise ModelError("measurement costs must be nonnegative")
    if X > 2 and np.any(np.abs(m[2:] - m[1]) > 0):
        raise ModelError("quickest detection needs m(e_2,u) = ... = m(e_X,u)")
    c = np.zeros((X, L + 1))
    c[1:, 0] = f
    c[0, 1:] = d
    return CostSpec(c=c, m=m, mode="quickest", f=float(f), d=float(d))


def build_action_costs(model: SamplingModel, spec: Optional[CostSpec] = None) -> ActionCostVectors:
    """C_0 = c_0 and C_u = m_u + (I + A + ... + A^{D_u-1}) c_u."""
    spec = spec if spec is not None else model.costs
    if spec is None:
        raise ModelError("model has no cost specification")
    if spec.c.shape != (model.X, model.L + 1):
        raise ModelError(f"cost matrix shape {spec.c.shape} does not match X={model.X}, L={model.L}")
    C = np.empty((model.L + 1, model.X))
    C[0] = spec.c[:, 0]
    for u, D in enumerate(model.intervals, start=1):
        occupancy = sum(model.power(k) for k in range(D))
        C[u] = spec.m[:, u - 1] + occupancy @ spec.c[:, u]
    return ActionCostVectors(C)


def _require_quickest(model: SamplingModel):
    spec = model.costs
    if spec is None or not spec.quickest:
        raise StructureError("transformation needs quickest-detection costs")
    if not model.is_ph():
        raise StructureError("transformation needs an absorbing target state")
    return spec


def default_underline_alpha(model: SamplingModel) -> float:
    """alpha = 1 / (1 - A_22^{D_L}) for a two-state quickest model."""
    if model.X != 2:
        raise StructureError("default alpha is defined for X = 2 only")
    stay = model.power(model.intervals[-1])[1, 1]
    if stay >= 1.0:
        raise ZeroDivisionError("A_22^{D_L} = 1: the chain never jumps")
    return 1.0 / (1.0 - stay)


def transform_underline(costs: ActionCostVectors, model: SamplingModel,
                        alpha: Optional[float] = None) -> ActionCostVectors:
    """Potential shift by -alpha C(., L) that leaves the optimal policy unchanged.

    Stop: C_0 - alpha C_L.  Continue u: C_u - alpha C_L + alpha A^{D_u} C_L,
    since sum_y C(T(pi,y,u), L) sigma(pi,y,u) = C_L' (A')^{D_u} pi.
    """
    if model.X != 2 or not model.is_ph():
        raise StructureError("transform_underline needs a two-state chain with absorbing state 1")
    if alpha is None:
        alpha = default_underline_alpha(model)
    CL = costs.C[-1]
    out = costs.C - alpha * CL
    for u in range(1, costs.L + 1):
        out[u] = out[u] + alpha * model.interval_power(u) @ CL
    return ActionCostVectors(out)


def transform_bar(costs: ActionCostVectors, model: SamplingModel, alpha: float) -> ActionCostVectors:
    """Add alpha d e_1'A'pi to every action and subtract alpha d e_1'(A')^{D_u+1}pi when continuing."""
    spec = _require_quickest(model)
    if alpha <= 0:
        raise ModelError("alpha must be positive")
    shift = alpha * spec.d * model.A[:, 0]
    out = costs.C + shift
    for u, D in enumerate(model.intervals, start=1):
        out[u] = out[u] - alpha * spec.d * model.power(D + 1)[:, 0]
    return ActionCostVectors(out)


def a7_alpha(model: SamplingModel) -> float:
    """Smallest alpha allowed by the alpha >= f / (d (1 - A_21)) condition."""
    spec = _require_quickest(model)
    denom = spec.d * (1.0 - model.A[1, 0])
    if denom <= 0:
        return float("inf")
    return spec.f / denom

