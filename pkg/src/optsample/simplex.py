"""Dense phase-1 simplex for small feasibility problems ``A x = b, x >= 0``."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.optimize import linprog

# Above this many unknowns the dense tableau becomes slow; hand over to HiGHS.
DENSE_LIMIT = 2000


def solve_feasibility(A, b, tol: float = 1e-9, pivot_tol: float = 1e-12,
                      max_pivots: int = 50_000) -> Optional[np.ndarray]:
    """Return a nonnegative solution of ``A x = b`` or None if infeasible.

    Phase 1 of the tableau simplex method with Bland's rule: artificial
    variables are driven to zero; the problem is declared feasible when the
    remaining artificial mass is at most ``tol`` times the scale of ``b``.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    if n > DENSE_LIMIT:
        return _solve_sparse(A, b, tol)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # tableau columns: n structural, m artificial, rhs
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    # objective row holds reduced costs of min sum(artificial)
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))

    for _ in range(max_pivots):
        reduced = T[m, :n + m]
        entering = np.nonzero(reduced < -pivot_tol)[0]
        if entering.size == 0:
            break
        col = int(entering[0])
        column = T[:m, col]
        positive = column > pivot_tol
        if not np.any(positive):
            # unbounded direction cannot occur in phase 1 (objective >= 0)
            break
        ratios = np.full(m, np.inf)
        ratios[positive] = T[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + pivot_tol * max(1.0, abs(best)))[0]
        row = int(min(ties, key=lambda r: basis[r]))
        T[row] /= T[row, col]
        for r in range(m + 1):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col
    else:
        raise RuntimeError("simplex pivot limit reached")

    infeasibility = -T[m, -1]
    if infeasibility > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        return None
    x = np.zeros(n + m)
    for r, var in enumerate(basis):
        x[var] = T[r, -1]
    return np.clip(x[:n], 0.0, None)


def _solve_sparse(A: np.ndarray, b: np.ndarray, tol: float) -> Optional[np.ndarray]:
    res = linprog(np.zeros(A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    x = np.clip(res.x, 0.0, None)
    if np.max(np.abs(A @ x - b)) > max(tol, 1e-7) * max(1.0, float(np.abs(b).max(initial=0.0))):
        return None
    return x
