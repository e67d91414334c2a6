"""Exponential loss f(x) = mean(exp(x)) and F(lambda) = log f(A lambda), with cached residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dataset import MarginMatrix


@dataclass(eq=False)
class SolverState:
    """Iterate, residuals r = A @ lam and the running log-sum-exp of r.

    The arrays are updated in place by the kernels; ``acc`` and ``cnt`` use
    the layout documented in ``boostcd._kernels``.
    """

    lam: np.ndarray
    r: np.ndarray
    acc: np.ndarray
    cnt: np.ndarray

    @property
    def m(self) -> int:
        return self.r.shape[0]

    @property
    def iter(self) -> int:
        return int(self.cnt[0])

    @property
    def rejected(self) -> int:
        return int(self.cnt[2])

    @property
    def logsum(self) -> float:
        return float(self.acc[0] + math.log(self.acc[1]))

    @property
    def F(self) -> float:
        return self.logsum - math.log(self.m)

    @property
    def f(self) -> float:
        return math.exp(self.F)

    def copy(self) -> "SolverState":
        return SolverState(self.lam.copy(), self.r.copy(), self.acc.copy(), self.cnt.copy())


def loss_F(A: MarginMatrix, lam: np.ndarray) -> float:
    """F(lam) evaluated from scratch (max-shifted)."""
    r = A.to_scipy() @ lam
    c = r.max()
    return float(c + math.log(np.exp(r - c).sum()) - math.log(A.m))


def init_state(A: MarginMatrix, lambda0=None) -> SolverState:
    if lambda0 is None:
        lam = np.zeros(A.n)
    else:
        lam = np.array(lambda0, dtype=np.float64)
        if lam.shape != (A.n,):
            raise ValueError(f"lambda0 must have shape ({A.n},)")
        if not np.all(np.isfinite(lam)):
            raise ValueError("lambda0 has non-finite entries")
    r = np.empty(A.m)
    K.residuals_into(A.row_ptr, A.row_col, A.row_val, lam, r)
    acc = np.empty(3)
    cnt = np.zeros(3, dtype=np.int64)
    K.lse_refresh(r, acc, cnt)
    return SolverState(lam, r, acc, cnt)


def refresh(s: SolverState, A: MarginMatrix, residuals: bool = True) -> SolverState:
    """Recompute r (optionally) and the log-sum from scratch."""
    if residuals:
        K.residuals_into(A.row_ptr, A.row_col, A.row_val, s.lam, s.r)
    K.lse_refresh(s.r, s.acc, s.cnt)
    return s


def example_weights(s: SolverState) -> np.ndarray:
    """Softmax of the residuals, p_j = exp(r_j) / sum_k exp(r_k)."""
    p = np.exp(s.r - s.r.max())
    return p / p.sum()


def partial_gradient(s: SolverState, A: MarginMatrix, i: int) -> float:
    return float(K.col_grad(A.col_ptr, A.col_row, A.col_val, s.r, s.acc[0], s.acc[1], i))


def full_gradient(s: SolverState, A: MarginMatrix) -> np.ndarray:
    g = np.empty(A.n)
    K.full_grad_into(A.col_ptr, A.col_row, A.col_val, s.r, s.acc[0], s.acc[1], g)
    return g


def apply_update(s: SolverState, A: MarginMatrix, coords, deltas) -> SolverState:
    """lam[coords] += deltas, with incremental residual and log-sum bookkeeping.

    Mutates and returns ``s``. No monotonicity check is made here.
    """
    coords = np.ascontiguousarray(coords, dtype=np.int64)
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    if coords.shape != deltas.shape:
        raise ValueError("coords and deltas must have the same length")
    if not np.all(np.isfinite(deltas)):
        raise ValueError("non-finite delta")
    count = coords.shape[0]
    saved_lam = np.empty(count)
    saved_r = np.empty(int(A.column_nnz()[coords].sum()) if count else 0)
    K.merge_update(A.col_ptr, A.col_row, A.col_val, s.lam, s.r, s.acc, coords, deltas, count, saved_lam, saved_r)
    s.cnt[1] += 1
    K.maybe_refresh(s.r, s.acc, s.cnt)
    s.cnt[0] += 1
    return s
