"""Small sparse instances whose convergence regime is known by construction.

* weak_learnable: a certificate lam* with max_j (A lam*)_j <= -1, so inf f = 0.
* attainable: rows come in pairs (a, -a); the all-ones vector lies in
  Ker(A^T), every example is in the hard core and min f = 1 (at lam = 0).
* mixed: a weak block and an attainable block on disjoint columns; the
  optimal value is m_plus / m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dataset import MarginMatrix

MAGNITUDES = np.array([1.0, 0.5, 2.0])
REGIMES = ("weak_learnable", "attainable", "mixed")


@dataclass(frozen=True)
class RegimeSpec:
    regime: str
    m: int
    n: int
    density: float
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")


@dataclass(eq=False)
class Instance:
    A: MarginMatrix
    regime: str
    f_bar: float
    certificate: dict = field(default_factory=dict)
    m_plus: int = 0

    def sidecar(self) -> dict:
        cert = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.certificate.items()}
        return {"regime": self.regime, "m": self.A.m, "n": self.A.n, "omega": self.A.omega,
                "m_plus": self.m_plus, "f_bar": self.f_bar, "certificate": cert}


def _random_rows(rng, m, n, density):
    """m sparse rows, each with at least one entry, values in +-{1, 0.5, 2}."""
    rows, cols, vals = [], [], []
    for j in range(m):
        support, v = _random_row(rng, n, density)
        rows.append(np.full(support.size, j))
        cols.append(support)
        vals.append(v)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _random_row(rng, n, density):
    k = max(1, rng.binomial(n, density))
    support = np.sort(rng.choice(n, size=k, replace=False))
    return support, rng.choice(MAGNITUDES, size=k) * rng.choice([-1.0, 1.0], size=k)


def _weak_block(rng, m, n, density, max_redraws=1000):
    """Rows flipped to point away from a random lam*, then lam* scaled so every margin is <= -1.

    Rows nearly orthogonal to lam* are redrawn (margin below a quarter of
    the median) so the separating margin does not collapse.
    """
    lam_star = rng.standard_normal(n)
    lam_star[np.abs(lam_star) < 0.1] = 0.1
    rows = [_random_row(rng, n, density) for _ in range(m)]
    margins = np.array([v @ lam_star[sup] for sup, v in rows])
    floor = 0.25 * np.median(np.abs(margins))
    for j in np.flatnonzero(np.abs(margins) < floor):
        for _ in range(max_redraws):
            sup, v = _random_row(rng, n, density)
            if abs(v @ lam_star[sup]) >= floor:
                break
        else:
            while abs(v @ lam_star[sup]) < 1e-3:
                sup, v = _random_row(rng, n, density)
        rows[j] = (sup, v)
        margins[j] = v @ lam_star[sup]
    indptr = np.cumsum([0] + [len(sup) for sup, _ in rows])
    indices = np.concatenate([sup for sup, _ in rows])
    data = np.concatenate([-np.sign(mg) * v for (_, v), mg in zip(rows, margins)])
    A = sp.csr_matrix((data, indices, indptr), shape=(m, n))
    margins = A @ lam_star
    # aim slightly past -1 so the bound survives any summation order
    lam_star = lam_star * ((1.0 + 1e-9) / np.abs(margins).min())
    while (A @ lam_star).max() > -1.0:
        lam_star = lam_star * (1.0 + 1e-9)
    return A, lam_star


def _attainable_block(rng, m, n, density):
    half = (m + 1) // 2
    rows, cols, vals = _random_rows(rng, half, n, density)
    B = sp.csr_matrix((vals, (rows, cols)), shape=(half, n))
    # interleave: row 2k = B_k, row 2k+1 = -B_k
    A = sp.vstack([B, -B]).tocsr()
    order = np.empty(2 * half, dtype=np.int64)
    order[0::2] = np.arange(half)
    order[1::2] = np.arange(half) + half
    return A[order]


def gen_weak_learnable(spec: RegimeSpec) -> Instance:
    if spec.regime != "weak_learnable":
        raise ValueError("spec.regime must be 'weak_learnable'")
    rng = np.random.default_rng(spec.seed)
    A, lam_star = _weak_block(rng, spec.m, spec.n, spec.density)
    return Instance(MarginMatrix.from_sparse(A), spec.regime, 0.0, {"lambda_star": lam_star}, 0)


def gen_attainable(spec: RegimeSpec) -> Instance:
    """Odd m is rounded up to the next even number."""
    if spec.regime != "attainable":
        raise ValueError("spec.regime must be 'attainable'")
    rng = np.random.default_rng(spec.seed)
    A = MarginMatrix.from_sparse(_attainable_block(rng, spec.m, spec.n, spec.density))
    return Instance(A, spec.regime, 1.0, {"kernel_vector": "ones", "argmin": np.zeros(A.n)}, A.m)


def gen_mixed(spec: RegimeSpec, m_plus: int | None = None, n_plus: int | None = None) -> Instance:
    """Block-diagonal [A0 0; 0 A+]: weak block on the first columns, attainable block after.

    By default half the rows and half the columns go to each block.
    """
    if spec.regime != "mixed":
        raise ValueError("spec.regime must be 'mixed'")
    if spec.m < 3 or spec.n < 2:
        raise ValueError("mixed instances need m >= 3 and n >= 2")
    rng = np.random.default_rng(spec.seed)
    m_plus = m_plus if m_plus is not None else 2 * (spec.m // 4 or 1)
    m_plus += m_plus % 2
    m0 = spec.m - m_plus
    if m0 < 1:
        raise ValueError("mixed instance needs at least one weak row")
    n_plus = n_plus if n_plus is not None else spec.n // 2
    n0 = spec.n - n_plus
    if n0 < 1 or n_plus < 1:
        raise ValueError("both blocks need at least one column")
    A0, lam_star = _weak_block(rng, m0, n0, spec.density)
    Ap = _attainable_block(rng, m_plus, n_plus, spec.density)
    A = sp.block_diag([A0, Ap], format="csr")
    cert = {"lambda_star_weak": lam_star, "weak_rows": m0, "weak_cols": n0,
            "hard_core": list(range(m0, m0 + m_plus))}
    return Instance(MarginMatrix.from_sparse(A), spec.regime, m_plus / spec.m, cert, m_plus)


def generate(spec: RegimeSpec) -> Instance:
    return {"weak_learnable": gen_weak_learnable, "attainable": gen_attainable, "mixed": gen_mixed}[spec.regime](spec)
