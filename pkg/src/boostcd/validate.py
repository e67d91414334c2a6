"""Monte-Carlo checks of the ESO inequality and of the one-step expected decrease.

ESO:      E[F(x + h_[S])] <= F(x) + (E|S| / n) (<grad F(x), h> + beta/2 ||h||_L^2)
decrease: E[F(lam + delta_[S])] <= F(lam) - tau / (2 beta n) ||grad F(lam)||_{1/L}^2,
          delta = -grad F(lam) / (beta L)

Both sides are compared with a 99% normal confidence half-width on the
sample mean. When the tau-nice law has a single subset (tau = n) the left side
is computed exactly instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy.stats import norm

from . import _kernels as K
from . import sampling as _s
from .dataset import MarginMatrix
from .eso import EsoParams
from .objective import init_state, full_gradient, loss_F
from .sampling import SamplingLaw

CONFIDENCE = 0.99
EXACT_TOL = 1e-10
# slack for summation rounding when the sample has no spread
ROUNDING_TOL = 1e-12


@dataclass
class ValidationReport:
    kind: str
    passed: bool
    mean: float
    bound: float
    half_width: float
    margin: float
    F_x: float
    trials: int
    std: float
    exact: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = "PASS" if self.passed else "FAIL"
        return d


@njit(nogil=True, cache=True)
def _mc_values(col_ptr, col_row, col_val, r0, acc0, h, kind, domain, tau, seed, allow_collisions, trials, out):
    r = r0.copy()
    acc = np.empty(3)
    cnt = np.zeros(3, dtype=np.int64)
    perm = np.arange(domain.shape[0])
    coords = np.empty(tau, dtype=np.int64)
    saved_lam = np.empty(tau)
    mcn = 0
    for q in range(domain.shape[0]):
        i = domain[q]
        mcn = max(mcn, col_ptr[i + 1] - col_ptr[i])
    saved_r = np.empty(tau * mcn)
    lam = h.copy()  # scratch; only its restored entries matter
    deltas = np.empty(tau)
    logm = math.log(r0.shape[0])
    for t in range(trials):
        acc[:] = acc0
        s = _s.draw(kind, domain, perm, tau, seed, 0, t, allow_collisions, coords)
        for q in range(s):
            deltas[q] = h[coords[q]]
        pos = K.merge_update(col_ptr, col_row, col_val, lam, r, acc, coords, deltas, s, saved_lam, saved_r)
        if not (acc[1] > acc[2] * K.LSE_DECAY):
            K.lse_refresh(r, acc, cnt)
        out[t] = acc[0] + math.log(acc[1]) - logm
        K.undo_update(col_ptr, col_row, coords, deltas, s, lam, r, saved_lam, saved_r, pos)


def _default_law(A: MarginMatrix, eso: EsoParams, seed: int) -> SamplingLaw:
    return SamplingLaw("nice", eso.tau, seed, A.active_coordinates())


def _estimate(A, law, x, h, trials):
    s = init_state(A, x)
    dom = law.domain
    if law.kind == "nice" and law.tau == dom.size:
        xs = np.array(x, dtype=np.float64)
        xs[dom] += h[dom]
        return s, np.array([loss_F(A, xs)]), True
    vals = np.empty(trials)
    _mc_values(A.col_ptr, A.col_row, A.col_val, s.r, s.acc, np.ascontiguousarray(h, dtype=np.float64),
               law.kind_code, dom, law.tau, np.uint64(law.seed), law.allow_collisions, trials, vals)
    return s, vals, False


def _report(kind, vals, exact, bound, F_x):
    trials = vals.size
    mean = float(vals.mean())
    if exact:
        std, half = 0.0, 0.0
        passed = mean <= bound + EXACT_TOL
    else:
        std = float(vals.std(ddof=1)) if trials > 1 else 0.0
        half = float(norm.ppf(0.5 + CONFIDENCE / 2) * std / math.sqrt(trials))
        passed = mean <= bound + half + ROUNDING_TOL * max(1.0, abs(bound))
    return ValidationReport(kind, bool(passed), mean, float(bound), half, float(bound - mean), float(F_x),
                            trials, std, exact)


def validate_eso(A: MarginMatrix, eso: EsoParams, x, h, trials: int = 100_000, seed: int = 0,
                 law: SamplingLaw | None = None) -> ValidationReport:
    """Check the ESO inequality at (x, h) with weights w = L."""
    if trials < 2:
        raise ValueError("need at least two trials")
    law = law or _default_law(A, eso, seed)
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    s, vals, exact = _estimate(A, law, x, h, trials)
    dom = law.domain
    g = full_gradient(s, A)
    quad = float(np.sum(eso.L[dom] * h[dom] ** 2))
    bound = s.F + law.expected_size() / dom.size * (float(g[dom] @ h[dom]) + 0.5 * eso.beta * quad)
    return _report("eso", vals, exact, bound, s.F)


def decrease_direction(A: MarginMatrix, eso: EsoParams, lam) -> np.ndarray:
    s = init_state(A, lam)
    g = full_gradient(s, A)
    delta = np.zeros(A.n)
    dom = A.active_coordinates()
    delta[dom] = -g[dom] / (eso.beta * eso.L[dom])
    return delta


def validate_expected_decrease(A: MarginMatrix, eso: EsoParams, lam, trials: int = 100_000, seed: int = 0,
                               law: SamplingLaw | None = None) -> ValidationReport:
    """Check that one unsafeguarded PCDM step decreases F in expectation by the predicted amount."""
    if trials < 2:
        raise ValueError("need at least two trials")
    law = law or _default_law(A, eso, seed)
    lam = np.asarray(lam, dtype=np.float64)
    s = init_state(A, lam)
    dom = law.domain
    g = full_gradient(s, A)
    delta = np.zeros(A.n)
    delta[dom] = -g[dom] / (eso.beta * eso.L[dom])
    _, vals, exact = _estimate(A, law, lam, delta, trials)
    gnorm = float(np.sum(g[dom] ** 2 / eso.L[dom]))
    bound = s.F - law.expected_size() / (2.0 * eso.beta * dom.size) * gnorm
    return _report("decrease", vals, exact, bound, s.F)
