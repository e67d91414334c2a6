"""Parallel coordinate descent for the Adaboost problem and three baselines.

All four methods minimise F(lam) = log mean(exp(A lam)) and share the same
safeguard: a step that increases F is undone, so sync-mode traces are
monotone. Step lengths:

* pcdm            -grad_i F / (beta L_i) on a random block S (tau-nice or tau-independent)
* fully_parallel  -grad_i F / (omega L_i) on every coordinate
* greedy          -grad_i F / L_i on argmax_i |grad_i F| (ties -> lowest index)
* accelerated     accelerated gradient in the diag(omega L) metric, restart on increase
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels as K
from .dataset import MarginMatrix
from .eso import EsoParams
from .objective import SolverState, full_gradient, init_state
from .sampling import SamplingLaw

ALGORITHMS = ("pcdm", "fully_parallel", "greedy", "accelerated")
ALIASES = {"full": "fully_parallel", "accel": "accelerated"}


@dataclass
class SolverConfig:
    algorithm: str = "pcdm"
    law: SamplingLaw | None = None
    threads: int = 1
    mode: str = "sync"
    max_iter: int | None = None
    seconds: float | None = None
    target_F: float | None = None
    grad_tol: float | None = None
    trace_every: int | None = None
    refresh_every: int | None = None  # full recompute of r = A lam; default 10 n / tau
    record_time: bool = True

    def __post_init__(self):
        self.algorithm = ALIASES.get(self.algorithm, self.algorithm)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.mode not in ("sync", "async"):
            raise ValueError("mode must be 'sync' or 'async'")
        if self.mode == "async" and self.algorithm != "pcdm":
            raise ValueError("async mode is only defined for pcdm")
        if self.max_iter is None and self.seconds is None and self.target_F is None and self.grad_tol is None:
            raise ValueError("set at least one stopping rule")
        if self.algorithm == "pcdm" and self.law is None:
            raise ValueError("pcdm needs a sampling law")


@dataclass(eq=False)
class Trace:
    iters: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    F: list = field(default_factory=list)
    f: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    status: str = ""
    state: SolverState | None = None

    def record(self, it: int, elapsed: float, F: float) -> None:
        self.iters.append(int(it))
        self.elapsed.append(float(elapsed))
        self.F.append(float(F))
        self.f.append(math.exp(F))

    def __len__(self):
        return len(self.iters)

    @property
    def final_F(self) -> float:
        return self.F[-1]

    def iterations_to(self, target: float) -> int | None:
        """First recorded iteration with F <= target."""
        for it, F in zip(self.iters, self.F):
            if F <= target:
                return it
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "elapsed_s", "F", "f"])
            for row in zip(self.iters, self.elapsed, self.F, self.f):
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])

    @classmethod
    def from_csv(cls, path) -> "Trace":
        tr = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                tr.iters.append(int(row["iter"]))
                tr.elapsed.append(float(row["elapsed_s"]))
                tr.F.append(float(row["F"]))
                tr.f.append(float(row["f"]))
        return tr


# --------------------------------------------------------------------------
# single steps


def pcdm_deltas(s: SolverState, A: MarginMatrix, eso: EsoParams, coords, step_scale: float = 1.0) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64)
    d = np.empty(coords.shape[0])
    for q, i in enumerate(coords):
        g = K.col_grad(A.col_ptr, A.col_row, A.col_val, s.r, s.acc[0], s.acc[1], i)
        d[q] = -step_scale * g / (eso.beta * eso.L[i])
    return d


def pcdm_step(s: SolverState, A: MarginMatrix, eso: EsoParams, coords, *,
              step_scale: float = 1.0, safeguard: bool = True) -> SolverState:
    """One parallel step on block ``coords``; undone if F increases.

    ``step_scale`` multiplies every delta (a test hook for provoking the
    safeguard). Mutates and returns ``s``.
    """
    coords = np.sort(np.asarray(coords, dtype=np.int64))
    deltas = pcdm_deltas(s, A, eso, coords, step_scale)
    count = coords.shape[0]
    saved_lam = np.empty(count)
    saved_r = np.empty(int(A.column_nnz()[coords].sum()))
    K.pcdm_try(A.col_ptr, A.col_row, A.col_val, A.row_ptr, A.row_col, A.row_val, s.lam, s.r, s.acc, s.cnt,
               coords, deltas, count, False, safeguard, saved_lam, saved_r, np.empty(0))
    s.cnt[0] += 1
    return s


def greedy_choice(grad: np.ndarray, domain: np.ndarray) -> int:
    """Coordinate of largest |grad| within ``domain``; ties go to the lowest index."""
    vals = np.abs(grad[domain])
    return int(domain[int(np.argmax(vals))])


# --------------------------------------------------------------------------
# drivers


def _max_col_nnz(A: MarginMatrix) -> int:
    nnz = A.column_nnz()
    return int(nnz.max()) if nnz.size else 0


def _set_threads(threads: int) -> bool:
    """Configure numba's pool; returns True when the parallel kernels should be used."""
    if threads <= 1:
        return False
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    return True


class _Runner:
    def __init__(self, A: MarginMatrix, cfg: SolverConfig, tau: int, lambda0):
        self.A = A
        self.cfg = cfg
        self.state = init_state(A, lambda0)
        self.domain = A.active_coordinates()
        if self.domain.size == 0:
            raise ValueError("matrix has no nonzero column")
        n_active = self.domain.size
        self.refresh_every = cfg.refresh_every if cfg.refresh_every is not None else max(1, (10 * n_active) // tau)
        if cfg.trace_every is not None:
            self.trace_every = cfg.trace_every
        elif cfg.algorithm == "pcdm":
            self.trace_every = max(1, n_active // tau)
        else:
            self.trace_every = 1
        self.trace = Trace()
        self.t0 = time.perf_counter()
        self.grad = np.zeros(A.n)

    def elapsed(self):
        return time.perf_counter() - self.t0

    def record(self):
        el = self.elapsed() if self.cfg.record_time else math.nan
        self.trace.record(self.state.iter, el, self.state.F)

    def stop_reason(self):
        cfg, s = self.cfg, self.state
        if cfg.target_F is not None and s.F <= cfg.target_F:
            return "target_reached"
        if cfg.grad_tol is not None:
            g = full_gradient(s, self.A)
            if np.max(np.abs(g[self.domain])) <= cfg.grad_tol:
                return "grad_tol"
        if cfg.max_iter is not None and s.iter >= cfg.max_iter:
            return "max_iter"
        if cfg.seconds is not None and self.elapsed() >= cfg.seconds:
            return "time_budget"
        return None

    def loop(self, chunk, deterministic: bool):
        """Run ``chunk(nsteps)`` between trace records until a stopping rule fires."""
        chunk(0)  # compile (or load from cache) outside the time budget
        self.t0 = time.perf_counter()
        self.record()
        while True:
            reason = self.stop_reason()
            if reason:
                break
            n = self.trace_every
            if self.cfg.max_iter is not None:
                n = min(n, self.cfg.max_iter - self.state.iter)
            before = (self.state.iter, self.state.rejected)
            chunk(n)
            self.record()
            done, rej = self.state.iter - before[0], self.state.rejected - before[1]
            if deterministic and done > 0 and rej == done:
                # a deterministic method that rejects every step cannot move again
                reason = "stalled"
                break
        self.trace.status = reason
        self.trace.state = self.state
        return self.trace


def run_pcdm(A: MarginMatrix, eso: EsoParams, cfg: SolverConfig, lambda0=None) -> Trace:
    law = cfg.law
    tau = law.tau
    if cfg.mode == "async":
        return _run_pcdm_async(A, eso, cfg, lambda0)
    run = _Runner(A, cfg, tau, lambda0)
    s = run.state
    kern = K.pcdm_chunk_par if _set_threads(cfg.threads) else K.pcdm_chunk
    mcn = _max_col_nnz(A)
    seed = np.uint64(law.seed)

    def chunk(n):
        kern(A.col_ptr, A.col_row, A.col_val, A.row_ptr, A.row_col, A.row_val, eso.L, eso.beta,
             law.kind_code, law.domain, tau, seed, law.allow_collisions, s.lam, s.r, s.acc, s.cnt,
             n, run.refresh_every, mcn)

    tr = run.loop(chunk, deterministic=False)
    tr.meta.update(algorithm="pcdm", tau=tau, beta=eso.beta, seed=law.seed, sampling=law.kind, mode="sync")
    return tr


def _run_pcdm_async(A, eso, cfg, lambda0):
    """Asynchronous PCDM: ``cfg.threads`` workers, one coordinate per inner step.

    Workers read stale residuals and add to them atomically. Between epochs
    (``trace_every`` inner steps per worker) the main thread recomputes the
    log-sum exactly and applies the safeguard to the whole epoch.
    """
    law = cfg.law
    workers = cfg.threads
    run = _Runner(A, cfg, workers, lambda0)
    s = run.state
    owner = np.zeros(A.n, dtype=np.int64)
    stats = np.zeros((workers, 2), dtype=np.int64)
    seed = np.uint64(law.seed)
    lam_snap = s.lam.copy()
    r_snap = s.r.copy()
    pool = ThreadPoolExecutor(max_workers=workers)
    epochs = [0]

    def chunk(n):
        f_prev = s.logsum
        lam_snap[:] = s.lam
        r_snap[:] = s.r
        dsum = np.zeros(workers)
        start = s.iter
        futs = [
            pool.submit(K.async_worker, A.col_ptr, A.col_row, A.col_val, eso.L, eso.beta, law.domain, seed,
                        w + 1, start, n, s.lam, s.r, s.acc[0], s.acc[1], dsum, w, owner,
                        law.allow_collisions, stats)
            for w in range(workers)
        ]
        for fu in futs:
            fu.result()
        epochs[0] += 1
        if (epochs[0] * n) % max(1, run.refresh_every) < n:
            K.residuals_into(A.row_ptr, A.row_col, A.row_val, s.lam, s.r)
        K.lse_refresh(s.r, s.acc, s.cnt)
        if s.logsum > f_prev:
            s.lam[:] = lam_snap
            s.r[:] = r_snap
            K.lse_refresh(s.r, s.acc, s.cnt)
            s.cnt[2] += n
        s.cnt[0] += n

    try:
        tr = run.loop(chunk, deterministic=False)
    finally:
        pool.shutdown()
    tr.meta.update(algorithm="pcdm", tau=workers, beta=eso.beta, seed=law.seed, sampling="independent",
                   mode="async", updates=int(stats[:, 0].sum()), collisions=int(stats[:, 1].sum()))
    return tr


def run_fully_parallel(A: MarginMatrix, cfg: SolverConfig, lambda0=None) -> Trace:
    run = _Runner(A, cfg, A.n, lambda0)
    s = run.state
    L = _lipschitz(A)
    kern = K.fully_chunk_par if _set_threads(cfg.threads) else K.fully_chunk
    omega = float(A.omega)

    def chunk(n):
        kern(A.col_ptr, A.col_row, A.col_val, A.row_ptr, A.row_col, A.row_val, L, omega,
             run.domain, s.lam, s.r, s.acc, s.cnt, n, run.refresh_every, run.grad)

    tr = run.loop(chunk, deterministic=True)
    tr.meta.update(algorithm="fully_parallel", omega=A.omega)
    return tr


def run_greedy(A: MarginMatrix, cfg: SolverConfig, lambda0=None) -> Trace:
    run = _Runner(A, cfg, A.n, lambda0)
    s = run.state
    L = _lipschitz(A)
    kern = K.greedy_chunk_par if _set_threads(cfg.threads) else K.greedy_chunk
    mcn = _max_col_nnz(A)

    def chunk(n):
        kern(A.col_ptr, A.col_row, A.col_val, A.row_ptr, A.row_col, A.row_val, L,
             run.domain, s.lam, s.r, s.acc, s.cnt, n, run.refresh_every, mcn, run.grad)

    tr = run.loop(chunk, deterministic=True)
    tr.meta.update(algorithm="greedy")
    return tr


def run_accelerated(A: MarginMatrix, cfg: SolverConfig, lambda0=None) -> Trace:
    run = _Runner(A, cfg, A.n, lambda0)
    s = run.state
    L = _lipschitz(A)
    kern = K.accel_chunk_par if _set_threads(cfg.threads) else K.accel_chunk
    omega = float(A.omega)
    z = s.lam.copy()
    rz = s.r.copy()
    theta = np.ones(1)

    def chunk(n):
        kern(A.col_ptr, A.col_row, A.col_val, A.row_ptr, A.row_col, A.row_val, L, omega,
             run.domain, s.lam, s.r, z, rz, theta, s.acc, s.cnt, n, run.refresh_every, run.grad)

    tr = run.loop(chunk, deterministic=False)
    tr.meta.update(algorithm="accelerated", omega=A.omega)
    return tr


def _lipschitz(A):
    from .dataset import coordinate_lipschitz

    return coordinate_lipschitz(A)


def solve(A: MarginMatrix, cfg: SolverConfig, eso: EsoParams | None = None, lambda0=None) -> Trace:
    """Dispatch on ``cfg.algorithm``."""
    if cfg.algorithm == "pcdm":
        tau = cfg.threads if cfg.mode == "async" else cfg.law.tau
        if eso is None:
            eso = EsoParams.for_matrix(A, tau)
        return run_pcdm(A, eso, cfg, lambda0)
    if cfg.algorithm == "fully_parallel":
        return run_fully_parallel(A, cfg, lambda0)
    if cfg.algorithm == "greedy":
        return run_greedy(A, cfg, lambda0)
    return run_accelerated(A, cfg, lambda0)
