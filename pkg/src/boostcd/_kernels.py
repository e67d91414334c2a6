"""numba kernels shared by the objective and the solvers.

State layout used throughout:

* ``lam`` (n,) iterate, ``r`` (m,) residuals A @ lam
* ``acc`` = [shift, sumexp, peak sumexp since the last refresh] so that
  log(sum_j exp(r_j)) = shift + log(sumexp)
* ``cnt`` = [iteration, updates since the last log-sum refresh, rejected steps]

Loops marked with ``prange`` run in parallel in the ``*_par`` builds; they
never reduce across threads, so results do not depend on the thread count.
"""

import math
import os

import numpy as np
from numba import config, njit, prange

from . import sampling as _s
from ._atomics import atomic_add, atomic_store, compare_and_swap

LSE_REFRESH_UPDATES = 10_000
LSE_DECAY = 1e-3  # refresh once sumexp falls this far below its peak
_BLOCK = 4096
_EXP_CAP = 700.0

_opts = dict(nogil=True, cache=True)

# TBB builds are often too old for numba; try it last
if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(**_opts)
def lse_refresh(r, acc, cnt):
    m = r.shape[0]
    c = -np.inf
    for j in range(m):
        if r[j] > c:
            c = r[j]
    nb = (m + _BLOCK - 1) // _BLOCK
    total = 0.0
    for b in range(nb):
        part = 0.0
        for j in range(b * _BLOCK, min(m, (b + 1) * _BLOCK)):
            part += math.exp(r[j] - c)
        total += part
    acc[0] = c
    acc[1] = total
    acc[2] = total
    cnt[1] = 0


@njit(**_opts)
def absorb(acc, old, new):
    """Fold r_j: old -> new into the running (shift, sumexp)."""
    if new > acc[0]:
        acc[1] *= math.exp(acc[0] - new)
        acc[2] *= math.exp(acc[0] - new)
        acc[0] = new
    acc[1] += math.exp(new - acc[0]) - math.exp(old - acc[0])
    # cancellation error scales with the largest mass seen, not the last exact one
    if acc[1] > acc[2]:
        acc[2] = acc[1]


@njit(**_opts)
def maybe_refresh(r, acc, cnt):
    s = acc[1]
    if cnt[1] >= LSE_REFRESH_UPDATES or not (s > acc[2] * LSE_DECAY) or not math.isfinite(s):
        lse_refresh(r, acc, cnt)


@njit(**_opts)
def logsum(acc):
    return acc[0] + math.log(acc[1])


@njit(**_opts)
def residuals_into(row_ptr, row_col, row_val, lam, out):
    for j in range(out.shape[0]):
        s = 0.0
        for k in range(row_ptr[j], row_ptr[j + 1]):
            s += row_val[k] * lam[row_col[k]]
        out[j] = s


@njit(**_opts)
def col_grad(col_ptr, col_row, col_val, r, shift, sumexp, i):
    g = 0.0
    for k in range(col_ptr[i], col_ptr[i + 1]):
        g += math.exp(r[col_row[k]] - shift) * col_val[k]
    return g / sumexp


@njit(**_opts)
def full_grad_into(col_ptr, col_row, col_val, r, shift, sumexp, out):
    for i in range(out.shape[0]):
        out[i] = col_grad(col_ptr, col_row, col_val, r, shift, sumexp, i)


@njit(**_opts)
def merge_update(col_ptr, col_row, col_val, lam, r, acc, coords, deltas, count, saved_lam, saved_r):
    """Apply lam[coords] += deltas in coordinate order; record old values for rollback.

    Returns the number of residual entries written to ``saved_r``.
    """
    pos = 0
    for q in range(count):
        i = coords[q]
        d = deltas[q]
        saved_lam[q] = lam[i]
        if d == 0.0:
            continue
        lam[i] += d
        for k in range(col_ptr[i], col_ptr[i + 1]):
            j = col_row[k]
            old = r[j]
            saved_r[pos] = old
            pos += 1
            new = old + col_val[k] * d
            r[j] = new
            absorb(acc, old, new)
    return pos


@njit(**_opts)
def undo_update(col_ptr, col_row, coords, deltas, count, lam, r, saved_lam, saved_r, pos):
    for q in range(count - 1, -1, -1):
        i = coords[q]
        if deltas[q] != 0.0:
            for k in range(col_ptr[i + 1] - 1, col_ptr[i] - 1, -1):
                pos -= 1
                r[col_row[k]] = saved_r[pos]
        lam[i] = saved_lam[q]


@njit(**_opts)
def pcdm_try(col_ptr, col_row, col_val, row_ptr, row_col, row_val, lam, r, acc, cnt,
             coords, deltas, count, full_refresh, safeguard, saved_lam, saved_r, saved_full):
    """Merge one block update, refresh bookkeeping, and undo it if F went up.

    Returns True when the update is kept.
    """
    f_old = logsum(acc)
    a0, a1, a2 = acc[0], acc[1], acc[2]
    since = cnt[1]
    if full_refresh:
        saved_full[:] = r
    pos = merge_update(col_ptr, col_row, col_val, lam, r, acc, coords, deltas, count, saved_lam, saved_r)
    if full_refresh:
        residuals_into(row_ptr, row_col, row_val, lam, r)
        lse_refresh(r, acc, cnt)
    else:
        cnt[1] += 1
        maybe_refresh(r, acc, cnt)
    if safeguard and logsum(acc) > f_old:
        if full_refresh:
            r[:] = saved_full
            for q in range(count - 1, -1, -1):
                lam[coords[q]] = saved_lam[q]
        else:
            undo_update(col_ptr, col_row, coords, deltas, count, lam, r, saved_lam, saved_r, pos)
        acc[0], acc[1], acc[2] = a0, a1, a2
        cnt[1] = since
        cnt[2] += 1
        return False
    return True


def _pcdm_chunk(col_ptr, col_row, col_val, row_ptr, row_col, row_val, L, beta,
                kind, domain, tau, seed, allow_collisions, lam, r, acc, cnt,
                nsteps, refresh_every, max_col_nnz):
    m = r.shape[0]
    perm = np.arange(domain.shape[0])
    coords = np.empty(tau, dtype=np.int64)
    deltas = np.empty(tau)
    saved_lam = np.empty(tau)
    saved_r = np.empty(tau * max_col_nnz)
    saved_full = np.empty(m)
    for _ in range(nsteps):
        t = cnt[0]
        s = _s.draw(kind, domain, perm, tau, seed, 0, t, allow_collisions, coords)
        shift = acc[0]
        sumexp = acc[1]
        for q in prange(s):
            i = coords[q]
            g = col_grad(col_ptr, col_row, col_val, r, shift, sumexp, i)
            deltas[q] = -g / (beta * L[i])
        full = refresh_every > 0 and (t + 1) % refresh_every == 0
        pcdm_try(col_ptr, col_row, col_val, row_ptr, row_col, row_val, lam, r, acc, cnt,
                 coords, deltas, s, full, True, saved_lam, saved_r, saved_full)
        cnt[0] += 1


def _fully_chunk(col_ptr, col_row, col_val, row_ptr, row_col, row_val, L, omega,
                 domain, lam, r, acc, cnt, nsteps, refresh_every, grad):
    m = r.shape[0]
    n = lam.shape[0]
    d = domain.shape[0]
    delta = np.zeros(n)
    lam_old = np.empty(n)
    r_old = np.empty(m)
    for _ in range(nsteps):
        t = cnt[0]
        shift = acc[0]
        sumexp = acc[1]
        f_old = shift + math.log(sumexp)
        for q in prange(d):
            i = domain[q]
            g = col_grad(col_ptr, col_row, col_val, r, shift, sumexp, i)
            grad[i] = g
            delta[i] = -g / (omega * L[i])
        lam_old[:] = lam
        r_old[:] = r
        for q in range(d):
            i = domain[q]
            lam[i] += delta[i]
        full = refresh_every > 0 and (t + 1) % refresh_every == 0
        for j in prange(m):
            s = 0.0
            if full:
                for k in range(row_ptr[j], row_ptr[j + 1]):
                    s += row_val[k] * lam[row_col[k]]
                r[j] = s
            else:
                for k in range(row_ptr[j], row_ptr[j + 1]):
                    s += row_val[k] * delta[row_col[k]]
                r[j] += s
        lse_refresh(r, acc, cnt)
        if logsum(acc) > f_old:
            lam[:] = lam_old
            r[:] = r_old
            acc[0] = shift
            acc[1] = sumexp
            acc[2] = sumexp
            cnt[2] += 1
        cnt[0] += 1


def _greedy_chunk(col_ptr, col_row, col_val, row_ptr, row_col, row_val, L,
                  domain, lam, r, acc, cnt, nsteps, refresh_every, max_col_nnz, grad):
    m = r.shape[0]
    d = domain.shape[0]
    coords = np.empty(1, dtype=np.int64)
    deltas = np.empty(1)
    saved_lam = np.empty(1)
    saved_r = np.empty(max_col_nnz)
    saved_full = np.empty(m)
    for _ in range(nsteps):
        t = cnt[0]
        shift = acc[0]
        sumexp = acc[1]
        for q in prange(d):
            i = domain[q]
            grad[i] = col_grad(col_ptr, col_row, col_val, r, shift, sumexp, i)
        best = domain[0]
        bestv = abs(grad[best])
        for q in range(1, d):
            i = domain[q]
            v = abs(grad[i])
            if v > bestv:
                best = i
                bestv = v
        coords[0] = best
        deltas[0] = -grad[best] / L[best]
        full = refresh_every > 0 and (t + 1) % refresh_every == 0
        pcdm_try(col_ptr, col_row, col_val, row_ptr, row_col, row_val, lam, r, acc, cnt,
                 coords, deltas, 1, full, True, saved_lam, saved_r, saved_full)
        cnt[0] += 1


def _accel_chunk(col_ptr, col_row, col_val, row_ptr, row_col, row_val, L, omega,
                 domain, lam, r, z, rz, theta, acc, cnt, nsteps, refresh_every, grad):
    """Accelerated full-gradient method in the metric diag(omega * L).

    y = x + theta (z - x);  z+ = z - grad F(y) / (theta omega L);
    x+ = (1 - theta) x + theta z+;  theta+ = (sqrt(theta^4 + 4 theta^2) - theta^2) / 2.
    An increase of F rejects x+ and restarts with z = x, theta = 1.
    """
    m = r.shape[0]
    n = lam.shape[0]
    d = domain.shape[0]
    ry = np.empty(m)
    xn = np.empty(n)
    rxn = np.empty(m)
    dz = np.zeros(n)
    acc_y = np.empty(3)
    acc_n = np.empty(3)
    cnt_tmp = np.zeros(3, dtype=np.int64)
    for _ in range(nsteps):
        t = cnt[0]
        th = theta[0]
        f_old = logsum(acc)
        for j in prange(m):
            ry[j] = (1.0 - th) * r[j] + th * rz[j]
        lse_refresh(ry, acc_y, cnt_tmp)
        for q in prange(d):
            i = domain[q]
            g = col_grad(col_ptr, col_row, col_val, ry, acc_y[0], acc_y[1], i)
            grad[i] = g
            dz[i] = -g / (th * omega * L[i])
        for q in range(d):
            i = domain[q]
            z[i] += dz[i]
        full = refresh_every > 0 and (t + 1) % refresh_every == 0
        for q in range(n):
            xn[q] = (1.0 - th) * lam[q] + th * z[q]
        for j in prange(m):
            s = 0.0
            if full:
                for k in range(row_ptr[j], row_ptr[j + 1]):
                    s += row_val[k] * z[row_col[k]]
                rz[j] = s
            else:
                for k in range(row_ptr[j], row_ptr[j + 1]):
                    s += row_val[k] * dz[row_col[k]]
                rz[j] += s
        if full:
            residuals_into(row_ptr, row_col, row_val, xn, rxn)
        else:
            for j in range(m):
                rxn[j] = (1.0 - th) * r[j] + th * rz[j]
        lse_refresh(rxn, acc_n, cnt_tmp)
        if logsum(acc_n) > f_old:
            z[:] = lam
            rz[:] = r
            theta[0] = 1.0
            cnt[2] += 1
        else:
            lam[:] = xn
            r[:] = rxn
            acc[:] = acc_n
            th2 = th * th
            theta[0] = (math.sqrt(th2 * th2 + 4.0 * th2) - th2) / 2.0
        cnt[0] += 1


@njit(nogil=True, cache=True)
def async_worker(col_ptr, col_row, col_val, L, beta, domain, seed, stream, start, nsteps,
                 lam, r, shift, base_sumexp, dsum, wid, owner, allow_collisions, stats):
    """One asynchronous PCDM worker: ``nsteps`` single-coordinate updates.

    Reads of ``r`` may be stale; residual additions are atomic. ``dsum[wid]``
    accumulates this worker's change to sum_j exp(r_j - shift) so the other
    workers see a near-current normalizer. With ``allow_collisions`` false a
    coordinate is owned by at most one worker at a time.
    """
    d = domain.shape[0]
    nw = dsum.shape[0]
    for t in range(nsteps):
        key = _s.draw_key(seed, stream, start + t)
        i = domain[_s.rand_below(key, 0, d)]
        if not allow_collisions:
            tries = 1
            while not compare_and_swap(owner, i, 0, 1):
                if tries >= 8:
                    i = -1
                    break
                i = domain[_s.rand_below(key, tries, d)]
                tries += 1
            if i < 0:
                stats[wid, 1] += 1
                continue
        sumexp = base_sumexp
        for w in range(nw):
            sumexp += dsum[w]
        g = 0.0
        for k in range(col_ptr[i], col_ptr[i + 1]):
            g += math.exp(min(r[col_row[k]] - shift, _EXP_CAP)) * col_val[k]
        delta = -(g / sumexp) / (beta * L[i])
        if delta != 0.0:
            if allow_collisions:
                atomic_add(lam, i, delta)
            else:
                lam[i] += delta
            local = 0.0
            for k in range(col_ptr[i], col_ptr[i + 1]):
                step = col_val[k] * delta
                old = atomic_add(r, col_row[k], step)
                local += math.exp(min(old + step - shift, _EXP_CAP)) - math.exp(min(old - shift, _EXP_CAP))
            dsum[wid] += local
        if not allow_collisions:
            atomic_store(owner, i, 0)
        stats[wid, 0] += 1


pcdm_chunk = njit(**_opts)(_pcdm_chunk)
pcdm_chunk_par = njit(parallel=True, **_opts)(_pcdm_chunk)
fully_chunk = njit(**_opts)(_fully_chunk)
fully_chunk_par = njit(parallel=True, **_opts)(_fully_chunk)
greedy_chunk = njit(**_opts)(_greedy_chunk)
greedy_chunk_par = njit(parallel=True, **_opts)(_greedy_chunk)
accel_chunk = njit(**_opts)(_accel_chunk)
accel_chunk_par = njit(parallel=True, **_opts)(_accel_chunk)
