"""numba kernels for the O(M^2) sweeps and per-row envelope fits.

Norm codes: 0 = l1, 1 = l2, 2 = linf. Log tables are indexed
``out[start, stop]`` and hold NaN below the diagonal.
"""

import math

import numpy as np
from numba import config, njit, prange

# prefer OpenMP: an outdated system TBB otherwise triggers a warning on first launch
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

POWER_ITERS = 100
POWER_RTOL = 1e-10


@njit(cache=True)
def vec_norm(y, code):
    d = y.shape[0]
    acc = 0.0
    if code == 0:
        for i in range(d):
            acc += abs(y[i])
    elif code == 1:
        for i in range(d):
            acc += y[i] * y[i]
        acc = math.sqrt(acc)
    else:
        for i in range(d):
            a = abs(y[i])
            if a > acc:
                acc = a
    return acc


@njit(cache=True)
def _op_norm_buf(P, code, G, v, w):
    """Induced norm of ``P`` using caller-owned scratch ``G, v, w``."""
    d = P.shape[0]
    if code == 0:
        best = 0.0
        for j in range(d):
            s = 0.0
            for i in range(d):
                s += abs(P[i, j])
            if s > best:
                best = s
        return best
    if code == 2:
        best = 0.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += abs(P[i, j])
            if s > best:
                best = s
        return best
    # l2: power iteration on P^T P from the heaviest column
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += P[k, i] * P[k, j]
            G[i, j] = acc
    j0 = 0
    best = -1.0
    for j in range(d):
        if G[j, j] > best:
            best = G[j, j]
            j0 = j
    if best <= 0.0:
        return 0.0
    for i in range(d):
        v[i] = 0.0
    v[j0] = 1.0
    lam = 0.0
    for _ in range(POWER_ITERS):
        nw = 0.0
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += G[i, j] * v[j]
            w[i] = acc
            nw += acc * acc
        nw = math.sqrt(nw)
        if nw == 0.0:
            return 0.0
        for i in range(d):
            v[i] = w[i] / nw
        if abs(nw - lam) <= POWER_RTOL * nw:
            lam = nw
            break
        lam = nw
    return math.sqrt(lam)


@njit(cache=True)
def op_norm(P, code):
    d = P.shape[0]
    return _op_norm_buf(P, code, np.empty((d, d)), np.empty(d), np.empty(d))


@njit(cache=True)
def _max_abs(P):
    s = 0.0
    for a in P.ravel():
        b = abs(a)
        if b > s:
            s = b
    return s


@njit(cache=True)
def _fill_matrix_row(mats, n, code, row):
    M = mats.shape[0] - 1
    d = mats.shape[1]
    P = np.eye(d)
    Q = np.empty((d, d))
    G = np.empty((d, d))
    v = np.empty(d)
    w = np.empty(d)
    logscale = 0.0
    row[n] = 0.0
    for m in range(n + 1, M + 1):
        if logscale == -np.inf:
            row[m] = -np.inf
            continue
        A = mats[m]
        s = 0.0
        for i in range(d):
            for j in range(d):
                acc = 0.0
                for k in range(d):
                    acc += A[i, k] * P[k, j]
                Q[i, j] = acc
                if abs(acc) > s:
                    s = abs(acc)
        if s == 0.0:
            logscale = -np.inf
            row[m] = -np.inf
            continue
        for i in range(d):
            for j in range(d):
                P[i, j] = Q[i, j] / s
        logscale += math.log(s)
        nrm = _op_norm_buf(P, code, G, v, w)
        row[m] = logscale + (math.log(nrm) if nrm > 0.0 else -np.inf)


@njit(cache=True, parallel=True)
def sweep_matrix_log_norms(mats, code):
    M = mats.shape[0] - 1
    out = np.full((M + 1, M + 1), np.nan)
    for n in prange(M + 1):
        _fill_matrix_row(mats, n, code, out[n])
    return out


@njit(cache=True)
def vector_row(mats, x, start, stop, code):
    """log||A_m^start x|| for m = start..stop (rescaled chain)."""
    out = np.empty(stop - start + 1)
    y = x.copy()
    s = _max_abs(y)
    if s == 0.0:
        out[:] = -np.inf
        return out
    y = y / s
    logscale = math.log(s)
    out[0] = logscale + math.log(vec_norm(y, code))
    d = y.shape[0]
    z = np.empty(d)
    for m in range(start + 1, stop + 1):
        if logscale == -np.inf:
            out[m - start] = -np.inf
            continue
        A = mats[m]
        s = 0.0
        for i in range(d):
            acc = 0.0
            for k in range(d):
                acc += A[i, k] * y[k]
            z[i] = acc
            if abs(acc) > s:
                s = abs(acc)
        if s == 0.0:
            logscale = -np.inf
            out[m - start] = -np.inf
            continue
        for i in range(d):
            y[i] = z[i] / s
        logscale += math.log(s)
        out[m - start] = logscale + math.log(vec_norm(y, code))
    return out


@njit(cache=True, parallel=True)
def sweep_vector_log_norms(mats, x, code):
    M = mats.shape[0] - 1
    out = np.full((M + 1, M + 1), np.nan)
    for k in prange(M + 1):
        out[k, k:] = vector_row(mats, x, k, M, code)
    return out


@njit(cache=True)
def dual_column(mats, xstar, m, n_low, code):
    """log||(A_m^k)^T x*|| for k = n_low..m, in the dual norm ``code``."""
    out = np.empty(m - n_low + 1)
    y = xstar.copy()
    s = _max_abs(y)
    if s == 0.0:
        out[:] = -np.inf
        return out
    y = y / s
    logscale = math.log(s)
    out[m - n_low] = logscale + math.log(vec_norm(y, code))
    for k in range(m - 1, n_low - 1, -1):
        if logscale == -np.inf:
            out[k - n_low] = -np.inf
            continue
        y = mats[k + 1].T @ y
        s = _max_abs(y)
        if s == 0.0:
            logscale = -np.inf
            out[k - n_low] = -np.inf
            continue
        y = y / s
        logscale += math.log(s)
        out[k - n_low] = logscale + math.log(vec_norm(y, code))
    return out


@njit(cache=True)
def envelope_slope(x, y):
    """Slope and intercept of the lowest line lying above every point.

    "Lowest" means least total vertical gap, i.e. the upper-hull edge over
    the mean abscissa; at an exact vertex the right-hand edge is taken.
    ``x`` must be strictly increasing. Non-finite ``y`` are skipped.
    """
    k = x.shape[0]
    hx = np.empty(k)
    hy = np.empty(k)
    h = 0
    xsum = 0.0
    cnt = 0
    for i in range(k):
        if not np.isfinite(y[i]):
            continue
        xsum += x[i]
        cnt += 1
        while h >= 2:
            # drop the middle point unless it lies strictly above the chord
            cross = (hx[h - 1] - hx[h - 2]) * (y[i] - hy[h - 2]) - (hy[h - 1] - hy[h - 2]) * (x[i] - hx[h - 2])
            if cross >= 0.0:
                h -= 1
            else:
                break
        hx[h] = x[i]
        hy[h] = y[i]
        h += 1
    if cnt < 2:
        return np.nan, np.nan
    xbar = xsum / cnt
    j = 0
    while j < h - 2 and hx[j + 1] <= xbar:
        j += 1
    slope = (hy[j + 1] - hy[j]) / (hx[j + 1] - hx[j])
    return slope, hy[j] - slope * hx[j]


@njit(cache=True, parallel=True)
def row_envelope_slopes(block, n0, gap_floor):
    """envelope_slope of each row against the gap.

    ``block[i]`` is the full log-norm row of start index ``n0 + i``.
    """
    rows = block.shape[0]
    M = block.shape[1] - 1
    slopes = np.full(rows, np.nan)
    for i in prange(rows):
        n = n0 + i
        lo = n + gap_floor
        if lo > M:
            continue
        g = np.arange(lo - n, M - n + 1).astype(np.float64)
        s, _ = envelope_slope(g, block[i, lo:])
        slopes[i] = s
    return slopes
