"""Pure-numpy versions of the kernels in ``_kernels_numba``.

Sweeps are vectorized across start indices (one batched matmul per gap)
instead of looping per start. Signatures and outputs match the numba path
to rounding.
"""

import math

import numpy as np

POWER_ITERS = 100
POWER_RTOL = 1e-10


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def vec_norm(y, code):
    """Norm along the last axis."""
    if code == 0:
        return np.abs(y).sum(axis=-1)
    if code == 1:
        return np.sqrt((y * y).sum(axis=-1))
    return np.abs(y).max(axis=-1)


def op_norm(P, code):
    """Induced norm of a stack of square matrices ``P[..., d, d]``."""
    P = np.asarray(P, dtype=float)
    if code == 0:
        return np.abs(P).sum(axis=-2).max(axis=-1)
    if code == 2:
        return np.abs(P).sum(axis=-1).max(axis=-1)
    G = np.swapaxes(P, -1, -2) @ P
    diag = np.diagonal(G, axis1=-2, axis2=-1)
    j0 = diag.argmax(axis=-1)
    v = np.zeros(G.shape[:-1])
    np.put_along_axis(v, j0[..., None], 1.0, axis=-1)
    lam = np.zeros(G.shape[:-2])
    done = diag.max(axis=-1) <= 0.0
    for _ in range(POWER_ITERS):
        w = (G @ v[..., None])[..., 0]
        nw = np.sqrt((w * w).sum(axis=-1))
        live = ~done & (nw > 0.0)
        safe = np.where(nw > 0.0, nw, 1.0)
        v = np.where(live[..., None], w / safe[..., None], v)
        conv = live & (np.abs(nw - lam) <= POWER_RTOL * nw)
        lam = np.where(live, nw, lam)
        done = done | conv | (nw == 0.0)
        if done.all():
            break
    return np.sqrt(lam)


def _max_abs(P):
    return np.abs(P).reshape(P.shape[0], -1).max(axis=1)


def _sweep(mats, state, code, norm):
    """Shared batched sweep; ``state`` holds one start per leading index."""
    M = mats.shape[0] - 1
    out = np.full((M + 1, M + 1), np.nan)
    logscale = np.zeros(M + 1)
    s0 = _max_abs(state)
    with np.errstate(divide="ignore", invalid="ignore"):
        state = state / np.where(s0 > 0, s0, 1.0)[(...,) + (None,) * (state.ndim - 1)]
    logscale += _log(s0)
    idx = np.arange(M + 1)
    out[idx, idx] = logscale + _log(norm(state, code))
    for t in range(1, M + 1):
        k = M - t + 1  # starts 0..M-t still inside the horizon
        if state.ndim == 3:
            state = mats[t:] @ state[:k]
        else:
            state = (mats[t:] @ state[:k, :, None])[..., 0]
        logscale = logscale[:k]
        s = _max_abs(state)
        state = state / np.where(s > 0, s, 1.0)[(...,) + (None,) * (state.ndim - 1)]
        logscale = logscale + _log(s)
        out[idx[:k], idx[:k] + t] = logscale + _log(norm(state, code))
    return out


def sweep_matrix_log_norms(mats, code):
    M = mats.shape[0] - 1
    d = mats.shape[1]
    state = np.broadcast_to(np.eye(d), (M + 1, d, d)).copy()
    return _sweep(mats, state, code, op_norm)


def sweep_vector_log_norms(mats, x, code):
    M = mats.shape[0] - 1
    state = np.broadcast_to(np.asarray(x, dtype=float), (M + 1, x.shape[0])).copy()
    return _sweep(mats, state, code, vec_norm)


def vector_row(mats, x, start, stop, code):
    out = np.empty(stop - start + 1)
    y = np.asarray(x, dtype=float)
    s = np.abs(y).max()
    if s == 0.0:
        out[:] = -np.inf
        return out
    y = y / s
    logscale = math.log(s)
    out[0] = logscale + math.log(vec_norm(y, code))
    for m in range(start + 1, stop + 1):
        if logscale == -math.inf:
            out[m - start] = -math.inf
            continue
        y = mats[m] @ y
        s = np.abs(y).max()
        if s == 0.0:
            logscale = -math.inf
            out[m - start] = -math.inf
            continue
        y = y / s
        logscale += math.log(s)
        out[m - start] = logscale + math.log(vec_norm(y, code))
    return out


def dual_column(mats, xstar, m, n_low, code):
    out = np.empty(m - n_low + 1)
    y = np.asarray(xstar, dtype=float)
    s = np.abs(y).max()
    if s == 0.0:
        out[:] = -np.inf
        return out
    y = y / s
    logscale = math.log(s)
    out[m - n_low] = logscale + math.log(vec_norm(y, code))
    for k in range(m - 1, n_low - 1, -1):
        if logscale == -math.inf:
            out[k - n_low] = -math.inf
            continue
        y = mats[k + 1].T @ y
        s = np.abs(y).max()
        if s == 0.0:
            logscale = -math.inf
            out[k - n_low] = -math.inf
            continue
        y = y / s
        logscale += math.log(s)
        out[k - n_low] = logscale + math.log(vec_norm(y, code))
    return out


def _bisect_envelope(X, Y):
    """Row-wise upper-envelope fit on ``X, Y`` of shape (rows, k).

    The value of the upper hull over the mean abscissa is
    ``min_s max_i [y_i + s (xbar - x_i)]``, a convex function of the slope
    ``s``; bisection on the sign of its subgradient brackets the optimal
    slope between the two hull vertices straddling ``xbar``, and the
    returned slope is the exact chord between them. Masked points carry
    ``y = -inf``.
    """
    fin = np.isfinite(Y)
    cnt = fin.sum(axis=1)
    rows = X.shape[0]
    slope = np.full(rows, np.nan)
    icpt = np.full(rows, np.nan)
    ok = cnt >= 2
    if not ok.any():
        return slope, icpt
    X, Y, fin, cnt = X[ok], Y[ok], fin[ok], cnt[ok]
    Yz = np.where(fin, Y, 0.0)
    xbar = np.where(fin, X, 0.0).sum(axis=1) / cnt
    min_dx = np.diff(X, axis=1).min(axis=1)
    span = (Yz.max(axis=1) - np.where(fin, Y, np.inf).min(axis=1) + 1.0) / min_dx
    lo, hi = -span, span.copy()
    Ym = np.where(fin, Y, -np.inf)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        arg = np.argmax(Ym - mid[:, None] * X, axis=1)
        right = np.take_along_axis(X, arg[:, None], axis=1)[:, 0] > xbar
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    r = np.arange(X.shape[0])
    i = np.argmax(Ym - hi[:, None] * X, axis=1)
    j = np.argmax(Ym - lo[:, None] * X, axis=1)
    s = (Y[r, j] - Y[r, i]) / (X[r, j] - X[r, i])
    slope[ok] = s
    icpt[ok] = Y[r, i] - s * X[r, i]
    return slope, icpt


def envelope_slope(x, y):
    x = np.asarray(x, dtype=float)[None, :]
    y = np.asarray(y, dtype=float)[None, :]
    s, b = _bisect_envelope(x, y)
    return float(s[0]), float(b[0])


def row_envelope_slopes(block, n0, gap_floor):
    rows, width = block.shape
    n = n0 + np.arange(rows)
    X = np.arange(width, dtype=float)[None, :] - n[:, None]
    Y = np.where(X >= gap_floor, block, -np.inf)
    return _bisect_envelope(X, Y)[0]
