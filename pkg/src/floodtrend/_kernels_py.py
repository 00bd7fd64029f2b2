"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` extension; used
when the extension is not built or ``FLOODTREND_PURE=1`` is set.
"""
import numpy as np

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_NOT_CONVERGED = 2


def poisson_fit_batch(Y, x, tol=1e-10, maxiter=100):
    """Fit ``log E[y] = a + b*x`` to every row of `Y` by Newton iteration.

    Each row is divided by its mean and `x` is centred before iterating, so
    the convergence test (mean score below `tol`) does not depend on the
    units of the response. Rows with fewer than two nonzero entries are
    flagged degenerate.

    Returns
    -------
    a, b : ndarray
        Intercept (on the uncentred `x`) and slope per row.
    iters : ndarray of int
    status : ndarray of int
        0 converged, 1 degenerate, 2 not converged.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    R, T = Y.shape
    a = np.full(R, np.nan)
    b = np.full(R, np.nan)
    iters = np.zeros(R, dtype=np.int64)
    status = np.full(R, STATUS_NOT_CONVERGED, dtype=np.int64)

    nonzero = (Y > 0).sum(axis=1)
    scale = Y.mean(axis=1)
    ok = (nonzero >= 2) & (scale > 0)
    status[~ok] = STATUS_DEGENERATE
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return a, b, iters, status

    xbar = x.mean()
    xc = x - xbar
    y = Y[idx] / scale[idx, None]
    alpha = np.zeros(idx.size)
    beta = np.zeros(idx.size)
    active = np.ones(idx.size, dtype=bool)
    n_it = np.zeros(idx.size, dtype=np.int64)
    done = np.zeros(idx.size, dtype=bool)

    def loglik(al, be, yy):
        eta = al[:, None] + be[:, None] * xc
        return (yy * eta - np.exp(eta)).sum(axis=1)

    for it in range(maxiter + 1):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        yy = y[act]
        al, be = alpha[act], beta[act]
        mu = np.exp(al[:, None] + be[:, None] * xc)
        r = yy - mu
        g0 = r.sum(axis=1)
        g1 = (r * xc).sum(axis=1)
        conv = np.hypot(g0, g1) / T < tol
        done[act[conv]] = True
        n_it[act] = it
        active[act[conv]] = False
        if it == maxiter:
            break
        act = act[~conv]
        if act.size == 0:
            break
        mu = mu[~conv]
        yy = yy[~conv]
        g0, g1 = g0[~conv], g1[~conv]
        h00 = mu.sum(axis=1)
        h01 = (mu * xc).sum(axis=1)
        h11 = (mu * xc * xc).sum(axis=1)
        det = h00 * h11 - h01 * h01
        d0 = (h11 * g0 - h01 * g1) / det
        d1 = (h00 * g1 - h01 * g0) / det
        al, be = alpha[act], beta[act]
        ll0 = loglik(al, be, yy)
        step = np.ones(act.size)
        for _ in range(30):
            ll1 = loglik(al + step * d0, be + step * d1, yy)
            worse = ll1 < ll0 - 1e-12 * np.abs(ll0)
            if not worse.any():
                break
            step[worse] *= 0.5
        alpha[act] = al + step * d0
        beta[act] = be + step * d1

    status[idx[done]] = STATUS_OK
    iters[idx] = n_it
    b[idx] = beta
    a[idx] = alpha + np.log(scale[idx]) - beta * xbar
    return a, b, iters, status


def scatter_annual(year_idx, weights, n_years):
    """Sum `weights` into ``n_years`` bins for each row of `year_idx`.

    `weights` is either one row shared by all replicates or a full
    ``(R, N)`` array. Indices outside ``[0, n_years)`` are dropped.
    """
    year_idx = np.atleast_2d(np.asarray(year_idx, dtype=np.int64))
    R, N = year_idx.shape
    w = np.asarray(weights, dtype=np.float64)
    w = np.broadcast_to(w, (R, N))
    valid = (year_idx >= 0) & (year_idx < n_years)
    flat = (np.arange(R)[:, None] * n_years + year_idx)[valid]
    out = np.bincount(flat, weights=w[valid], minlength=R * n_years)
    return out.reshape(R, n_years)


def empirical_copula(u, v):
    """Empirical copula evaluated at the sample points themselves.

    ``C_n(u_i, v_i) = #{j : u_j <= u_i and v_j <= v_i} / n``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = u.size
    out = np.empty(n)
    chunk = max(1, 4_000_000 // max(n, 1))
    for s in range(0, n, chunk):
        uu = u[s:s + chunk, None]
        vv = v[s:s + chunk, None]
        out[s:s + chunk] = ((u[None, :] <= uu) & (v[None, :] <= vv)).sum(axis=1)
    return out / n


def decluster_peaks(idx, values, max_gap):
    """Group sorted exceedance positions into clusters, return peak positions.

    Consecutive positions whose difference is at most `max_gap` fall in the
    same cluster. The peak is the position of the largest value (first one
    on ties).
    """
    idx = np.asarray(idx, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if idx.size == 0:
        return idx.copy()
    new = np.empty(idx.size, dtype=bool)
    new[0] = True
    new[1:] = np.diff(idx) > max_gap
    starts = np.flatnonzero(new)
    ends = np.append(starts[1:], idx.size)
    peaks = np.empty(starts.size, dtype=np.int64)
    for k, (s, e) in enumerate(zip(starts, ends)):
        peaks[k] = idx[s + int(np.argmax(values[s:e]))]
    return peaks
