# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_kernels_py`` function for function."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs

cnp.import_array()

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_NOT_CONVERGED = 2


cdef double _loglik(const double[:] y, const double[:] xc, double al, double be) nogil:
    cdef Py_ssize_t t
    cdef double s = 0.0, eta
    for t in range(y.shape[0]):
        eta = al + be * xc[t]
        s += y[t] * eta - exp(eta)
    return s


cdef int _fit_row(const double[:] yraw, const double[:] xc, double[::1] y, double tol,
                  int maxiter, double* alpha_out, double* beta_out, int* iters_out) nogil:
    cdef Py_ssize_t T = yraw.shape[0], t
    cdef double scale = 0.0, mu, eta, r, g0, g1, h00, h01, h11, det, d0, d1
    cdef double al = 0.0, be = 0.0, ll0, ll1, step
    cdef int nonzero = 0, it, k
    for t in range(T):
        scale += yraw[t]
        if yraw[t] > 0:
            nonzero += 1
    scale /= T
    if nonzero < 2 or scale <= 0:
        return 1
    for t in range(T):
        y[t] = yraw[t] / scale
    for it in range(maxiter + 1):
        g0 = 0.0
        g1 = 0.0
        h00 = 0.0
        h01 = 0.0
        h11 = 0.0
        ll0 = 0.0
        for t in range(T):
            eta = al + be * xc[t]
            mu = exp(eta)
            ll0 += y[t] * eta - mu
            r = y[t] - mu
            g0 += r
            g1 += r * xc[t]
            h00 += mu
            h01 += mu * xc[t]
            h11 += mu * xc[t] * xc[t]
        iters_out[0] = it
        if sqrt(g0 * g0 + g1 * g1) / T < tol:
            alpha_out[0] = al + log(scale)
            beta_out[0] = be
            return 0
        if it == maxiter:
            break
        det = h00 * h11 - h01 * h01
        d0 = (h11 * g0 - h01 * g1) / det
        d1 = (h00 * g1 - h01 * g0) / det
        step = 1.0
        for k in range(30):
            ll1 = _loglik(y, xc, al + step * d0, be + step * d1)
            if ll1 >= ll0 - 1e-12 * fabs(ll0):
                break
            step *= 0.5
        al += step * d0
        be += step * d1
    alpha_out[0] = al + log(scale)
    beta_out[0] = be
    return 2


def poisson_fit_batch(Y, x, double tol=1e-10, int maxiter=100):
    cdef const double[:, :] Yv = np.atleast_2d(np.ascontiguousarray(Y, dtype=np.float64))
    xa = np.asarray(x, dtype=np.float64)
    cdef double xbar = xa.mean()
    cdef double[:] xc = xa - xbar
    cdef Py_ssize_t R = Yv.shape[0], i
    a = np.full(R, np.nan)
    b = np.full(R, np.nan)
    iters = np.zeros(R, dtype=np.int64)
    status = np.zeros(R, dtype=np.int64)
    cdef double[:] av = a, bv = b
    cdef long long[:] itv = iters, stv = status
    cdef double al, be
    cdef int nit, st
    cdef double[::1] work = np.empty(Yv.shape[1], dtype=np.float64)
    with nogil:
        for i in range(R):
            al = 0.0
            be = 0.0
            nit = 0
            st = _fit_row(Yv[i], xc, work, tol, maxiter, &al, &be, &nit)
            stv[i] = st
            itv[i] = nit
            if st != 1:
                bv[i] = be
                av[i] = al - be * xbar
    return a, b, iters, status


def scatter_annual(year_idx, weights, Py_ssize_t n_years):
    cdef const long long[:, :] yi = np.atleast_2d(np.ascontiguousarray(year_idx, dtype=np.int64))
    cdef Py_ssize_t R = yi.shape[0], N = yi.shape[1], r, j
    w = np.asarray(weights, dtype=np.float64)
    cdef const double[:, :] wv = np.ascontiguousarray(np.broadcast_to(w, (R, N)))
    out = np.zeros((R, n_years), dtype=np.float64)
    cdef double[:, :] ov = out
    cdef long long k
    with nogil:
        for r in range(R):
            for j in range(N):
                k = yi[r, j]
                if 0 <= k < n_years:
                    ov[r, k] += wv[r, j]
    return out


def empirical_copula(u, v):
    """Counts ``#{j : u_j <= u_i, v_j <= v_i} / n`` with a Fenwick tree, O(n log n)."""
    ua = np.ascontiguousarray(u, dtype=np.float64)
    va = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = ua.shape[0], i, k, g, pos
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    vs = np.sort(va)
    cdef const long long[:] order = np.lexsort((va, ua)).astype(np.int64)
    # inserted at its first tied position, queried up to its last one
    cdef const long long[:] r_ins = (np.searchsorted(vs, va, side="left") + 1).astype(np.int64)
    cdef const long long[:] r_q = np.searchsorted(vs, va, side="right").astype(np.int64)
    cdef const double[:] uv = ua
    cdef double[:] ov = out
    cdef long long[::1] tree = np.zeros(n + 1, dtype=np.int64)
    cdef long long c
    with nogil:
        i = 0
        while i < n:
            g = i
            while g < n and uv[order[g]] == uv[order[i]]:
                pos = r_ins[order[g]]
                while pos <= n:
                    tree[pos] += 1
                    pos += pos & (-pos)
                g += 1
            for k in range(i, g):
                c = 0
                pos = r_q[order[k]]
                while pos > 0:
                    c += tree[pos]
                    pos -= pos & (-pos)
                ov[order[k]] = <double>c / n
            i = g
    return out


def decluster_peaks(idx, values, long long max_gap):
    cdef const long long[:] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef const double[:] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = iv.shape[0], k, m = 0
    peaks = np.empty(n, dtype=np.int64)
    cdef long long[:] pv = peaks
    if n == 0:
        return peaks
    cdef long long best_pos = iv[0]
    cdef double best_val = vv[0]
    for k in range(1, n):
        if iv[k] - iv[k - 1] > max_gap:
            pv[m] = best_pos
            m += 1
            best_pos = iv[k]
            best_val = vv[k]
        elif vv[k] > best_val:
            best_pos = iv[k]
            best_val = vv[k]
    pv[m] = best_pos
    m += 1
    return peaks[:m]
