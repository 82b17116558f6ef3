"""Vectorised numpy twin of the compiled simplex kernels.

Every floating-point operation mirrors ``_simplex_numba`` element for element,
so both backends take the same pivot sequence.
"""
import numpy as np


def pivot(T, d, r, j):
    piv = T[r, j]
    nz = np.flatnonzero(T[r])
    T[r, nz] = T[r, nz] / piv
    col = T[:, j].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size:
        T[np.ix_(rows, nz)] -= col[rows, None] * T[r, nz][None, :]
    f = d[j]
    if f != 0.0:
        d[nz] -= f * T[r, nz]


def _ratios(T, beta, ub, basis, j, dirn, tol_piv):
    a = dirn * T[:, j]
    ubb = ub[basis]
    t = np.full(a.shape, np.inf)
    down = a > tol_piv
    up = (a < -tol_piv) & (ubb < np.inf)
    t[down] = beta[down] / a[down]
    t[up] = (ubb[up] - beta[up]) / (-a[up])
    eligible = down | up
    t[eligible & (t < 0.0)] = 0.0
    return t, eligible


def iterate(T, beta, d, ub, basis, pos, at_upper, n_enter, max_iter, tol_d, tol_piv, eps):
    it = 0
    while it < max_iter:
        dd = d[:n_enter]
        up = at_upper[:n_enter]
        cand = (pos[:n_enter] < 0) & ((up & (dd > tol_d)) | (~up & (dd < -tol_d) & (ub[:n_enter] > 0.0)))
        hits = np.flatnonzero(cand)
        if hits.size == 0:
            return 0, it
        j = int(hits[0])
        dirn = -1.0 if at_upper[j] else 1.0

        t, eligible = _ratios(T, beta, ub, basis, j, dirn, tol_piv)
        best = t[eligible].min() if eligible.any() else np.inf
        theta = ub[j]
        if theta == np.inf and best == np.inf:
            return 1, it

        if theta <= best:
            beta -= dirn * theta * T[:, j]
            at_upper[j] = not at_upper[j]
            it += 1
            continue

        ties = np.flatnonzero(eligible & (t <= best + eps))
        r = int(ties[np.argmin(basis[ties])])

        enter_val = (ub[j] if at_upper[j] else 0.0) + dirn * best
        to_upper = dirn * T[r, j] < 0.0
        beta -= dirn * best * T[:, j]
        leave = basis[r]
        at_upper[leave] = to_upper
        pos[leave] = -1
        at_upper[j] = False
        beta[r] = enter_val
        basis[r] = j
        pos[j] = r
        pivot(T, d, r, j)
        it += 1
    return 2, it
