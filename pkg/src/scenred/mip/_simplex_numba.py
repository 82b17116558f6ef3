"""Bounded-variable tableau simplex kernels, compiled with numba."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def pivot(T, d, r, j):
    m, n = T.shape
    piv = T[r, j]
    nz = np.empty(n, dtype=np.int64)
    cnt = 0
    for k in range(n):
        v = T[r, k]
        if v != 0.0:
            T[r, k] = v / piv
            nz[cnt] = k
            cnt += 1
    for i in range(m):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for q in range(cnt):
                k = nz[q]
                T[i, k] -= f * T[r, k]
    f = d[j]
    if f != 0.0:
        for q in range(cnt):
            k = nz[q]
            d[k] -= f * T[r, k]


@njit(cache=True, nogil=True)
def iterate(T, beta, d, ub, basis, pos, at_upper, n_enter, max_iter, tol_d, tol_piv, eps):
    """Run Bland-rule iterations until optimal (0), unbounded (1) or limit (2)."""
    m = T.shape[0]
    it = 0
    while it < max_iter:
        j = -1
        for jj in range(n_enter):
            if pos[jj] >= 0:
                continue
            if at_upper[jj]:
                if d[jj] > tol_d:
                    j = jj
                    break
            elif d[jj] < -tol_d and ub[jj] > 0.0:
                j = jj
                break
        if j < 0:
            return 0, it
        dirn = -1.0 if at_upper[j] else 1.0

        best = np.inf
        for i in range(m):
            a = dirn * T[i, j]
            if a > tol_piv:
                t = beta[i] / a
            elif a < -tol_piv and ub[basis[i]] < np.inf:
                t = (ub[basis[i]] - beta[i]) / (-a)
            else:
                continue
            if t < 0.0:
                t = 0.0
            if t < best:
                best = t
        theta = ub[j]
        if theta == np.inf and best == np.inf:
            return 1, it

        if theta <= best:
            for i in range(m):
                beta[i] -= dirn * theta * T[i, j]
            at_upper[j] = not at_upper[j]
            it += 1
            continue

        r = -1
        lim = best + eps
        for i in range(m):
            a = dirn * T[i, j]
            if a > tol_piv:
                t = beta[i] / a
            elif a < -tol_piv and ub[basis[i]] < np.inf:
                t = (ub[basis[i]] - beta[i]) / (-a)
            else:
                continue
            if t < 0.0:
                t = 0.0
            if t <= lim and (r < 0 or basis[i] < basis[r]):
                r = i

        enter_val = (ub[j] if at_upper[j] else 0.0) + dirn * best
        to_upper = dirn * T[r, j] < 0.0
        for i in range(m):
            beta[i] -= dirn * best * T[i, j]
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
