"""Dense two-phase primal simplex with implicit variable bounds and Bland's rule."""
import numpy as np

from .. import _accel
from ..errors import InvalidArgument, InvalidState
from .problem import EQ, GE, LE, SolveResult, Status, WorkMetric

if _accel.USE_NUMBA:
    from . import _simplex_numba as _kern
else:
    from . import _simplex_numpy as _kern

TOL_D = 1e-9
TOL_PIV = 1e-9
EPS_RATIO = 1e-12
FEAS_TOL = 1e-6


def _standard_form(c, A, b, sense, lo, hi):
    """Shift/flip/split columns so every structural variable lives in [0, ub].

    Returns the transformed data plus ``(col_of, sign, split_col, offset)`` to map
    the solution back: ``x = offset + sign * v[col_of] - v[split_col]``.
    """
    n = c.size
    fin_lo = np.isfinite(lo)
    fin_hi = np.isfinite(hi)
    flip = ~fin_lo & fin_hi
    free = ~fin_lo & ~fin_hi
    sign = np.where(flip, -1.0, 1.0)
    offset = np.where(fin_lo, lo, np.where(flip, hi, 0.0))
    shift = offset != 0.0
    b = b - A[:, shift] @ offset[shift] if shift.any() else b.astype(float).copy()
    As = A * sign
    cs = c * sign
    ub = np.where(fin_lo, hi - lo, np.inf)
    col_of = np.arange(n)
    split_col = np.full(n, -1)
    if free.any():
        fidx = np.flatnonzero(free)
        split_col[fidx] = n + np.arange(fidx.size)
        As = np.hstack([As, -A[:, fidx]])
        cs = np.concatenate([cs, -c[fidx]])
        ub = np.concatenate([ub, np.full(fidx.size, np.inf)])
    return As, cs, ub, b, (col_of, sign, split_col, offset)


def solve_lp_arrays(c, A, b, sense, lo, hi, max_iter=None):
    """Solve the LP relaxation given raw arrays. Returns (status, x, objective, pivots)."""
    m = b.size
    if np.any(lo > hi + 1e-12):
        return Status.INFEASIBLE, None, np.inf, 0
    As, cs, ub, b, back = _standard_form(c, A, b, sense, lo, hi)
    ns = cs.size

    slack_sign = np.where(sense == LE, 1.0, np.where(sense == GE, -1.0, 0.0))
    flip = b < 0.0
    rsign = np.where(flip, -1.0, 1.0)
    slack_rows = np.flatnonzero(sense != EQ)
    nsl = slack_rows.size
    eff_slack = slack_sign * rsign
    art_rows = np.flatnonzero(eff_slack <= 0.0)
    na = art_rows.size
    ntot = ns + nsl + na

    T = np.zeros((m, ntot))
    T[:, :ns] = As * rsign[:, None]
    T[slack_rows, ns + np.arange(nsl)] = eff_slack[slack_rows]
    T[art_rows, ns + nsl + np.arange(na)] = 1.0
    beta = b * rsign
    ubt = np.concatenate([ub, np.full(nsl + na, np.inf)])

    basis = np.empty(m, dtype=np.int64)
    slack_col_of_row = np.full(m, -1, dtype=np.int64)
    slack_col_of_row[slack_rows] = ns + np.arange(nsl)
    basis[:] = slack_col_of_row
    basis[art_rows] = ns + nsl + np.arange(na)
    pos = np.full(ntot, -1, dtype=np.int64)
    pos[basis] = np.arange(m)
    at_upper = np.zeros(ntot, dtype=np.bool_)
    if max_iter is None:
        max_iter = 200000 + 50 * (m + ntot)
    pivots = 0
    n_nonart = ns + nsl

    if na:
        d = np.zeros(ntot)
        d[n_nonart:] = 1.0
        d -= T[art_rows].sum(axis=0)
        code, it = _kern.iterate(T, beta, d, ubt, basis, pos, at_upper, ntot, max_iter,
                                 TOL_D, TOL_PIV, EPS_RATIO)
        pivots += it
        if code != 0:
            raise InvalidState(f"phase 1 simplex ended with code {code}")
        infeas = beta[basis >= n_nonart].sum()
        if infeas > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return Status.INFEASIBLE, None, np.inf, pivots
        # drive zero-valued artificials out of the basis
        for r in range(m):
            if basis[r] < n_nonart:
                continue
            row = np.abs(T[r, :n_nonart])
            cand = np.flatnonzero((row > TOL_PIV) & (pos[:n_nonart] < 0))
            if cand.size == 0:
                continue
            j = int(cand[0])
            val = ubt[j] if at_upper[j] else 0.0
            leave = basis[r]
            pos[leave] = -1
            at_upper[leave] = False
            at_upper[j] = False
            beta[r] = val
            basis[r] = j
            pos[j] = r
            _kern.pivot(T, d, r, j)
            pivots += 1
        ubt[n_nonart:] = 0.0
        beta[basis >= n_nonart] = 0.0

    cost = np.zeros(ntot)
    cost[:ns] = cs
    d = cost - cost[basis] @ T
    code, it = _kern.iterate(T, beta, d, ubt, basis, pos, at_upper, n_nonart, max_iter,
                             TOL_D, TOL_PIV, EPS_RATIO)
    pivots += it
    if code == 1:
        return Status.UNBOUNDED, None, -np.inf, pivots
    if code != 0:
        raise InvalidState("simplex iteration limit reached")

    vals = np.where(at_upper, ubt, 0.0)
    vals[basis] = beta
    col_of, sign, split_col, offset = back
    x = offset + sign * vals[col_of]
    free = split_col >= 0
    if free.any():
        x[free] -= vals[split_col[free]]
    x = np.clip(x, lo, hi)
    return Status.OPTIMAL, x, float(c @ x), pivots


def solve_lp(p):
    """Solve the continuous relaxation of ``p`` (integrality flags are ignored)."""
    p.validate()
    status, x, obj, piv = solve_lp_arrays(p.objective, p.rows, p.rhs, p.sense, p.lo, p.hi)
    return SolveResult(status, x, obj, WorkMetric(simplex_pivots=piv, bnb_nodes=0))


def check_dims(c, A, b):
    if A.shape != (b.size, c.size):
        raise InvalidArgument("dimension mismatch")
