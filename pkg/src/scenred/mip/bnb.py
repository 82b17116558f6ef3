"""Best-first branch and bound over LP relaxations."""
import heapq
import itertools

import numpy as np

from ..errors import InvalidArgument
from .lp import solve_lp, solve_lp_arrays
from .problem import MipProblem, SolveResult, Status, WorkMetric

INT_TOL = 1e-6
GAP_TOL = 1e-6


def _most_fractional(x, idx):
    if idx.size == 0:
        return -1
    frac = x[idx] - np.floor(x[idx])
    score = np.minimum(frac, 1.0 - frac)
    k = int(np.argmax(score))  # first maximum -> lowest index on ties
    if score[k] <= INT_TOL:
        return -1
    return int(idx[k])


class _BlockLeaves:
    """Exact evaluation of a node whose linking variables are all fixed."""

    def __init__(self, p, sub_solve):
        self.p = p
        self.st = p.structure
        self.sub_solve = sub_solve
        self.memo = {}

    def evaluate(self, xlink, work):
        key = tuple(np.round(xlink, 9))
        if key in self.memo:
            return self.memo[key]
        p, st = self.p, self.st
        link = st.link_cols
        x = np.zeros(p.num_vars)
        x[link] = xlink
        total = float(p.objective[link] @ xlink)
        for cols, rows in st.blocks:
            sub = MipProblem(p.objective[cols], p.rows[np.ix_(rows, cols)],
                             p.rhs[rows] - p.rows[np.ix_(rows, link)] @ xlink,
                             p.sense[rows], p.lo[cols], p.hi[cols], p.integrality[cols])
            res = self.sub_solve(sub)
            work.simplex_pivots += res.work.simplex_pivots
            work.bnb_nodes += res.work.bnb_nodes
            if res.status != Status.OPTIMAL:
                self.memo[key] = None
                return None
            x[cols] = res.x
            total += res.objective
        self.memo[key] = (total, x)
        return self.memo[key]


def solve_mip(p, node_limit=100000, gap=GAP_TOL, sub_solve=None):
    """Minimise ``p`` honouring integrality flags.

    Nodes are explored in order of their LP bound and branch on the most
    fractional variable. ``work.bnb_nodes`` counts LP relaxations solved.

    If ``p.structure`` is set, linking columns are branched first and a node
    whose linking columns are all fixed is closed exactly by solving each block
    on its own (through ``sub_solve``, default: this function).
    """
    p.validate()
    int_idx = np.flatnonzero(p.integrality)
    if int_idx.size == 0:
        return solve_lp(p)
    if not (np.all(np.isfinite(p.lo[int_idx])) and np.all(np.isfinite(p.hi[int_idx]))):
        raise InvalidArgument("integral variables need finite bounds")

    c, A, b, sense = p.objective, p.rows, p.rhs, p.sense
    work = WorkMetric()
    counter = itertools.count()
    best_x, best_obj = None, np.inf
    heap = []

    leaves = None
    if p.structure is not None:
        sub_solve = sub_solve or (lambda q: solve_mip(q, node_limit, gap))
        leaves = _BlockLeaves(p, sub_solve)
        link = np.asarray(p.structure.link_cols)
        link_int = np.intersect1d(link, int_idx)
        link_is_int = p.integrality[link]

    def offer(obj, x):
        nonlocal best_x, best_obj
        if obj < best_obj - gap or best_x is None and obj < np.inf:
            best_x, best_obj = x, obj

    def process(lo, hi):
        status, x, obj, piv = solve_lp_arrays(c, A, b, sense, lo, hi)
        work.simplex_pivots += piv
        work.bnb_nodes += 1
        if status == Status.UNBOUNDED:
            return Status.UNBOUNDED
        if status != Status.OPTIMAL or obj >= best_obj - gap:
            return None
        j = _most_fractional(x, int_idx)
        if j >= 0 and leaves is not None:
            j = _most_fractional(x, link_int)
            if j < 0:
                # linking columns integral: price them exactly, then keep fixing them
                xl = x[link].copy()
                xl[link_is_int] = np.round(xl[link_is_int])
                leaf = leaves.evaluate(xl, work)
                if leaf is not None:
                    offer(*leaf)
                free = link_int[lo[link_int] < hi[link_int]]
                if free.size == 0 and link_int.size == link.size:
                    return None
                j = int(free[0]) if free.size else _most_fractional(x, int_idx)
        if j < 0:
            xr = x.copy()
            xr[int_idx] = np.round(xr[int_idx])
            offer(float(c @ xr), xr)
        else:
            heapq.heappush(heap, (obj, next(counter), j, x[j], lo, hi))
        return None

    lo0 = p.lo.copy()
    hi0 = p.hi.copy()
    lo0[int_idx] = np.ceil(lo0[int_idx] - INT_TOL)
    hi0[int_idx] = np.floor(hi0[int_idx] + INT_TOL)
    if process(lo0, hi0) == Status.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED, None, -np.inf, work)

    limit_hit = False
    while heap:
        bound, _, j, xj, lo, hi = heap[0]
        if bound >= best_obj - gap:
            break
        if work.bnb_nodes + 2 > node_limit:
            limit_hit = True
            break
        heapq.heappop(heap)
        split = np.floor(xj + INT_TOL)
        if split >= hi[j]:
            split -= 1.0
        down_hi = hi.copy()
        down_hi[j] = split
        up_lo = lo.copy()
        up_lo[j] = split + 1.0
        process(lo, down_hi)
        process(up_lo, hi)

    if best_x is not None:
        best_x = best_x + 0.0
    if limit_hit:
        return SolveResult(Status.NODE_LIMIT, best_x, best_obj, work)
    if best_x is None:
        return SolveResult(Status.INFEASIBLE, None, np.inf, work)
    return SolveResult(Status.OPTIMAL, best_x, best_obj, work)
