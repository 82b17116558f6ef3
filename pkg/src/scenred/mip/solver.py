"""Solver handle: configuration plus an optional memo of solved problems."""
import copy
import hashlib
import threading
from collections import OrderedDict

import numpy as np

from .bnb import solve_mip
from .lp import solve_lp


def problem_key(p, tag=""):
    h = hashlib.blake2b(digest_size=20)
    h.update(tag.encode())
    for arr in (p.objective, p.rows, p.rhs, p.sense, p.lo, p.hi, p.integrality):
        h.update(str(arr.shape).encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.digest()


class Solver:
    """Reusable entry point for LP/MIP solves.

    Results are pure functions of the problem, so memoising them does not change
    any returned value, including the work metric.
    """

    def __init__(self, node_limit=100000, gap=1e-6, cache_size=200000):
        self.node_limit = node_limit
        self.gap = gap
        self.cache_size = cache_size
        self._cache = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _memo(self, key, fn):
        if self.cache_size <= 0:
            return fn()
        with self._lock:
            res = self._cache.get(key)
            if res is not None:
                self._cache.move_to_end(key)
                self.hits += 1
                return copy.deepcopy(res)
        res = fn()
        with self._lock:
            self.misses += 1
            self._cache[key] = copy.deepcopy(res)
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return res

    def lp(self, p):
        return self._memo(problem_key(p, "lp"), lambda: solve_lp(p))

    def mip(self, p):
        tag = f"mip:{self.node_limit}:{self.gap!r}:{p.structure is not None}"
        return self._memo(problem_key(p, tag),
                          lambda: solve_mip(p, self.node_limit, self.gap, sub_solve=self.mip))

    def clear(self):
        with self._lock:
            self._cache.clear()
