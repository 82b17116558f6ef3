"""Mixed-binary program container and solver results."""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import InvalidArgument

LE, EQ, GE = 0, 1, 2
_SENSE_CODES = {"<=": LE, "<": LE, "L": LE, "=": EQ, "==": EQ, "E": EQ, ">=": GE, ">": GE, "G": GE}


def sense_codes(senses, m):
    """Normalise row senses to an int8 array of LE/EQ/GE codes."""
    if senses is None:
        return np.zeros(m, dtype=np.int8)
    out = np.empty(m, dtype=np.int8)
    for i, s in enumerate(senses):
        out[i] = _SENSE_CODES[s] if isinstance(s, str) else int(s)
    if len(senses) != m:
        raise InvalidArgument(f"expected {m} row senses, got {len(senses)}")
    return out


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NODE_LIMIT = "NodeLimit"


@dataclass
class WorkMetric:
    simplex_pivots: int = 0
    bnb_nodes: int = 0

    def time_proxy(self, node_weight=1.0, time_scale=1.0):
        return (self.simplex_pivots + node_weight * self.bnb_nodes) / time_scale


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray | None
    objective: float
    work: WorkMetric = field(default_factory=WorkMetric)

    @property
    def ok(self):
        return self.status == Status.OPTIMAL


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Linking columns plus disjoint (columns, rows) blocks.

    Rows of a block may only touch the linking columns and the block's own
    columns; rows in no block may only touch linking columns.
    """

    link_cols: np.ndarray
    blocks: tuple


@dataclass(frozen=True, eq=False)
class MipProblem:
    """min objective @ x  s.t.  rows @ x (sense) rhs,  lo <= x <= hi."""

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    sense: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    integrality: np.ndarray
    structure: BlockStructure | None = None

    @classmethod
    def build(cls, objective, rows, rhs, sense=None, lo=None, hi=None, integrality=None):
        c = np.asarray(objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(rows, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        b = np.asarray(rhs, dtype=float).ravel()
        m = b.size
        lo = np.zeros(n) if lo is None else np.asarray(lo, dtype=float).ravel()
        hi = np.full(n, np.inf) if hi is None else np.asarray(hi, dtype=float).ravel()
        integ = np.zeros(n, dtype=bool) if integrality is None else np.asarray(integrality, dtype=bool).ravel()
        prob = cls(c, A, b, sense_codes(sense, m), lo, hi, integ)
        prob.validate()
        return prob

    @property
    def num_vars(self):
        return self.objective.size

    @property
    def num_rows(self):
        return self.rhs.size

    def validate(self):
        n, m = self.num_vars, self.num_rows
        if self.rows.shape != (m, n):
            raise InvalidArgument(f"rows has shape {self.rows.shape}, expected {(m, n)}")
        for name in ("lo", "hi", "integrality"):
            if getattr(self, name).shape != (n,):
                raise InvalidArgument(f"{name} must have length {n}")
        if self.sense.shape != (m,) or np.any((self.sense < 0) | (self.sense > 2)):
            raise InvalidArgument("invalid row senses")
        if np.any(self.lo > self.hi):
            raise InvalidArgument("lower bound exceeds upper bound")

    def max_violation(self, x):
        """Largest constraint or bound violation of ``x``."""
        act = self.rows @ x - self.rhs
        viol = np.where(self.sense == LE, np.maximum(act, 0.0),
                        np.where(self.sense == GE, np.maximum(-act, 0.0), np.abs(act)))
        bnd = np.maximum(self.lo - x, 0.0).max(initial=0.0), np.maximum(x - self.hi, 0.0).max(initial=0.0)
        return max(viol.max(initial=0.0), *bnd)

    def to_dict(self):
        """Dump in the instance file's constraint schema (for debugging)."""
        from ..io import encode_floats

        return {
            "objective": encode_floats(self.objective),
            "rows": [encode_floats(r) for r in self.rows],
            "rhs": encode_floats(self.rhs),
            "sense": ["<=" if s == LE else "=" if s == EQ else ">=" for s in self.sense],
            "bounds": [encode_floats(self.lo), encode_floats(self.hi)],
            "integrality": [bool(v) for v in self.integrality],
        }
