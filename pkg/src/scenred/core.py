"""Two-stage stochastic program data model, instance generators and the
extensive form.

A scenario's second stage reads ``min q @ y  s.t.  W y + T x (sense) h``; the
first stage is ``min c @ x  s.t.  A x (sense) b``. Row senses default to ``<=``;
equality rows are kept explicit rather than split in two.
"""
import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleScenario, InvalidArgument
from .io import decode_floats, decode_matrix, encode_floats, encode_matrix
from .mip import EQ, GE, LE, MipProblem, Solver, Status
from .mip.problem import BlockStructure
from .mip.problem import sense_codes

CONT, BIN, INT = 0, 1, 2
_KIND_NAMES = {CONT: "C", BIN: "B", INT: "I"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}
_SENSE_NAMES = {LE: "<=", EQ: "=", GE: ">="}

FORMAT_TAG = "scenred-instance"
FORMAT_VERSION = 1


def _kinds(kinds, n):
    out = np.array([_KIND_CODES[k] if isinstance(k, str) else int(k) for k in kinds], dtype=np.int8)
    if out.shape != (n,):
        raise InvalidArgument(f"expected {n} variable kinds")
    return out


@dataclass(frozen=True, eq=False)
class FirstStage:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    kinds: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    senses: np.ndarray

    @classmethod
    def build(cls, c, A, b, kinds, lo=None, hi=None, senses=None):
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        A = np.asarray(A, dtype=float).reshape(-1, n)
        b = np.asarray(b, dtype=float).ravel()
        fs = cls(c, A, b, _kinds(kinds, n),
                 np.zeros(n) if lo is None else np.asarray(lo, dtype=float),
                 np.full(n, np.inf) if hi is None else np.asarray(hi, dtype=float),
                 sense_codes(senses, b.size))
        fs.validate()
        return fs

    @property
    def n1(self):
        return self.c.size

    @property
    def m1(self):
        return self.b.size

    def validate(self):
        n, m = self.n1, self.m1
        if self.A.shape != (m, n) or self.kinds.shape != (n,) or self.lo.shape != (n,) \
                or self.hi.shape != (n,) or self.senses.shape != (m,):
            raise InvalidArgument("inconsistent first-stage dimensions")
        _check_binary_bounds(self.kinds, self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class Scenario:
    q: np.ndarray
    W: np.ndarray
    h: np.ndarray
    T: np.ndarray
    prob: float
    y_kinds: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    senses: np.ndarray

    @classmethod
    def build(cls, q, W, h, T, prob, y_kinds, y_lo=None, y_hi=None, senses=None):
        q = np.asarray(q, dtype=float).ravel()
        h = np.asarray(h, dtype=float).ravel()
        n2, m2 = q.size, h.size
        T = np.asarray(T, dtype=float)
        sc = cls(q, np.asarray(W, dtype=float).reshape(m2, n2), h, T.reshape(m2, -1), float(prob),
                 _kinds(y_kinds, n2),
                 np.zeros(n2) if y_lo is None else np.asarray(y_lo, dtype=float),
                 np.full(n2, np.inf) if y_hi is None else np.asarray(y_hi, dtype=float),
                 sense_codes(senses, m2))
        sc.validate(T.reshape(m2, -1).shape[1])
        return sc

    @property
    def n2(self):
        return self.q.size

    @property
    def m2(self):
        return self.h.size

    def validate(self, n1):
        n2, m2 = self.n2, self.m2
        if self.W.shape != (m2, n2) or self.T.shape != (m2, n1) or self.y_kinds.shape != (n2,) \
                or self.y_lo.shape != (n2,) or self.y_hi.shape != (n2,) or self.senses.shape != (m2,):
            raise InvalidArgument("inconsistent scenario dimensions")
        if not 0.0 <= self.prob <= 1.0:
            raise InvalidArgument(f"scenario probability {self.prob} outside [0, 1]")
        _check_binary_bounds(self.y_kinds, self.y_lo, self.y_hi)


def _check_binary_bounds(kinds, lo, hi):
    binm = kinds == BIN
    if np.any(lo[binm] < 0.0) or np.any(hi[binm] > 1.0):
        raise InvalidArgument("binary variables need bounds inside [0, 1]")


@dataclass(frozen=True, eq=False)
class Optimum:
    value: float
    x: np.ndarray


@dataclass(frozen=True, eq=False)
class SpInstance:
    first_stage: FirstStage
    scenarios: tuple
    family: str = "generic"
    seed: int | None = None
    optimum: Optimum | None = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        self.validate()

    @property
    def n1(self):
        return self.first_stage.n1

    @property
    def m1(self):
        return self.first_stage.m1

    @property
    def n2(self):
        return self.scenarios[0].n2

    @property
    def m2(self):
        return self.scenarios[0].m2

    @property
    def num_scenarios(self):
        return len(self.scenarios)

    @property
    def probs(self):
        return np.array([s.prob for s in self.scenarios])

    def validate(self):
        if not self.scenarios:
            raise InvalidArgument("instance needs at least one scenario")
        self.first_stage.validate()
        n1 = self.first_stage.n1
        n2, m2 = self.scenarios[0].n2, self.scenarios[0].m2
        for s in self.scenarios:
            s.validate(n1)
            if s.n2 != n2 or s.m2 != m2:
                raise InvalidArgument("scenarios must share (n2, m2)")
        total = sum(s.prob for s in self.scenarios)
        if abs(total - 1.0) > 1e-9:
            raise InvalidArgument(f"scenario probabilities sum to {total}, expected 1")

    def with_optimum(self, opt):
        return replace(self, optimum=opt)


@dataclass(frozen=True, eq=False)
class ReducedSelection:
    indices: tuple
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())
        if len(set(self.indices)) != len(self.indices):
            raise InvalidArgument("selection indices must be distinct")
        if self.weights.shape != (len(self.indices),):
            raise InvalidArgument("one weight per selected index required")
        if np.any(self.weights < 0.0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise InvalidArgument("selection weights must be nonnegative and sum to 1")

    @classmethod
    def uniform(cls, indices):
        k = len(indices)
        return cls(tuple(indices), np.full(k, 1.0 / k))

    @property
    def k(self):
        return len(self.indices)

    def reordered(self, order):
        """Same scenarios and weights, listed in ``order`` (positions into this selection)."""
        order = list(order)
        return ReducedSelection(tuple(self.indices[i] for i in order), self.weights[order])

    def check(self, n):
        if any(i < 0 or i >= n for i in self.indices):
            raise InvalidArgument(f"selection index out of range [0, {n})")


# --------------------------------------------------------------------------- generators

def _check_counts(**counts):
    for name, v in counts.items():
        if int(v) < 1:
            raise InvalidArgument(f"{name} must be >= 1, got {v}")


def gen_cflp(num_facilities, num_customers, num_scenarios, seed, max_open=8, penalty=1000.0):
    """Capacitated facility location with random customer presence and demands."""
    _check_counts(num_facilities=num_facilities, num_customers=num_customers, num_scenarios=num_scenarios)
    F, C, N = int(num_facilities), int(num_customers), int(num_scenarios)
    rng = np.random.default_rng(seed)
    fac_xy = rng.uniform(0.0, 1.0, (F, 2))
    cus_xy = rng.uniform(0.0, 1.0, (C, 2))
    dist = np.linalg.norm(cus_xy[:, None, :] - fac_xy[None, :, :], axis=2)
    trans = dist * rng.uniform(5.0, 105.0, (C, F))
    open_cost = rng.uniform(600.0, 1500.0, F)
    capacity = rng.uniform(100.0, 150.0, F)
    presence_p = rng.uniform(0.8, 0.9, C)
    v = min(max_open, F)

    first = FirstStage.build(open_cost, np.ones((1, F)), [v], [BIN] * F, np.zeros(F), np.ones(F))
    n2 = C * F + F
    m2 = 2 * F + C
    q = np.concatenate([trans.ravel(), np.full(F, penalty)])
    y_kinds = [BIN] * (C * F) + [CONT] * F
    y_hi = np.concatenate([np.ones(C * F), np.full(F, np.inf)])
    senses = [LE] * (2 * F) + [EQ] * C
    scenarios = []
    for _ in range(N):
        present = (rng.uniform(0.0, 1.0, C) < presence_p).astype(float)
        demand = rng.uniform(20.0, 80.0, (C, F))
        big_m = float((demand.max(axis=1) * present).sum())
        W = np.zeros((m2, n2))
        T = np.zeros((m2, F))
        h = np.zeros(m2)
        for f in range(F):
            W[f, f:C * F:F] = demand[:, f]
            W[f, C * F + f] = -1.0
            T[f, f] = -capacity[f]
            W[F + f, C * F + f] = 1.0
            T[F + f, f] = -big_m
        for c in range(C):
            W[2 * F + c, c * F:(c + 1) * F] = 1.0
            h[2 * F + c] = present[c]
        scenarios.append(Scenario.build(q, W, h, T, 1.0 / N, y_kinds, np.zeros(n2), y_hi, senses))
    return SpInstance(first, scenarios, family="CFLP", seed=seed,
                      params={"facilities": F, "customers": C, "scenarios": N})


def ndp_edges(num_sources, num_sinks, num_intermediates):
    """Directed edges of the design graph: all ordered pairs except source-source and sink-sink."""
    S, K, I = num_sources, num_sinks, num_intermediates
    nv = S + K + I
    kind = ["s"] * S + ["t"] * K + ["i"] * I
    return [(i, j) for i in range(nv) for j in range(nv)
            if i != j and not (kind[i] == kind[j] and kind[i] in "st")]


def gen_ndp(num_sources, num_sinks, num_intermediates, num_scenarios, seed, num_commodities=2,
            penalty=1000.0):
    """Multi-commodity network design with uncertain source supplies."""
    _check_counts(num_sources=num_sources, num_sinks=num_sinks,
                  num_intermediates=num_intermediates, num_scenarios=num_scenarios)
    S, K, I, N = int(num_sources), int(num_sinks), int(num_intermediates), int(num_scenarios)
    Cm = int(num_commodities)
    rng = np.random.default_rng(seed)
    edges = ndp_edges(S, K, I)
    E = len(edges)
    open_cost = rng.uniform(3.0, 11.0, E)
    trans = rng.uniform(5.0, 11.0, (E, Cm))
    cap = rng.uniform(10.0, 41.0, E)

    first = FirstStage.build(open_cost, np.zeros((0, E)), [], [BIN] * E, np.zeros(E), np.ones(E))
    nyf = E * Cm
    n2 = nyf + S * Cm
    out_of = {v: [e for e, (i, _) in enumerate(edges) if i == v] for v in range(S + K + I)}
    into = {v: [e for e, (_, j) in enumerate(edges) if j == v] for v in range(S + K + I)}
    inter = range(S + K, S + K + I)
    sinks = range(S, S + K)
    sources = range(S)

    rows_W, rows_T, senses, kinds_h = [], [], [], []

    def row():
        return np.zeros(n2), np.zeros(E)

    # structural rows shared by every scenario; demand-dependent entries are patched below
    for v in inter:
        for c in range(Cm):
            w, t = row()
            w[[e * Cm + c for e in out_of[v]]] += 1.0
            w[[e * Cm + c for e in into[v]]] -= 1.0
            rows_W.append(w); rows_T.append(t); senses.append(EQ); kinds_h.append(("zero",))
    for t_ in sinks:
        for c in range(Cm):
            w, t = row()
            w[[e * Cm + c for e in out_of[t_]]] = 1.0
            rows_W.append(w); rows_T.append(t); senses.append(EQ); kinds_h.append(("zero",))
    for p in sources:
        for c in range(Cm):
            w, t = row()
            w[[e * Cm + c for e in into[p]]] = 1.0
            rows_W.append(w); rows_T.append(t); senses.append(EQ); kinds_h.append(("zero",))
    for p in sources:
        for c in range(Cm):
            w, t = row()
            w[[e * Cm + c for e in out_of[p]]] = 1.0
            rows_W.append(w); rows_T.append(t); senses.append(LE); kinds_h.append(("supply", p, c))
    for p in sources:
        for c in range(Cm):
            w, t = row()
            w[[e * Cm + c for e in out_of[p]]] = -1.0
            rows_W.append(w); rows_T.append(t); senses.append(LE); kinds_h.append(("unmet", p, c))
    for e in range(E):
        w, t = row()
        w[e * Cm:(e + 1) * Cm] = 1.0
        t[e] = -cap[e]
        rows_W.append(w); rows_T.append(t); senses.append(LE); kinds_h.append(("zero",))
    W0 = np.array(rows_W)
    T0 = np.array(rows_T)
    m2 = W0.shape[0]

    q = np.concatenate([trans.ravel(), np.full(S * Cm, penalty)])
    y_kinds = [CONT] * nyf + [BIN] * (S * Cm)
    y_hi = np.concatenate([np.full(nyf, np.inf), np.ones(S * Cm)])
    scenarios = []
    for _ in range(N):
        d = rng.uniform(5.0, 15.0, (S, Cm))
        big_m = float(d.sum())
        W = W0.copy()
        h = np.zeros(m2)
        for r, tag in enumerate(kinds_h):
            if tag[0] == "supply":
                h[r] = d[tag[1], tag[2]]
            elif tag[0] == "unmet":
                h[r] = -d[tag[1], tag[2]]
                W[r, nyf + tag[1] * Cm + tag[2]] = -big_m
        scenarios.append(Scenario.build(q, W, h, T0, 1.0 / N, y_kinds, np.zeros(n2), y_hi, senses))
    return SpInstance(first, scenarios, family="NDP", seed=seed,
                      params={"sources": S, "sinks": K, "intermediates": I, "scenarios": N,
                              "commodities": Cm})


def augment_instance(inst, scale_lo, scale_hi, seed):
    """Scale objective and constraint data by one random factor in [scale_lo, scale_hi].

    The feasible set is unchanged, so a cached optimum keeps its solution and
    its value scales by the same factor.
    """
    if not 0.0 < scale_lo <= scale_hi:
        raise InvalidArgument("need 0 < scale_lo <= scale_hi")
    factor = float(np.random.default_rng(seed).uniform(scale_lo, scale_hi)) if scale_lo < scale_hi else float(scale_lo)
    fs = inst.first_stage
    first = replace(fs, c=fs.c * factor, A=fs.A * factor, b=fs.b * factor)
    scens = [replace(s, q=s.q * factor, W=s.W * factor, h=s.h * factor, T=s.T * factor)
             for s in inst.scenarios]
    opt = None
    if inst.optimum is not None:
        opt = Optimum(inst.optimum.value * factor, inst.optimum.x.copy())
    params = dict(inst.params, scale=factor)
    return replace(inst, first_stage=first, scenarios=tuple(scens), optimum=opt, params=params)


# --------------------------------------------------------------------------- extensive form

def build_extensive_form(inst, sel=None):
    """Monolithic program over x and one recourse block per included scenario.

    Blocks (columns and rows) follow the order of ``sel.indices``.
    """
    fs = inst.first_stage
    if sel is None:
        idx = list(range(inst.num_scenarios))
        weights = inst.probs
    else:
        sel.check(inst.num_scenarios)
        idx = list(sel.indices)
        weights = sel.weights
    n1, m1 = fs.n1, fs.m1
    n2, m2 = inst.n2, inst.m2
    k = len(idx)
    n = n1 + k * n2
    m = m1 + k * m2
    A = np.zeros((m, n))
    A[:m1, :n1] = fs.A
    obj = np.empty(n)
    obj[:n1] = fs.c
    rhs = np.empty(m)
    rhs[:m1] = fs.b
    sense = np.empty(m, dtype=np.int8)
    sense[:m1] = fs.senses
    lo = np.empty(n)
    hi = np.empty(n)
    kinds = np.empty(n, dtype=np.int8)
    lo[:n1], hi[:n1], kinds[:n1] = fs.lo, fs.hi, fs.kinds
    for blk, (i, w) in enumerate(zip(idx, weights)):
        s = inst.scenarios[i]
        cs = slice(n1 + blk * n2, n1 + (blk + 1) * n2)
        rs = slice(m1 + blk * m2, m1 + (blk + 1) * m2)
        A[rs, :n1] = s.T
        A[rs, cs] = s.W
        obj[cs] = w * s.q
        rhs[rs] = s.h
        sense[rs] = s.senses
        lo[cs], hi[cs], kinds[cs] = s.y_lo, s.y_hi, s.y_kinds
    blocks = tuple((np.arange(n1 + blk * n2, n1 + (blk + 1) * n2), np.arange(m1 + blk * m2, m1 + (blk + 1) * m2))
                   for blk in range(k))
    return MipProblem(obj, A, rhs, sense, lo, hi, kinds != CONT,
                      structure=BlockStructure(np.arange(n1), blocks))


def second_stage_problem(inst, i, x):
    s = inst.scenarios[i]
    return MipProblem(s.q.copy(), s.W, s.h - s.T @ x, s.senses, s.y_lo, s.y_hi, s.y_kinds != CONT)


def evaluate_first_stage(inst, x, solver=None, cutoff=np.inf):
    """Return ``(f, Q)`` with ``f = c @ x + sum_i p_i Q_i`` for a fixed first stage ``x``.

    With a finite ``cutoff`` and nonnegative recourse costs, evaluation stops
    once the partial sum reaches it; the returned ``f`` is then a lower bound
    and the unevaluated entries of ``Q`` are nan.
    """
    solver = solver or Solver()
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n1,):
        raise InvalidArgument(f"first-stage vector must have length {inst.n1}")
    Q = np.full(inst.num_scenarios, np.nan)
    f = float(inst.first_stage.c @ x)
    for i in range(inst.num_scenarios):
        res = solver.mip(second_stage_problem(inst, i, x))
        if res.status != Status.OPTIMAL:
            raise InfeasibleScenario(i, f"second stage of scenario {i}: {res.status.value}")
        Q[i] = res.objective
        f += inst.scenarios[i].prob * res.objective
        if f >= cutoff:
            return f, Q
    return float(inst.first_stage.c @ x + inst.probs @ Q), Q


def first_stage_feasible(fs, x, tol=1e-9):
    act = fs.A @ x - fs.b
    ok = np.where(fs.senses == LE, act <= tol, np.where(fs.senses == GE, act >= -tol, np.abs(act) <= tol))
    return bool(np.all(ok)) and bool(np.all(x >= fs.lo - tol)) and bool(np.all(x <= fs.hi + tol))


def _recourse_nonnegative(inst):
    return all(np.all(s.q >= 0.0) and np.all(s.y_lo >= 0.0) for s in inst.scenarios)


def solve_instance(inst, solver=None, enum_limit=4096):
    """Exact optimum of the full problem.

    An all-binary first stage with at most ``enum_limit`` candidates is solved
    by enumerating x and pricing each candidate through the recourse problems;
    otherwise the extensive form goes to branch and bound. Returns ``None`` if
    the solver stops at its node limit.
    """
    solver = solver or Solver()
    fs = inst.first_stage
    if np.all(fs.kinds == BIN) and 2 ** fs.n1 <= enum_limit:
        cands = [np.array(z, dtype=float) for z in itertools.product((0.0, 1.0), repeat=fs.n1)]
        cands = [x for x in cands
                 if first_stage_feasible(fs, x) and np.all(x >= fs.lo) and np.all(x <= fs.hi)]
        cands.sort(key=lambda x: float(fs.c @ x))
        prune = _recourse_nonnegative(inst)
        best_v, best_x = np.inf, None
        for x in cands:
            if prune and float(fs.c @ x) >= best_v:
                break
            try:
                f, _ = evaluate_first_stage(inst, x, solver, cutoff=best_v if prune else np.inf)
            except InfeasibleScenario:
                continue
            if f < best_v - 1e-9:
                best_v, best_x = f, x
        if best_x is None:
            raise InfeasibleScenario(-1, "no first-stage decision has feasible recourse in every scenario")
        return Optimum(best_v, best_x)
    res = solver.mip(build_extensive_form(inst))
    if res.status == Status.NODE_LIMIT:
        return None
    if res.status != Status.OPTIMAL:
        raise InfeasibleScenario(-1, f"extensive form is {res.status.value}")
    return Optimum(res.objective, res.x[:fs.n1].copy())


# --------------------------------------------------------------------------- persistence

def instance_to_dict(inst):
    fs = inst.first_stage
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "name": inst.name,
        "family": inst.family,
        "seed": inst.seed,
        "params": inst.params,
        "n1": fs.n1, "n2": inst.n2, "m1": fs.m1, "m2": inst.m2,
        "firstStage": {
            "c": encode_floats(fs.c), "A": encode_matrix(fs.A), "b": encode_floats(fs.b),
            "senses": [_SENSE_NAMES[int(s)] for s in fs.senses],
            "kinds": [_KIND_NAMES[int(k)] for k in fs.kinds],
            "bounds": [encode_floats(fs.lo), encode_floats(fs.hi)],
        },
        "scenarios": [{
            "prob": s.prob, "q": encode_floats(s.q), "W": encode_matrix(s.W),
            "h": encode_floats(s.h), "T": encode_matrix(s.T),
            "senses": [_SENSE_NAMES[int(v)] for v in s.senses],
            "kinds": [_KIND_NAMES[int(k)] for k in s.y_kinds],
            "bounds": [encode_floats(s.y_lo), encode_floats(s.y_hi)],
        } for s in inst.scenarios],
        "optimum": None if inst.optimum is None else {
            "v": inst.optimum.value, "x": encode_floats(inst.optimum.x)},
    }


def instance_from_dict(d):
    if d.get("format") != FORMAT_TAG:
        raise InvalidArgument("not an instance file")
    n1, n2 = d["n1"], d["n2"]
    f = d["firstStage"]
    first = FirstStage.build(decode_floats(f["c"]), decode_matrix(f["A"], n1), decode_floats(f["b"]),
                             f["kinds"], decode_floats(f["bounds"][0]), decode_floats(f["bounds"][1]),
                             f["senses"])
    scens = [Scenario.build(decode_floats(s["q"]), decode_matrix(s["W"], n2), decode_floats(s["h"]),
                            decode_matrix(s["T"], n1), s["prob"], s["kinds"],
                            decode_floats(s["bounds"][0]), decode_floats(s["bounds"][1]), s["senses"])
             for s in d["scenarios"]]
    opt = d.get("optimum")
    return SpInstance(first, scens, family=d["family"], seed=d["seed"], name=d.get("name", ""),
                      params=d.get("params", {}),
                      optimum=None if opt is None else Optimum(float(opt["v"]), decode_floats(opt["x"])))


def save_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, separators=(",", ":"))
        fh.write("\n")


def load_instance(path):
    with open(path) as fh:
        inst = instance_from_dict(json.load(fh))
    if not inst.name:
        from pathlib import Path
        inst = replace(inst, name=Path(path).stem)
    return inst
