"""Hierarchical graph state: one bipartite variable/constraint graph per
scenario and a cosine-similarity graph over the scenarios themselves."""
from dataclasses import dataclass

import numpy as np

from .core import BIN, INT
from .errors import InvalidArgument

VAR_FEATURES = 4     # objective coeff, integral flag, lower bound, capped upper bound
CONS_FEATURES = 2    # parallelism with the objective, rhs
NODE_WIDTH = VAR_FEATURES + CONS_FEATURES
UB_CAP = 1e3


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    var_features: np.ndarray
    cons_features: np.ndarray
    edges: np.ndarray          # (E, 3): var index, cons index, coefficient
    padded: np.ndarray         # (nv + nc, NODE_WIDTH)

    @property
    def num_vars(self):
        return self.var_features.shape[0]

    @property
    def num_cons(self):
        return self.cons_features.shape[0]

    @property
    def num_nodes(self):
        return self.num_vars + self.num_cons

    def adjacency(self):
        """Symmetric |coeff| adjacency over variables followed by constraints."""
        n, nv = self.num_nodes, self.num_vars
        A = np.zeros((n, n))
        v = self.edges[:, 0].astype(np.intp)
        c = self.edges[:, 1].astype(np.intp) + nv
        w = np.abs(self.edges[:, 2])
        A[v, c] = w
        A[c, v] = w
        return A

    def dump(self):
        """Plain-text node tables and edge list, stable enough for golden files."""
        lines = [f"vars {self.num_vars}"]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.var_features]
        lines.append(f"cons {self.num_cons}")
        lines += [" ".join(repr(float(v)) for v in row) for row in self.cons_features]
        lines.append(f"edges {len(self.edges)}")
        lines += [f"{int(v)} {int(c)} {w!r}" for v, c, w in self.edges]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class InstanceGraph:
    adjacency: np.ndarray

    @property
    def N(self):
        return self.adjacency.shape[0]


def _cosine_rows(M, v):
    nv = np.linalg.norm(v)
    nr = np.linalg.norm(M, axis=1)
    denom = nr * nv
    out = np.zeros(M.shape[0])
    ok = denom > 0
    out[ok] = (M[ok] @ v) / denom[ok]
    return out


def build_scenario_subgraph(fs, sc, ub_cap=UB_CAP):
    """Bipartite graph of the single-scenario problem over (x, y) and all its rows."""
    n1, n2 = fs.n1, sc.n2
    if sc.T.shape[1] != n1:
        raise InvalidArgument("scenario technology matrix does not match the first stage")
    obj = np.concatenate([fs.c, sc.q])
    kinds = np.concatenate([fs.kinds, sc.y_kinds])
    lo = np.concatenate([fs.lo, sc.y_lo])
    hi = np.minimum(np.concatenate([fs.hi, sc.y_hi]), ub_cap)
    vf = np.column_stack([obj, np.isin(kinds, (BIN, INT)).astype(float), lo, hi])

    rows = np.zeros((fs.m1 + sc.m2, n1 + n2))
    rows[:fs.m1, :n1] = fs.A
    rows[fs.m1:, :n1] = sc.T
    rows[fs.m1:, n1:] = sc.W
    rhs = np.concatenate([fs.b, sc.h])
    cf = np.column_stack([_cosine_rows(rows, obj), rhs])

    ci, vi = np.nonzero(rows)
    edges = np.column_stack([vi, ci, rows[ci, vi]]).astype(float)

    nv, nc = vf.shape[0], cf.shape[0]
    padded = np.zeros((nv + nc, NODE_WIDTH))
    padded[:nv, :VAR_FEATURES] = vf
    padded[nv:, VAR_FEATURES:] = cf
    return BipartiteGraph(vf, cf, edges, padded)


def flatten_uncertain(sc):
    """``[q, W (row-major), h, T (row-major)]``."""
    return np.concatenate([sc.q, sc.W.ravel(), sc.h, sc.T.ravel()])


def build_instance_adjacency(scenarios):
    if len(scenarios) == 0:
        raise InvalidArgument("need at least one scenario")
    V = np.stack([flatten_uncertain(s) for s in scenarios])
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise InvalidArgument(f"scenario {bad} has an all-zero uncertain-parameter vector")
    U = V / norms[:, None]
    A = np.clip(U @ U.T, -1.0, 1.0)
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 0.0)
    return InstanceGraph(A)


def normalize_adjacency(A):
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument("adjacency must be square")
    if np.any(A < 0):
        raise InvalidArgument("adjacency entries must be nonnegative")
    At = A + np.eye(A.shape[0])
    d = 1.0 / np.sqrt(At.sum(axis=1))
    return At * d[:, None] * d[None, :]


def _zscore(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    flat = sd <= 1e-12
    out = (X - mu) / np.where(flat, 1.0, sd)
    out[:, flat] = X[:, flat]
    return out


@dataclass(frozen=True, eq=False)
class GraphInputs:
    """Network-ready arrays for one instance.

    ``low_adj`` stacks the normalized subgraph adjacencies (N, n, n), ``low_x``
    the standardized padded node features (N, n, F) and ``high_adj`` the
    normalized instance-graph adjacency (N, N).
    """
    low_adj: np.ndarray
    low_x: np.ndarray
    high_adj: np.ndarray

    @property
    def low_ax(self):
        """``low_adj @ low_x``, the constant first aggregation of the encoder."""
        cached = self.__dict__.get("_low_ax")
        if cached is None:
            cached = np.matmul(self.low_adj, self.low_x)
            object.__setattr__(self, "_low_ax", cached)
        return cached

    @property
    def N(self):
        return self.high_adj.shape[0]

    def permuted(self, perm):
        perm = np.asarray(perm)
        return GraphInputs(self.low_adj[perm], self.low_x[perm], self.high_adj[np.ix_(perm, perm)])


def centered_adjacency(scenarios):
    """Cosine similarity of uncertain-parameter vectors after removing their mean over scenarios."""
    V = np.stack([flatten_uncertain(s) for s in scenarios])
    V = V - V.mean(axis=0)
    norms = np.linalg.norm(V, axis=1)
    U = V / np.where(norms > 0, norms, 1.0)[:, None]
    A = np.clip(U @ U.T, -1.0, 1.0)
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 0.0)
    return InstanceGraph(A)


SIMILARITIES = ("cosine", "centered")
STANDARDIZATIONS = ("column", "scenario")


def _scenario_zscore(X):
    """Z-score every (node, feature) entry across scenarios; constant entries become 0."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    return np.where(sd > 1e-12, (X - mu) / np.where(sd > 1e-12, sd, 1.0), 0.0)


def graph_inputs(inst, similarity="cosine", standardize="column"):
    """Subgraphs plus instance graph as network-ready arrays.

    ``standardize="column"`` z-scores each feature column over all nodes of
    the instance (per node type); ``"scenario"`` z-scores each node's features
    across the scenarios, keeping only what distinguishes one scenario from
    another.
    """
    if similarity not in SIMILARITIES:
        raise InvalidArgument(f"similarity must be one of {SIMILARITIES}")
    if standardize not in STANDARDIZATIONS:
        raise InvalidArgument(f"standardize must be one of {STANDARDIZATIONS}")
    subs = [build_scenario_subgraph(inst.first_stage, s) for s in inst.scenarios]
    nv = subs[0].num_vars
    N, n = len(subs), subs[0].num_nodes
    if standardize == "column":
        vf = _zscore(np.concatenate([g.var_features for g in subs])).reshape(N, nv, VAR_FEATURES)
        cf = _zscore(np.concatenate([g.cons_features for g in subs])).reshape(N, n - nv, CONS_FEATURES)
    else:
        vf = _scenario_zscore(np.stack([g.var_features for g in subs]))
        cf = _scenario_zscore(np.stack([g.cons_features for g in subs]))
    X = np.zeros((N, n, NODE_WIDTH))
    X[:, :nv, :VAR_FEATURES] = vf
    X[:, nv:, VAR_FEATURES:] = cf
    low = np.stack([normalize_adjacency(g.adjacency()) for g in subs])
    ig = (build_instance_adjacency if similarity == "cosine" else centered_adjacency)(inst.scenarios)
    high = normalize_adjacency(np.maximum(ig.adjacency, 0.0))
    return GraphInputs(low, X, high)
