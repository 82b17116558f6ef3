"""Hierarchical GCN encoder, attention decoder and critic.

All forward functions take a parameter mapping whose values are either numpy
arrays or ``Tensor`` leaves, so the same code serves rollouts and gradients.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidArgument, InvalidState
from ..graphs import NODE_WIDTH, SIMILARITIES, STANDARDIZATIONS, graph_inputs
from .autodiff import Tensor, as_tensor, concat


@dataclass(frozen=True)
class NetConfig:
    node_features: int = NODE_WIDTH
    hidden_low: int = 64
    f1: int = 64
    hidden_high: int = 128
    embed: int = 128
    heads: int = 8
    critic_hidden: int = 64
    logit_clip: float = 10.0
    similarity: str = "centered"
    standardize: str = "scenario"
    readout_norm: bool = True

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise InvalidArgument(f"similarity must be one of {SIMILARITIES}")
        if self.standardize not in STANDARDIZATIONS:
            raise InvalidArgument(f"standardize must be one of {STANDARDIZATIONS}")
        if self.embed % self.heads:
            raise InvalidArgument(f"embed width {self.embed} not divisible by {self.heads} heads")

    def to_dict(self):
        return asdict(self)


def param_shapes(cfg):
    F, Hl, F1, Hh, E, Hc = (cfg.node_features, cfg.hidden_low, cfg.f1, cfg.hidden_high,
                            cfg.embed, cfg.critic_hidden)
    return {
        "gcn0": (F, Hl), "gcn1": (Hl, F1), "gcn2": (F1, Hh), "gcn3": (Hh, E),
        "dec.v_f": (E,),
        "dec.Wq": (3 * E, E), "dec.Wk": (E, E), "dec.Wv": (E, E), "dec.Wo": (E, E),
        "dec.Wlq": (E, E), "dec.Wlk": (E, E),
        "critic.Wq": (E, E), "critic.Wk": (E, E), "critic.Wv": (E, E),
        "critic.W1": (E, Hc), "critic.b1": (Hc,), "critic.W2": (Hc, 1), "critic.b2": (1,),
    }


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Named parameter arrays plus the widths they were built for."""
    config: NetConfig
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = param_shapes(self.config)
        if set(shapes) != set(self.values):
            missing = sorted(set(shapes) ^ set(self.values))
            raise InvalidArgument(f"parameter set mismatch: {missing}")
        for k, shp in shapes.items():
            v = self.values[k]
            if v.shape != shp:
                raise InvalidArgument(f"parameter {k} has shape {v.shape}, expected {shp}")
            if not np.all(np.isfinite(v)):
                raise InvalidArgument(f"parameter {k} has non-finite entries")

    @classmethod
    def init(cls, cfg=None, seed=0):
        cfg = cfg or NetConfig()
        rng = np.random.default_rng(seed)
        vals = {}
        for k, shp in param_shapes(cfg).items():
            fan_in = shp[0]
            if k.startswith("critic.b"):
                fan_in = param_shapes(cfg)["critic.W" + k[-1]][0]
            bound = 1.0 / np.sqrt(fan_in)
            vals[k] = rng.uniform(-bound, bound, shp)
        return cls(cfg, vals)

    def __getitem__(self, k):
        return self.values[k]

    def names(self):
        return list(param_shapes(self.config))

    def replace(self, updates):
        vals = dict(self.values)
        vals.update(updates)
        return PolicyParams(self.config, vals)

    def num_params(self):
        return int(sum(v.size for v in self.values.values()))

    def equals(self, other):
        return self.config == other.config and all(
            np.array_equal(self.values[k], other.values[k]) for k in self.names())


def policy_inputs(inst, cfg):
    """Graph inputs built the way a network with config ``cfg`` expects them."""
    return graph_inputs(inst, cfg.similarity, cfg.standardize)


def _p(P):
    return P.values if isinstance(P, PolicyParams) else P


# --------------------------------------------------------------------------- encoder

def gcn_layer(A, H, W):
    """``tanh(A @ H @ W)``."""
    A, H, W = as_tensor(A), as_tensor(H), as_tensor(W)
    if A.shape[-1] != H.shape[-2] or A.shape[-2] != A.shape[-1] or H.shape[-1] != W.shape[0]:
        raise InvalidArgument(f"gcn shapes incompatible: A{A.shape} H{H.shape} W{W.shape}")
    return (A @ (H @ W)).tanh()


@dataclass(frozen=True, eq=False)
class EncodedInstance:
    H: Tensor
    hbar: Tensor

    @property
    def N(self):
        return self.H.shape[0]


def standardize_rows(s, eps=1e-8):
    """Center each column over the scenarios and scale it to unit variance."""
    c = s - s.mean(axis=0)
    return c / ((c * c).mean(axis=0) + eps) ** 0.5


def encode(gi, P, readout_norm=None):
    """Two GCN layers per scenario subgraph, mean readout, two GCN layers on the
    instance graph.

    With ``readout_norm`` the readouts are standardized across scenarios
    before the instance-level layers, so only between-scenario differences
    reach them.
    """
    if readout_norm is None:
        readout_norm = P.config.readout_norm if isinstance(P, PolicyParams) else False
    P = _p(P)
    # first layer: tanh((A X) W) with the constant A X precomputed once per instance
    x = (as_tensor(gi.low_ax) @ P["gcn0"]).tanh()
    x = gcn_layer(gi.low_adj, x, P["gcn1"])
    s = x.mean(axis=1)
    if readout_norm:
        s = standardize_rows(s)
    h = gcn_layer(gi.high_adj, s, P["gcn2"])
    H = gcn_layer(gi.high_adj, h, P["gcn3"])
    return EncodedInstance(H, H.mean(axis=0))


# --------------------------------------------------------------------------- decoder

@dataclass(frozen=True, eq=False)
class DecoderKeys:
    K: Tensor    # (heads, N, d)
    V: Tensor    # (heads, N, d)
    L: Tensor    # (N, E) logit keys


def decoder_keys(enc, P, heads):
    P = _p(P)
    N, E = enc.H.shape
    d = E // heads

    def split(M):
        return M.reshape(N, heads, d).transpose(1, 0, 2)
    return DecoderKeys(split(enc.H @ P["dec.Wk"]), split(enc.H @ P["dec.Wv"]), enc.H @ P["dec.Wlk"])


def update_aux(hc, ha):
    """Running average feeding the next context: ``(hc + ha) / 2``."""
    return (hc + ha) * 0.5


def _step(h_prev, h_a, enc, keys, avail, P, cfg):
    """Return (logits over ``avail``, log-probabilities over ``avail``, glimpse)."""
    E, nh = cfg.embed, cfg.heads
    d = E // nh
    if h_prev is None:
        vf = as_tensor(P["dec.v_f"])
        ctx = concat([enc.hbar, vf, vf])
    else:
        ctx = concat([enc.hbar, as_tensor(h_prev), as_tensor(h_a)])
    q = (ctx @ P["dec.Wq"]).reshape(nh, d, 1)
    K, V = keys.K[:, avail, :], keys.V[:, avail, :]
    att = ((K @ q) * (1.0 / np.sqrt(d))).reshape(nh, len(avail)).softmax(axis=-1)
    glimpse = (att.reshape(nh, 1, len(avail)) @ V).reshape(E) @ P["dec.Wo"]
    u = (keys.L[avail] @ (glimpse @ P["dec.Wlq"])) * (1.0 / np.sqrt(E))
    logits = u.tanh() * cfg.logit_clip
    return logits, logits.log_softmax(), glimpse


def decoder_step(t, h_prev, h_a, enc, mask, P, cfg=None, keys=None):
    """One selection step. ``mask[i]`` is True for already selected scenarios.

    Returns the full probability vector (masked entries exactly 0) and the
    attention glimpse used as ``hC`` in the auxiliary recurrence.
    """
    params = P
    cfg = cfg or P.config
    P = _p(P)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (enc.N,):
        raise InvalidArgument("mask length must equal the scenario count")
    avail = np.flatnonzero(~mask)
    if avail.size == 0:
        raise InvalidState("every scenario is already selected")
    keys = keys or decoder_keys(enc, params, cfg.heads)
    _, logp, glimpse = _step(None if t == 1 else h_prev, h_a, enc, keys, avail, P, cfg)
    probs = np.zeros(enc.N)
    probs[avail] = np.exp(logp.data)
    return probs, glimpse


def step_logits(t, h_prev, h_a, enc, mask, P, cfg=None):
    """Pre-softmax logits with masked entries at -inf (inspection helper)."""
    cfg = cfg or P.config
    avail = np.flatnonzero(~np.asarray(mask, dtype=bool))
    keys = decoder_keys(enc, P, cfg.heads)
    logits, _, _ = _step(None if t == 1 else h_prev, h_a, enc, keys, avail, _p(P), cfg)
    out = np.full(enc.N, -np.inf)
    out[avail] = logits.data
    return out


@dataclass(frozen=True, eq=False)
class DecodeTrace:
    indices: tuple
    log_probs: np.ndarray
    entropy_sum: float


def _decode(enc, k, P, cfg, choose):
    N = enc.N
    if not 1 <= k <= N:
        raise InvalidArgument(f"k={k} must lie in [1, {N}]")
    keys = decoder_keys(enc, P, cfg.heads)
    mask = np.zeros(N, dtype=bool)
    picks, logps, ents = [], [], []
    h_prev = h_a = h_first = None
    glimpse = None
    for t in range(1, k + 1):
        if t == 2:
            h_a = h_first
        elif t > 2:
            h_a = update_aux(glimpse, h_a)
        avail = np.flatnonzero(~mask)
        _, logp, glimpse = _step(h_prev, h_a, enc, keys, avail, P, cfg)
        pos = choose(t, avail, np.exp(logp.data))
        a = int(avail[pos])
        picks.append(a)
        logps.append(logp[pos])
        ents.append(-(logp.exp() * logp).sum())
        mask[a] = True
        h_prev = enc.H[a]
        if t == 1:
            h_first = h_prev
    return picks, logps, ents


def decode_sequence(enc, k, mode, rng, P, cfg=None):
    """Select ``k`` distinct scenarios by sampling (seeded ``rng``) or greedy argmax."""
    cfg = cfg or P.config
    if mode == "greedy":
        def choose(t, avail, p):
            return int(np.argmax(p))
    elif mode == "sample":
        if rng is None:
            raise InvalidArgument("sample mode needs a random generator")

        def choose(t, avail, p):
            c = np.cumsum(p)
            return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(p) - 1))
    else:
        raise InvalidArgument(f"unknown decode mode {mode!r}")
    picks, logps, ents = _decode(enc, k, _p(P), cfg, choose)
    return DecodeTrace(tuple(picks), np.array([float(l.data) for l in logps]),
                       float(sum(float(e.data) for e in ents)))


def sequence_log_prob(enc, actions, P, cfg):
    """Differentiable ``(sum of log-probabilities, sum of step entropies)`` of a fixed order."""
    actions = [int(a) for a in actions]

    def choose(t, avail, p):
        hit = np.flatnonzero(avail == actions[t - 1])
        if hit.size == 0:
            raise InvalidArgument(f"action {actions[t - 1]} is not available at step {t}")
        return int(hit[0])
    _, logps, ents = _decode(enc, len(actions), P, cfg, choose)
    total, ent = logps[0], ents[0]
    for l, e in zip(logps[1:], ents[1:]):
        total, ent = total + l, ent + e
    return total, ent


# --------------------------------------------------------------------------- critic

def critic_value(enc, P, cfg=None):
    """Self-attention over scenario embeddings, mean pool, tanh MLP to a scalar."""
    if cfg is None:
        cfg = P.config
    P = _p(P)
    H = enc.H
    Q, K, V = H @ P["critic.Wq"], H @ P["critic.Wk"], H @ P["critic.Wv"]
    att = ((Q @ K.T) * (1.0 / np.sqrt(cfg.embed))).softmax(axis=-1)
    pooled = (att @ V).mean(axis=0)
    hidden = (pooled @ P["critic.W1"] + P["critic.b1"]).tanh()
    return (hidden @ P["critic.W2"] + P["critic.b2"]).reshape(())
