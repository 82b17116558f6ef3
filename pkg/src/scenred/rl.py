"""Single-step scenario-selection environment, reward and PPO."""
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ReducedSelection, build_extensive_form
from .errors import InvalidArgument, InvalidState, NonFiniteLoss
from .mip import Solver, Status, WorkMetric
from .nn.autodiff import grad, minimum
from .nn.policy import critic_value, decode_sequence, encode, sequence_log_prob


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.001
    node_weight: float = 1.0
    time_scale: float = 1.0
    fail_reward: float = -1e6

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgument(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if self.node_weight < 0.0 or self.time_scale <= 0.0:
            raise InvalidArgument("need node_weight >= 0 and time_scale > 0")


def compute_match(x_tilde, x_star):
    """Negative Manhattan distance between two first-stage vectors."""
    a = np.asarray(x_tilde, dtype=float)
    b = np.asarray(x_star, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"length mismatch {a.shape} vs {b.shape}")
    return -float(np.abs(a - b).sum())


def compute_reward(work, M, cfg):
    t = work.time_proxy(cfg.node_weight, cfg.time_scale) if isinstance(work, WorkMetric) else float(work)
    return -(1.0 - cfg.alpha) * t + cfg.alpha * M


def env_step(inst, actions, cfg, solver=None):
    """Solve the reduced problem over ``actions`` (in that order) and score it.

    Returns ``(reward, diagnostics)``; diagnostics carry ``x``, ``work``,
    ``objective``, ``status``, ``match`` and a ``flag`` for degraded outcomes.
    """
    if inst.optimum is None:
        raise InvalidState("instance has no cached optimum")
    solver = solver or Solver()
    sel = ReducedSelection.uniform(actions)
    sel.check(inst.num_scenarios)
    res = solver.mip(build_extensive_form(inst, sel))
    diag = {"status": res.status.value, "work": res.work, "objective": res.objective, "x": None,
            "match": None, "flag": ""}
    if res.x is None or res.status not in (Status.OPTIMAL, Status.NODE_LIMIT):
        diag["flag"] = "no-incumbent"
        return cfg.fail_reward, diag
    x = res.x[:inst.n1].copy()
    M = compute_match(x, inst.optimum.x)
    diag.update(x=x, match=M, flag="" if res.ok else "node-limit")
    return compute_reward(res.work, M, cfg), diag


@dataclass
class Experience:
    instance_id: str
    actions: tuple
    log_prob: float
    reward: float
    value: float
    advantage: float = 0.0
    ret: float = 0.0
    diag: dict = field(default_factory=dict, repr=False, compare=False)


class Environment:
    """Memoised env_step: a reduced solve is a pure function of (instance, ordered actions)."""

    def __init__(self, cfg, solver=None):
        self.cfg = cfg
        self.solver = solver or Solver()
        self._memo = {}

    def step(self, inst_id, inst, actions):
        key = (inst_id, tuple(int(a) for a in actions))
        hit = self._memo.get(key)
        if hit is None:
            hit = env_step(inst, actions, self.cfg, self.solver)
            self._memo[key] = hit
        return hit


def rollout(params, batch, k, rng, env, inputs):
    """One sampled episode per ``(instance_id, instance)`` in ``batch``.

    ``inputs`` maps instance ids to their GraphInputs. An environment failure
    on one instance yields a record with the configured failure reward and the
    error text in ``diag`` rather than aborting the batch.
    """
    out = []
    for inst_id, inst in batch:
        enc = encode(inputs[inst_id], params)
        trace = decode_sequence(enc, k, "sample", rng, params)
        value = float(critic_value(enc, params))
        try:
            reward, diag = env.step(inst_id, inst, trace.indices)
        except Exception as e:  # noqa: BLE001 - reported per record
            reward, diag = env.cfg.fail_reward, {"error": f"{type(e).__name__}: {e}", "flag": "error"}
        out.append(Experience(inst_id, trace.indices, float(trace.log_probs.sum()), float(reward), value,
                              float(reward) - value, float(reward), diag))
    return out


@dataclass(frozen=True)
class PpoConfig:
    lr_actor: float = 2.5e-4
    lr_critic: float = 2.5e-4
    clip: float = 0.2
    gae_lambda: float = 0.95      # inert for single-step episodes
    vf_coef: float = 0.5
    minibatch: int = 16
    update_epochs: int = 10
    env_count: int = 16
    epochs: int = 10
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    weight_decay: float = 1e-4
    normalize_advantages: bool = True

    def __post_init__(self):
        if self.clip <= 0.0 or self.minibatch < 1:
            raise InvalidArgument("need clip > 0 and minibatch >= 1")

    def to_dict(self):
        return asdict(self)


class Adam:
    """Adam with decoupled weight decay; state is keyed by parameter name."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.beta1, self.beta2, self.eps, self.weight_decay = beta1, beta2, eps, weight_decay
        self.m, self.v, self.t = {}, {}, 0

    def step(self, values, grads, lrs):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = {}
        for k, p in values.items():
            g = grads[k]
            m = self.m.get(k, np.zeros_like(p)) * b1 + (1 - b1) * g
            v = self.v.get(k, np.zeros_like(p)) * b2 + (1 - b2) * g * g
            self.m[k], self.v[k] = m, v
            lr = lrs[k]
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            out[k] = p - lr * (mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * p)
        return out


def _minibatch_loss(P, exps, inputs, cfg, net_cfg, adv):
    actor = critic = entropy = 0.0
    clipped = 0
    n = len(exps)
    for e, a in zip(exps, adv):
        enc = encode(inputs[e.instance_id], P, net_cfg.readout_norm)
        lp, ent = sequence_log_prob(enc, e.actions, P, net_cfg)
        ratio = (lp - e.log_prob).exp()
        surr = minimum(ratio * a, ratio.clip(1.0 - cfg.clip, 1.0 + cfg.clip) * a)
        v = critic_value(enc, P, net_cfg)
        actor = actor - surr
        critic = critic + (v - e.ret) ** 2
        entropy = entropy + ent
        clipped += int(abs(float(ratio) - 1.0) > cfg.clip)
    actor, critic, entropy = actor * (1.0 / n), critic * (1.0 / n), entropy * (1.0 / n)
    total = actor + critic * cfg.vf_coef - entropy * cfg.entropy_coef
    total.stats = (float(actor), float(critic), float(entropy), clipped / n)
    return total


def ppo_update(params, batch, cfg, rng, inputs, optimizer=None):
    """Clipped-surrogate PPO over ``batch`` for ``cfg.update_epochs`` passes.

    Returns the new parameters and per-update statistics. A non-finite loss
    raises ``NonFiniteLoss`` before any parameter of that minibatch changes.
    """
    if not batch:
        raise InvalidArgument("empty experience batch")
    opt = optimizer or Adam(weight_decay=cfg.weight_decay)
    net_cfg = params.config
    lrs = {k: cfg.lr_critic if k.startswith("critic.") else cfg.lr_actor for k in params.names()}
    values = dict(params.values)
    rows = []
    mb_index = 0
    for _ in range(cfg.update_epochs):
        order = rng.permutation(len(batch))
        for s in range(0, len(batch), cfg.minibatch):
            exps = [batch[i] for i in order[s:s + cfg.minibatch]]
            adv = np.array([e.advantage for e in exps])
            if cfg.normalize_advantages and len(adv) > 1 and adv.std() > 1e-12:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            holder = {}

            def loss_fn(P):
                out = _minibatch_loss(P, exps, inputs, cfg, net_cfg, adv)
                holder["stats"] = out.stats
                return out
            loss, g = grad(loss_fn, values)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(v)) for v in g.values()):
                raise NonFiniteLoss(mb_index, loss)
            norm = float(np.sqrt(sum(float((v * v).sum()) for v in g.values())))
            if cfg.max_grad_norm and norm > cfg.max_grad_norm:
                g = {k: v * (cfg.max_grad_norm / norm) for k, v in g.items()}
            values = opt.step(values, g, lrs)
            a, c, ent, cf = holder["stats"]
            rows.append((loss, a, c, ent, cf, norm))
            mb_index += 1
    arr = np.array(rows)
    stats = {"loss": float(arr[:, 0].mean()), "actor_loss": float(arr[:, 1].mean()),
             "critic_loss": float(arr[:, 2].mean()), "entropy": float(arr[:, 3].mean()),
             "clip_fraction": float(arr[:, 4].mean()), "grad_norm": float(arr[:, 5].mean()),
             "minibatches": int(len(rows))}
    return params.replace(values), stats
