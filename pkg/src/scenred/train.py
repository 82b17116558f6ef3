"""Training loop: rollouts, PPO updates, metrics rows and checkpoints."""
from dataclasses import dataclass, field

import numpy as np

from .bench import error_pct, evaluate_selection
from .core import ReducedSelection, evaluate_first_stage
from .errors import NonFiniteLoss
from .mip import Solver
from .nn.policy import NetConfig, PolicyParams, decode_sequence, encode, policy_inputs
from .rl import Adam, Environment, PpoConfig, RewardConfig, ppo_update, rollout

METRIC_FIELDS = ["update", "epoch", "mean_reward", "mean_error_pct", "mean_match", "mean_work",
                 "loss", "actor_loss", "critic_loss", "entropy", "clip_fraction", "grad_norm"]


@dataclass
class TrainResult:
    params: PolicyParams
    metrics: list = field(default_factory=list)
    val_errors: list = field(default_factory=list)
    aborted: str = ""

    @property
    def best_val_error(self):
        return min(self.val_errors) if self.val_errors else float("nan")


class ErrorMemo:
    """errorPct of a first-stage vector on an instance, cached by (instance, x)."""

    def __init__(self, solver):
        self.solver = solver
        self._memo = {}

    def __call__(self, inst_id, inst, x):
        key = (inst_id, np.asarray(x, dtype=float).tobytes())
        if key not in self._memo:
            f, _ = evaluate_first_stage(inst, x, self.solver)
            self._memo[key] = error_pct(f, inst.optimum.value)
        return self._memo[key]


def greedy_selection(params, gi, k):
    enc = encode(gi, params)
    return ReducedSelection.uniform(decode_sequence(enc, k, "greedy", None, params).indices)


def train(train_set, k, seed, net=None, ppo=None, reward=None, solver=None, val_set=None,
          max_updates=None, on_update=None, inputs=None):
    """Train a fresh policy on ``train_set`` (a list of ``(id, instance)``).

    ``on_update(update, params, row)`` is called after every PPO update, which
    is where the caller writes metrics and periodic checkpoints.
    """
    net = net or NetConfig()
    ppo = ppo or PpoConfig()
    reward = reward or RewardConfig()
    solver = solver or Solver()
    params = PolicyParams.init(net, seed)
    rng = np.random.default_rng([seed, 1])
    inputs = dict(inputs or {})
    for iid, inst in list(train_set) + list(val_set or []):
        if iid not in inputs:
            inputs[iid] = policy_inputs(inst, net)
    env = Environment(reward, solver)
    err = ErrorMemo(solver)
    opt = Adam(weight_decay=ppo.weight_decay)
    result = TrainResult(params)
    update = 0
    for epoch in range(ppo.epochs):
        order = rng.permutation(len(train_set))
        for s in range(0, len(order), ppo.env_count):
            if max_updates is not None and update >= max_updates:
                return result
            batch = [train_set[i] for i in order[s:s + ppo.env_count]]
            exps = rollout(params, batch, k, rng, env, inputs)
            insts = dict(batch)
            errs = [err(e.instance_id, insts[e.instance_id], e.diag["x"]) for e in exps
                    if e.diag.get("x") is not None]
            try:
                params, stats = ppo_update(params, exps, ppo, rng, inputs, opt)
            except NonFiniteLoss as e:
                result.aborted = str(e)
                return result
            result.params = params
            update += 1
            row = {"update": update, "epoch": epoch + 1,
                   "mean_reward": float(np.mean([e.reward for e in exps])),
                   "mean_error_pct": float(np.mean(errs)) if errs else float("nan"),
                   "mean_match": float(np.mean([e.diag.get("match") or 0.0 for e in exps])),
                   "mean_work": float(np.mean([e.diag["work"].time_proxy(reward.node_weight)
                                               for e in exps if "work" in e.diag])),
                   **{k_: stats[k_] for k_ in METRIC_FIELDS[6:]}}
            result.metrics.append(row)
            if on_update is not None:
                on_update(update, params, row)
        if val_set:
            errs = [evaluate_selection(inst, greedy_selection(params, inputs[iid], k), solver).error_pct
                    for iid, inst in val_set]
            result.val_errors.append(float(np.mean(errs)))
    return result
