import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SMALL_NET
from scenred.core import ReducedSelection, build_extensive_form
from scenred.errors import InvalidArgument
from scenred.mip import WorkMetric
from scenred.nn import NetConfig, PolicyParams, policy_inputs
from scenred.rl import (Adam, Environment, PpoConfig, RewardConfig, compute_match, compute_reward,
                        env_step, ppo_update, rollout)


@settings(max_examples=200)
@given(st.floats(0, 1e6), st.floats(1e-3, 1e3), st.floats(-50, 0), st.floats(0.01, 0.99))
def test_reward_monotone(t, dt, M, alpha):
    cfg = RewardConfig(alpha=alpha)
    r = compute_reward(t, M, cfg)
    assert r == -(1 - alpha) * t + alpha * M
    assert compute_reward(t + dt, M, cfg) < r
    assert compute_reward(t, M + 1.0, cfg) > r


def test_reward_from_work():
    cfg = RewardConfig(alpha=0.5, node_weight=10.0, time_scale=100.0)
    w = WorkMetric(simplex_pivots=300, bnb_nodes=20)
    assert compute_reward(w, -2.0, cfg) == pytest.approx(-0.5 * 5.0 - 1.0)


def test_reward_config_bounds():
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidArgument):
            RewardConfig(alpha=a)


def test_match():
    assert compute_match([1, 0, 1], [1, 1, 0]) == -2.0
    assert compute_match([1, 0], [1, 0]) == 0.0
    with pytest.raises(InvalidArgument):
        compute_match([1, 0], [1, 0, 0])


def test_env_step_full_set_matches(small_cflp, solver):
    r, diag = env_step(small_cflp, tuple(range(small_cflp.num_scenarios)), RewardConfig(), solver)
    assert diag["match"] == 0.0
    assert diag["objective"] == pytest.approx(small_cflp.optimum.value)
    assert r == compute_reward(diag["work"], 0.0, RewardConfig())


def test_environment_memo(small_cflp, solver):
    env = Environment(RewardConfig(), solver)
    a = env.step("a", small_cflp, (0, 2))
    b = env.step("a", small_cflp, (0, 2))
    assert a is b
    assert env.step("a", small_cflp, (2, 0))[1]["work"] == solver.mip(
        build_extensive_form(small_cflp, ReducedSelection.uniform([2, 0]))).work


def test_rollout_and_update(tiny_cflps, solver):
    cfg = NetConfig(**SMALL_NET)
    P = PolicyParams.init(cfg, 0)
    batch = [(f"i{j}", inst) for j, inst in enumerate(tiny_cflps)]
    inputs = {iid: policy_inputs(inst, cfg) for iid, inst in batch}
    env = Environment(RewardConfig(alpha=0.5, time_scale=100.0), solver)
    exps = rollout(P, batch, 2, np.random.default_rng(0), env, inputs)
    again = rollout(P, batch, 2, np.random.default_rng(0), env, inputs)
    assert [e.actions for e in exps] == [e.actions for e in again]
    assert all(len(set(e.actions)) == 2 and e.log_prob <= 0 for e in exps)
    ppo = PpoConfig(minibatch=2, update_epochs=2)
    P2, stats = ppo_update(P, exps, ppo, np.random.default_rng(1), inputs)
    assert stats["minibatches"] == 4
    assert not P2.equals(P)
    assert np.isfinite(stats["loss"]) and stats["grad_norm"] >= 0
    P3, _ = ppo_update(P, exps, ppo, np.random.default_rng(1), inputs)
    assert P3.equals(P2)


def test_rollout_records_failures(tiny_cflps, solver):
    cfg = NetConfig(**SMALL_NET)
    P = PolicyParams.init(cfg, 0)
    inst = tiny_cflps[0].with_optimum(None)
    env = Environment(RewardConfig(fail_reward=-7.0), solver)
    exps = rollout(P, [("x", inst)], 2, np.random.default_rng(0), env, {"x": policy_inputs(inst, cfg)})
    assert exps[0].reward == -7.0 and "error" in exps[0].diag


def test_adam_matches_torch_adamw():
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(0)
    p0 = rng.normal(size=(3, 4))
    grads = [rng.normal(size=(3, 4)) for _ in range(5)]
    opt = Adam(weight_decay=0.1)
    vals = {"w": p0.copy()}
    for g in grads:
        vals = opt.step(vals, {"w": g}, {"w": 0.01})
    tp = torch.nn.Parameter(torch.tensor(p0))
    topt = torch.optim.AdamW([tp], lr=0.01, weight_decay=0.1, eps=1e-8)
    for g in grads:
        tp.grad = torch.tensor(g)
        topt.step()
    assert np.allclose(vals["w"], tp.detach().numpy(), atol=1e-12)
