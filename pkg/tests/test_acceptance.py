"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL verdict; the lines are printed in the
pytest terminal summary (see conftest.py) and when the file is run directly.
"""
import itertools
import json
import time

import numpy as np
import pytest

from conftest import SMALL_NET, brute_force, gradient_check, random_mixed_binary
from scenred.bench import (baseline_kmedoids_instance, baseline_random, baseline_value_space,
                           evaluate_selection, order_cdf_experiment, pam, value_space_distances)
from scenred.cli import main as cli_main
from scenred.core import (ReducedSelection, SpInstance, build_extensive_form, gen_cflp, gen_ndp,
                          second_stage_problem, solve_instance)
from scenred.mip import GE, LE, Solver, solve_mip
from scenred.nn import NetConfig, PolicyParams, critic_value, encode, policy_inputs
from scenred.rl import PpoConfig, RewardConfig, compute_reward
from scenred.train import greedy_selection, train

VERDICTS = {}


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[n] = line
    print(line)
    return ok


# --------------------------------------------------------------------------- 1

def _enumerate_pure_binary(p):
    """Vectorised oracle for problems without continuous variables."""
    n = p.num_vars
    X = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    act = X @ p.rows.T - p.rhs
    ok = np.where(p.sense == LE, act <= 1e-9, np.where(p.sense == GE, act >= -1e-9, np.abs(act) <= 1e-9)).all(axis=1)
    ok &= np.all(X >= p.lo - 1e-9, axis=1) & np.all(X <= p.hi + 1e-9, axis=1)
    return (X[ok] @ p.objective).min() if ok.any() else np.inf


def test_c1_solver_oracle():
    rng = np.random.default_rng(2024)
    worst, solve_t = 0.0, 0.0
    for i in range(200):
        if i % 2 == 0:
            p = random_mixed_binary(rng, n_int=int(rng.integers(1, 13)), n_cont=0, m=int(rng.integers(1, 7)))
            ref = _enumerate_pure_binary(p)
        else:
            p = random_mixed_binary(rng, n_int=int(rng.integers(1, 9)), n_cont=int(rng.integers(1, 5)),
                                    m=int(rng.integers(1, 7)))
            ref = brute_force(p)
        t = time.perf_counter()
        res = solve_mip(p)
        solve_t += time.perf_counter() - t
        assert res.ok
        worst = max(worst, abs(res.objective - ref))
    ok = worst <= 1e-6 and solve_t < 60.0
    report(1, ok, f"200 mixed-binary problems, max |solve_mip - enumeration| = {worst:.2e}, "
                  f"solver time {solve_t:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 2

def test_c2_gradient_gate():
    cfg = NetConfig(**SMALL_NET)
    t = time.perf_counter()
    worst = 0.0
    for i in range(20):
        inst = gen_cflp(2, 3, 3, seed=500 + i) if i % 4 else gen_ndp(1, 1, 1, 3, seed=500 + i)
        worst = max(worst, gradient_check(inst, cfg, seed=i))
    el = time.perf_counter() - t
    ok = worst <= 1e-4 and el < 120.0
    report(2, ok, f"20 three-scenario instances, max relative gradient error {worst:.2e}, {el:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 3

def _desk_instances(count, seed0, solver):
    out = []
    for i in range(count):
        inst = gen_cflp(3, 5, 8, seed=seed0 + i) if i % 4 else gen_ndp(1, 1, 1, 6, seed=seed0 + i)
        out.append(inst.with_optimum(solve_instance(inst, solver)))
    return out


def test_c3_exact_at_full_k():
    solver = Solver()
    insts = _desk_instances(20, 700, solver)
    P = PolicyParams.init(NetConfig(), 0)
    worst = 0.0
    for n, inst in enumerate(insts):
        N = inst.num_scenarios
        sels = {"policy": greedy_selection(P, policy_inputs(inst, P.config), N),
                "random": baseline_random(N, N, n),
                "kmedoids": baseline_kmedoids_instance(inst, N, n),
                "valueSpace": baseline_value_space(inst, N, solver, n)}
        for m, sel in sels.items():
            worst = max(worst, abs(evaluate_selection(inst, sel, solver).error_pct))
    ok = worst <= 1e-4
    report(3, ok, f"20 instances x 4 methods at k = N, max |errorPct| = {worst:.2e}")
    assert ok


# --------------------------------------------------------------------------- 4

def _unique_reduced_optimum(inst, sel, solver, margin=1e-6):
    """True if the reduced problem's best first stage beats every other by ``margin``."""
    vals = []
    for z in itertools.product((0.0, 1.0), repeat=inst.n1):
        x = np.array(z)
        total = float(inst.first_stage.c @ x)
        try:
            for i, w in zip(sel.indices, sel.weights):
                r = solver.mip(second_stage_problem(inst, i, x))
                if not r.ok:
                    raise ValueError
                total += w * r.objective
        except ValueError:
            continue
        vals.append(total)
    vals = np.sort(vals)
    return len(vals) > 1 and vals[1] - vals[0] > margin * max(1.0, abs(vals[0]))


def test_c4_permutation_laws():
    solver = Solver()
    P = PolicyParams.init(NetConfig(), 3)
    worst = 0.0
    rng = np.random.default_rng(4)
    for s in range(5):
        inst = gen_cflp(3, 5, 10, seed=800 + s)
        perm = rng.permutation(inst.num_scenarios)
        shuffled = SpInstance(inst.first_stage, [inst.scenarios[i] for i in perm])
        e, ep = encode(policy_inputs(inst, P.config), P), encode(policy_inputs(shuffled, P.config), P)
        worst = max(worst, np.abs(ep.H.data - e.H.data[perm]).max(), np.abs(ep.hbar.data - e.hbar.data).max(),
                    abs(critic_value(ep, P).item() - critic_value(e, P).item()))
    checked, spread = 0, 0.0
    for inst in _desk_instances(6, 900, solver):
        if inst.n1 > 4:
            continue
        sel = ReducedSelection((1, 4, 6), [0.5, 0.3, 0.2])
        if not _unique_reduced_optimum(inst, sel, solver):
            continue
        errs = [evaluate_selection(inst, sel.reordered(o), solver).error_pct for o in itertools.permutations(range(3))]
        spread = max(spread, max(errs) - min(errs))
        checked += 1
    ok = worst <= 1e-9 and checked > 0 and spread <= 1e-9
    report(4, ok, f"equivariance/invariance max deviation {worst:.1e}; errorPct spread over reorderings "
                  f"{spread:.1e} on {checked} unique-optimum instances")
    assert ok


# --------------------------------------------------------------------------- 5

def test_c5_reward_law():
    rng = np.random.default_rng(5)
    exact = monotone = True
    for _ in range(1000):
        t, M, a = rng.uniform(0, 1e4), -float(rng.integers(0, 20)), rng.uniform(1e-4, 1 - 1e-4)
        cfg = RewardConfig(alpha=a)
        r = compute_reward(t, M, cfg)
        exact &= r == -(1 - a) * t + a * M
        dt = rng.uniform(1e-3, 10)
        monotone &= compute_reward(t + dt, M, cfg) < r < compute_reward(t, M + 1.0, cfg)
    ok = bool(exact and monotone)
    report(5, ok, f"1000 (t, M, alpha) triples: closed form exact={exact}, monotone={monotone}")
    assert ok


# --------------------------------------------------------------------------- 6

def test_c6_cssc_discrepancy():
    solver = Solver()
    insts = _desk_instances(20, 1100, solver)
    diag_ok = nonneg_ok = True
    matched = ties = total = 0
    for inst in insts:
        d = value_space_distances(inst, solver)
        diag_ok &= bool(np.all(np.diag(d) == 0.0))
        nonneg_ok &= bool(np.all(d >= 0.0))
        if inst.num_scenarios > 8:
            continue
        D = d + d.T
        for k in (1, 2, 3):
            meds, cost = pam(D, k, seed=0)
            costs = {c: D[:, list(c)].min(axis=1).sum() for c in itertools.combinations(range(len(D)), k)}
            best = min(costs.values())
            optimal = [c for c, v in costs.items() if v <= best + 1e-9 * max(1.0, best)]
            total += 1
            if len(optimal) == 1:
                matched += tuple(meds) == optimal[0]
            else:
                ties += 1
                matched += tuple(meds) in optimal
    ok = diag_ok and nonneg_ok and matched == total
    report(6, ok, f"d(i,i)=0: {diag_ok}, d>=0: {nonneg_ok}; medoid sets equal to exhaustive oracle "
                  f"{matched}/{total} (of which {ties} had tied optimal sets)")
    assert ok


# --------------------------------------------------------------------------- 7 and 8

SMOKE_SEEDS = (0, 1, 2, 3, 4)
SMOKE_TRAIN = 32
SMOKE_UPDATES = 60
SMOKE_BUDGET = 30 * 60


@pytest.fixture(scope="module")
def smoke():
    """Generate the CFLP_5_10_30 smoke sets, train one policy per seed, evaluate."""
    t0 = time.perf_counter()
    solver = Solver()
    train_set, held = [], []
    for seed, bucket, tag in [(2000 + i, train_set, "t") for i in range(SMOKE_TRAIN)] + \
            [(3000 + i, held, "h") for i in range(16)]:
        inst = gen_cflp(5, 10, 30, seed=seed)
        bucket.append((f"{tag}{seed % 1000:02d}", inst.with_optimum(solve_instance(inst, solver))))
    gen_s = time.perf_counter() - t0
    net = NetConfig()
    ppo = PpoConfig(env_count=16, minibatch=16, epochs=SMOKE_UPDATES * 16 // SMOKE_TRAIN)
    reward = RewardConfig(alpha=0.9, time_scale=1e5)
    inputs = {iid: policy_inputs(inst, net) for iid, inst in train_set + held}
    policy_err, random_err, policies = [], [], {}
    for seed in SMOKE_SEEDS:
        res = train(train_set, 3, seed, net, ppo, reward, solver, max_updates=SMOKE_UPDATES, inputs=inputs)
        policies[seed] = res.params
        policy_err.append(np.mean([evaluate_selection(inst, greedy_selection(res.params, inputs[iid], 3),
                                                      solver).error_pct for iid, inst in held]))
        random_err.append(np.mean([evaluate_selection(inst, baseline_random(30, 3, seed * 1000 + n),
                                                      solver).error_pct for n, (iid, inst) in enumerate(held)]))
    return {"held": held, "inputs": inputs, "policies": policies, "solver": solver,
            "policy_err": policy_err, "random_err": random_err,
            "seconds": time.perf_counter() - t0, "generate_seconds": gen_s}


def test_c7_training_smoke(smoke):
    pe, re_ = float(np.mean(smoke["policy_err"])), float(np.mean(smoke["random_err"]))
    ok = pe <= re_ and smoke["seconds"] <= SMOKE_BUDGET
    per_seed = ", ".join(f"{p:.1f}/{r:.1f}" for p, r in zip(smoke["policy_err"], smoke["random_err"]))
    report(7, ok, f"held-out mean errorPct policy {pe:.2f} vs random {re_:.2f} over {len(SMOKE_SEEDS)} seeds "
                  f"(per seed policy/random: {per_seed}); {smoke['seconds'] / 60:.1f} min incl. "
                  f"{smoke['generate_seconds'] / 60:.1f} min data generation")
    assert ok


def test_c8_ordering_effect(smoke):
    pct = []
    for seed, params in smoke["policies"].items():
        per = [order_cdf_experiment(inst, greedy_selection(params, smoke["inputs"][iid], 3), 50, [seed, n],
                                    smoke["solver"])[0] for n, (iid, inst) in enumerate(smoke["held"])]
        pct.append(float(np.mean(per)))
    mean = float(np.mean(pct))
    ok = mean < 0.5
    report(8, ok, f"pooled percentile of policy order vs 50 shuffles = {mean:.3f} "
                  f"(per seed {', '.join(f'{p:.3f}' for p in pct)})")
    assert ok


# --------------------------------------------------------------------------- 9

def _pipeline(root):
    cfg = {"k": 2, "seed": 7, "seeds": [7],
           "problem": {"family": "CFLP", "facilities": 2, "customers": 4, "scenarios": 6, "count": 4, "seed": 3},
           "reward": {"alpha": 0.5, "time_scale": 1000.0},
           "ppo": {"env_count": 2, "minibatch": 2, "update_epochs": 2},
           "net": {"hidden_low": 8, "f1": 8, "hidden_high": 8, "embed": 8, "heads": 2, "critic_hidden": 4},
           "train": {"max_updates": 2, "checkpoint_every": 1},
           "paths": {"dataset": str(root / "data"), "out": str(root / "out")}}
    root.mkdir(parents=True)
    path = root / "cfg.json"
    path.write_text(json.dumps(cfg))
    for argv in (["generate"], ["train"], ["evaluate", "--checkpoint", str(root / "out" / "policy.json")]):
        assert cli_main(argv + ["--config", str(path)]) == 0
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.suffix in (".csv", ".json") and p.name != "cfg.json"}


def test_c9_determinism(tmp_path):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")

    def norm(blob, root):
        return blob.replace(str(tmp_path / root).encode(), b"ROOT")
    same = a.keys() == b.keys() and all(norm(a[k], "a") == norm(b[k], "b") for k in a)
    kinds = sorted({k.suffix for k in a})
    has_ckpt = any("checkpoints" in str(k) for k in a) and any(k.name == "report.csv" for k in a)
    ok = same and has_ckpt
    report(9, ok, f"generate -> train(2 updates) -> evaluate twice: {len(a)} artifacts {kinds} byte-identical={same}")
    assert ok


# --------------------------------------------------------------------------- 10

def test_c10_size_identities():
    n1 = gen_ndp(2, 2, 10, 2, seed=0).n1
    bad = 0
    checked = 0
    rng = np.random.default_rng(10)
    insts = [gen_cflp(3, 4, 6, seed=s) for s in range(5)] + [gen_ndp(2, 2, 3, 4, seed=s) for s in range(3)] + \
            [gen_cflp(5, 10, 30, seed=1)]
    for inst in insts:
        for k in range(1, inst.num_scenarios + 1):
            sel = ReducedSelection.uniform(rng.permutation(inst.num_scenarios)[:k])
            p = build_extensive_form(inst, sel)
            checked += 1
            bad += (p.num_vars, p.num_rows) != (inst.n1 + k * inst.n2, inst.m1 + k * inst.m2)
        full = build_extensive_form(inst)
        bad += (full.num_vars, full.num_rows) != (inst.n1 + inst.num_scenarios * inst.n2,
                                                  inst.m1 + inst.num_scenarios * inst.m2)
    ok = n1 == 178 and bad == 0
    report(10, ok, f"gen_ndp(2,2,10) first stage has {n1} variables; EF dimension mismatches {bad}/{checked + len(insts)}")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
