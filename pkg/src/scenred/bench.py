"""Evaluation harness and classical scenario-reduction baselines."""
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (ReducedSelection, build_extensive_form, evaluate_first_stage,
                   second_stage_problem)
from .errors import InfeasibleScenario, InvalidArgument, InvalidState
from .graphs import flatten_uncertain
from .mip import Solver, Status, WorkMetric


@dataclass
class EvalReport:
    instance_id: str
    method: str
    k: int
    error_pct: float
    reduced_objective: float
    full_f: float
    v_star: float
    work: WorkMetric = field(default_factory=WorkMetric)
    wall_seconds: float = float("nan")
    status: str = "Optimal"
    seed: int | None = None
    indices: tuple = ()


def error_pct(full_f, v_star):
    return 100.0 * (full_f - v_star) / abs(v_star)


def evaluate_selection(inst, sel, solver=None, instance_id="", method="", seed=None):
    """Solve the reduced problem in ``sel`` order and price its first stage on all scenarios."""
    if inst.optimum is None:
        raise InvalidState("instance has no cached optimum")
    solver = solver or Solver()
    v_star = inst.optimum.value
    t0 = time.perf_counter()
    res = solver.mip(build_extensive_form(inst, sel))
    rep = EvalReport(instance_id, method, sel.k, float("nan"), res.objective, float("nan"), v_star,
                     res.work, status=res.status.value, seed=seed, indices=sel.indices)
    if res.x is not None and res.status in (Status.OPTIMAL, Status.NODE_LIMIT):
        try:
            rep.full_f, _ = evaluate_first_stage(inst, res.x[:inst.n1], solver)
            rep.error_pct = error_pct(rep.full_f, v_star)
        except InfeasibleScenario as e:
            rep.status = f"RecourseInfeasible[{e.index}]"
    rep.wall_seconds = time.perf_counter() - t0
    return rep


# --------------------------------------------------------------------------- baselines

def baseline_random(N, k, seed):
    """SAA-style uniform sample without replacement, in draw order, weights 1/k."""
    if not 1 <= k <= N:
        raise InvalidArgument(f"k={k} must lie in [1, {N}]")
    idx = np.random.default_rng(seed).choice(N, size=k, replace=False)
    return ReducedSelection.uniform([int(i) for i in idx])


def _assign(D, medoids):
    sub = D[:, medoids]
    return np.argmin(sub, axis=1), sub.min(axis=1).sum()


def pam(D, k, seed=0, restarts=4):
    """k-medoids on a distance matrix: BUILD then SWAP, best over seeded restarts.

    Returns the medoid indices (unordered) and the total assignment cost.
    """
    D = np.asarray(D, dtype=float)
    N = D.shape[0]
    if D.shape != (N, N):
        raise InvalidArgument("distance matrix must be square")
    if not 1 <= k <= N:
        raise InvalidArgument(f"k={k} must lie in [1, {N}]")

    def build():
        meds = [int(np.argmin(D.sum(axis=0)))]
        near = D[:, meds[0]].copy()
        while len(meds) < k:
            gain = np.maximum(near[:, None] - D, 0.0).sum(axis=0)
            gain[meds] = -np.inf
            j = int(np.argmax(gain))
            meds.append(j)
            near = np.minimum(near, D[:, j])
        return meds

    def swap(meds):
        meds = list(meds)
        _, cost = _assign(D, meds)
        while True:
            best = (cost - 1e-12, None, None)
            for mi in range(k):
                for o in range(N):
                    if o in meds:
                        continue
                    trial = meds[:mi] + [o] + meds[mi + 1:]
                    _, c = _assign(D, trial)
                    if c < best[0]:
                        best = (c, mi, o)
            if best[1] is None:
                return meds, cost
            meds[best[1]] = best[2]
            cost = best[0]

    rng = np.random.default_rng(seed)
    best_meds, best_cost = swap(build())
    for _ in range(restarts):
        meds, cost = swap([int(i) for i in rng.choice(N, size=k, replace=False)])
        if cost < best_cost - 1e-12:
            best_meds, best_cost = meds, cost
    return sorted(best_meds), best_cost


def clusters_to_selection(D, medoids):
    """Medoids ordered by cluster size (descending, ties by index), weights = cluster fractions."""
    medoids = sorted(int(m) for m in medoids)
    D = np.asarray(D, dtype=float)
    lab, _ = _assign(D, medoids)
    lab[medoids] = np.arange(len(medoids))   # a medoid always belongs to its own cluster
    sizes = np.bincount(lab, minlength=len(medoids))
    order = sorted(range(len(medoids)), key=lambda i: (-sizes[i], medoids[i]))
    return ReducedSelection([medoids[i] for i in order], sizes[order] / D.shape[0])


def baseline_kmedoids(vectors, k, seed, restarts=4):
    V = np.asarray(vectors, dtype=float)
    D = np.linalg.norm(V[:, None, :] - V[None, :, :], axis=2)
    meds, _ = pam(D, k, seed, restarts)
    return clusters_to_selection(D, meds)


def value_space_distances(inst, solver=None, tol=1e-6):
    """``d[i, j] = f_j(x*_i) - f_j(x*_j)`` with ``f_j`` the single-scenario-j objective.

    Solver-tolerance negatives are clamped to 0; anything below ``-tol``
    (relative) means a single-scenario solve was not optimal and raises.
    """
    solver = solver or Solver()
    N = inst.num_scenarios
    c = inst.first_stage.c
    xs, own = [], np.empty(N)
    for i in range(N):
        res = solver.mip(build_extensive_form(inst, ReducedSelection([i], [1.0])))
        if not res.ok:
            raise InfeasibleScenario(i, f"single-scenario problem {i}: {res.status.value}")
        xs.append(res.x[:inst.n1].copy())
        own[i] = res.objective
    d = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            res = solver.mip(second_stage_problem(inst, j, xs[i]))
            if not res.ok:
                raise InfeasibleScenario(j, f"scenario {j} has no recourse for x*_{i}")
            d[i, j] = float(c @ xs[i]) + res.objective - own[j]
    floor = -tol * np.maximum(1.0, np.abs(own))[None, :]
    if np.any(d < floor):
        i, j = np.unravel_index(np.argmin(d - floor), d.shape)
        raise InvalidState(f"negative substitution cost d[{i},{j}] = {d[i, j]}")
    return np.maximum(d, 0.0)


def baseline_value_space(inst, k, solver=None, seed=0, restarts=4):
    d = value_space_distances(inst, solver)
    D = d + d.T
    meds, _ = pam(D, k, seed, restarts)
    return clusters_to_selection(D, meds)


def baseline_kmedoids_instance(inst, k, seed, restarts=4):
    return baseline_kmedoids([flatten_uncertain(s) for s in inst.scenarios], k, seed, restarts)


# --------------------------------------------------------------------------- ordering study

def order_cdf_experiment(inst, sel, shuffles, seed, solver=None, node_weight=1.0, time_scale=1.0):
    """Work of the given order versus ``shuffles`` seeded random orders of the same set.

    Returns ``(percentile, samples, model_time)`` where ``percentile`` is the
    fraction of shuffled orders strictly faster than the given one.
    """
    if shuffles < 1:
        raise InvalidArgument("need at least one shuffle")
    solver = solver or Solver()
    memo = {}

    def cost(s):
        key = s.indices
        if key not in memo:
            memo[key] = solver.mip(build_extensive_form(inst, s)).work.time_proxy(node_weight, time_scale)
        return memo[key]

    model = cost(sel)
    rng = np.random.default_rng(seed)
    samples = np.array([cost(sel.reordered(rng.permutation(sel.k))) for _ in range(shuffles)])
    return float(np.mean(samples < model)), samples, model
