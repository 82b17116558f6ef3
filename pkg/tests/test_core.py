import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from scenred.core import (BIN, ReducedSelection, augment_instance, build_extensive_form,
                          evaluate_first_stage, gen_cflp, gen_ndp, load_instance, ndp_edges,
                          save_instance, solve_instance)
from scenred.errors import InvalidArgument
from scenred.mip import EQ, GE, LE


def highs_mip(p):
    s = p.sense
    lo = np.where(s == GE, p.rhs, -np.inf)
    hi = np.where(s == LE, p.rhs, np.inf)
    lo[s == EQ] = hi[s == EQ] = p.rhs[s == EQ]
    res = milp(p.objective, constraints=LinearConstraint(p.rows, lo, hi),
               integrality=p.integrality.astype(int), bounds=Bounds(p.lo, p.hi))
    assert res.status == 0
    return res.fun


def test_cflp_dimensions():
    inst = gen_cflp(5, 10, 7, seed=0)
    assert (inst.n1, inst.m1) == (5, 1)
    assert (inst.n2, inst.m2) == (5 * 10 + 5, 2 * 5 + 10)
    assert inst.num_scenarios == 7
    assert np.isclose(inst.probs.sum(), 1.0)
    assert np.all(inst.first_stage.kinds == BIN)


def test_ndp_first_stage_count():
    inst = gen_ndp(2, 2, 10, 3, seed=0)
    assert inst.n1 == 178 == len(ndp_edges(2, 2, 10))


@pytest.mark.parametrize("k", [1, 3])
def test_ef_dimensions(k):
    inst = gen_cflp(3, 4, 5, seed=1)
    sel = ReducedSelection.uniform(range(k))
    p = build_extensive_form(inst, sel)
    assert p.num_vars == inst.n1 + k * inst.n2
    assert p.num_rows == inst.m1 + k * inst.m2


def test_generators_deterministic():
    a, b = gen_cflp(3, 4, 5, seed=9), gen_cflp(3, 4, 5, seed=9)
    assert all(np.array_equal(x.h, y.h) and np.array_equal(x.W, y.W) for x, y in zip(a.scenarios, b.scenarios))
    c = gen_cflp(3, 4, 5, seed=10)
    assert not all(np.array_equal(x.W, y.W) for x, y in zip(a.scenarios, c.scenarios))


def test_enumerated_optimum_matches_highs(small_cflp):
    ref = highs_mip(build_extensive_form(small_cflp))
    assert small_cflp.optimum.value == pytest.approx(ref, rel=1e-7)


def test_ef_optimum_matches_highs(solver):
    inst = gen_cflp(2, 3, 3, seed=4)
    p = build_extensive_form(inst)
    assert solver.mip(p).objective == pytest.approx(highs_mip(p), rel=1e-7)


def test_evaluate_first_stage_consistent(small_cflp, solver):
    f, Q = evaluate_first_stage(small_cflp, small_cflp.optimum.x, solver)
    assert f == pytest.approx(small_cflp.optimum.value)
    assert np.all(np.isfinite(Q))
    f_cut, Q_cut = evaluate_first_stage(small_cflp, small_cflp.optimum.x, solver, cutoff=f * 0.5)
    assert f_cut >= f * 0.5 and np.isnan(Q_cut).any()


def test_round_trip(tmp_path, small_cflp):
    path = tmp_path / "inst.json"
    save_instance(small_cflp, path)
    back = load_instance(path)
    assert back.optimum.value == small_cflp.optimum.value
    for a, b in zip(back.scenarios, small_cflp.scenarios):
        assert np.array_equal(a.W, b.W) and np.array_equal(a.h, b.h) and np.array_equal(a.y_hi, b.y_hi)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 2.0))
def test_augment_scales_optimum(factor):
    inst = gen_cflp(2, 3, 3, seed=2)
    opt = solve_instance(inst)
    aug = augment_instance(inst.with_optimum(opt), factor, factor, seed=0)
    assert aug.optimum.value == pytest.approx(opt.value * factor)
    assert solve_instance(aug).value == pytest.approx(opt.value * factor, rel=1e-7)


def test_selection_validation():
    with pytest.raises(InvalidArgument):
        ReducedSelection((0, 0), [0.5, 0.5])
    with pytest.raises(InvalidArgument):
        ReducedSelection((0, 1), [0.5, 0.6])
    sel = ReducedSelection((3, 1, 2), [0.2, 0.3, 0.5])
    r = sel.reordered([2, 0, 1])
    assert r.indices == (2, 3, 1) and np.allclose(r.weights, [0.5, 0.2, 0.3])
    with pytest.raises(InvalidArgument):
        sel.check(3)


def test_bad_generator_counts():
    with pytest.raises(InvalidArgument):
        gen_cflp(0, 3, 3, seed=0)
    with pytest.raises(InvalidArgument):
        gen_ndp(1, 1, 1, 0, seed=0)
