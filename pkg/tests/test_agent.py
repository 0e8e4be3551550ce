import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmilp.agent import (
    Agent,
    AlgoConfig,
    StepSchedule,
    allocation_update,
    default_penalty,
    inner_dual_subgradient,
    local_lp_cost_via_duality,
    project_capped_simplex,
    recover_mixed_integer,
    solve_relaxed_subproblem,
)
from pdmilp.hull import hull_points, integer_points
from pdmilp.model import GeneratorParams, generate_random


def test_step_schedule():
    s = StepSchedule(2.0, 1.0)
    assert s(0) == 2.0 and s(3) == 0.5
    with pytest.raises(ValueError):
        StepSchedule(1.0, 0.5)
    with pytest.raises(ValueError):
        StepSchedule(0.0, 0.8)


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        AlgoConfig(M=0.0)
    with pytest.raises(ValueError):
        AlgoConfig(delta=-1)
    with pytest.raises(ValueError):
        AlgoConfig(inner_iters=0)
    cfg = AlgoConfig(M=5.0, step=StepSchedule(0.3, 0.7), mode="inner_subgradient")
    assert AlgoConfig.from_dict(cfg.to_dict()) == cfg


def test_default_penalty(E3):
    assert default_penalty(E3) == 10 * 3 * 3.0


def test_relaxed_e1_nonbinding(E1):
    r = solve_relaxed_subproblem(E1.blocks[0], [2.0], 10.0)
    assert r.z.tolist() == [2.0] and r.v == 0.0 and r.J_lp == -2.0
    # the allocation row is degenerate here: every mu in [0, 1] is dual optimal
    assert 0.0 <= r.mu[0] <= 1.0
    assert local_lp_cost_via_duality(E1.blocks[0], r.mu, [2.0]) == pytest.approx(-2.0)


def test_relaxed_e1_violated(E1):
    r = solve_relaxed_subproblem(E1.blocks[0], [-1.0], 10.0)
    assert r.z.tolist() == [0.0] and r.v == pytest.approx(1.0) and r.J_lp == pytest.approx(10.0)
    # v > 0 makes the penalty row tight, which pins the multiplier at M
    assert r.mu[0] == pytest.approx(10.0)


def test_relaxed_e1_interior(E1):
    r = solve_relaxed_subproblem(E1.blocks[0], [1.5], 10.0)
    assert r.z[0] == pytest.approx(1.5) and r.mu[0] == pytest.approx(1.0) and r.J_lp == pytest.approx(-1.5)


def test_attainable_allocation_no_violation():
    b = generate_random(GeneratorParams(N=1, S=3, seed=4, box=5, n_integer=2)).blocks[0]
    P = integer_points(b)
    for x in P[:: max(1, len(P) // 7)]:
        r = solve_relaxed_subproblem(b, b.coupling @ x, 1e4)
        assert r.v <= 1e-9 and r.J_lp <= b.cost @ x + 1e-7


def test_inner_subgradient_e1(E1):
    b = E1.blocks[0]
    mu, val = inner_dual_subgradient(b, [-1.0], 10.0, 500)
    assert val == pytest.approx(10.0, abs=0.1)
    mu, val = inner_dual_subgradient(b, [2.0], 10.0, 500)
    assert val == pytest.approx(-2.0, abs=0.1) and 0.0 <= mu[0] <= 1.0 + 0.1


def test_inner_single_step(E1):
    b = E1.blocks[0]
    mu, _ = inner_dual_subgradient(b, [1.0], 10.0, 1, beta0=0.5, mu0=[0.2])
    # x_bar = 2 at priced cost (-1 + 0.2) x; step 0.5 (2 - 1)
    assert mu[0] == pytest.approx(0.7)


def test_mode_equivalence_on_fixtures(E2, E3):
    for inst, y in ((E3, [1.0]), (E3, [7.0]), (E2, [0.0, -1.0]), (E2, [0.5, 0.2])):
        b = inst.blocks[-1]
        exact = solve_relaxed_subproblem(b, y, 10.0)
        approx = solve_relaxed_subproblem(b, y, 10.0, mode="inner_subgradient", inner_iters=2000)
        assert abs(approx.J_lp - exact.J_lp) <= 0.02 * max(1.0, abs(exact.J_lp))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6), st.floats(0.1, 20))
def test_projection(v, cap):
    p = project_capped_simplex(v, cap)
    assert np.all(p >= 0) and p.sum() <= cap + 1e-9
    # projection is idempotent
    assert np.allclose(project_capped_simplex(p, cap), p)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**5), st.lists(st.floats(-80, 40), min_size=2, max_size=2), st.floats(1, 500))
def test_dual_feasible_and_strong_duality(seed, y, M):
    b = generate_random(GeneratorParams(N=1, S=2, seed=seed, box=6)).blocks[0]
    P = hull_points(b)
    r = solve_relaxed_subproblem(b, y, M, points=P)
    assert np.all(r.mu >= -1e-12) and r.mu.sum() <= M + 1e-9 and r.v >= 0
    assert local_lp_cost_via_duality(b, r.mu, y, points=P) == pytest.approx(r.J_lp, abs=1e-6 * (1 + abs(r.J_lp)))


def test_allocation_update_examples():
    assert allocation_update([0.0], [1.0], [[0.0]], 0.5).tolist() == [0.5]
    assert allocation_update([3.0, 1.0], [1.0, 2.0], [[1.0, 2.0], [1.0, 2.0]], 0.7).tolist() == [3.0, 1.0]
    y1, y2 = np.array([1.0]), np.array([2.0])
    m1, m2 = np.array([0.3]), np.array([1.1])
    s = allocation_update(y1, m1, [m2], 0.9) + allocation_update(y2, m2, [m1], 0.9)
    assert s[0] == y1[0] + y2[0]


def test_recover_examples(E1, E3):
    assert recover_mixed_integer(E1.blocks[0], [2.0]).x.tolist() == [2.0]
    assert recover_mixed_integer(E1.blocks[0], [-1.0]).rho == pytest.approx(1.0)
    r = recover_mixed_integer(E3.blocks[2], [5.0])
    assert (r.rho, r.xi) == (0.0, -15.0)


def test_agent_caches_enumeration(E3):
    a = Agent(E3.blocks[0], AlgoConfig(), 10.0)
    assert a.points.shape[0] == 2 and a.enumeration.shape[0] == 6
    assert a.recover([2.5]).x.tolist() == [2.0]
