import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from pdmilp.analysis import stacked_milp
from pdmilp.milp import (
    EnumerationCapError,
    MilpNodeLimitError,
    MixedIntegerProgram,
    block_program,
    lex_min_violation,
    lex_min_violation_enum,
    pricing_oracle,
    solve_milp,
    solve_milp_bruteforce,
)
from pdmilp.hull import integer_points
from pdmilp.model import GeneratorParams, generate_random


@pytest.mark.parametrize("fixture,cost", [("E1", -3.0), ("E2", -1.0), ("E3", -17.0)])
def test_fixture_optima(fixture, cost, request):
    prog = stacked_milp(request.getfixturevalue(fixture))
    assert solve_milp(prog).cost == pytest.approx(cost)
    assert solve_milp_bruteforce(prog).cost == pytest.approx(cost)


def test_bruteforce_infeasible_toy():
    prog = MixedIntegerProgram(c=[1.0], A_ub=[[1.0]], b_ub=[-1.0], lower=[0.0], upper=[1.0], integer_idx=(0,))
    assert solve_milp_bruteforce(prog).status == "infeasible"
    assert solve_milp(prog).status == "infeasible"


def test_bruteforce_cap():
    prog = MixedIntegerProgram(c=[1.0, 1.0], lower=[0, 0], upper=[1000, 1000], integer_idx=(0, 1))
    with pytest.raises(EnumerationCapError):
        solve_milp_bruteforce(prog, cap=100)


def test_node_limit_reports_incumbent():
    rng = np.random.default_rng(3)
    n = 12
    prog = MixedIntegerProgram(c=-rng.uniform(1, 2, n), A_ub=[rng.uniform(1, 3, n)], b_ub=[10.5],
                               lower=np.zeros(n), upper=np.ones(n) * 3, integer_idx=range(n))
    with pytest.raises(MilpNodeLimitError) as err:
        solve_milp(prog, node_limit=3)
    assert err.value.bound is not None


def test_pricing_examples(E1):
    b = E1.blocks[0]
    x, v = pricing_oracle(b, [0.0])
    assert x.tolist() == [2.0] and v == -2.0
    x, v = pricing_oracle(b, [2.0])
    assert x.tolist() == [0.0] and v == 0.0
    _, v = pricing_oracle(b, [1.0])  # zero priced cost
    assert v == 0.0


def test_lex_min_examples(E1, E2, E3):
    r = lex_min_violation(E1.blocks[0], [2.0])
    assert (r.rho, r.x.tolist(), r.xi) == (0.0, [2.0], -2.0)
    r = lex_min_violation(E1.blocks[0], [-1.0])
    assert r.rho == pytest.approx(1.0) and r.x.tolist() == [0.0] and r.xi == 0.0
    r = lex_min_violation(E2.blocks[0], [0.0, -1.0])
    assert r.rho == pytest.approx(1.0) and r.x.tolist() == [1.0] and r.xi == -1.0
    r = lex_min_violation(E3.blocks[2], [5.0])
    assert (r.rho, r.x.tolist(), r.xi) == (0.0, [5.0], -15.0)


def test_enum_variant_agrees(E2):
    b = E2.blocks[0]
    P = integer_points(b)
    for y in ([0.0, -1.0], [1.0, 0.0], [-0.5, 0.3]):
        a, e = lex_min_violation(b, y), lex_min_violation_enum(P, b, y)
        assert a.rho == pytest.approx(e.rho, abs=1e-8) and a.xi == pytest.approx(e.xi)


def _random_prog(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    ni = int(rng.integers(1, n + 1))
    m = int(rng.integers(1, 4))
    hi = rng.integers(1, 6, n).astype(float)
    lo = -rng.integers(0, 4, n).astype(float)
    A = rng.normal(size=(m, n))
    b = A @ rng.uniform(lo, hi) + rng.normal(0, 1, m)
    return MixedIntegerProgram(c=rng.normal(size=n), A_ub=A, b_ub=b, lower=lo, upper=hi, integer_idx=range(ni))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_bb_matches_bruteforce_and_scipy(seed):
    prog = _random_prog(seed)
    bb, bf = solve_milp(prog), solve_milp_bruteforce(prog)
    assert bb.status == bf.status
    integrality = np.zeros(prog.n)
    integrality[list(prog.integer_idx)] = 1
    ref = milp(prog.c, constraints=LinearConstraint(prog.A_ub, -np.inf, prog.b_ub), integrality=integrality,
               bounds=Bounds(prog.lower, prog.upper))
    assert (ref.status == 0) == bb.optimal
    if bb.optimal:
        assert bb.cost == pytest.approx(bf.cost, abs=1e-6)
        assert bb.cost == pytest.approx(ref.fun, abs=1e-6)


def _small_block(seed):
    return generate_random(GeneratorParams(N=1, S=2, seed=seed, box=4, n_integer=int(seed % 2) + 1)).blocks[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**5), st.lists(st.floats(-10, 10), min_size=2, max_size=2),
       st.lists(st.floats(0, 5), min_size=2, max_size=2))
def test_lex_min_monotone(seed, y, bump):
    b = _small_block(seed)
    r1 = lex_min_violation(b, y)
    r2 = lex_min_violation(b, np.add(y, bump))
    assert r2.rho <= r1.rho + 1e-7
    assert np.all(b.coupling @ r1.x <= np.asarray(y) + r1.rho + 1e-6)
    assert b.contains(r1.x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**5), st.integers(0, 50))
def test_lex_min_at_attainable_allocation(seed, k):
    b = _small_block(seed)
    P = integer_points(b, cap=10**5) if b.is_pure_integer else None
    xbar = P[k % len(P)] if P is not None else solve_milp(block_program(b)).x
    r = lex_min_violation(b, b.coupling @ xbar)
    assert r.rho <= 1e-9
    assert r.xi <= b.cost @ xbar + 1e-7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**5), st.lists(st.floats(0, 5), min_size=4, max_size=4))
def test_pricing_concave(seed, mus):
    b = _small_block(seed)
    m1, m2 = np.array(mus[:2]), np.array(mus[2:])
    v1, v2 = pricing_oracle(b, m1)[1], pricing_oracle(b, m2)[1]
    vm = pricing_oracle(b, (m1 + m2) / 2)[1]
    assert vm >= (v1 + v2) / 2 - 1e-7 * (1 + abs(vm))
