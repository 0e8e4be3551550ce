import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from pdmilp.lp import LinearProgram, LpCyclingError, lp_duality_report, solve_lp


def _simple():
    return LinearProgram(c=[-1.0, -1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0])


def test_simple_cost_and_dual():
    out = solve_lp(_simple())
    assert out.status == "optimal"
    assert out.cost == pytest.approx(-1.0)
    assert out.dual_ub == pytest.approx([1.0])


def test_infeasible():
    out = solve_lp(LinearProgram(c=[1.0], A_ub=[[1.0]], b_ub=[-1.0]))
    assert out.status == "infeasible"


def test_unbounded():
    assert solve_lp(LinearProgram(c=[-1.0])).status == "unbounded"


def test_duality_report_clean():
    lp = _simple()
    rep = lp_duality_report(lp, solve_lp(lp))
    assert rep.max() <= 1e-9


def test_duality_report_perturbed():
    lp = _simple()
    out = solve_lp(lp)
    rep = lp_duality_report(lp, out, x=out.x + np.array([0.1, 0.0]))
    assert rep.primal_inf == pytest.approx(0.1)


def test_zero_objective_gap_exact():
    lp = LinearProgram(c=[0.0, 0.0], A_ub=[[1.0, 2.0]], b_ub=[4.0], upper=[3.0, 3.0])
    rep = lp_duality_report(lp, solve_lp(lp))
    assert rep.gap == 0.0


def test_duality_report_needs_optimal():
    lp = LinearProgram(c=[1.0], A_ub=[[1.0]], b_ub=[-1.0])
    with pytest.raises(ValueError):
        lp_duality_report(lp, solve_lp(lp))


def test_equalities_free_variables_and_bounds():
    # min x + 2y - z, x + y + z = 4, x - y <= 1, y free, z in [-1, 2]
    lp = LinearProgram(c=[1.0, 2.0, -1.0], A_ub=[[1.0, -1.0, 0.0]], b_ub=[1.0], A_eq=[[1.0, 1.0, 1.0]],
                       b_eq=[4.0], lower=[0.0, -np.inf, -1.0], upper=[np.inf, np.inf, 2.0])
    out = solve_lp(lp)
    ref = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                  bounds=list(zip([0, None, -1], [None, None, 2])))
    assert out.status == "optimal" and out.cost == pytest.approx(ref.fun)
    assert lp_duality_report(lp, out).max() <= 1e-8


def test_pivot_budget_fault():
    rng = np.random.default_rng(0)
    A = rng.random((8, 8))
    lp = LinearProgram(c=-np.ones(8), A_ub=A, b_ub=np.ones(8))
    with pytest.raises(LpCyclingError, match="pivots"):
        solve_lp(lp, max_pivots=1)


def test_classic_cycling_example_terminates():
    # Beale's example cycles under textbook Dantzig pricing without anti-cycling
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    out = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=[0.0, 0.0, 1.0]))
    assert out.status == "optimal" and out.cost == pytest.approx(-0.05)


def _random_lp(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 7), rng.integers(1, 7)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0, 2, n)
    b = A @ x0 + rng.uniform(0, 1, m)
    lo = np.where(rng.random(n) < 0.2, -np.inf, 0.0)
    hi = np.where(rng.random(n) < 0.5, 3.0, np.inf)
    return LinearProgram(c=rng.normal(size=n), A_ub=A, b_ub=b, lower=lo, upper=hi)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_fuzz_against_scipy(seed):
    lp = _random_lp(seed)
    out = solve_lp(lp)
    ref = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, bounds=list(zip(
        [None if np.isinf(v) else v for v in lp.lower], [None if np.isinf(v) else v for v in lp.upper])),
        method="highs")
    expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
    assert out.status == expected
    if expected == "optimal":
        assert out.cost == pytest.approx(ref.fun, abs=1e-6 * (1 + abs(ref.fun)))
        assert lp_duality_report(lp, out).max() <= 1e-6 * (1 + abs(out.cost))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10.0))
def test_objective_scaling(seed, lam):
    lp = _random_lp(seed)
    a = solve_lp(lp)
    if not a.optimal:
        return
    b = solve_lp(LinearProgram(c=lam * lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, lower=lp.lower, upper=lp.upper))
    assert b.cost == pytest.approx(lam * a.cost, abs=1e-6 * (1 + abs(lam * a.cost)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_redundant_row(seed):
    lp = _random_lp(seed)
    a = solve_lp(lp)
    if not a.optimal:
        return
    dup = LinearProgram(c=lp.c, A_ub=np.vstack([lp.A_ub, lp.A_ub[:1]]), b_ub=np.append(lp.b_ub, lp.b_ub[0]),
                        lower=lp.lower, upper=lp.upper)
    assert solve_lp(dup).cost == pytest.approx(a.cost, abs=1e-7 * (1 + abs(a.cost)))


def test_deterministic():
    lp = _random_lp(11)
    a, b = solve_lp(lp), solve_lp(lp)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.dual_ub, b.dual_ub)
