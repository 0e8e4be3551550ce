import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmilp.hull import HullCapExceeded, hull_points, integer_grid_size, integer_points
from pdmilp.milp import block_program, solve_milp
from pdmilp.model import AgentBlock, GeneratorParams, generate_random


def test_box_block_hull(E3):
    b = E3.blocks[0]
    assert integer_grid_size(b) == 6
    assert integer_points(b).ravel().tolist() == [0, 1, 2, 3, 4, 5]
    assert sorted(hull_points(b).ravel().tolist()) == [0.0, 5.0]


def test_cap():
    b = generate_random(GeneratorParams(N=1, S=1, seed=0, n_integer=2)).blocks[0]
    with pytest.raises(HullCapExceeded):
        integer_points(b, cap=100)


def test_points_are_feasible():
    for seed in range(5):
        b = generate_random(GeneratorParams(N=1, S=2, seed=seed)).blocks[0]
        P = hull_points(b)
        assert all(b.contains(p) for p in P)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_linear_minimum_matches_milp(seed, n_integer):
    """Minimizing any linear objective over the points equals the MILP optimum over X_i."""
    rng = np.random.default_rng(seed)
    b = generate_random(GeneratorParams(N=1, S=1, seed=seed, box=8, n_integer=n_integer)).blocks[0]
    P = hull_points(b)
    for _ in range(3):
        w = rng.normal(size=b.n)
        ref = solve_milp(block_program(b, cost=w))
        assert (P @ w).min() == pytest.approx(ref.cost, abs=1e-7 * (1 + abs(ref.cost)))


def test_mixed_block_with_fractional_vertices():
    # x0 integer in [0, 2], x1 continuous, x0 + 2 x1 <= 3, x1 >= 0
    b = AgentBlock(cost=[0.0, 0.0], coupling=np.zeros((0, 2)), local_lhs=[[1.0, 2.0]], local_rhs=[3.0],
                   integer_idx=(0,), lower=[0.0, 0.0], upper=[2.0, 5.0])
    P = {tuple(np.round(p, 9)) for p in hull_points(b)}
    assert P == {(0.0, 0.0), (0.0, 1.5), (2.0, 0.0), (2.0, 0.5)}
