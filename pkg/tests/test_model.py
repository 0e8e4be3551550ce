import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmilp.model import (
    AgentBlock,
    GeneratorParams,
    Instance,
    InstanceFormatError,
    SolutionVector,
    dumps_instance,
    evaluate_solution,
    generate_random,
    instance_to_dict,
    load_instance,
    loads_instance,
    save_instance,
    solution_from_dict,
    solution_to_dict,
    validate_instance,
)


def test_fixtures_validate(E1, E2, E3):
    for inst in (E1, E2, E3):
        assert validate_instance(inst) == []


def test_resource_length_mismatch(E1):
    bad = Instance(blocks=E1.blocks, resource=[3.0, 1.0])
    assert any("resource length" in v for v in validate_instance(bad))


def test_unbounded_block_flagged(E1):
    b = E1.blocks[0]
    open_block = AgentBlock(cost=b.cost, coupling=b.coupling, local_lhs=b.local_lhs, local_rhs=b.local_rhs,
                            integer_idx=b.integer_idx, lower=b.lower, upper=[np.inf])
    inst = Instance(blocks=[open_block, E1.blocks[1]], resource=E1.resource)
    assert any("non-compact" in v for v in validate_instance(inst))


def test_block_arrays_read_only(E1):
    with pytest.raises(ValueError):
        E1.blocks[0].cost[0] = 5.0


def test_generator_deterministic():
    p = GeneratorParams(N=5, S=3, seed=7)
    a, b = generate_random(p), generate_random(p)
    assert a == b
    assert generate_random(GeneratorParams(N=5, S=3, seed=8)) != a


def test_generator_shapes_and_ranges():
    p = GeneratorParams(N=4, S=2, seed=1, resource_range=(-10, -5))
    inst = generate_random(p)
    assert inst.N == 4 and inst.S == 2
    assert np.all((inst.resource >= -10) & (inst.resource <= -5))
    for b in inst.blocks:
        assert b.local_lhs.shape == (6, 2)
        assert np.all((b.local_lhs >= 0) & (b.local_lhs <= 1))
        assert np.all((b.local_rhs >= 0) & (b.local_rhs <= 40))
        assert np.all((b.coupling >= 0) & (b.coupling <= 1))
        assert b.integer_idx == (0,)
        assert np.all(b.lower == -60) and np.all(b.upper == 60)
    assert validate_instance(inst) == []


def test_generator_params_roundtrip():
    p = GeneratorParams(N=3, S=1, seed=4, cost_weight_range=(-5, 0))
    assert GeneratorParams.from_dict(p.to_dict()) == p


def test_roundtrip_exact(E1, tmp_path):
    path = tmp_path / "e1.json"
    save_instance(E1, path)
    assert load_instance(path) == E1
    inst = generate_random(GeneratorParams(N=3, S=2, seed=3))
    back = loads_instance(dumps_instance(inst))
    assert back == inst
    for a, b in zip(back.blocks, inst.blocks):
        assert np.array_equal(a.cost, b.cost)  # bit-exact floats


def test_missing_key_named(E1):
    d = instance_to_dict(E1)
    del d["resource"]
    with pytest.raises(InstanceFormatError, match="resource"):
        loads_instance(json.dumps(d))


def test_malformed_json_position():
    with pytest.raises(InstanceFormatError, match="line"):
        loads_instance('{"blocks": [,]}')


def test_evaluate_solution_e1(E1):
    rep = evaluate_solution(E1, SolutionVector(x=[[2], [1]]))
    assert rep.cost == -3
    assert np.allclose(rep.coupling_slack, [0.0])
    assert all(rep.local_feasible) and all(rep.integer_ok) and rep.feasible
    rep = evaluate_solution(E1, SolutionVector(x=[[2], [2]]))
    assert np.allclose(rep.coupling_slack, [-1.0]) and not rep.coupling_ok


def test_evaluate_flags_fractional_and_outside(E1):
    rep = evaluate_solution(E1, SolutionVector(x=[[0.5], [3]]))
    assert rep.integer_ok == (False, True)
    assert rep.local_feasible[1] is False


def test_solution_dict_roundtrip():
    sol = SolutionVector(x=[[1.0, 2.5], [0.0]], tag="t")
    back = solution_from_dict(solution_to_dict(sol))
    assert back.tag == "t" and all(np.array_equal(a, b) for a, b in zip(back.x, sol.x))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 10_000))
def test_generated_instances_always_valid(N, S, seed):
    inst = generate_random(GeneratorParams(N=N, S=S, seed=seed))
    assert validate_instance(inst) == []
    assert loads_instance(dumps_instance(inst)) == inst
