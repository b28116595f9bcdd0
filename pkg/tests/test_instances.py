import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ineqvqa.instances import (
    EnumerationTooLarge,
    InstanceError,
    KnapsackInstance,
    assignment_value,
    brute_force_qubo_min,
    brute_force_solve,
    get_scenario,
    instance_to_dict,
    is_feasible,
    load_catalog,
    parse_instance,
    serialize_instance,
)
from ineqvqa.qubo import QuadraticModel


def test_catalog_shape():
    cat = load_catalog()
    assert len(cat) == 22
    assert [i.scenario_id for i in cat] == list(range(22))


def test_scenario_0_data():
    s0 = load_catalog()[0]
    assert s0.num_knapsacks == 1
    assert s0.capacities == (9,)
    assert s0.weights == (4, 6)
    assert s0.values == ((19, 16),)


def test_scenario_10_data():
    s10 = load_catalog()[10]
    assert s10.num_knapsacks == 2
    assert s10.capacities == (11, 8)
    assert s10.num_items == 3
    assert s10.weights == (2, 4, 4)


@pytest.mark.parametrize("sid", [0, 3, 10, 21])
def test_roundtrip(sid):
    inst = get_scenario(sid)
    assert parse_instance(serialize_instance(inst)) == inst


def test_weights_length_mismatch():
    doc = {"capacities": [5], "weights": [1, 2, 3], "values": [[1, 2]]}
    with pytest.raises(InstanceError) as err:
        parse_instance(json.dumps(doc))
    assert "values[0]" in str(err.value) or "weights" in str(err.value)


def test_zero_capacity_rejected():
    doc = {"capacities": [0], "weights": [1], "values": [[1]]}
    with pytest.raises(InstanceError) as err:
        parse_instance(json.dumps(doc))
    assert err.value.path == "capacities[0]"


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"weights": [1], "values": [[1]]}, "capacities"),
        ({"capacities": [3], "weights": [1], "values": [1]}, "values"),
        ({"capacities": [3], "weights": [-1], "values": [[1]]}, "weights[0]"),
        ({"capacities": [3, 4], "weights": [1], "values": [[1]]}, "values"),
    ],
)
def test_parse_errors_carry_path(doc, path):
    with pytest.raises(InstanceError) as err:
        parse_instance(json.dumps(doc))
    assert err.value.path == path


def test_malformed_json():
    with pytest.raises(InstanceError):
        parse_instance("{not json")


def test_feasibility_scenario_0():
    s0 = get_scenario(0)
    assert is_feasible(s0, [1, 0])
    assert not is_feasible(s0, [1, 1])
    assert is_feasible(s0, [0, 0])


def test_value_scenario_0():
    s0 = get_scenario(0)
    assert assignment_value(s0, [1, 0]) == 19
    assert assignment_value(s0, [0, 0]) == 0
    assert assignment_value(s0, [1, 1]) == 35


def test_item_in_two_knapsacks_is_infeasible():
    inst = KnapsackInstance((10, 10), (1,), ((1,), (1,)))
    assert not is_feasible(inst, [[1], [1]])
    assert is_feasible(inst, [[0], [1]])


def test_dimension_mismatch():
    with pytest.raises(InstanceError):
        is_feasible(get_scenario(0), [1, 0, 0])


@pytest.mark.parametrize("sid, value, n_opt", [(5, 55, 1), (16, 72, 24), (1, 4, 2)])
def test_oracle_examples(sid, value, n_opt):
    res = brute_force_solve(get_scenario(sid))
    assert res.optimal_value == value
    assert res.num_optimal == n_opt


@pytest.mark.parametrize("sid", range(16))
def test_oracle_consistency(sid):
    inst = get_scenario(sid)
    res = brute_force_solve(inst)
    assert res.optimal_assignments
    assert res.count_90pct >= res.num_optimal
    for a in res.optimal_assignments:
        assert is_feasible(inst, a)
        assert assignment_value(inst, a) == res.optimal_value


def test_oracle_matches_plain_enumeration():
    # independent check over raw 2^(MN) bitstrings
    inst = get_scenario(12)
    best, n_best = -1, 0
    for b in range(1 << inst.num_x):
        bits = [(b >> q) & 1 for q in range(inst.num_x)]
        if not is_feasible(inst, bits):
            continue
        v = assignment_value(inst, bits)
        if v > best:
            best, n_best = v, 1
        elif v == best:
            n_best += 1
    res = brute_force_solve(inst)
    assert (res.optimal_value, res.num_optimal) == (best, n_best)


def test_count_90pct_monotone_in_threshold():
    inst = get_scenario(9)
    counts = [brute_force_solve(inst, (k, 10)).count_90pct for k in range(10, -1, -1)]
    assert counts == sorted(counts)
    assert counts[0] == brute_force_solve(inst).num_optimal


def test_enumeration_bound():
    big = KnapsackInstance((5,) * 4, (1,) * 8, tuple((1,) * 8 for _ in range(4)))
    with pytest.raises(EnumerationTooLarge):
        brute_force_solve(big)


def test_qubo_min_trivial():
    e, bits = brute_force_qubo_min(QuadraticModel.build(1, {0: 1}))
    assert e == 0
    assert [b.tolist() for b in bits] == [[0]]


def test_qubo_min_bound():
    with pytest.raises(EnumerationTooLarge):
        brute_force_qubo_min(QuadraticModel.build(25, {0: 1}))


small_instances = st.integers(1, 2).flatmap(
    lambda m: st.integers(1, 4).flatmap(
        lambda n: st.builds(
            KnapsackInstance,
            st.lists(st.integers(1, 12), min_size=m, max_size=m),
            st.lists(st.integers(1, 8), min_size=n, max_size=n),
            st.lists(st.lists(st.integers(1, 20), min_size=n, max_size=n), min_size=m, max_size=m),
        )
    )
)


@settings(max_examples=60, deadline=None)
@given(small_instances)
def test_oracle_properties(inst):
    res = brute_force_solve(inst)
    assert res.count_90pct >= res.num_optimal >= 1
    for a in res.optimal_assignments:
        assert is_feasible(inst, a)
        assert assignment_value(inst, a) == res.optimal_value
    assert parse_instance(json.dumps(instance_to_dict(inst))) == inst
    # no feasible assignment beats the optimum
    for b in range(1 << inst.num_x):
        bits = np.array([(b >> q) & 1 for q in range(inst.num_x)])
        if is_feasible(inst, bits):
            assert assignment_value(inst, bits) <= res.optimal_value
