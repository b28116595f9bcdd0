import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ineqvqa.evaluation import (
    Evaluator,
    Protocol,
    classical_objective,
    classical_objective_table,
    compute_metrics,
    expectation,
    slack_converged,
)
from ineqvqa.instances import brute_force_solve, get_scenario
from ineqvqa.qubo import BitLayout, PenaltyWeights, Variant, build_hamiltonian, default_weights, term_h_capacity_slack
from ineqvqa.statevector import SampleSet, exact_distribution, init_minus_state, sample

S0 = get_scenario(0)
W0 = PenaltyWeights(2250, 45, 1)


def index_of(bits):
    return sum(int(b) << q for q, b in enumerate(bits))


def samples_of(n, pairs):
    idx = np.array([i for i, _ in pairs], dtype=np.int64)
    cnt = np.array([c for _, c in pairs], dtype=np.int64)
    order = np.argsort(idx)
    return SampleSet(n, int(cnt.sum()), idx[order], cnt[order])


def test_classical_objective_examples():
    assert classical_objective(S0, [1, 0], W0) == -19
    assert classical_objective(S0, [1, 1], W0) == 10
    assert classical_objective(S0, [0, 0], W0) == 0
    with pytest.raises(ValueError):
        classical_objective(S0, [1, 0, 1], W0)


def test_uniform_noslack_expectation():
    probs = exact_distribution(init_minus_state(2))
    assert expectation(probs, Protocol.NOSLACK, S0, W0) == pytest.approx(-6.25, abs=1e-12)
    assert Evaluator(S0, Protocol.NOSLACK).expectation(probs) == pytest.approx(-6.25, abs=1e-12)


def test_point_distribution():
    ev = Evaluator(S0, Protocol.NOSLACK, W0)
    assert ev.expectation(samples_of(2, [(index_of([1, 1]), 7)])) == 10
    std = Evaluator(S0, Protocol.STANDARD_SLACK)
    full = [1, 0, 1, 0, 1, 0]
    assert std.expectation(samples_of(6, [(index_of(full), 3)])) == std.qubo.energy(full)


def test_slack_x_ignores_slack_bits():
    ev = Evaluator(S0, Protocol.SLACK_X_ONLY, W0)
    a = index_of([1, 0, 1, 0, 1, 0])
    b = index_of([1, 0, 0, 1, 1, 1])
    assert ev.scores_at([a, b]).tolist() == [-19, -19]


def test_width_mismatch():
    with pytest.raises(ValueError):
        Evaluator(S0, Protocol.SLACK_X_ONLY).expectation(samples_of(2, [(0, 1)]))
    with pytest.raises(ValueError):
        Evaluator(S0, Protocol.NOSLACK).expectation(np.ones(8) / 8)


def test_baseline_scenario_0():
    m = compute_metrics(exact_distribution(init_minus_state(2)), S0, Protocol.NOSLACK, brute_force_solve(S0))
    assert m.baseline_p_opt == 0.25
    assert m.p_opt == pytest.approx(0.25)


def test_slack_x_vs_standard_predicate():
    oracle = brute_force_solve(S0)
    # optimal x with slack encoding 2 instead of the gap 5
    unconverged = index_of([1, 0] + [0, 1, 0, 0])
    s = samples_of(6, [(unconverged, 50)])
    assert compute_metrics(s, S0, Protocol.SLACK_X_ONLY, oracle).p_opt == 1.0
    assert compute_metrics(s, S0, Protocol.STANDARD_SLACK, oracle).p_opt == 0.0
    converged = index_of([1, 0] + [1, 0, 1, 0])
    s2 = samples_of(6, [(converged, 10), (unconverged, 30)])
    assert compute_metrics(s2, S0, Protocol.STANDARD_SLACK, oracle).p_opt == 0.25
    assert compute_metrics(s2, S0, Protocol.SLACK_X_ONLY, oracle).p_opt == 1.0


def test_converged_slack_has_zero_capacity_energy():
    inst = get_scenario(10)
    idx = np.arange(1 << Protocol.STANDARD_SLACK.num_qubits(inst))
    ok = slack_converged(inst, idx)
    cap = term_h_capacity_slack(inst).energy_table()
    assert np.array_equal(ok, cap == 0)
    assert ok.any()


def test_classical_objective_vs_noslack_energy():
    for sid in (0, 3, 10, 12):
        inst = get_scenario(sid)
        w = default_weights(inst, Variant.NOSLACK)
        table = classical_objective_table(inst, w)
        noslack = build_hamiltonian(inst, Variant.NOSLACK, w).energy_table()
        assert np.all(table <= noslack)
        for b in range(table.size):
            a = np.array([(b >> q) & 1 for q in range(inst.num_x)]).reshape(inst.num_knapsacks, inst.num_items)
            loads = a @ np.array(inst.weights)
            caps = np.array(inst.capacities)
            assert (table[b] == noslack[b]) == bool(np.all((loads >= caps)))


def test_capacity_part_of_objective():
    inst = get_scenario(12)
    w = default_weights(inst, Variant.NOSLACK)
    # doubling B adds exactly one more copy of the capacity part
    diff = classical_objective_table(inst, PenaltyWeights(w.A, 2 * w.B, w.C)) - classical_objective_table(inst, w)
    for b in range(diff.size):
        bits = [(b >> q) & 1 for q in range(inst.num_x)]
        a = np.array(bits).reshape(inst.num_knapsacks, inst.num_items)
        excess = np.maximum(0, a @ np.array(inst.weights) - np.array(inst.capacities))
        assert diff[b] == w.B * int((excess**2).sum())


def test_exact_vs_sampled_expectation():
    inst = get_scenario(3)
    rng = np.random.default_rng(5)
    amp = rng.normal(size=256) + 1j * rng.normal(size=256)
    probs = np.abs(amp) ** 2
    probs /= probs.sum()
    for proto in (Protocol.STANDARD_SLACK, Protocol.SLACK_X_ONLY):
        ev = Evaluator(inst, proto)
        exact = ev.expectation(probs)
        shots = 10**6
        s = sample(probs, shots, 17)
        scores = ev.scores_at(np.arange(256)).astype(float)
        var = float(np.dot(probs, (scores - exact) ** 2))
        assert abs(ev.expectation(s) - exact) <= 5 * np.sqrt(var / shots)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.lists(st.integers(0, 255), min_size=1, max_size=30), st.integers(1, 50))
def test_metrics_invariants(sid, idx, mult):
    inst = get_scenario(sid)
    n = Protocol.STANDARD_SLACK.num_qubits(inst)
    idx = [i % (1 << n) for i in idx]
    uniq, counts = np.unique(idx, return_counts=True)
    s = SampleSet(n, int(counts.sum() * mult), uniq, counts * mult)
    oracle = brute_force_solve(inst)
    std = compute_metrics(s, inst, Protocol.STANDARD_SLACK, oracle)
    sx = compute_metrics(s, inst, Protocol.SLACK_X_ONLY, oracle)
    for m in (std, sx):
        assert 0 <= m.p_opt <= m.p_90 <= 1
        assert m.baseline_p_opt == oracle.num_optimal / 2**inst.num_x
        assert m.baseline_p_90 == oracle.count_90pct / 2**inst.num_x
    assert std.p_opt <= sx.p_opt and std.p_90 <= sx.p_90


def test_protocol_layouts():
    inst = get_scenario(10)
    assert Protocol.NOSLACK.num_qubits(inst) == 6
    assert Protocol.SLACK_X_ONLY.num_qubits(inst) == BitLayout.with_slack(inst).total == 14
