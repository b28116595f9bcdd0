"""Objective evaluation protocols, expectation values and sampling metrics.

Three protocols differ in which Hamiltonian drives the circuit and how the
measured bitstrings are scored:

* ``standard``  -- slack circuit, full QUBO energy of x and slack bits;
* ``slack-x``   -- slack circuit, inequality evaluated on the x-bits only;
* ``noslack``   -- equality-penalty circuit on x-bits, inequality evaluated
  classically.

Scores are always at problem scale, with unnormalized weights.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import asdict, dataclass

import numpy as np

from .instances import KnapsackInstance, OracleResult, as_assignment
from .qubo import BitLayout, PenaltyWeights, QuadraticModel, Variant, build_hamiltonian, default_weights
from .statevector import SampleSet


class Protocol(enum.Enum):
    STANDARD_SLACK = "standard"
    SLACK_X_ONLY = "slack-x"
    NOSLACK = "noslack"

    @property
    def variant(self) -> Variant:
        return Variant.NOSLACK if self is Protocol.NOSLACK else Variant.STANDARD

    def layout(self, inst: KnapsackInstance) -> BitLayout:
        if self is Protocol.NOSLACK:
            return BitLayout.x_only(inst)
        return BitLayout.with_slack(inst)

    def num_qubits(self, inst: KnapsackInstance) -> int:
        return self.layout(inst).total


@dataclass(frozen=True)
class Metrics:
    p_opt: float
    p_90: float
    baseline_p_opt: float
    baseline_p_90: float
    best_value_found: int
    optimum_found: bool

    def to_dict(self) -> dict:
        return asdict(self)


def classical_objective(inst: KnapsackInstance, x_bits, weights: PenaltyWeights):
    """C*H_obj + A*H_single + B*sum_k max(0, load_k - c_k)^2."""
    a = as_assignment(inst, x_bits)
    occ = a.sum(axis=0)
    single = int((occ * (occ - 1)).sum())
    loads = a @ np.asarray(inst.weights, dtype=np.int64)
    excess = np.maximum(0, loads - np.asarray(inst.capacities))
    value = int((a * inst.value_matrix()).sum())
    return weights.A * single + weights.B * int((excess**2).sum()) - weights.C * value


@functools.lru_cache(maxsize=64)
def _x_parts(inst: KnapsackInstance):
    """Per-x-index value, H_single, squared excess and loads (all exact ints)."""
    M, N = inst.num_knapsacks, inst.num_items
    idx = np.arange(1 << inst.num_x, dtype=np.int64)
    v = inst.value_matrix()
    value = np.zeros(idx.size, dtype=np.int64)
    single = np.zeros(idx.size, dtype=np.int64)
    excess2 = np.zeros(idx.size, dtype=np.int64)
    loads = np.zeros((M, idx.size), dtype=np.int64)
    for i in range(N):
        occ = np.zeros(idx.size, dtype=np.int64)
        for k in range(M):
            bit = (idx >> (k * N + i)) & 1
            occ += bit
            value += bit * v[k, i]
            loads[k] += bit * inst.weights[i]
        single += occ * (occ - 1)
    for k in range(M):
        excess2 += np.maximum(0, loads[k] - inst.capacities[k]) ** 2
    for arr in (value, single, excess2, loads):
        arr.setflags(write=False)
    return value, single, excess2, loads


def classical_objective_table(inst: KnapsackInstance, weights: PenaltyWeights) -> np.ndarray:
    """classical_objective for every x-bitstring, indexed by basis index."""
    value, single, excess2, _ = _x_parts(inst)
    return weights.A * single + weights.B * excess2 - weights.C * value


class Evaluator:
    """Scores bitstrings of one protocol's circuit register.

    Caches the score tables so repeated expectation calls during parameter
    optimization are a single dot product.
    """

    def __init__(
        self,
        inst: KnapsackInstance,
        protocol: Protocol,
        weights: PenaltyWeights | None = None,
        qubo: QuadraticModel | None = None,
    ):
        self.inst = inst
        self.protocol = Protocol(protocol)
        self.weights = weights or default_weights(inst, self.protocol.variant)
        self.layout = self.protocol.layout(inst)
        self.num_qubits = self.layout.total
        self._x_mask = (1 << inst.num_x) - 1
        self._qubo = qubo
        self._x_table = None
        self._full_table = None

    @property
    def qubo(self) -> QuadraticModel:
        if self._qubo is None:
            self._qubo = build_hamiltonian(self.inst, self.protocol.variant, self.weights)
        return self._qubo

    @property
    def x_table(self) -> np.ndarray:
        if self._x_table is None:
            self._x_table = classical_objective_table(self.inst, self.weights)
        return self._x_table

    def scores_at(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if self.protocol is Protocol.STANDARD_SLACK:
            return self.qubo.energies_at(idx)
        return self.x_table[idx & self._x_mask]

    def expectation(self, dist_or_samples) -> float:
        if isinstance(dist_or_samples, SampleSet):
            s = dist_or_samples
            if s.num_qubits != self.num_qubits:
                raise ValueError(f"samples have {s.num_qubits} qubits, protocol expects {self.num_qubits}")
            return float(np.dot(self.scores_at(s.indices), s.counts) / s.shots)
        probs = np.asarray(dist_or_samples, dtype=np.float64)
        if probs.size != 1 << self.num_qubits:
            raise ValueError(f"distribution has {probs.size} entries, expected 2^{self.num_qubits}")
        if self.protocol is Protocol.STANDARD_SLACK:
            if self._full_table is None:
                self._full_table = self.qubo.energy_table()
            return float(np.dot(probs, self._full_table))
        marginal = probs.reshape(-1, 1 << self.inst.num_x).sum(axis=0)
        return float(np.dot(marginal, self.x_table))


def expectation(
    dist_or_samples,
    protocol: Protocol,
    inst: KnapsackInstance,
    weights: PenaltyWeights | None = None,
    qubo_for_standard: QuadraticModel | None = None,
) -> float:
    return Evaluator(inst, protocol, weights, qubo_for_standard).expectation(dist_or_samples)


def slack_converged(inst: KnapsackInstance, indices) -> np.ndarray:
    """True where every knapsack's slack bits encode exactly its capacity gap."""
    idx = np.asarray(indices, dtype=np.int64)
    layout = BitLayout.with_slack(inst)
    _, _, _, loads = _x_parts(inst)
    x = idx & ((1 << inst.num_x) - 1)
    ok = np.ones(idx.shape, dtype=bool)
    for k, (start, nbits) in enumerate(layout.slack_spans):
        r = (idx >> start) & ((1 << nbits) - 1)
        ok &= loads[k][x] + r == inst.capacities[k]
    return ok


def compute_metrics(
    samples,
    inst: KnapsackInstance,
    protocol: Protocol,
    oracle: OracleResult,
) -> Metrics:
    """P_opt / P_90 of a SampleSet (or an exact probability vector).

    Under ``standard`` a hit additionally needs converged slack bits; the
    other protocols look at the x-bits only.
    """
    protocol = Protocol(protocol)
    if isinstance(samples, SampleSet):
        idx, weight = samples.indices, samples.counts / samples.shots
        n = samples.num_qubits
    else:
        weight = np.asarray(samples, dtype=np.float64)
        idx = np.arange(weight.size, dtype=np.int64)
        n = int(weight.size).bit_length() - 1
    expected = protocol.num_qubits(inst)
    if n != expected:
        raise ValueError(f"samples have {n} qubits, protocol {protocol.value} expects {expected}")

    values, single, excess2, _ = _x_parts(inst)
    x = idx & ((1 << inst.num_x) - 1)
    ok = (single[x] == 0) & (excess2[x] == 0)
    if protocol is Protocol.STANDARD_SLACK:
        ok = ok & slack_converged(inst, idx)
    v = values[x]
    vopt = oracle.optimal_value
    opt = ok & (v == vopt)
    near = ok & (10 * v >= 9 * vopt)
    support = weight > 0
    found = v[ok & support]
    best = int(found.max()) if found.size else 0
    if isinstance(samples, SampleSet):
        p_opt = int(samples.counts[opt].sum()) / samples.shots
        p_90 = int(samples.counts[near].sum()) / samples.shots
    else:
        # adding the non-optimal part keeps p_opt <= p_90 regardless of rounding
        p_opt = min(1.0, float(weight[opt].sum()))
        p_90 = min(1.0, p_opt + float(weight[near & ~opt].sum()))
    denom = float(1 << inst.num_x)
    return Metrics(
        p_opt=p_opt,
        p_90=p_90,
        baseline_p_opt=oracle.num_optimal / denom,
        baseline_p_90=oracle.count_90pct / denom,
        best_value_found=best,
        optimum_found=best == vopt,
    )
