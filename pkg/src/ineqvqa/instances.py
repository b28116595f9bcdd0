"""Multi-knapsack instances, the built-in scenario catalog and exact oracles."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Enumeration limits for the brute-force oracles.
MAX_PLACEMENT_BITS = 30
MAX_QUBO_VARS = 24

_CHUNK = 1 << 20


class InstanceError(ValueError):
    """Raised for malformed instance documents or inconsistent dimensions.

    ``path`` names the offending field, e.g. ``values[1]`` or ``capacities[0]``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class KnapsackInstance:
    """0/1 multi-knapsack problem.

    ``values[k][i]`` is the value of item ``i`` when packed into knapsack ``k``.
    """

    capacities: tuple[int, ...]
    weights: tuple[int, ...]
    values: tuple[tuple[int, ...], ...]
    scenario_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "capacities", tuple(self.capacities))
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "values", tuple(tuple(row) for row in self.values))
        _validate(self.capacities, self.weights, self.values)

    @property
    def num_knapsacks(self) -> int:
        return len(self.capacities)

    @property
    def num_items(self) -> int:
        return len(self.weights)

    @property
    def num_x(self) -> int:
        """Number of logical (assignment) bits, M*N."""
        return self.num_knapsacks * self.num_items

    @property
    def slack_bits(self) -> tuple[int, ...]:
        """Slack bits needed per knapsack: floor(log2 c) + 1."""
        return tuple(int(c).bit_length() for c in self.capacities)

    @property
    def num_slack(self) -> int:
        return sum(self.slack_bits)

    def value_matrix(self) -> np.ndarray:
        return np.array(self.values, dtype=np.int64)


def _check_positive_ints(seq, path):
    for i, v in enumerate(seq):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise InstanceError(f"expected integer, got {v!r}", f"{path}[{i}]")
        if v <= 0:
            raise InstanceError(f"must be a positive integer, got {v}", f"{path}[{i}]")


def _validate(capacities, weights, values):
    if len(capacities) < 1:
        raise InstanceError("at least one knapsack required", "capacities")
    if len(weights) < 1:
        raise InstanceError("at least one item required", "weights")
    _check_positive_ints(capacities, "capacities")
    _check_positive_ints(weights, "weights")
    if len(values) != len(capacities):
        raise InstanceError(
            f"dimension mismatch: {len(values)} value rows for {len(capacities)} knapsacks",
            "values",
        )
    for k, row in enumerate(values):
        if len(row) != len(weights):
            raise InstanceError(
                f"dimension mismatch: {len(row)} values for {len(weights)} items",
                f"values[{k}]",
            )
        _check_positive_ints(row, f"values[{k}]")


# Assignments are M x N 0/1 integer arrays; row k = knapsack, column i = item.

def as_assignment(inst: KnapsackInstance, bits) -> np.ndarray:
    """Coerce a flat x-bit vector or an M x N matrix to an assignment matrix."""
    a = np.asarray(bits, dtype=np.int64)
    shape = (inst.num_knapsacks, inst.num_items)
    if a.shape == shape:
        return a
    if a.ndim == 1 and a.size == inst.num_x:
        return a.reshape(shape)
    raise InstanceError(f"assignment shape {a.shape} does not match {shape}")


def is_feasible(inst: KnapsackInstance, assignment) -> bool:
    a = as_assignment(inst, assignment)
    if np.any((a != 0) & (a != 1)):
        raise InstanceError("assignment entries must be 0 or 1")
    if np.any(a.sum(axis=0) > 1):
        return False
    loads = a @ np.asarray(inst.weights, dtype=np.int64)
    return bool(np.all(loads <= np.asarray(inst.capacities)))


def assignment_value(inst: KnapsackInstance, assignment) -> int:
    a = as_assignment(inst, assignment)
    return int((a * inst.value_matrix()).sum())


# ---------------------------------------------------------------------------
# Exact oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    optimal_value: int
    optimal_assignments: list[np.ndarray] = field(repr=False)
    count_90pct: int

    @property
    def num_optimal(self) -> int:
        return len(self.optimal_assignments)


def _placement_chunks(inst: KnapsackInstance):
    """Yield (digits, values, feasible) over all (M+1)^N item placements.

    Digit 0 means "not packed", digit k+1 means "packed into knapsack k".
    """
    M, N = inst.num_knapsacks, inst.num_items
    base = M + 1
    total = base**N
    w = np.asarray(inst.weights, dtype=np.int64)
    v = inst.value_matrix()
    # v_ext[d, i]: value of item i under digit d
    v_ext = np.vstack([np.zeros((1, N), dtype=np.int64), v])
    caps = np.asarray(inst.capacities, dtype=np.int64)
    powers = base ** np.arange(N, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // powers) % base
        values = v_ext[digits, np.arange(N)].sum(axis=1)
        feasible = np.ones(idx.size, dtype=bool)
        for k in range(M):
            load = ((digits == k + 1) * w).sum(axis=1)
            feasible &= load <= caps[k]
        yield digits, values, feasible


def brute_force_solve(inst: KnapsackInstance, threshold: tuple[int, int] = (9, 10)) -> OracleResult:
    """Exhaustive optimum of a multi-knapsack instance.

    ``threshold`` is the near-optimality fraction as an integer ratio; the
    default counts placements with ``10 * value >= 9 * V_opt``.
    """
    if inst.num_x > MAX_PLACEMENT_BITS:
        raise EnumerationTooLarge(
            f"M*N = {inst.num_x} exceeds the enumeration bound {MAX_PLACEMENT_BITS}"
        )
    num, den = threshold
    best = 0
    for _, values, feasible in _placement_chunks(inst):
        if feasible.any():
            best = max(best, int(values[feasible].max()))
    optima: list[np.ndarray] = []
    count = 0
    M, N = inst.num_knapsacks, inst.num_items
    for digits, values, feasible in _placement_chunks(inst):
        count += int(np.count_nonzero(feasible & (den * values >= num * best)))
        for row in digits[feasible & (values == best)]:
            a = np.zeros((M, N), dtype=np.int64)
            packed = row > 0
            a[row[packed] - 1, np.flatnonzero(packed)] = 1
            optima.append(a)
    return OracleResult(optimal_value=best, optimal_assignments=optima, count_90pct=count)


def x_index_tables(inst: KnapsackInstance) -> tuple[np.ndarray, np.ndarray]:
    """Value and feasibility of every x-bitstring, indexed by basis index.

    Bit ``k*N + i`` of the index is x[k][i]; the table has 2^(M*N) entries.
    """
    M, N = inst.num_knapsacks, inst.num_items
    n = M * N
    if n > MAX_QUBO_VARS:
        raise EnumerationTooLarge(f"{n} x-bits exceed the table bound {MAX_QUBO_VARS}")
    idx = np.arange(1 << n, dtype=np.int64)
    values = np.zeros(idx.size, dtype=np.int64)
    feasible = np.ones(idx.size, dtype=bool)
    occupancy = np.zeros((idx.size,), dtype=np.int64)
    v = inst.value_matrix()
    for i in range(N):
        occupancy[:] = 0
        for k in range(M):
            bit = (idx >> (k * N + i)) & 1
            occupancy += bit
            values += bit * v[k, i]
        feasible &= occupancy <= 1
    for k in range(M):
        load = np.zeros(idx.size, dtype=np.int64)
        for i in range(N):
            load += ((idx >> (k * N + i)) & 1) * inst.weights[i]
        feasible &= load <= inst.capacities[k]
    return values, feasible


def brute_force_qubo_min(model) -> tuple[float, list[np.ndarray]]:
    """Exact ground energy of a quadratic model and all minimizing bitstrings."""
    if model.num_vars > MAX_QUBO_VARS:
        raise EnumerationTooLarge(
            f"{model.num_vars} variables exceed the enumeration bound {MAX_QUBO_VARS}"
        )
    energies = model.energy_table()
    best = energies.min()
    winners = np.flatnonzero(energies == best)
    bits = [((int(b) >> np.arange(model.num_vars)) & 1).astype(np.int64) for b in winners]
    return best.item(), bits


# ---------------------------------------------------------------------------
# Catalog and JSON I/O
# ---------------------------------------------------------------------------

_v16 = (19, 19, 17, 17, 19, 19, 17, 17)

_CATALOG_DATA: list[tuple[tuple, tuple, tuple]] = [
    ((9,), (4, 6), ((19, 16),)),
    ((3,), (2, 2, 2, 3), ((4, 4, 1, 2),)),
    ((3,), (3, 2, 2, 2, 3, 2), ((1, 3, 5, 2, 4, 1),)),
    ((10,), (6, 6, 3, 7), ((19, 19, 17, 17),)),
    ((8,), (2, 6, 5, 5, 4), ((15, 15, 16, 17, 17),)),
    ((8,), (2, 4, 5, 2, 3), ((18, 17, 19, 18, 19),)),
    ((10,), (7, 1, 6, 7, 5, 3), ((19, 17, 15, 17, 15, 18),)),
    ((8,), (6, 7, 4, 3, 3, 2), ((19, 18, 16, 18, 17, 16),)),
    ((8,), (5, 4, 1, 5, 4, 1, 2, 3), ((17, 16, 17, 15, 18, 17, 16, 18),)),
    ((9,), (3, 2, 5, 1, 4, 4, 1, 4), ((16, 17, 17, 19, 18, 16, 17, 19),)),
    ((11, 8), (2, 4, 4), ((19, 16, 16), (19, 16, 18))),
    ((8, 11), (3, 6, 2), ((18, 19, 17), (18, 17, 18))),
    ((9, 9), (4, 6, 4, 6), ((19, 16, 19, 16), (19, 16, 19, 16))),
    ((10, 10), (7, 1, 5, 7), ((18, 16, 15, 19), (16, 17, 15, 16))),
    ((8, 8), (7, 4, 3, 7, 4, 3), ((15, 15, 18, 15, 15, 18), (15, 15, 18, 15, 15, 18))),
    ((8, 8), (5, 5, 5, 5, 5, 5), ((19, 17, 18, 19, 17, 18), (19, 17, 18, 19, 17, 18))),
    ((10, 10), (6, 6, 3, 7, 6, 6, 3, 7), (_v16, _v16)),
    (
        (11, 9),
        (1, 6, 4, 5, 7, 3, 4, 5),
        ((19, 19, 17, 15, 19, 15, 16, 15), (19, 15, 18, 15, 15, 18, 18, 17)),
    ),
    (
        (9, 10),
        (3, 5, 2, 3, 2, 6, 5, 2, 7),
        ((15, 18, 15, 17, 16, 18, 16, 16, 15), (18, 15, 18, 17, 16, 16, 19, 18, 17)),
    ),
    (
        (8, 9),
        (1, 5, 1, 1, 5, 7, 7, 5, 3),
        ((18, 15, 15, 16, 17, 16, 19, 15, 17), (18, 15, 16, 16, 16, 18, 15, 19, 15)),
    ),
    (
        (9, 9, 9),
        (4, 6, 4, 6, 4, 6),
        ((19, 16, 19, 16, 19, 16),) * 3,
    ),
    (
        (9, 10, 11),
        (7, 6, 7, 5, 5, 4),
        ((19, 16, 19, 17, 17, 19), (16, 17, 19, 17, 18, 16), (15, 16, 19, 17, 17, 19)),
    ),
]

# Scenarios used by the default experiment sweep; 20 and 21 are opt-in.
DEFAULT_SCENARIOS = tuple(range(20))


def load_catalog() -> list[KnapsackInstance]:
    return [
        KnapsackInstance(capacities=c, weights=w, values=v, scenario_id=sid)
        for sid, (c, w, v) in enumerate(_CATALOG_DATA)
    ]


def get_scenario(scenario_id: int) -> KnapsackInstance:
    if not 0 <= scenario_id < len(_CATALOG_DATA):
        raise KeyError(f"unknown scenario {scenario_id}; catalog has 0..{len(_CATALOG_DATA) - 1}")
    return load_catalog()[scenario_id]


def instance_to_dict(inst: KnapsackInstance) -> dict:
    doc: dict = {}
    if inst.scenario_id is not None:
        doc["scenario_id"] = inst.scenario_id
    doc["capacities"] = list(inst.capacities)
    doc["weights"] = list(inst.weights)
    doc["values"] = [list(row) for row in inst.values]
    return doc


def serialize_instance(inst: KnapsackInstance) -> str:
    return json.dumps(instance_to_dict(inst))


def instance_from_dict(doc) -> KnapsackInstance:
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a JSON object")
    for key in ("capacities", "weights", "values"):
        if key not in doc:
            raise InstanceError("missing field", key)
    for key in ("capacities", "weights"):
        if not isinstance(doc[key], list):
            raise InstanceError("expected a list", key)
    values = doc["values"]
    if not isinstance(values, list) or not all(isinstance(r, list) for r in values):
        raise InstanceError("expected a list of lists", "values")
    sid = doc.get("scenario_id")
    if sid is not None and (isinstance(sid, bool) or not isinstance(sid, int)):
        raise InstanceError(f"expected integer, got {sid!r}", "scenario_id")
    return KnapsackInstance(
        capacities=doc["capacities"], weights=doc["weights"], values=values, scenario_id=sid
    )


def parse_instance(text: str) -> KnapsackInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON: {exc.msg} at line {exc.lineno}") from exc
    return instance_from_dict(doc)


def catalog_table(instances: Sequence[KnapsackInstance] | None = None) -> list[dict]:
    """Rows of the scenario overview: sizes, optimum and number of optima."""
    rows = []
    for inst in instances if instances is not None else load_catalog():
        res = brute_force_solve(inst)
        rows.append(
            {
                "scenario": inst.scenario_id,
                "knapsacks": inst.num_knapsacks,
                "items": inst.num_items,
                "logical_bits": inst.num_x,
                "slack_bits": inst.num_slack,
                "opt_value": res.optimal_value,
                "num_optimal": res.num_optimal,
            }
        )
    return rows
