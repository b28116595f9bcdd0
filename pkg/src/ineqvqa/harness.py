"""Experiment sweeps, result persistence, reporting and table verification."""

from __future__ import annotations

import csv
import enum
import functools
import io
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evaluation import Protocol, compute_metrics
from .instances import (
    DEFAULT_SCENARIOS,
    KnapsackInstance,
    brute_force_qubo_min,
    brute_force_solve,
    get_scenario,
    load_catalog,
)
from .optimizer import (
    SHOTS_PER_QUBIT,
    CircuitProblem,
    OptimizerConfig,
    optimize_annealing_time,
    optimize_qaoa,
    params_for_annealing_time,
)
from .qubo import PenaltyWeights, Variant, default_weights, hamiltonian_terms
from .schedule import ScheduleKind, ScheduleSpec, derive_params
from .statevector import DEFAULT_MAX_QUBITS, QubitLimitError, sample

log = logging.getLogger(__name__)

ALGORITHMS = ("QAOA", "TAE", "TAE-varT")

CSV_COLUMNS = [
    "scenario",
    "algorithm",
    "protocol",
    "p",
    "schedule",
    "dt",
    "repetition",
    "p_opt",
    "p_90",
    "baseline_p_opt",
    "baseline_p_90",
    "expectation",
    "iterations",
    "seed",
    "wall_ms",
]

SETTING_KEYS = ["scenario", "algorithm", "protocol", "p", "schedule", "dt"]
MEAN_KEYS = ["p_opt", "p_90", "baseline_p_opt", "baseline_p_90", "expectation", "iterations", "wall_ms"]

_ALG_CODE = {a: i for i, a in enumerate(ALGORITHMS)}
_PROTO_CODE = {p: i for i, p in enumerate(Protocol)}


def _as_list(v):
    if isinstance(v, (str, bytes, enum.Enum)) or not isinstance(v, Iterable):
        return [v]
    return list(v)


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[int, ...] = DEFAULT_SCENARIOS
    algorithms: tuple[str, ...] = ("QAOA",)
    protocols: tuple[Protocol, ...] = (Protocol.NOSLACK,)
    layers: tuple[int, ...] = (1, 2, 3)
    schedule: ScheduleKind = ScheduleKind.SINUSOIDAL
    dt: float = 0.75
    shots_per_qubit: int = SHOTS_PER_QUBIT
    repetitions: int = 10
    master_seed: int = 0
    optimizer: OptimizerConfig = OptimizerConfig()
    output: str | None = None
    weights: PenaltyWeights | None = None
    # A = a_factor * B overrides the per-variant default ratio when set
    a_factor: float | None = None
    normalize: bool = True
    exact_optimization: bool = False
    record_timing: bool = True
    max_qubits: int = DEFAULT_MAX_QUBITS
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(int(s) for s in _as_list(self.scenarios)))
        object.__setattr__(self, "algorithms", tuple(_as_list(self.algorithms)))
        object.__setattr__(self, "protocols", tuple(Protocol(p) for p in _as_list(self.protocols)))
        object.__setattr__(self, "layers", tuple(int(p) for p in _as_list(self.layers)))
        object.__setattr__(self, "schedule", ScheduleKind(self.schedule))
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.shots_per_qubit < 1:
            raise ValueError("shots_per_qubit must be >= 1")
        if any(p < 1 for p in self.layers):
            raise ValueError("layer counts must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        for single, plural in (("algorithm", "algorithms"), ("protocol", "protocols"), ("scenario", "scenarios")):
            if single in doc:
                doc[plural] = doc.pop(single)
        if isinstance(doc.get("optimizer"), dict):
            doc["optimizer"] = OptimizerConfig(**doc["optimizer"])
        if isinstance(doc.get("weights"), dict):
            doc["weights"] = PenaltyWeights(**doc["weights"])
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protocols"] = [p.value for p in self.protocols]
        d["schedule"] = self.schedule.value
        return d

    def cells(self) -> list[tuple]:
        return list(
            itertools.product(
                self.scenarios, self.algorithms, self.protocols, self.layers, range(self.repetitions)
            )
        )


def cell_seed(master_seed: int, scenario: int, algorithm: str, protocol: Protocol, p: int, rep: int) -> int:
    """Deterministic per-cell seed, independent of execution order."""
    ss = np.random.SeedSequence([master_seed, scenario, _ALG_CODE[algorithm], _PROTO_CODE[protocol], p, rep])
    return int(ss.generate_state(1, np.uint32)[0])


def cell_weights(config: ExperimentConfig, inst: KnapsackInstance, protocol: Protocol) -> PenaltyWeights:
    if config.weights is not None:
        return config.weights
    w = default_weights(inst, protocol.variant)
    if config.a_factor is not None:
        w = replace(w, A=config.a_factor * w.B)
    return w


@functools.lru_cache(maxsize=32)
def _oracle(inst: KnapsackInstance):
    return brute_force_solve(inst)


@functools.lru_cache(maxsize=16)
def _problem(inst, protocol, weights, normalize, max_qubits) -> CircuitProblem:
    return CircuitProblem(inst, protocol, weights, normalize=normalize, max_qubits=max_qubits)


def run_cell(config: ExperimentConfig, cell: tuple) -> dict:
    scenario, algorithm, protocol, p, rep = cell
    start = time.perf_counter()
    seed = cell_seed(config.master_seed, scenario, algorithm, protocol, p, rep)
    init_ss, opt_ss, final_ss = np.random.SeedSequence(seed).spawn(3)
    record = {
        "scenario": scenario,
        "algorithm": algorithm,
        "protocol": protocol.value,
        "p": p,
        "schedule": config.schedule.value,
        "dt": config.dt,
        "repetition": rep,
        "seed": seed,
    }
    inst = get_scenario(scenario)
    n = protocol.num_qubits(inst)
    record["num_qubits"] = n
    if n > config.max_qubits:
        record["error"] = f"{n} qubits exceed limit {config.max_qubits}"
        record["wall_ms"] = 0
        return record
    try:
        weights = cell_weights(config, inst, protocol)
        problem = _problem(inst, protocol, weights, config.normalize, config.max_qubits)
    except QubitLimitError as exc:
        record["error"] = str(exc)
        record["wall_ms"] = 0
        return record

    spec = ScheduleSpec(
        config.schedule, p, config.dt, rng_seed=int(init_ss.generate_state(1, np.uint32)[0])
    )
    shots_opt = None if config.exact_optimization else config.shots_per_qubit * n
    iterations = 0
    extra: dict = {}
    if algorithm == "QAOA":
        params, trace = optimize_qaoa(
            inst, protocol, spec, weights, shots_opt, np.random.default_rng(opt_ss),
            config.optimizer, problem=problem, shots_per_qubit=False,
        )
        iterations = trace.iterations_used
        extra["stop_reason"] = trace.stop_reason.value
        extra["initial_params"] = trace.initial_params.tolist()
    elif algorithm == "TAE":
        params = derive_params(spec)
    else:
        T, trace = optimize_annealing_time(
            inst, protocol, config.schedule, p, weights, shots_opt, np.random.default_rng(opt_ss),
            config.optimizer, problem=problem, init_dt=config.dt, shots_per_qubit=False,
        )
        params = params_for_annealing_time(config.schedule, p, T)
        iterations = trace.iterations_used
        extra["stop_reason"] = trace.stop_reason.value
        extra["annealing_time"] = T

    state = problem.state(params)
    shots = config.shots_per_qubit * n
    samples = sample(state, shots, np.random.default_rng(final_ss))
    metrics = compute_metrics(samples, inst, protocol, _oracle(inst))
    record.update(metrics.to_dict())
    record["expectation"] = problem.evaluator.expectation(samples)
    record["iterations"] = iterations
    record["shots"] = shots
    record["betas"] = list(params.betas)
    record["gammas"] = list(params.gammas)
    record.update(extra)
    record["wall_ms"] = round((time.perf_counter() - start) * 1000, 3) if config.record_timing else 0
    return record


def _run_cell_star(args):
    return run_cell(*args)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[dict] = field(default_factory=list)

    @property
    def means(self) -> list[dict]:
        return aggregate(self.records)

    def to_csv(self) -> str:
        return records_to_csv(self.records)


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResult:
    """Run every (scenario, algorithm, protocol, p, repetition) cell.

    Records are streamed to ``config.output`` as JSON lines in cell order; a
    cell that cannot run (qubit limit) is recorded with an ``error`` field.
    """
    cells = config.cells()
    result = ExperimentResult(config)
    sink = open(config.output, "a", encoding="utf-8") if config.output else None
    try:
        if config.jobs > 1:
            pool = ProcessPoolExecutor(max_workers=config.jobs)
            it = pool.map(_run_cell_star, [(config, c) for c in cells], chunksize=1)
        else:
            pool = None
            it = (run_cell(config, c) for c in cells)
        for rec in it:
            if "error" in rec:
                log.warning("cell %s skipped: %s", rec, rec["error"])
            result.records.append(rec)
            if sink:
                sink.write(json.dumps(rec, sort_keys=True) + "\n")
                sink.flush()
            if progress:
                progress(rec)
        if pool:
            pool.shutdown()
    finally:
        if sink:
            sink.close()
    return result


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        if "error" in r:
            continue
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def load_records(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"results file {path} does not exist")
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: corrupt record ({exc.msg})") from exc
    return records


def aggregate(records: Iterable[dict]) -> list[dict]:
    """Mean (and std of p_opt / p_90) per (scenario, algorithm, protocol, p, schedule, dt)."""
    groups: dict[tuple, list[dict]] = {}
    for r in records:
        if "error" in r:
            continue
        groups.setdefault(tuple(r[k] for k in SETTING_KEYS), []).append(r)
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        row = dict(zip(SETTING_KEYS, key))
        row["repetitions"] = len(rs)
        for k in MEAN_KEYS:
            row[k] = float(np.mean([r[k] for r in rs]))
        row["p_opt_std"] = float(np.std([r["p_opt"] for r in rs]))
        row["p_90_std"] = float(np.std([r["p_90"] for r in rs]))
        rows.append(row)
    return rows


AGG_COLUMNS = SETTING_KEYS + ["repetitions"] + MEAN_KEYS + ["p_opt_std", "p_90_std"]


def report(results_path, fmt: str = "csv") -> str:
    rows = aggregate(load_records(results_path))
    return format_rows(rows, fmt)


def format_rows(rows: list[dict], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, AGG_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in AGG_COLUMNS})
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt == "summary-table":
        head = f"{'scen':>4} {'alg':<8} {'protocol':<9} {'p':>3} {'reps':>4} {'P_opt':>9} {'base':>9} {'P_90':>9} {'base90':>9} {'iters':>7}"
        lines = [head, "-" * len(head)]
        for r in rows:
            lines.append(
                f"{r['scenario']:>4} {r['algorithm']:<8} {r['protocol']:<9} {r['p']:>3} {r['repetitions']:>4} "
                f"{r['p_opt']:>9.4f} {r['baseline_p_opt']:>9.4f} {r['p_90']:>9.4f} "
                f"{r['baseline_p_90']:>9.4f} {r['iterations']:>7.1f}"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# Table verification
# ---------------------------------------------------------------------------

# scenario: (logical bits, slack bits, optimal value, number of optima)
EXPECTED_OVERVIEW = {
    0: (2, 4, 19, 1), 1: (4, 2, 4, 2), 2: (6, 2, 5, 1), 3: (4, 4, 36, 2),
    4: (5, 4, 32, 2), 5: (5, 4, 55, 1), 6: (6, 4, 50, 2), 7: (6, 4, 51, 1),
    8: (8, 4, 68, 2), 9: (8, 4, 72, 1), 10: (6, 8, 53, 3), 11: (6, 8, 55, 1),
    12: (8, 8, 54, 4), 13: (8, 8, 52, 1), 14: (12, 8, 66, 6), 15: (12, 8, 38, 2),
    16: (16, 8, 72, 24), 17: (16, 8, 91, 3), 18: (18, 8, 105, 5), 19: (18, 8, 103, 1),
    20: (18, 12, 73, 54), 21: (18, 12, 92, 1),
}

# scenario: ((A*H_single, B*H~_capacity, C*H_obj) with A = B, same with A = 50 B)
EXPECTED_TERM_VALUES = {
    0: ((0, 45, -35), (0, 45, -35)),
    1: ((0, 0, -2), (0, 0, -2)),
    2: ((0, 0, -4), (0, 0, -4)),
    3: ((0, 0, -34), (0, 0, -34)),
    4: ((0, 0, -30), (0, 0, -30)),
    5: ((0, 0, -53), (0, 0, -53)),
    6: ((0, 0, -50), (0, 0, -50)),
    7: ((0, 0, -51), (0, 0, -51)),
    8: ((0, 0, -68), (0, 0, -68)),
    9: ((0, 0, -71), (0, 0, -71)),
    10: ((456, 114, -85), (0, 4674, -53)),
    11: ((472, 0, -89), (0, 4012, -53)),
    12: ((0, 320, -70), (0, 320, -70)),
    13: ((0, 1216, -67), (0, 1216, -67)),
    14: ((0, 220, -45), (0, 220, -45)),
    15: ((0, 1968, -74), (0, 1968, -74)),
    16: ((0, 0, -68), (0, 0, -68)),
    17: ((0, 0, -90), (0, 0, -90)),
    18: ((0, 0, -105), (0, 0, -105)),
    19: ((0, 0, -87), (0, 0, -87)),
}

TERM_TABLE_MAX_X_BITS = 18


def noslack_term_values(inst: KnapsackInstance, a_factor: int) -> set[tuple[int, int, int]]:
    """Weighted (H_single, H~_capacity, H_obj) at every ground state of H~_p."""
    B = default_weights(inst, Variant.STANDARD).B
    A, C = a_factor * B, 1
    terms = hamiltonian_terms(inst, Variant.NOSLACK)
    model = terms["single"].scaled(A) + terms["capacity"].scaled(B) + terms["obj"].scaled(C)
    _, minimizers = brute_force_qubo_min(model)
    return {
        (A * terms["single"].energy(x), B * terms["capacity"].energy(x), C * terms["obj"].energy(x))
        for x in minimizers
    }


@dataclass
class VerificationRow:
    table: str
    scenario: int
    expected: tuple
    actual: tuple
    seconds: float

    @property
    def ok(self) -> bool:
        return self.expected == self.actual


@dataclass
class VerificationReport:
    rows: list[VerificationRow]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def mismatches(self) -> list[VerificationRow]:
        return [r for r in self.rows if not r.ok]

    def render(self) -> str:
        lines = []
        for r in self.rows:
            status = "ok" if r.ok else "MISMATCH"
            lines.append(
                f"{r.table:<9} scenario {r.scenario:>2}: {status:<8} expected={r.expected} actual={r.actual} ({r.seconds:.2f}s)"
            )
        bad = len(self.mismatches)
        lines.append(f"{len(self.rows) - bad}/{len(self.rows)} rows match")
        return "\n".join(lines) + "\n"


def verify_tables(instances: Sequence[KnapsackInstance] | None = None, term_table: bool = True) -> VerificationReport:
    """Recompute the scenario overview and the ground-state term values by brute force."""
    instances = load_catalog() if instances is None else list(instances)
    rows = []
    for inst in instances:
        sid = inst.scenario_id
        if sid in EXPECTED_OVERVIEW:
            t = time.perf_counter()
            res = brute_force_solve(inst)
            actual = (inst.num_x, inst.num_slack, res.optimal_value, res.num_optimal)
            rows.append(VerificationRow("overview", sid, EXPECTED_OVERVIEW[sid], actual, time.perf_counter() - t))
    if term_table:
        for inst in instances:
            sid = inst.scenario_id
            if sid not in EXPECTED_TERM_VALUES or inst.num_x > TERM_TABLE_MAX_X_BITS:
                continue
            for col, factor in enumerate((1, 50)):
                t = time.perf_counter()
                found = noslack_term_values(inst, factor)
                # a unique triple is required; ties with differing terms count as a mismatch
                actual = next(iter(found)) if len(found) == 1 else tuple(sorted(found))
                label = "terms(A)" if factor == 1 else "terms(50A)"
                rows.append(
                    VerificationRow(label, sid, EXPECTED_TERM_VALUES[sid][col], actual, time.perf_counter() - t)
                )
    return VerificationReport(rows)
