"""Slack-bit, slack-in-circuit and slack-free inequality handling for QAOA and
Trotterized adiabatic evolution on multi-knapsack problems."""

from .evaluation import Evaluator, Metrics, Protocol, classical_objective, compute_metrics, expectation
from .instances import (
    KnapsackInstance,
    OracleResult,
    assignment_value,
    brute_force_qubo_min,
    brute_force_solve,
    get_scenario,
    is_feasible,
    load_catalog,
    parse_instance,
    serialize_instance,
)
from .optimizer import (
    CircuitProblem,
    OptimizationTrace,
    OptimizerConfig,
    StopReason,
    adam_minimize,
    finite_diff_gradient,
    finite_diff_second,
    optimize_annealing_time,
    optimize_qaoa,
)
from .qubo import (
    BitLayout,
    IsingModel,
    PenaltyWeights,
    QuadraticModel,
    Variant,
    build_hamiltonian,
    default_weights,
    ising_energy,
    normalize_ising,
    qubo_energy,
    qubo_to_ising,
)
from .schedule import ScheduleKind, ScheduleSpec, derive_params, s_value
from .statevector import (
    CircuitParams,
    DiagonalHamiltonian,
    SampleSet,
    StateVector,
    apply_mixer,
    apply_phase,
    exact_distribution,
    init_minus_state,
    run_circuit,
    sample,
)

__version__ = "0.1.0"
