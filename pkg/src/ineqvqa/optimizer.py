"""Adam with finite-difference gradients and the windowed stopping rule.

Also hosts ``CircuitProblem``, which ties an instance and protocol to a
simulated circuit and an objective function of the layer angles.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .evaluation import Evaluator, Protocol
from .instances import KnapsackInstance
from .qubo import PenaltyWeights, build_hamiltonian, default_weights, normalize_ising, qubo_to_ising
from .schedule import ScheduleKind, ScheduleSpec, derive_params
from .statevector import (
    DEFAULT_MAX_QUBITS,
    CircuitParams,
    DiagonalHamiltonian,
    StateVector,
    exact_distribution,
    run_circuit,
    sample,
)

log = logging.getLogger(__name__)

SHOTS_PER_QUBIT = 500
MIN_ANNEALING_TIME = 1e-3


class StopReason(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"


class NonFiniteObjective(FloatingPointError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    window: int = 10
    f_omega: float = 10.0
    f_sd: float = 10.0
    fd_step: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    max_iterations: int = 1000

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        for name in ("learning_rate", "f_omega", "f_sd", "fd_step", "beta1", "beta2", "eps_adam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class OptimizationTrace:
    values: list[float]
    params: np.ndarray
    iterations_used: int
    stop_reason: StopReason
    initial_params: np.ndarray = field(default_factory=lambda: np.empty(0))
    best_params: np.ndarray = field(default_factory=lambda: np.empty(0))
    best_value: float = math.inf


def finite_diff_gradient(f: Callable, params, eps: float) -> np.ndarray:
    """Central differences (f(x + eps e_k) - f(x - eps e_k)) / 2 eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(params, dtype=np.float64)
    grad = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = eps
        grad[k] = (f(x + e) - f(x - e)) / (2 * eps)
    return grad


def finite_diff_second(f: Callable, params, eps: float) -> np.ndarray:
    """Diagonal second derivatives (f(x + eps e_k) - 2 f(x) + f(x - eps e_k)) / eps^2."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(params, dtype=np.float64)
    f0 = f(x)
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = eps
        out[k] = (f(x + e) - 2 * f0 + f(x - e)) / eps**2
    return out


def _checked(f, x, iteration):
    val = float(f(x))
    if not math.isfinite(val):
        raise NonFiniteObjective(f"objective returned {val} at iteration {iteration}, params={x.tolist()}")
    return val


def adam_minimize(
    f: Callable[[np.ndarray], float],
    init_params: Sequence[float],
    config: OptimizerConfig = OptimizerConfig(),
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> OptimizationTrace:
    """Minimize ``f`` with Adam on central-difference gradients.

    Every ``window`` iterations the mean of the last ``window`` objective
    values is compared with the mean at the previous checkpoint. The run stops
    once that change is below ``f_omega`` and every diagonal second derivative
    exceeds ``f_sd``; otherwise it ends after ``max_iterations``.
    """
    x = np.array(init_params, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("initial parameters must be finite")
    cfg = config
    x0 = x.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    values: list[float] = []
    best_x, best_val = x.copy(), math.inf
    prev_avg = None
    eps = cfg.fd_step
    for it in range(1, cfg.max_iterations + 1):
        f0 = _checked(f, x, it)
        values.append(f0)
        if f0 < best_val:
            best_x, best_val = x.copy(), f0
        f_plus = np.empty_like(x)
        f_minus = np.empty_like(x)
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = eps
            f_plus[k] = _checked(f, x + e, it)
            f_minus[k] = _checked(f, x - e, it)
        grad = (f_plus - f_minus) / (2 * eps)

        if it % cfg.window == 0:
            avg = float(np.mean(values[-cfg.window :]))
            if prev_avg is not None and abs(avg - prev_avg) < cfg.f_omega:
                second = (f_plus - 2 * f0 + f_minus) / eps**2
                if np.all(second > cfg.f_sd):
                    log.debug("converged at iteration %d (avg %.4g)", it, avg)
                    return OptimizationTrace(
                        values, x, it, StopReason.CONVERGED, x0, best_x, best_val
                    )
            prev_avg = avg

        m = cfg.beta1 * m + (1 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1 - cfg.beta2) * grad**2
        m_hat = m / (1 - cfg.beta1**it)
        v_hat = v / (1 - cfg.beta2**it)
        x = x - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
        if project is not None:
            x = project(x)
    return OptimizationTrace(
        values, x, cfg.max_iterations, StopReason.MAX_ITERATIONS, x0, best_x, best_val
    )


# ---------------------------------------------------------------------------
# Circuit objectives
# ---------------------------------------------------------------------------


class CircuitProblem:
    """Circuit Hamiltonian, diagonal table and scorer for one (instance, protocol).

    The circuit uses the normalized Ising form of the protocol's QUBO; scoring
    stays at problem scale.
    """

    def __init__(
        self,
        inst: KnapsackInstance,
        protocol: Protocol,
        weights: PenaltyWeights | None = None,
        normalize: bool = True,
        max_qubits: int = DEFAULT_MAX_QUBITS,
    ):
        self.inst = inst
        self.protocol = Protocol(protocol)
        self.weights = weights or default_weights(inst, self.protocol.variant)
        self.qubo = build_hamiltonian(inst, self.protocol.variant, self.weights)
        ising = qubo_to_ising(self.qubo)
        self.ising = normalize_ising(ising) if normalize else ising
        self.max_qubits = max_qubits
        self.diag = DiagonalHamiltonian.from_model(self.ising, max_qubits)
        self.evaluator = Evaluator(inst, self.protocol, self.weights, self.qubo)

    @property
    def num_qubits(self) -> int:
        return self.diag.num_qubits

    @property
    def default_shots(self) -> int:
        return SHOTS_PER_QUBIT * self.num_qubits

    def state(self, params: CircuitParams) -> StateVector:
        return run_circuit(self.diag, params, self.max_qubits)

    def expectation(self, params: CircuitParams, shots: int | None = None, rng=None) -> float:
        """Sampled expectation, or the exact one when ``shots`` is None."""
        st = self.state(params)
        if shots is None:
            return self.evaluator.expectation(exact_distribution(st))
        return self.evaluator.expectation(sample(st, shots, rng))

    def objective(self, shots: int | None, rng=None) -> Callable[[np.ndarray], float]:
        """theta = (betas..., gammas...) -> expectation, drawing fresh samples per call."""
        if shots is not None and not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)

        def f(theta):
            return self.expectation(CircuitParams.from_vector(theta), shots, rng)

        return f


def optimize_qaoa(
    inst: KnapsackInstance,
    protocol: Protocol,
    schedule_spec: ScheduleSpec | None,
    weights: PenaltyWeights | None = None,
    shots: int | None = SHOTS_PER_QUBIT,
    seed=None,
    config: OptimizerConfig = OptimizerConfig(),
    problem: CircuitProblem | None = None,
    shots_per_qubit: bool = True,
    init_params: CircuitParams | None = None,
) -> tuple[CircuitParams, OptimizationTrace]:
    """Adam-optimize QAOA angles starting from the schedule-derived ones.

    ``shots=None`` evaluates exact expectations. With ``shots_per_qubit`` the
    shot count is multiplied by the circuit's qubit count. A ``None`` schedule
    (or empty ``init_params``) means p = 0: nothing is optimized.
    """
    init = init_params if init_params is not None else (
        derive_params(schedule_spec) if schedule_spec is not None else CircuitParams()
    )
    if init.p == 0:
        empty = OptimizationTrace([], np.empty(0), 0, StopReason.CONVERGED)
        return CircuitParams(), empty
    problem = problem or CircuitProblem(inst, protocol, weights)
    n_shots = None if shots is None else (shots * problem.num_qubits if shots_per_qubit else shots)
    f = problem.objective(n_shots, seed)
    trace = adam_minimize(f, init.to_vector(), config)
    return CircuitParams.from_vector(trace.params), trace


def optimize_annealing_time(
    inst: KnapsackInstance,
    protocol: Protocol,
    kind: ScheduleKind,
    p: int,
    weights: PenaltyWeights | None = None,
    shots: int | None = SHOTS_PER_QUBIT,
    seed=None,
    config: OptimizerConfig = OptimizerConfig(),
    problem: CircuitProblem | None = None,
    init_dt: float = 0.75,
    shots_per_qubit: bool = True,
) -> tuple[float, OptimizationTrace]:
    """One-parameter Adam over the total annealing time T (dt = T / p).

    T is kept at or above ``MIN_ANNEALING_TIME``; returns the best T seen.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    kind = ScheduleKind(kind)
    if kind is ScheduleKind.RANDOM:
        raise ValueError("random angles do not depend on the annealing time")
    problem = problem or CircuitProblem(inst, protocol, weights)
    n_shots = None if shots is None else (shots * problem.num_qubits if shots_per_qubit else shots)
    rng = None if n_shots is None else np.random.default_rng(seed)

    def f(theta):
        T = max(float(theta[0]), MIN_ANNEALING_TIME)
        params = derive_params(ScheduleSpec(kind, p, T / p))
        return problem.expectation(params, n_shots, rng)

    def clamp(theta):
        return np.maximum(theta, MIN_ANNEALING_TIME)

    trace = adam_minimize(f, [init_dt * p], config, project=clamp)
    return float(trace.best_params[0]), trace


def params_for_annealing_time(kind: ScheduleKind, p: int, T: float) -> CircuitParams:
    return derive_params(ScheduleSpec(kind, p, max(T, MIN_ANNEALING_TIME) / p))
