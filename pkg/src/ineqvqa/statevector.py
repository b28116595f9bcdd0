"""Dense state-vector simulation of layered phase/mixer circuits.

Basis index ``b`` holds qubit ``q`` as bit ``q`` of ``b`` (qubit 0 is the
least significant bit). Bitstrings are written qubit-0-first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_MAX_QUBITS = 26

# Elements processed per chunk; bounds the temporaries of every kernel.
CHUNK = 1 << 18


class QubitLimitError(ValueError):
    pass


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())


@dataclass(frozen=True)
class DiagonalHamiltonian:
    num_qubits: int
    energies: np.ndarray = field(repr=False)

    @classmethod
    def from_model(cls, model, max_qubits: int = DEFAULT_MAX_QUBITS) -> "DiagonalHamiltonian":
        """Tabulate an IsingModel (or QuadraticModel) over the computational basis."""
        _check_qubits(model.num_vars, max_qubits)
        energies = np.asarray(model.energy_table(), dtype=np.float64)
        return cls(model.num_vars, energies)


@dataclass(frozen=True)
class CircuitParams:
    betas: tuple[float, ...] = ()
    gammas: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if len(self.betas) != len(self.gammas):
            raise ValueError("betas and gammas must have equal length")

    @property
    def p(self) -> int:
        return len(self.betas)

    def to_vector(self) -> np.ndarray:
        return np.array(self.betas + self.gammas, dtype=np.float64)

    @classmethod
    def from_vector(cls, theta: Sequence[float]) -> "CircuitParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size % 2:
            raise ValueError("parameter vector must have even length")
        p = theta.size // 2
        return cls(theta[:p], theta[p:])


@dataclass(frozen=True)
class SampleSet:
    """Measurement outcomes as unique basis indices and their counts."""

    num_qubits: int
    shots: int
    indices: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)

    def bitstring(self, index: int) -> str:
        return "".join(str((int(index) >> q) & 1) for q in range(self.num_qubits))

    def counts_by_bitstring(self) -> dict[str, int]:
        return {self.bitstring(i): int(c) for i, c in zip(self.indices, self.counts)}

    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots

    def to_dict(self) -> dict:
        return {"shots": self.shots, "counts": self.counts_by_bitstring()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "SampleSet":
        counts = doc["counts"]
        widths = {len(k) for k in counts}
        if len(widths) > 1:
            raise ValueError("bitstrings of unequal width")
        n = widths.pop() if widths else 0
        idx = np.array([sum(int(ch) << q for q, ch in enumerate(k)) for k in counts], dtype=np.int64)
        cnt = np.array(list(counts.values()), dtype=np.int64)
        order = np.argsort(idx)
        shots = int(doc["shots"])
        if cnt.sum() != shots:
            raise ValueError(f"counts sum to {cnt.sum()}, expected {shots} shots")
        return cls(n, shots, idx[order], cnt[order])


def _check_qubits(n: int, max_qubits: int):
    if n > max_qubits:
        raise QubitLimitError(
            f"{n} qubits exceed the simulator limit of {max_qubits} "
            f"({16 * 2**n / 2**30:.1f} GiB of amplitudes)"
        )


def init_minus_state(n: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    """|->^n: amplitude (-1)^popcount(b) / sqrt(2^n)."""
    if n < 1:
        raise ValueError("need at least one qubit")
    _check_qubits(n, max_qubits)
    amp = np.array([1.0], dtype=np.complex128)
    for _ in range(n):
        amp = np.concatenate([amp, -amp])
    amp *= 2.0 ** (-n / 2)
    return StateVector(n, amp)


def apply_phase(state: StateVector, diag: DiagonalHamiltonian, gamma: float) -> StateVector:
    """In place: amp[b] *= exp(-i gamma E(b))."""
    if diag.num_qubits != state.num_qubits:
        raise ValueError(f"diagonal has {diag.num_qubits} qubits, state has {state.num_qubits}")
    if gamma == 0:
        return state
    amp, energies = state.amplitudes, diag.energies
    for s in range(0, amp.size, CHUNK):
        e = energies[s : s + CHUNK]
        amp[s : s + CHUNK] *= np.cos(gamma * e) - 1j * np.sin(gamma * e)
    return state


def apply_mixer(state: StateVector, beta: float) -> StateVector:
    """In place: exp(-i beta sum_q X_q), one stride-2^q pass per qubit."""
    if beta == 0:
        return state
    c, s = np.cos(beta), np.sin(beta)
    amp = state.amplitudes
    n = state.num_qubits
    for q in range(n):
        stride = 1 << q
        view = amp.reshape(-1, 2, stride)
        rows = view.shape[0]
        if stride >= CHUNK:
            for r in range(rows):
                for lo in range(0, stride, CHUNK):
                    _rotate_pair(view[r, 0, lo : lo + CHUNK], view[r, 1, lo : lo + CHUNK], c, s)
        else:
            step = max(1, CHUNK // stride)
            for r in range(0, rows, step):
                _rotate_pair(view[r : r + step, 0, :], view[r : r + step, 1, :], c, s)
    return state


def _rotate_pair(a0: np.ndarray, a1: np.ndarray, c: float, s: float):
    # [[c, -is], [-is, c]] applied to (a0, a1), writing into the views.
    t0 = a0.copy()
    a0 *= c
    a0 -= 1j * s * a1
    a1 *= c
    a1 -= 1j * s * t0


def run_circuit(
    diag: DiagonalHamiltonian, params: CircuitParams, max_qubits: int = DEFAULT_MAX_QUBITS
) -> StateVector:
    """|->^n followed by phase(gamma_l) then mixer(beta_l) for l = 1..p."""
    state = init_minus_state(diag.num_qubits, max_qubits)
    for beta, gamma in zip(params.betas, params.gammas):
        apply_phase(state, diag, gamma)
        apply_mixer(state, beta)
    return state


def exact_distribution(state: StateVector) -> np.ndarray:
    amp = state.amplitudes
    return amp.real**2 + amp.imag**2


def sample(state_or_probs, shots: int, rng_seed=None) -> SampleSet:
    """Multinomial draw of ``shots`` measurements in the computational basis.

    ``rng_seed`` may be an int, a SeedSequence or a numpy Generator.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    if isinstance(state_or_probs, StateVector):
        probs = exact_distribution(state_or_probs)
        n = state_or_probs.num_qubits
    else:
        probs = np.asarray(state_or_probs, dtype=np.float64)
        n = int(probs.size).bit_length() - 1
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    counts = rng.multinomial(shots, probs / probs.sum())
    idx = np.flatnonzero(counts)
    return SampleSet(n, shots, idx.astype(np.int64), counts[idx].astype(np.int64))
