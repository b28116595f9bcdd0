"""Knapsack QUBO construction, Ising conversion and energy evaluation.

Bit ordering: x-bit for (knapsack k, item i) sits at index ``k*N + i``; slack
bits follow all x-bits, knapsack-major, lowest power of two first.
"""

from __future__ import annotations

import enum
import json
import numbers
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .instances import KnapsackInstance


class Variant(enum.Enum):
    STANDARD = "standard"
    NOSLACK = "noslack"


@dataclass(frozen=True)
class BitLayout:
    num_x: int
    slack_spans: tuple[tuple[int, int], ...] = ()

    @property
    def total(self) -> int:
        return self.num_x + sum(n for _, n in self.slack_spans)

    @property
    def num_slack(self) -> int:
        return self.total - self.num_x

    @classmethod
    def x_only(cls, inst: KnapsackInstance) -> "BitLayout":
        return cls(num_x=inst.num_x)

    @classmethod
    def with_slack(cls, inst: KnapsackInstance) -> "BitLayout":
        spans = []
        start = inst.num_x
        for nbits in inst.slack_bits:
            spans.append((start, nbits))
            start += nbits
        return cls(num_x=inst.num_x, slack_spans=tuple(spans))

    def to_dict(self) -> dict:
        return {"num_x": self.num_x, "slack_spans": [list(s) for s in self.slack_spans]}


@dataclass(frozen=True)
class PenaltyWeights:
    A: float
    B: float
    C: float = 1

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0 and self.C > 0):
            raise ValueError(f"penalty weights must be positive, got {self}")


def _num(v):
    """Collapse integral Fractions/floats to int so exact models stay integer."""
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


@dataclass(frozen=True)
class QuadraticModel:
    """Quadratic pseudo-boolean function ``offset + sum a_i x_i + sum q_ij x_i x_j``.

    Quadratic keys are ``(i, j)`` with ``i < j``; squares of binaries are
    folded into the linear part on construction.
    """

    num_vars: int
    linear: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    offset: numbers.Number = 0
    layout: BitLayout | None = None

    @classmethod
    def build(cls, num_vars, linear=(), quadratic=(), offset=0, layout=None):
        lin: dict = {}
        quad: dict = {}
        for i, c in linear.items() if isinstance(linear, dict) else linear:
            lin[i] = lin.get(i, 0) + c
        items = quadratic.items() if isinstance(quadratic, dict) else quadratic
        for (i, j), c in items:
            if i == j:
                lin[i] = lin.get(i, 0) + c
                continue
            key = (i, j) if i < j else (j, i)
            quad[key] = quad.get(key, 0) + c
        for i in list(lin) + [k for pair in quad for k in pair]:
            if not 0 <= i < num_vars:
                raise IndexError(f"variable {i} outside 0..{num_vars - 1}")
        lin = {i: _num(c) for i, c in sorted(lin.items()) if c != 0}
        quad = {k: _num(c) for k, c in sorted(quad.items()) if c != 0}
        return cls(num_vars, lin, quad, _num(offset), layout)

    def __add__(self, other: "QuadraticModel") -> "QuadraticModel":
        n = max(self.num_vars, other.num_vars)
        layout = self.layout if self.num_vars >= other.num_vars else other.layout
        return QuadraticModel.build(
            n,
            list(self.linear.items()) + list(other.linear.items()),
            list(self.quadratic.items()) + list(other.quadratic.items()),
            self.offset + other.offset,
            layout,
        )

    def scaled(self, factor) -> "QuadraticModel":
        return QuadraticModel.build(
            self.num_vars,
            [(i, c * factor) for i, c in self.linear.items()],
            [(k, c * factor) for k, c in self.quadratic.items()],
            self.offset * factor,
            self.layout,
        )

    __mul__ = __rmul__ = scaled

    def is_integral(self) -> bool:
        coeffs = [self.offset, *self.linear.values(), *self.quadratic.values()]
        return all(isinstance(c, (int, np.integer)) for c in coeffs)

    def energy(self, bits) -> numbers.Number:
        return qubo_energy(self, bits)

    def energy_table(self) -> np.ndarray:
        """Energies of all 2^n bitstrings, indexed by basis index."""
        dtype = np.int64 if self.is_integral() else np.float64
        return _energy_table(self.num_vars, self.linear, self.quadratic, self.offset, dtype)

    def energies_at(self, indices) -> np.ndarray:
        """Energies at selected basis indices (vectorised, exact for integer models)."""
        idx = np.asarray(indices, dtype=np.int64)
        dtype = np.int64 if self.is_integral() else np.float64
        out = np.full(idx.shape, self.offset, dtype=dtype)
        for i, c in self.linear.items():
            out += c * ((idx >> i) & 1)
        for (i, j), c in self.quadratic.items():
            out += c * ((idx >> i) & (idx >> j) & 1)
        return out

    def to_dict(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "offset": self.offset,
            "linear": {str(i): c for i, c in self.linear.items()},
            "quadratic": {f"{i},{j}": c for (i, j), c in self.quadratic.items()},
            "layout": self.layout.to_dict() if self.layout else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _energy_table(n, linear, quadratic, offset, dtype) -> np.ndarray:
    """Evaluate a quadratic form on every bitstring in O(2^n) by doubling.

    With bit k being the most significant of the first 2^(k+1) entries,
    E[b + 2^k] = E[b] + a_k + sum_{j<k} q_jk b_j for b < 2^k.
    """
    conv = int if dtype == np.int64 else float
    linear = {i: conv(c) for i, c in linear.items()}
    quadratic = {k: conv(c) for k, c in quadratic.items()}
    out = np.empty(1 << n, dtype=dtype)
    out[0] = conv(offset)
    cross = np.empty(max(1, 1 << max(n - 1, 0)), dtype=dtype)
    cols: dict[int, dict[int, float]] = {}
    for (i, j), c in quadratic.items():
        cols.setdefault(j, {})[i] = c
    for k in range(n):
        size = 1 << k
        cross[0] = linear.get(k, 0)
        col = cols.get(k, {})
        for j in range(k):
            half = 1 << j
            np.add(cross[:half], col.get(j, 0), out=cross[half : 2 * half])
        np.add(out[:size], cross[:size], out=out[size : 2 * size])
    return out


def qubo_energy(model: QuadraticModel, bits) -> numbers.Number:
    x = [int(b) for b in np.asarray(bits).ravel()]
    if len(x) != model.num_vars:
        raise ValueError(f"expected {model.num_vars} bits, got {len(x)}")
    e = model.offset
    for i, c in model.linear.items():
        if x[i]:
            e += c
    for (i, j), c in model.quadratic.items():
        if x[i] and x[j]:
            e += c
    return e


# ---------------------------------------------------------------------------
# Knapsack terms
# ---------------------------------------------------------------------------


def _squared_linear(n, terms, const, layout=None) -> QuadraticModel:
    """Expand (sum_t c_t x_t + const)^2 for binary x."""
    lin = [(i, c * c + 2 * c * const) for i, c in terms]
    quad = []
    for a in range(len(terms)):
        ia, ca = terms[a]
        for b in range(a + 1, len(terms)):
            ib, cb = terms[b]
            quad.append(((ia, ib), 2 * ca * cb))
    return QuadraticModel.build(n, lin, quad, const * const, layout)


def term_h_obj(inst: KnapsackInstance, layout: BitLayout | None = None) -> QuadraticModel:
    layout = layout or BitLayout.x_only(inst)
    N = inst.num_items
    lin = [(k * N + i, -v) for k, row in enumerate(inst.values) for i, v in enumerate(row)]
    return QuadraticModel.build(layout.total, lin, layout=layout)


def term_h_single(inst: KnapsackInstance, layout: BitLayout | None = None) -> QuadraticModel:
    """Sum over items of s(s-1), s = number of knapsacks holding the item."""
    layout = layout or BitLayout.x_only(inst)
    M, N = inst.num_knapsacks, inst.num_items
    total = QuadraticModel.build(layout.total, layout=layout)
    for i in range(N):
        terms = [(k * N + i, 1) for k in range(M)]
        sq = _squared_linear(layout.total, terms, 0, layout)
        minus = QuadraticModel.build(layout.total, [(t, -1) for t, _ in terms], layout=layout)
        total = total + sq + minus
    return total


def term_h_capacity_slack(inst: KnapsackInstance, layout: BitLayout | None = None) -> QuadraticModel:
    layout = layout or BitLayout.with_slack(inst)
    N = inst.num_items
    total = QuadraticModel.build(layout.total, layout=layout)
    for k, cap in enumerate(inst.capacities):
        start, nbits = layout.slack_spans[k]
        terms = [(k * N + i, w) for i, w in enumerate(inst.weights)]
        terms += [(start + b, 1 << b) for b in range(nbits)]
        total = total + _squared_linear(layout.total, terms, -cap, layout)
    return total


def term_h_capacity_noslack(inst: KnapsackInstance, layout: BitLayout | None = None) -> QuadraticModel:
    layout = layout or BitLayout.x_only(inst)
    N = inst.num_items
    total = QuadraticModel.build(layout.total, layout=layout)
    for k, cap in enumerate(inst.capacities):
        terms = [(k * N + i, w) for i, w in enumerate(inst.weights)]
        total = total + _squared_linear(layout.total, terms, -cap, layout)
    return total


def hamiltonian_terms(inst: KnapsackInstance, variant: Variant) -> dict[str, QuadraticModel]:
    """Unweighted single / capacity / objective terms on the variant's layout."""
    variant = Variant(variant)
    if variant is Variant.STANDARD:
        layout = BitLayout.with_slack(inst)
        capacity = term_h_capacity_slack(inst, layout)
    else:
        layout = BitLayout.x_only(inst)
        capacity = term_h_capacity_noslack(inst, layout)
    return {
        "single": term_h_single(inst, layout),
        "capacity": capacity,
        "obj": term_h_obj(inst, layout),
    }


def build_hamiltonian(
    inst: KnapsackInstance, variant: Variant, weights: PenaltyWeights | None = None
) -> QuadraticModel:
    """A*H_single + B*H_capacity + C*H_obj for the chosen variant."""
    variant = Variant(variant)
    if weights is None:
        weights = default_weights(inst, variant)
    t = hamiltonian_terms(inst, variant)
    return (
        t["single"].scaled(weights.A) + t["capacity"].scaled(weights.B) + t["obj"].scaled(weights.C)
    )


def default_weights(inst: KnapsackInstance, variant: Variant) -> PenaltyWeights:
    """B = sum of weights + sum of values, C = 1; A = B (standard) or 50*B (no slack)."""
    B = sum(inst.weights) + sum(sum(row) for row in inst.values)
    A = B if Variant(variant) is Variant.STANDARD else 50 * B
    return PenaltyWeights(A=A, B=B, C=1)


# ---------------------------------------------------------------------------
# Ising form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingModel:
    """``offset + sum h_i z_i + sum J_ij z_i z_j`` with z = 1 - 2x."""

    num_vars: int
    h: dict
    J: dict
    offset: numbers.Number = 0
    nu_max: float = 1.0
    layout: BitLayout | None = None

    def coefficients(self) -> list:
        return [*self.h.values(), *self.J.values()]

    def to_qubo(self) -> QuadraticModel:
        """Re-express in binary variables (exact inverse of qubo_to_ising)."""
        lin: dict = {}
        quad = []
        offset = self.offset
        for i, c in self.h.items():
            offset += c
            lin[i] = lin.get(i, 0) - 2 * c
        for (i, j), c in self.J.items():
            offset += c
            lin[i] = lin.get(i, 0) - 2 * c
            lin[j] = lin.get(j, 0) - 2 * c
            quad.append(((i, j), 4 * c))
        return QuadraticModel.build(self.num_vars, lin, quad, offset, self.layout)

    def energy_table(self) -> np.ndarray:
        return self.to_qubo().energy_table().astype(np.float64)


def qubo_to_ising(q: QuadraticModel) -> IsingModel:
    h: dict = {}
    J: dict = {}
    offset = Fraction(q.offset)
    for i, a in q.linear.items():
        a = Fraction(a)
        offset += a / 2
        h[i] = h.get(i, 0) - a / 2
    for (i, j), c in q.quadratic.items():
        c = Fraction(c)
        offset += c / 4
        J[(i, j)] = c / 4
        h[i] = h.get(i, 0) - c / 4
        h[j] = h.get(j, 0) - c / 4
    h = {i: _num(c) for i, c in sorted(h.items()) if c != 0}
    J = {k: _num(c) for k, c in sorted(J.items()) if c != 0}
    return IsingModel(q.num_vars, h, J, _num(offset), 1.0, q.layout)


def normalize_ising(m: IsingModel) -> IsingModel:
    """Divide all coefficients, offset included, by the largest |h_i| or |J_ij|."""
    coeffs = m.coefficients()
    nu = max((abs(c) for c in coeffs), default=0)
    if nu == 0:
        raise ValueError("cannot normalize an Ising model without nonzero coefficients")
    nu = float(nu)
    return IsingModel(
        m.num_vars,
        {i: float(c) / nu for i, c in m.h.items()},
        {k: float(c) / nu for k, c in m.J.items()},
        float(m.offset) / nu,
        m.nu_max * nu,
        m.layout,
    )


def ising_energy(m: IsingModel, bits) -> float:
    x = np.asarray(bits).ravel()
    if x.size != m.num_vars:
        raise ValueError(f"expected {m.num_vars} bits, got {x.size}")
    z = 1 - 2 * x.astype(np.int64)
    e = m.offset
    for i, c in m.h.items():
        e += c * z[i]
    for (i, j), c in m.J.items():
        e += c * z[i] * z[j]
    return e
