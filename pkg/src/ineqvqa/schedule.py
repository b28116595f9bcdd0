"""Annealing schedules and the layer angles derived from them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .statevector import CircuitParams

DT_PRESETS = (0.75, 1.0)


class ScheduleKind(enum.Enum):
    SINUSOIDAL = "sine"
    LINEAR = "linear"
    RANDOM = "random"


@dataclass(frozen=True)
class ScheduleSpec:
    kind: ScheduleKind = ScheduleKind.SINUSOIDAL
    p: int = 1
    delta_t: float = 0.75
    rng_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not self.delta_t > 0:
            raise ValueError(f"delta_t must be positive, got {self.delta_t}")

    @property
    def annealing_time(self) -> float:
        return self.p * self.delta_t


def s_value(kind: ScheduleKind, l: int, p: int) -> float:
    """Schedule value at Trotter step l of p (1-based)."""
    kind = ScheduleKind(kind)
    if not 1 <= l <= p:
        raise ValueError(f"step {l} outside 1..{p}")
    if kind is ScheduleKind.SINUSOIDAL:
        return math.sin(math.pi / 2 * math.sin(math.pi * l / (2 * p)) ** 2) ** 2
    if kind is ScheduleKind.LINEAR:
        return l / p
    raise ValueError("random angles have no schedule function")


def derive_params(spec: ScheduleSpec) -> CircuitParams:
    """beta_l = (1 - s_l) dt and gamma_l = s_l dt, or uniform random angles.

    Random angles draw beta in [0, pi] and gamma in [0, 2 pi].
    """
    if spec.kind is ScheduleKind.RANDOM:
        rng = np.random.default_rng(spec.rng_seed)
        betas = rng.uniform(0.0, math.pi, spec.p)
        gammas = rng.uniform(0.0, 2 * math.pi, spec.p)
        return CircuitParams(betas, gammas)
    s = [s_value(spec.kind, l, spec.p) for l in range(1, spec.p + 1)]
    return CircuitParams([(1 - v) * spec.delta_t for v in s], [v * spec.delta_t for v in s])
