import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ineqvqa.schedule import ScheduleKind, ScheduleSpec, derive_params, s_value


def test_s_value_examples():
    assert s_value(ScheduleKind.SINUSOIDAL, 7, 7) == pytest.approx(1.0, abs=1e-15)
    assert s_value(ScheduleKind.SINUSOIDAL, 2, 4) == pytest.approx(0.5, abs=1e-15)
    assert s_value(ScheduleKind.LINEAR, 1, 4) == 0.25


def test_s_value_range_errors():
    with pytest.raises(ValueError):
        s_value(ScheduleKind.SINUSOIDAL, 0, 3)
    with pytest.raises(ValueError):
        s_value(ScheduleKind.LINEAR, 4, 3)
    with pytest.raises(ValueError):
        s_value(ScheduleKind.RANDOM, 1, 3)


def test_derive_sine_p2():
    params = derive_params(ScheduleSpec("sine", 2, 0.75))
    assert params.betas[0] == pytest.approx(0.375, abs=1e-15)
    assert params.gammas[0] == pytest.approx(0.375, abs=1e-15)
    assert params.betas[1] == pytest.approx(0.0, abs=1e-15)
    assert params.gammas[1] == pytest.approx(0.75, abs=1e-15)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScheduleSpec("sine", 0)
    with pytest.raises(ValueError):
        ScheduleSpec("sine", 2, 0.0)
    assert ScheduleSpec("linear", 4, 1.0).annealing_time == 4.0


def test_random_angles_reproducible():
    a = derive_params(ScheduleSpec("random", 5, rng_seed=9))
    b = derive_params(ScheduleSpec("random", 5, rng_seed=9))
    c = derive_params(ScheduleSpec("random", 5, rng_seed=10))
    assert a == b and a != c
    assert all(0 <= x <= math.pi for x in a.betas)
    assert all(0 <= x <= 2 * math.pi for x in a.gammas)


@given(st.sampled_from(["sine", "linear"]), st.integers(1, 30), st.floats(0.01, 5))
def test_schedule_invariants(kind, p, dt):
    params = derive_params(ScheduleSpec(kind, p, dt))
    b, g = np.array(params.betas), np.array(params.gammas)
    assert np.allclose(b + g, dt, rtol=0, atol=1e-12)
    assert np.all(np.diff(g) >= -1e-15) and np.all(np.diff(b) <= 1e-15)
    assert np.all((b >= -1e-15) & (b <= dt + 1e-12))
    assert np.all((g >= 0) & (g <= dt + 1e-12))
    assert g[-1] == pytest.approx(dt)
    assert all(0 <= s_value(kind, l, p) <= 1 for l in range(1, p + 1))
