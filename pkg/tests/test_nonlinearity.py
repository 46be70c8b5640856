import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcflow.nonlinearity import NonlinearTerm, excess, h_tail_sup, hp, truncate, v_delta

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-3, 1e3)


def test_truncate_and_excess_examples():
    assert truncate(2, 3) == 2 and excess(2, 3) == 1
    assert truncate(2, -3) == -2
    assert truncate(2, 1.5) == 1.5 and excess(2, 1.5) == 0


@given(k=positive, s=finite)
def test_truncate_plus_excess_is_identity(k, s):
    t = truncate(k, s)
    assert abs(t) <= k
    assert t + excess(k, s) == pytest.approx(s)
    assert excess(k, s) * s >= 0


def test_truncate_needs_positive_level():
    with pytest.raises(ValueError):
        truncate(0, 1.0)


def test_v_delta_branches():
    assert v_delta(1, 0.5) == 1
    assert v_delta(1, 1.5) == 0.5
    assert v_delta(1, 3) == 0


@given(delta=positive, a=st.floats(0, 1e4), b=st.floats(0, 1e4))
def test_v_delta_is_monotone_and_bounded(delta, a, b):
    lo, hi = sorted((a, b))
    assert 0 <= v_delta(delta, hi) <= v_delta(delta, lo) <= 1


def test_v_delta_is_continuous_at_the_kinks():
    for s in (1.0, 2.0):
        assert v_delta(1, s - 1e-12) == pytest.approx(v_delta(1, s + 1e-12), abs=1e-9)


def test_v_delta_rejects_negative_argument():
    with pytest.raises(ValueError):
        v_delta(1.0, -0.1)


def test_hp_examples():
    h = NonlinearTerm.power(0.5)
    assert hp(h, 1.5, 0.04) == 2.0
    assert hp(h, 1.5, 1.0) == 1.0
    assert hp(NonlinearTerm.one(), 1.2, 7.0) == 1.0
    # the singular zero gets the cap
    assert hp(h, 1.5, 0.0) == 2.0


def test_hp_rejects_exponent_outside_range():
    with pytest.raises(ValueError):
        hp(NonlinearTerm.one(), 1.0, 1.0)
    with pytest.raises(ValueError):
        hp(NonlinearTerm.one(), 2.5, 1.0)


@given(s=st.floats(1e-4, 1e3))
def test_hp_increases_to_h_as_p_decreases(s):
    h = NonlinearTerm.power(0.5)
    ps = 1 + 2.0 ** -np.arange(1, 30)
    vals = [hp(h, p, s) for p in ps]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(h(s))


def test_h_tail_sup_examples():
    assert h_tail_sup(NonlinearTerm.power(1.0), 2) == 0.5
    assert h_tail_sup(NonlinearTerm.one(), 5) == 1
    assert h_tail_sup(NonlinearTerm.power(0.5, offset=0.3), 4) == pytest.approx(0.8)


def test_h_tail_sup_is_monotone_and_tends_to_h_infinity():
    def fn(s):
        s = np.asarray(s, dtype=float)
        return np.where(s < 10, 2.1 + np.sin(s), 2 + 1 / np.maximum(s, 10))

    h = NonlinearTerm.from_function(fn, tail_from=10.0, h_infinity=2.0)
    ks = np.geomspace(0.1, 1e4, 40)
    sups = [h_tail_sup(h, k) for k in ks]
    # the sup is sampled, so allow the sampling error of a 4097-point grid
    assert all(b <= a + 1e-4 for a, b in zip(sups, sups[1:]))
    assert sups[0] == pytest.approx(3.1, abs=1e-5)
    assert abs(sups[-1] - h.h_infinity) <= 1e-3


def test_h_tail_sup_of_table_uses_last_value_beyond_range():
    h = NonlinearTerm.from_table([0, 1, 2], [3.0, 1.0, 2.0])
    assert h_tail_sup(h, 0.5) == 2.0
    assert h_tail_sup(h, 5.0) == 2.0
    assert h.h_infinity == 2.0


def test_h_tail_sup_without_tail_bound_raises():
    h = NonlinearTerm.from_function(lambda s: 1 + 0 * s, tail_from=1.0, h_infinity=1.0)
    object.__setattr__(h, "tail_from", None)
    with pytest.raises(ValueError):
        h_tail_sup(h, 1.0)


def test_singular_power_constants():
    h = NonlinearTerm.power(0.5)
    assert h.sigma == 1.0
    assert h.h_infinity == 0.0
    assert h.c1 == 1.0
    assert NonlinearTerm.power(2.0).sigma == 2.0
    s = np.linspace(1e-4, h.s1, 200)
    assert np.all(h(s) <= h.c1 / s**h.gamma * (1 + 1e-12))


def test_bounded_c1_dominates_on_the_unit_interval():
    h = NonlinearTerm.from_function(lambda s: 1 / (1 + s), tail_from=0.0, h_infinity=0.0, decreasing=True)
    s = np.linspace(1e-3, 1, 100)
    assert np.all(h(s) <= h.c1 / s**h.gamma)


def test_negative_arguments_raise():
    with pytest.raises(ValueError):
        NonlinearTerm.one()(-1.0)
    with pytest.raises(ValueError):
        hp(NonlinearTerm.power(0.5), 1.5, -0.1)


def test_singular_h_at_zero_raises_outside_hp():
    with pytest.raises(ValueError):
        NonlinearTerm.power(0.5)(0.0)


def test_h_vanishing_at_zero_is_rejected():
    with pytest.raises(ValueError, match="h\\(0\\) = 0"):
        NonlinearTerm.from_table([0, 1], [0.0, 1.0])


def test_invalid_variants_rejected():
    with pytest.raises(ValueError):
        NonlinearTerm("cubic")
    with pytest.raises(ValueError):
        NonlinearTerm.power(-1.0)
    with pytest.raises(ValueError):
        NonlinearTerm("bounded_continuous")


def test_table_interpolates_linearly():
    h = NonlinearTerm.from_table([0, 2], [2.0, 1.0])
    assert h(1.0) == pytest.approx(1.5)
    assert h.decreasing
    assert math.isfinite(h.h_zero)
