import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stylemill.errors import DataError, NumericError
from stylemill.stats import betainc, paired_t_test, t_two_sided_p


def closed_form_df2(t):
    # F(t) = 1/2 + t / (2 sqrt(2 + t^2)) for df = 2
    return 2 * (1 - (0.5 + abs(t) / (2 * math.sqrt(2 + t * t))))


def reference_p(t, df):
    mpmath.mp.dps = 40
    x = mpmath.mpf(df) / (df + mpmath.mpf(t) ** 2)
    return float(mpmath.betainc(mpmath.mpf(df) / 2, mpmath.mpf(1) / 2, 0, x, regularized=True))


def test_worked_example():
    res = paired_t_test([2, 4, 5], [1, 2, 3])
    assert res.t_value == pytest.approx(5.0, abs=1e-12)
    assert res.df == 2 and res.n_pairs == 3
    assert res.p_value == pytest.approx(0.0377, abs=1e-4)
    assert res.p_value == pytest.approx(closed_form_df2(5.0), abs=1e-12)


def test_zero_variance_and_short_input():
    with pytest.raises(NumericError, match="t undefined for constant differences"):
        paired_t_test([1, 2, 3], [1, 2, 3])
    with pytest.raises(DataError):
        paired_t_test([1], [2])
    with pytest.raises(DataError):
        paired_t_test([1, 2], [1, 2, 3])


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=20))
@settings(max_examples=80, deadline=None)
def test_swapping_negates_t_and_keeps_p(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    try:
        ab = paired_t_test(a, b)
    except NumericError:
        return
    ba = paired_t_test(b, a)
    assert ba.t_value == pytest.approx(-ab.t_value)
    assert ba.p_value == pytest.approx(ab.p_value, abs=1e-12)
    assert 0.0 <= ab.p_value <= 1.0


@pytest.mark.parametrize("df", [2, 5, 10])
@pytest.mark.parametrize("t", [0.0, 1.0, 5.0])
def test_p_values_match_high_precision(t, df):
    assert t_two_sided_p(t, df) == pytest.approx(reference_p(t, df), abs=1e-6)


def test_df2_closed_form_grid():
    for t in (0.1, 0.5, 2.0, 10.0, 100.0):
        assert t_two_sided_p(t, 2) == pytest.approx(closed_form_df2(t), abs=1e-12)


@given(st.floats(0.05, 30), st.floats(0.05, 30), st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_betainc_against_mpmath(a, b, x):
    mpmath.mp.dps = 30
    ref = float(mpmath.betainc(a, b, 0, x, regularized=True))
    assert betainc(a, b, x) == pytest.approx(ref, abs=1e-10)


def test_betainc_domain():
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)
