import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extremesim.losses import LossKind, loss_terms


def test_logistic_at_zero():
    v, d1, d2 = loss_terms("logistic", 1.0, 0.0)
    assert v == pytest.approx(np.log(2.0), abs=1e-15)
    assert d1 == pytest.approx(-0.5, abs=1e-15)
    assert d2 == pytest.approx(0.25, abs=1e-15)


def test_logistic_saturates_without_overflow():
    with np.errstate(over="raise"):
        v, d1, d2 = loss_terms(LossKind.LOGISTIC, 1.0, 40.0)
        assert 0.0 <= v < 1e-17 and d2 < 1e-17
        v, _, _ = loss_terms(LossKind.LOGISTIC, 1.0, -800.0)
        assert v == pytest.approx(800.0)


def test_squared():
    assert loss_terms("squared", 1.0, 0.0) == (0.5, -1.0, 1.0)


@given(st.sampled_from(["logistic", "squared"]), st.floats(-3, 3), st.floats(-5, 5))
def test_derivatives_match_differences(kind, y, yhat):
    h = 1e-5
    v, d1, d2 = loss_terms(kind, y, yhat)
    vp, d1p, _ = loss_terms(kind, y, yhat + h)
    vm, d1m, _ = loss_terms(kind, y, yhat - h)
    assert d1 == pytest.approx((vp - vm) / (2 * h), abs=1e-7)
    assert d2 == pytest.approx((d1p - d1m) / (2 * h), abs=1e-7)
    assert d2 >= 0.0


def test_array_inputs():
    v, d1, d2 = loss_terms("logistic", np.array([1.0, -1.0]), np.array([0.0, 0.0]))
    assert v.shape == d1.shape == d2.shape == (2,)
