"""Entry-wise losses l(y, yhat) with first and second derivatives in yhat."""

from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit


class LossKind(str, enum.Enum):
    LOGISTIC = "logistic"
    SQUARED = "squared"


def loss_terms(kind, y, yhat):
    """Return ``(value, d/dyhat, d2/dyhat2)``, elementwise over arrays.

    The logistic form is evaluated through softplus/sigmoid and never
    overflows, however large ``|y * yhat|`` gets.
    """
    kind = LossKind(kind)
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if kind is LossKind.LOGISTIC:
        z = y * yhat
        value = np.logaddexp(0.0, -z)
        first = -y * expit(-z)
        second = y * y * expit(z) * expit(-z)
    else:
        r = yhat - y
        value = 0.5 * r * r
        first = r
        second = np.ones_like(r)
    if value.ndim == 0:
        return float(value), float(first), float(second)
    return value, first, second
