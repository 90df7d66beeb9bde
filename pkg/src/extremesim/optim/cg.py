from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import NegativeCurvatureError

log = logging.getLogger(__name__)


@dataclass
class CGConfig:
    xi: float = 0.1
    max_iters: int = 30


@dataclass
class CGResult:
    s: np.ndarray
    iterations: int
    residual_norm: float
    initial_residual_norm: float


def cg_solve(operator, g, cfg=None, curvature_floor=None):
    """Approximately solve ``G s = -g`` by conjugate gradient.

    Stops once ``||r|| <= xi * ||g||`` or after ``max_iters`` products.
    ``operator(d)`` returns ``G d``. If ``curvature_floor`` is given, a
    warning is logged whenever ``d'Gd < curvature_floor * ||d||^2``.
    """
    cfg = cfg or CGConfig()
    g = np.asarray(g, dtype=np.float64)
    r = -g
    d = r.copy()
    s = np.zeros_like(g)
    gamma = float(r @ r)
    gamma0 = gamma
    it = 0
    warned = False
    while np.sqrt(gamma) > cfg.xi * np.sqrt(gamma0) and it < cfg.max_iters:
        Gd = operator(d)
        dGd = float(d @ Gd)
        if curvature_floor is not None and not warned and dGd < curvature_floor * float(d @ d):
            log.warning("observed d'Gd below lambda*||d||^2 (%.3e); G may not be PD", dGd)
            warned = True
        if dGd <= 0:
            raise NegativeCurvatureError(s, it, dGd)
        t = gamma / dGd
        s += t * d
        r -= t * Gd
        gamma_new = float(r @ r)
        beta = gamma_new / gamma
        d = r + beta * d
        gamma = gamma_new
        it += 1
    return CGResult(s, it, float(np.sqrt(gamma)), float(np.sqrt(gamma0)))
