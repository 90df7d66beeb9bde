"""Numerical self-checks behind the ``gradcheck`` and ``oracle-compare`` commands."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .net import batch_jvp, batch_vjp, forward_batch
from .objective import gn_product, gradient, objective

GRAD_TOL = 1e-5
DUALITY_TOL = 1e-10
ORACLE_TOL = 1e-10


@dataclass
class CheckReport:
    """Named relative errors and their thresholds."""

    errors: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def add(self, name, err, tol):
        self.errors[name] = float(err)
        self.thresholds[name] = tol

    @property
    def passed(self):
        return all(self.errors[k] <= self.thresholds[k] for k in self.errors)

    def failures(self):
        return [k for k in self.errors if not self.errors[k] <= self.thresholds[k]]

    def lines(self):
        out = []
        for k, e in self.errors.items():
            tol = self.thresholds[k]
            out.append(f"{k:<28s} {e:.3e}  (tol {tol:.0e})  {'ok' if e <= tol else 'FAIL'}")
        return out


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def finite_difference_gradient(theta, data, h=1e-6):
    """Central differences of the objective along every coordinate."""
    g = np.empty_like(theta)
    e = np.zeros_like(theta)
    for t in range(theta.size):
        e[t] = h
        g[t] = (objective(theta + e, data)[0] - objective(theta - e, data)[0]) / (2 * h)
        e[t] = 0.0
    return g


def gradcheck(theta, data, rng, corrupt=0.0, h=1e-6):
    """Finite-difference and VJP/JVP duality checks, per tower and joint.

    ``corrupt`` adds a perturbation of that relative size to the analytic
    gradient, as a negative control.
    """
    rep = CheckReport()
    du = data.model.d_left
    g = gradient(theta, data)
    if corrupt:
        g = g + corrupt * np.linalg.norm(g) * rng.standard_normal(g.size) / np.sqrt(g.size)
    fd = finite_difference_gradient(theta, data, h)
    rep.add("gradient/left", rel_err(g[:du], fd[:du]), GRAD_TOL)
    rep.add("gradient/right", rel_err(g[du:], fd[du:]), GRAD_TOL)
    rep.add("gradient/joint", rel_err(g, fd), GRAD_TOL)

    left, right = data.model.split(theta)
    sides = []
    for name, params, feats in (("left", left, data.left_features), ("right", right, data.right_features)):
        out, tape = forward_batch(params, feats)
        v = rng.standard_normal(out.shape)
        d = rng.standard_normal(params.spec.num_params)
        lhs = float(np.sum(v * batch_jvp(params, tape, d)))
        rhs = float(batch_vjp(params, tape, v) @ d)
        sides.append((lhs, rhs))
        rep.add(f"duality/{name}", abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300), DUALITY_TOL)
    lhs = sum(s[0] for s in sides)
    rhs = sum(s[1] for s in sides)
    rep.add("duality/joint", abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300), DUALITY_TOL)
    return rep


def oracle_compare(theta, data, rng):
    """Fast objective, gradient and Gauss-Newton product against the oracles."""
    rep = CheckReport()
    L, _ = objective(theta, data)
    rep.add("objective", rel_err(L, oracle.naive_objective(theta, data)), ORACLE_TOL)
    rep.add("gradient", rel_err(gradient(theta, data), oracle.naive_gradient(theta, data)), ORACLE_TOL)
    d = rng.standard_normal(theta.size)
    rep.add(
        "gauss_newton_product",
        rel_err(gn_product(theta, d, data), oracle.naive_gn_product(theta, d, data)),
        ORACLE_TOL,
    )
    return rep
