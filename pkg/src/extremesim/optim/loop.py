"""Training loops for the full-batch and stochastic methods."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import LineSearchError, NegativeCurvatureError
from ..evaluation import TraceRecord
from ..objective import PairwiseProblem, objective
from .adagrad import AdaGradState, diag_scale
from .cg import CGConfig, cg_solve
from .linesearch import LineSearchConfig, line_search
from .stochastic import (
    SgConfig,
    SOGramState,
    block_steps_per_pass,
    doubly_steps_per_pass,
    sample_block,
    sample_pairs,
    sg_block_gradient,
    sg_doubly_gradient,
    sogram_gradient,
)

log = logging.getLogger(__name__)

METHODS = ("GD", "GD-diag", "Newton", "Sampling", "Sampling-diag", "SG-doubly", "SOGram", "SOGram-diag")
FULL_BATCH = ("GD", "GD-diag", "Newton")
SG_MODE_OF = {
    "Sampling": "block",
    "Sampling-diag": "block",
    "SG-doubly": "doubly",
    "SOGram": "sogram",
    "SOGram-diag": "sogram",
}
PLAIN_SG_STEP = 2.0**-25
DIAG_SG_STEP = 0.01


@dataclass
class TrainConfig:
    max_passes: int = 10
    max_time_s: float = math.inf
    seed: int = 0
    mu: float = 1e-8
    steps_per_pass: int = 0  # 0: derived from the sampling ratio
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    cg: CGConfig = field(default_factory=CGConfig)
    sg: SgConfig = field(default_factory=SgConfig)


@dataclass
class DescentState:
    """Per-run state carried between full-batch iterations."""

    iteration: int = 0
    delta_prev: Optional[float] = None
    adagrad: Optional[AdaGradState] = None
    ls: LineSearchConfig = field(default_factory=LineSearchConfig)
    cg: CGConfig = field(default_factory=CGConfig)
    value: Optional[float] = None
    cache: object = None


@dataclass
class StepInfo:
    delta: float
    value_before: float
    value: float
    slope: float
    n_line_search: int
    n_cg: int = 0


@dataclass
class RunResult:
    records: list
    theta: np.ndarray
    initial_objective: float
    stop_reason: str = "max_passes"


def _problem(data):
    return data if hasattr(data, "gn_product") else PairwiseProblem(data)


def _current(theta, problem, state):
    if state.value is None or state.cache is None or not state.cache.valid_for(theta):
        state.value, state.cache = problem.objective(theta)
    return state.value, state.cache


def _gd_delta_init(state):
    if state.delta_prev is None:
        return 1.0
    d = state.delta_prev
    if state.iteration > 0 and state.iteration % state.ls.init_doubling_period == 0:
        d *= 2.0
    return d


def gd_step(theta, data, state):
    """One gradient (or AdaGrad-scaled gradient) step with line search.

    The initial trial step is the last accepted one, doubled every
    ``init_doubling_period`` iterations. Returns ``(theta, StepInfo)``.
    """
    problem = _problem(data)
    value, cache = _current(theta, problem, state)
    g = problem.gradient(theta, cache)
    s = diag_scale(g, state.adagrad) if state.adagrad is not None else -g
    slope = float(s @ g)
    state.iteration += 1
    if slope == 0.0:
        # stationary point: nothing to do
        return theta, StepInfo(0.0, value, value, 0.0, 0)
    delta, new_value, new_cache, n_ls = line_search(
        theta, s, slope, value, problem.objective, state.ls, _gd_delta_init(state)
    )
    state.delta_prev = delta
    state.value, state.cache = new_value, new_cache
    return theta + delta * s, StepInfo(delta, value, new_value, slope, n_ls)


def newton_step(theta, data, state):
    """One truncated Gauss-Newton step: CG direction, line search from 1."""
    problem = _problem(data)
    value, cache = _current(theta, problem, state)
    g = problem.gradient(theta, cache)
    state.iteration += 1
    if not np.any(g):
        return theta, StepInfo(0.0, value, value, 0.0, 0)
    lam = getattr(getattr(problem, "data", None), "lam", None)
    try:
        res = cg_solve(lambda d: problem.gn_product(theta, d, cache), g, state.cg, curvature_floor=lam)
        s, n_cg = res.s, res.iterations
    except NegativeCurvatureError as exc:
        log.warning("CG stopped on non-positive curvature at iteration %d", exc.iteration)
        s, n_cg = (exc.s if exc.iteration > 0 else -g), exc.iteration + 1
    slope = float(s @ g)
    delta, new_value, new_cache, n_ls = line_search(theta, s, slope, value, problem.objective, state.ls, 1.0)
    state.delta_prev = delta
    state.value, state.cache = new_value, new_cache
    return theta + delta * s, StepInfo(delta, value, new_value, slope, n_ls, n_cg)


def _full_batch(method, data, cfg, theta, evaluate, map_every, result):
    state = DescentState(ls=cfg.line_search, cg=cfg.cg)
    if method == "GD-diag":
        state.adagrad = AdaGradState(theta.size, cfg.mu)
    step = newton_step if method == "Newton" else gd_step
    problem = _problem(data)
    state.value, state.cache = problem.objective(theta)
    result.initial_objective = state.value
    elapsed = 0.0
    for it in range(1, cfg.max_passes + 1):
        t0 = time.perf_counter()
        try:
            theta, info = step(theta, problem, state)
        except LineSearchError as exc:
            log.warning("%s stopped at iteration %d: %s", method, it, exc)
            result.stop_reason = "line_search"
            break
        elapsed += time.perf_counter() - t0
        rec = TraceRecord(
            pass_index=it,
            step_index=it,
            wall_time_s=elapsed,
            objective=info.value,
            step_size=info.delta,
            n_line_search=info.n_line_search,
            n_cg=info.n_cg,
            objective_before=info.value_before,
            slope=info.slope,
        )
        if evaluate is not None and map_every > 0 and it % map_every == 0:
            rec.map_at_5 = evaluate(theta)
        result.records.append(rec)
        log.info("%s iter %d  L=%.10g  delta=%.3g  ls=%d  cg=%d  t=%.2fs", method, it, info.value,
                 info.delta, info.n_line_search, info.n_cg, elapsed)
        if info.delta == 0.0 and info.slope == 0.0:
            result.stop_reason = "stationary"
            break
        if elapsed >= cfg.max_time_s:
            result.stop_reason = "max_time"
            break
    result.theta = theta
    return result


def _stochastic(method, data, cfg, theta, evaluate, map_every, result):
    sg = cfg.sg
    mode = SG_MODE_OF[method]
    diag = method.endswith("-diag")
    step_size = sg.step_size if sg.step_size is not None else (DIAG_SG_STEP if diag else PLAIN_SG_STEP)
    rng = np.random.default_rng(cfg.seed)
    adagrad = AdaGradState(theta.size, cfg.mu) if diag else None
    sogram = SOGramState(data.k, sg.alpha) if mode == "sogram" else None
    nnz = data.observed.nnz
    if cfg.steps_per_pass > 0:
        steps = cfg.steps_per_pass
    elif mode == "block":
        steps = block_steps_per_pass(data.m, data.n, sg.rho)
    else:
        steps = doubly_steps_per_pass(nnz, sg.rho)
    result.initial_objective, _ = objective(theta, data)
    elapsed = 0.0
    total = 0
    for p in range(1, cfg.max_passes + 1):
        t0 = time.perf_counter()
        for _ in range(steps):
            if mode == "block":
                rows, cols = sample_block(rng, data.m, data.n, sg.rho)
                g = sg_block_gradient(theta, data, rows, cols)
            else:
                o1 = sample_pairs(rng, nnz, sg.rho)
                o2 = sample_pairs(rng, nnz, sg.rho)
                if mode == "doubly":
                    g = sg_doubly_gradient(theta, data, o1, o2)
                else:
                    g = sogram_gradient(theta, data, o1, o2, sogram)
            s = diag_scale(g, adagrad) if diag else -g
            theta = theta + step_size * s
            total += 1
        elapsed += time.perf_counter() - t0
        value, _ = objective(theta, data)
        rec = TraceRecord(pass_index=p, step_index=total, wall_time_s=elapsed, objective=value, step_size=step_size)
        if evaluate is not None and map_every > 0 and p % map_every == 0:
            rec.map_at_5 = evaluate(theta)
        result.records.append(rec)
        log.info("%s pass %d  L=%.10g  steps=%d  t=%.2fs", method, p, value, total, elapsed)
        if elapsed >= cfg.max_time_s:
            result.stop_reason = "max_time"
            break
    result.theta = theta
    return result


def run(method, data, config=None, theta0=None, evaluate: Optional[Callable] = None, map_every=1):
    """Train with ``method`` from ``theta0`` (default: seeded initialisation).

    One record per iteration for full-batch methods and per data pass for
    stochastic ones. ``evaluate(theta)`` supplies the MAP column and is
    excluded from the wall time.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    cfg = config or TrainConfig()
    theta = np.array(theta0 if theta0 is not None else data.model.init(cfg.seed), dtype=np.float64)
    result = RunResult(records=[], theta=theta, initial_objective=math.nan)
    if method in FULL_BATCH:
        return _full_batch(method, data, cfg, theta, evaluate, map_every, result)
    return _stochastic(method, data, cfg, theta, evaluate, map_every, result)
