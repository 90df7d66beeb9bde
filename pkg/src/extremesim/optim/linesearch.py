from __future__ import annotations

from dataclasses import dataclass

from ..errors import LineSearchError


@dataclass
class LineSearchConfig:
    eta: float = 1e-4
    max_steps: int = 60
    init_doubling_period: int = 5
    # accept the smallest tried step instead of raising when the budget runs out
    accept_smallest: bool = False

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if self.max_steps < 1 or self.init_doubling_period < 1:
            raise ValueError("max_steps and init_doubling_period must be positive")


def line_search(theta, s, g_dot_s, value, evaluator, cfg=None, delta_init=1.0):
    """Backtracking on ``delta_init, delta_init/2, ...`` until
    ``L(theta + delta*s) <= L(theta) + eta*delta*s'g``.

    ``evaluator(theta) -> (value, cache)``. Returns
    ``(delta, new_value, new_cache, n_evaluations)``.
    """
    cfg = cfg or LineSearchConfig()
    if not g_dot_s < 0:
        raise ValueError(f"not a descent direction: s'g = {g_dot_s}")
    delta = float(delta_init)
    new_value, cache = None, None
    for n_eval in range(1, cfg.max_steps + 1):
        new_value, cache = evaluator(theta + delta * s)
        if new_value <= value + cfg.eta * delta * g_dot_s:
            return delta, new_value, cache, n_eval
        if n_eval < cfg.max_steps:
            delta *= 0.5
    if cfg.accept_smallest:
        return delta, new_value, cache, cfg.max_steps
    raise LineSearchError(
        f"no sufficient decrease after {cfg.max_steps} trials (last delta {delta:.3e})"
    )
