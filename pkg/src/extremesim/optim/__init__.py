"""Line search, CG, AdaGrad scaling, stochastic estimators and run loops."""

from .adagrad import AdaGradState, diag_scale
from .cg import CGConfig, CGResult, cg_solve
from .linesearch import LineSearchConfig, line_search
from .loop import METHODS, DescentState, RunResult, StepInfo, TrainConfig, gd_step, newton_step, run
from .stochastic import (
    SgConfig,
    SOGramState,
    doubly_target_gradient,
    sample_block,
    sample_pairs,
    sg_block_gradient,
    sg_doubly_gradient,
    sg_doubly_one_sided,
    sogram_gradient,
)

__all__ = [
    "AdaGradState",
    "CGConfig",
    "CGResult",
    "DescentState",
    "LineSearchConfig",
    "METHODS",
    "RunResult",
    "SOGramState",
    "SgConfig",
    "StepInfo",
    "TrainConfig",
    "cg_solve",
    "diag_scale",
    "doubly_target_gradient",
    "gd_step",
    "line_search",
    "newton_step",
    "run",
    "sample_block",
    "sample_pairs",
    "sg_block_gradient",
    "sg_doubly_gradient",
    "sg_doubly_one_sided",
    "sogram_gradient",
]
