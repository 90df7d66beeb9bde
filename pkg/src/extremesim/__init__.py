"""Two-tower similarity learning over all entity pairs.

Objective, gradient and Gauss-Newton products are evaluated in time linear
in the number of entities by collapsing the unobserved-pair sums into
k x k Gramians.
"""

from .linalg import SparseMatrixDual
from .losses import LossKind
from .net import TowerSpec, TwoTower
from .objective import PairwiseProblem, ProblemData, gn_product, gradient, objective

__version__ = "0.1.0"

__all__ = [
    "LossKind",
    "PairwiseProblem",
    "ProblemData",
    "SparseMatrixDual",
    "TowerSpec",
    "TwoTower",
    "gn_product",
    "gradient",
    "objective",
]
