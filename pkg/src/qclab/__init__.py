"""Exact laboratory for correlated-samples query complexity at desk scale."""

from .core import (
    Alphabet,
    Dist,
    DistPair,
    ExpThreshold,
    LikelihoodRatio,
    PartialFunction,
    cell_mass,
    conditional,
    lr,
)
from .dtree import DecisionTree, TruncationParams

__all__ = [
    "Alphabet", "DecisionTree", "Dist", "DistPair", "ExpThreshold", "LikelihoodRatio",
    "PartialFunction", "TruncationParams", "cell_mass", "conditional", "lr",
]
