"""Exact computer algebra for quantum-group trace functions and q-difference operators."""

__version__ = "0.1.0"

from .qfield import QScalar, LambdaPoly, QMatrix, q_integer, q_factorial, q_binomial
from .rootdata import RootSystem, WeylElement

__all__ = [
    "QScalar",
    "LambdaPoly",
    "QMatrix",
    "q_integer",
    "q_factorial",
    "q_binomial",
    "RootSystem",
    "WeylElement",
]
