"""Kriging versus Co-Kriging on bi-fidelity function pairs.

Submodules: ``testbed`` (function pairs), ``sampling`` (nested Latin
hypercube designs), ``surrogates`` (the two models), ``features``,
``filtering``, ``harness`` (experiment protocol), ``selector`` and ``cli``.
"""

__version__ = "0.1.0"

from .exceptions import BifidError
from .surrogates import CoKrigingRegressor, KrigingRegressor

__all__ = ["BifidError", "CoKrigingRegressor", "KrigingRegressor", "__version__"]
