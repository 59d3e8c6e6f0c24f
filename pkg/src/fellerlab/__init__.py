"""Parabolicity, stochastic completeness and the Feller property of model manifolds.

Three independent routes decide each property: convergence tests for the
volume integrals, exhaustion limits of the exterior problem, and the radial
heat semigroup.  Comparison, end-splitting and Faber-Krahn tools extend the
verdicts beyond rotationally symmetric metrics.
"""

__version__ = "0.1.0"

from .verdict import Status, Verdict  # noqa: E402
from .formula import ParseError, parse  # noqa: E402
from .warping import ModelManifold, WarpingFunction, make_model, warping  # noqa: E402
from .classifier import classify, classify_feller, classify_parabolic, classify_stochastically_complete  # noqa: E402

__all__ = [
    "__version__", "Status", "Verdict", "ParseError", "parse", "ModelManifold", "WarpingFunction", "make_model",
    "warping", "classify", "classify_feller", "classify_parabolic", "classify_stochastically_complete",
]
