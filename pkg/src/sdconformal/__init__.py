"""Selfdual conformal 4-metrics from projective surfaces.

Builds Lax pairs and split-signature 4-metrics out of geodesic
congruences on a projective surface and certifies the construction
numerically: Lax integrability, antiselfdual Weyl vanishing, Killing /
twist / nullness properties, null-Kaehler and hyperkaehler reductions,
and the surface-side divisor calculus.  All differentiation is done with
truncated Taylor (jet) arithmetic, so residuals are exact to rounding.
"""

from .jets import Jet, JetSpace, JetDomainError
from .expr import Expression, parse, ExprError, ExprDomainError

__all__ = [
    "Jet",
    "JetSpace",
    "JetDomainError",
    "Expression",
    "parse",
    "ExprError",
    "ExprDomainError",
]

__version__ = "0.1.0"
