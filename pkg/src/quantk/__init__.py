"""Quantitative controlled K-theory on finite metric spaces.

Finite metric spaces and covers (:mod:`quantk.metric`), nerves
(:mod:`quantk.nerve`), finite-propagation operators (:mod:`quantk.filtered`),
quasiidempotents and ``kappa`` (:mod:`quantk.quantitative`), the Lipschitz
pairing (:mod:`quantk.pairing`), lattice index models
(:mod:`quantk.index_models`) and exact threshold formulas
(:mod:`quantk.bounds`).  ``quantk`` on the command line is :mod:`quantk.cli`.
"""

from .errors import (CertificationError, PairabilityError, QuantkError, SpectralGapError,
                     ValidationError)
from .params import ParameterTuple

__version__ = "0.1.0"

__all__ = ["CertificationError", "PairabilityError", "ParameterTuple", "QuantkError",
           "SpectralGapError", "ValidationError", "__version__"]
