"""Reconstruction of real-valued scenes from multilook speckled measurements.

Submodules: cxla (block/complex covariance algebra), sensing (scenes and
simulation), likelihood (the multilook objective and gradient), invtrack
(warm-started inverse tracking), decoder (the numpy deep-decoder prior),
bagging (patchwise ensemble projection), pgd (the reconstruction loop),
metrics, harness (experiment runners), cli.
"""

from . import (bagging, cli, cxla, decoder, harness, invtrack, likelihood,
               metrics, pgd, sensing)
from .errors import (MultilookError, NumericalError, StructuralError,
                     UsageError, ValidationError)

__all__ = [
    "bagging", "cli", "cxla", "decoder", "harness", "invtrack", "likelihood",
    "metrics", "pgd", "sensing",
    "MultilookError", "NumericalError", "StructuralError", "UsageError",
    "ValidationError",
]

__version__ = "0.1.0"
