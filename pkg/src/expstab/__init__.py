"""Finite-horizon stability analysis for discrete-time linear systems.

Evolution products are carried in log space; certificates, series tests and
the classifier all work from a table of ``log ||A_m^n||``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .certificates import (ClassificationReport, EstimatorConfig, StabilityEnvelope, check_envelope,
                           classify, estimate_envelope)
from .errors import (ContractError, NoRateDerivable, ResourceLimitError, SpecError,
                     UnsupportedRepresentation)
from .evolution import EvolutionFamily, NormTable, apply, build_norm_table, compose, log_norm
from .kernels import BACKEND
from .logmag import LogMagnitude
from .series import (SeriesReport, barbashin_check_operator, barbashin_sum, datko_check_uniform,
                     datko_sum, derive_barbashin_constant, derive_datko_constant, tail_bound)
from .zoo import (closed_form_log_norm, constant_scalar, diagonal, identity_family, oracle_compare,
                  paper_example, random_family, zero_family)

__all__ = [
    "BACKEND", "ClassificationReport", "ContractError", "EstimatorConfig", "EvolutionFamily",
    "LogMagnitude", "NoRateDerivable", "NormTable", "ResourceLimitError", "SeriesReport",
    "SpecError", "StabilityEnvelope", "UnsupportedRepresentation", "apply", "barbashin_check_operator",
    "barbashin_sum", "build_norm_table", "check_envelope", "classify", "closed_form_log_norm",
    "compose", "constant_scalar", "datko_check_uniform", "datko_sum", "derive_barbashin_constant",
    "derive_datko_constant", "diagonal", "estimate_envelope", "identity_family", "log_norm",
    "oracle_compare", "paper_example", "random_family", "tail_bound", "zero_family",
]
