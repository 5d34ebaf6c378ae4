"""Inversion of impedance spectra for the distribution of relaxation times."""
from importlib import resources

from .estimator import DRTRegressor
from .exceptions import (
    ConfigurationError, ConvergenceError, DomainError, QuadratureError, SelectionError,
    SingularSystemError,
)
from .kernels import FrequencyGrid, QuadratureRule, SGrid, build_matrix
from .models import LNProcess, ProcessMix, RQProcess
from .nnls import nnls_solve, tikhonov_nnls
from .param_choice import choose_lambda_ncp, lcurve_corner, ncp, sweep
from .regularization import make_smoothing, tikhonov_solve

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "ConvergenceError", "DRTRegressor", "DomainError", "FrequencyGrid",
    "LNProcess", "ProcessMix", "QuadratureError", "QuadratureRule", "RQProcess", "SGrid",
    "SelectionError", "SingularSystemError", "build_matrix", "choose_lambda_ncp", "lcurve_corner",
    "load_schema", "make_smoothing", "ncp", "nnls_solve", "sweep", "tikhonov_nnls", "tikhonov_solve",
]


def load_schema(name):
    """JSON schema shipped with the package, e.g. ``load_schema("invert_report")``."""
    import json

    text = resources.files(__name__).joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
