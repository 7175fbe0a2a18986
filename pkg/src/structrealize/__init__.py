"""Data-driven structured realizations of linear systems from time series.

Transfer function values are estimated from input/output samples by a
least-squares variant of the empirical transfer function estimate, turned
into a realization with a prescribed structure (for example a state delay),
and free structural parameters are fitted against held-out estimates.
"""

from . import errors
from .errors import *  # noqa: F401,F403
from .lstfe import FrequencySelection, TransferEstimate, lstfe_pipeline, select_frequencies
from .paramfit import TestData, cost, minimize_cost, refit_with_all_data, sample_cost
from .realize import InterpolationData, Realization, structured_realization, truncate, verify_interpolation
from .sim import TimeSeries, make_sparse_input, simulate_delay, validation_input
from .systems import FunctionFamily, StructuredSystem, eval_transfer, get_family, make_delay_benchmark
from .validation import error_metrics, validate_realization

__version__ = "0.1.0"

__all__ = [
    *(name for name in dir(errors) if name.endswith("Error")),
    "FrequencySelection", "TransferEstimate", "lstfe_pipeline", "select_frequencies",
    "TestData", "cost", "minimize_cost", "refit_with_all_data", "sample_cost",
    "InterpolationData", "Realization", "structured_realization", "truncate", "verify_interpolation",
    "TimeSeries", "make_sparse_input", "simulate_delay", "validation_input",
    "FunctionFamily", "StructuredSystem", "eval_transfer", "get_family", "make_delay_benchmark",
    "error_metrics", "validate_realization",
]
