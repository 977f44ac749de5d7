"""Exact Bayes error of Gaussian class-conditional models.

Core pieces: whitened decision constraints, multilevel-splitting
integration with elliptical slice sampling, temperature control with
monotone inversion, and an invertible-flow harness for the error-invariance
check.  A FastAPI service wraps the library; the CLI is a thin client.
"""

from .bayes_error import (
    BayesErrorEstimate,
    ClassFraction,
    BinaryTailEstimate,
    InversionResult,
    TargetRangeError,
    TemperatureCurve,
    binary_error_tail,
    closed_form_estimate,
    compute_bayes_error,
    invert_temperature,
    monte_carlo_bayes_error,
    one_vs_all_error,
    temperature_sweep,
)
from .constraints import HalfSpace, HalfSpaceSet, build_constraints, reduce_dimension
from .ess import AngleIntervalSet, active_intervals, ess_step
from .flows import (
    CouplingFlow,
    CouplingLayer,
    FlowFormatError,
    InvarianceReport,
    flow_from_json,
    flow_to_json,
    invariance_harness,
    load_flow,
    pushforward_log_density,
    random_flow,
)
from .hdr import (
    HdrConfig,
    HdrEstimate,
    NestingError,
    estimate_polytope_probability,
    mc_polytope_probability,
)
from .model import (
    GaussianClassModel,
    ModelFormatError,
    load_model,
    model_from_json,
    model_to_bytes,
    model_to_json,
    save_model,
)
from .synthetic import make_synthetic_model

__version__ = "0.1.0"

__all__ = [
    "AngleIntervalSet",
    "BayesErrorEstimate",
    "BinaryTailEstimate",
    "ClassFraction",
    "CouplingFlow",
    "CouplingLayer",
    "FlowFormatError",
    "GaussianClassModel",
    "HalfSpace",
    "HalfSpaceSet",
    "HdrConfig",
    "HdrEstimate",
    "InvarianceReport",
    "InversionResult",
    "ModelFormatError",
    "NestingError",
    "TargetRangeError",
    "TemperatureCurve",
    "active_intervals",
    "binary_error_tail",
    "build_constraints",
    "closed_form_estimate",
    "compute_bayes_error",
    "ess_step",
    "estimate_polytope_probability",
    "flow_from_json",
    "flow_to_json",
    "invariance_harness",
    "invert_temperature",
    "load_flow",
    "load_model",
    "make_synthetic_model",
    "mc_polytope_probability",
    "model_from_json",
    "model_to_bytes",
    "model_to_json",
    "monte_carlo_bayes_error",
    "one_vs_all_error",
    "pushforward_log_density",
    "random_flow",
    "reduce_dimension",
    "save_model",
    "temperature_sweep",
]
