"""Bayesian sampling plans for interval-censored competing-risks life tests."""

from .costs import CostModel
from .decision import DecisionRule, Verdict
from .errors import (BsplanError, EnumerationCapExceeded, InputError, NumericalInstabilityError,
                     SingularInformationError, WeightUnderflowError)
from .model import FailureRates, IntervalData, SamplingPlan
from .prior import PriorSpec

__version__ = "0.1.0"

__all__ = [
    "BsplanError", "CostModel", "DecisionRule", "EnumerationCapExceeded", "FailureRates",
    "InputError", "IntervalData", "NumericalInstabilityError", "PriorSpec", "SamplingPlan",
    "SingularInformationError", "Verdict", "WeightUnderflowError",
]
