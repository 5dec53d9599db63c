"""Generators, semigroup checks, first passage and jump intensity."""

from .first_passage import (
    DEFAULT_SURVIVAL_FLOOR,
    FirstPassageConditioning,
    FirstPassageEstimate,
    RateEstimate,
    estimate_first_passage,
    first_passage_times,
    jump_rate_from_fp,
    rate_estimate,
)
from .functions import (
    ClockCoordinate,
    Constant,
    Coordinate,
    GaussianBump,
    GuardCoordinate,
    Product,
    Quadratic,
    Sum,
    TestFunction,
    split_state,
    state_vector,
)
from .generator import (
    abstraction_field,
    generator_agent,
    generator_many,
    generator_pdmp,
    generator_swarm,
    lie_derivative,
    mean_and_se,
)
from .intensity import IntensityEstimate, Region, mean_jump_intensity
from .kolmogorov import (
    ForwardReport,
    ResidualReport,
    chapman_kolmogorov_check,
    forward_equation_residual,
    generator_residual,
    semigroup_estimate,
)
from .model import (
    AbstractionModel,
    AffineClockHazard,
    ConstantHazard,
    HazardTable,
    simulate_abstraction,
)

__all__ = [
    "AbstractionModel",
    "AffineClockHazard",
    "ClockCoordinate",
    "Constant",
    "ConstantHazard",
    "Coordinate",
    "DEFAULT_SURVIVAL_FLOOR",
    "FirstPassageConditioning",
    "FirstPassageEstimate",
    "ForwardReport",
    "GaussianBump",
    "GuardCoordinate",
    "HazardTable",
    "IntensityEstimate",
    "Product",
    "Quadratic",
    "RateEstimate",
    "Region",
    "ResidualReport",
    "Sum",
    "TestFunction",
    "abstraction_field",
    "chapman_kolmogorov_check",
    "estimate_first_passage",
    "first_passage_times",
    "forward_equation_residual",
    "generator_agent",
    "generator_many",
    "generator_pdmp",
    "generator_residual",
    "generator_swarm",
    "jump_rate_from_fp",
    "lie_derivative",
    "mean_and_se",
    "mean_jump_intensity",
    "rate_estimate",
    "semigroup_estimate",
    "simulate_abstraction",
    "split_state",
    "state_vector",
]
