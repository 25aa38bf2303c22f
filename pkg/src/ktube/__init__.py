"""Kullback-Leibler tolerance tubes around parametric multinomial models."""

from .distances import k2, l2, pearson_residuals, tube_path_distance, tube_weight
from .models import ModelSpec, degrees_of_freedom, fit_weighted, model_dimension, parse_model
from .tables import ContingencyTable, ProbVector, load_fixture, load_table, margin, to_proportions
from .tubefit import (
    invert_for_c,
    lower_confidence_limit,
    profile,
    rho_star,
    solve_at_pi,
    solve_single_element,
)

__version__ = "0.1.0"

__all__ = [
    "ContingencyTable",
    "ModelSpec",
    "ProbVector",
    "degrees_of_freedom",
    "fit_weighted",
    "invert_for_c",
    "k2",
    "l2",
    "load_fixture",
    "load_table",
    "lower_confidence_limit",
    "margin",
    "model_dimension",
    "parse_model",
    "pearson_residuals",
    "profile",
    "rho_star",
    "solve_at_pi",
    "solve_single_element",
    "to_proportions",
    "tube_path_distance",
    "tube_weight",
]
