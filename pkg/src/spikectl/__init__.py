"""Optimal control of a spiking neuron for estimating its unknown firing-rate parameter."""

from .hjb import GridSpec, ValueGrid, eval_policy, eval_value, solve
from .model import Model, builtin_model
from .prior import Prior, make_atomic_prior, make_quadrature_prior, uniform_prior

__all__ = [
    "GridSpec",
    "ValueGrid",
    "Model",
    "Prior",
    "builtin_model",
    "eval_policy",
    "eval_value",
    "make_atomic_prior",
    "make_quadrature_prior",
    "solve",
    "uniform_prior",
]

__version__ = "0.1.0"
