"""Constrained derivative-free optimization toolkit for architecture and
hyperparameter search over subprocess blackboxes."""

__version__ = "0.1.0"
