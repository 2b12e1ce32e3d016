"""Fluxon analogues and dark solitons in linearly coupled Gross-Pitaevskii equations."""
from .core import Grid, ModelParams, Observables, PairField
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "Grid", "ModelParams", "Observables", "PairField", "__version__"]
