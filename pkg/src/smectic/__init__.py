"""Spectral Galerkin simulation and verification for smectic-A liquid crystal flow."""

__version__ = "0.1.0"

from .params import ModelParams, NormalMode, certify, default_params  # noqa: E402
from .spectral import Grid  # noqa: E402
from .energy import LayerField, State, free_energy, variational_j, variational_q  # noqa: E402
from .solver import SolverConfig, run, step  # noqa: E402

__all__ = [
    "Grid", "LayerField", "ModelParams", "NormalMode", "SolverConfig", "State",
    "certify", "default_params", "free_energy", "run", "step", "variational_j", "variational_q",
]
