"""Persistent turning walker: simulation, diffusion constant and Poisson-equation tools."""

__version__ = "0.1.0"

from .model import Drift, FullState, KineticState, ModelParams, SpeedProfile  # noqa: E402

__all__ = ["Drift", "FullState", "KineticState", "ModelParams", "SpeedProfile", "__version__"]
