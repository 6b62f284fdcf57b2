"""Simulation and verification toolkit for STIT tessellations."""
from .engine import Kind, Tessellation, iterate, run_mnw, run_pht, section, state_at
from .measure import gamma, kappa, lambda_hitting

__version__ = "0.1.0"

__all__ = [
    "Kind",
    "Tessellation",
    "gamma",
    "iterate",
    "kappa",
    "lambda_hitting",
    "run_mnw",
    "run_pht",
    "section",
    "state_at",
]
