"""Frozen Gaussian dynamics for Schrodinger equations with periodic and external potentials."""

from ._core import (
    Bands,
    FgaError,
    band_projection,
    bloch_packet,
    propagate,
    reference_propagate,
    resolve_config,
    run_command,
    solve_bands,
)

__all__ = [
    "Bands",
    "FgaError",
    "band_projection",
    "bloch_packet",
    "propagate",
    "reference_propagate",
    "resolve_config",
    "run_command",
    "solve_bands",
]
