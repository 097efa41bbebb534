"""Markov-type measures with complete overlaps: quantization dimensions.

Library layout (one module per concern):

* :mod:`mtquant.symbolic`     words, lifts, admissibility
* :mod:`mtquant.model`        system specification, regimes, fixtures
* :mod:`mtquant.geometry`     seeds, similitudes, separation checks
* :mod:`mtquant.measure`      cylinder measures, energies, reducibility
* :mod:`mtquant.spectral`     spectral radii, dimension and pressure roots
* :mod:`mtquant.quantization` anti-chains, sampling, Lloyd quantization
* :mod:`mtquant.cli`          command-line front end
"""

from ._kernels import kernel_backend
from .model import SystemSpec, build_condensation, load_config, load_fixture, validate

__all__ = [
    "SystemSpec",
    "build_condensation",
    "kernel_backend",
    "load_config",
    "load_fixture",
    "validate",
]

__version__ = "0.1.0"
