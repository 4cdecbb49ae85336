"""Simulation toolkit for a fluxonium, SNAIL and readout-resonator circuit.

Submodules
----------
operators   dense operator algebra and Hermitian eigensolvers
circuit     device parameters, Hamiltonians, dressed spectra, coupling rates
dynamics    four-level master-equation model for parametric reset
emission    released-photon amplitudes and conversion-pulse design
cli         ``fluxlink`` command-line front end
"""
__version__ = "0.1.0"

from . import operators, circuit, dynamics, emission  # noqa: E402
from .circuit import DeviceParams, SystemSpectrum, preset  # noqa: E402
from .dynamics import DensityMatrix, EffectiveModel, SimulationTrace, ThermalModel  # noqa: E402
from .emission import FieldTrace, PulseEnvelope, WavepacketSpec  # noqa: E402
from .operators import OperatorMatrix  # noqa: E402

__all__ = [
    "operators", "circuit", "dynamics", "emission",
    "DeviceParams", "SystemSpectrum", "preset",
    "DensityMatrix", "EffectiveModel", "SimulationTrace", "ThermalModel",
    "FieldTrace", "PulseEnvelope", "WavepacketSpec", "OperatorMatrix",
]
