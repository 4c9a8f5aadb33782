"""Least-squares fitting of the reflection, crossing and relaxation models."""

from .base import BaseFitter, edge_noise, find_dips
from .coupled import CoupledSpectrumFitter, fit_coupled_spectrum
from .crossing import AvoidedCrossingFitter, fit_avoided_crossing
from .density import LorentzianDensityFitter, lorentzian_density
from .lm import FitProblem, FitResult, Parameter, least_squares
from .relaxation import EchoDecayFitter, SaturationRecoveryFitter, fit_echo_decay, fit_saturation_recovery
from .resonator import ResonatorFitter, fit_resonator

__all__ = [
    "AvoidedCrossingFitter",
    "BaseFitter",
    "CoupledSpectrumFitter",
    "EchoDecayFitter",
    "FitProblem",
    "FitResult",
    "LorentzianDensityFitter",
    "Parameter",
    "ResonatorFitter",
    "SaturationRecoveryFitter",
    "edge_noise",
    "find_dips",
    "fit_avoided_crossing",
    "fit_coupled_spectrum",
    "fit_echo_decay",
    "fit_resonator",
    "fit_saturation_recovery",
    "least_squares",
    "lorentzian_density",
]
