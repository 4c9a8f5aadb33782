"""Spin-ensemble / dielectric-resonator spectroscopy: models, simulation and fitting."""

__version__ = "0.1.0"

from .cavity import (ComplexTrace, DensityEstimate, EnsembleParams, ResonatorParams, cooperativity,
                     dressed_frequencies, ensemble_susceptibility, invert_spin_distribution, normal_modes,
                     reflection_bare, reflection_coupled)
from .designer import (DesignParams, SampleSpec, ensemble_coupling, loss_budget, mode_volume,
                       single_spin_coupling, spin_count, spins_for_coupling, thermal_polarization,
                       vacuum_field)
from .exceptions import (DomainError, FitError, InsufficientDataError, NotFoundError, NumericError,
                         ParseError, SpinresError)
from .fitkit import (AvoidedCrossingFitter, CoupledSpectrumFitter, FitProblem, FitResult, Parameter,
                     ResonatorFitter, fit_avoided_crossing, fit_coupled_spectrum, fit_echo_decay,
                     fit_resonator, fit_saturation_recovery, least_squares)
from .io import TraceFile, load_field_map, load_trace
from .pulse import (Delay, EchoTrace, HardPulse, Pulse, PulseSequence, RelaxationParams,
                    echo_decay_model, propagate_bloch, saturation_recovery_model, simulate_hahn_echo)
from .spin import (FieldPoint, SpinSystem, TransitionSet, build_hamiltonian, resonance_field,
                   transition_function, transitions, zeeman_transition)
from .sweep import FieldSweepMap, simulate_field_sweep
