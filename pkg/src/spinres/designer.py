"""Resonator and sample design arithmetic.

Vacuum field, single-spin and collective coupling, spin counting and an
internal-Q loss budget.  The radiation-limited Q is an input here (it comes
from an electromagnetic simulation or a measurement).
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .exceptions import DomainError
from .spin import MU_B_OVER_H
from .validation import check_fraction, check_positive

MU_0 = constants.mu_0
H_PLANCK = constants.h
K_B = constants.k
N_A = constants.N_A

DIAMOND_CARBON_DENSITY = 1.77e29  # m^-3
DPPH_MOLAR_MASS = 394.32e-3  # kg/mol
RUTILE_EPS_PERP = 130.0
RUTILE_EPS_PAR = 255.0


@dataclass
class DesignParams:
    """Resonator description for coupling and loss estimates.

    Exactly one of ``b_vac`` / ``mode_volume`` may be omitted; it is derived
    from the other.  ``epsilon_*`` and ``magnetic_filling`` are carried as
    documentation and do not enter the loss budget.
    """

    omega_r: float
    b_vac: float = None
    mode_volume: float = None
    epsilon_perp: float = RUTILE_EPS_PERP
    epsilon_par: float = RUTILE_EPS_PAR
    tan_delta: float = 1e-6
    electric_filling: float = 1.0
    magnetic_filling: float = 0.37
    q_radiation: float = np.inf
    q_conductor: float = np.inf

    def __post_init__(self):
        check_positive(self.omega_r, "omega_r")
        check_fraction(self.electric_filling, "electric_filling")
        check_fraction(self.magnetic_filling, "magnetic_filling")
        check_positive(self.tan_delta, "tan_delta", allow_zero=True)
        check_positive(self.q_radiation, "q_radiation", allow_inf=True)
        check_positive(self.q_conductor, "q_conductor", allow_inf=True)
        if self.b_vac is None and self.mode_volume is None:
            return
        if self.b_vac is None:
            self.b_vac = vacuum_field(self.omega_r, self.mode_volume)
        elif self.mode_volume is None:
            self.mode_volume = mode_volume(self.omega_r, self.b_vac)
        else:
            implied = vacuum_field(self.omega_r, self.mode_volume)
            if not np.isclose(implied, self.b_vac, rtol=1e-9, atol=0.0):
                raise DomainError("b_vac and mode_volume are both given and inconsistent")


@dataclass
class SampleSpec:
    """Spin-bearing sample.

    P1: ``concentration_ppm`` of the host ``host_density`` over
    ``sample_volume``.  DPPH: ``mass`` (kg) of ``molar_mass`` (kg/mol) with
    ``spins_per_molecule``.
    """

    species: str
    concentration_ppm: float = 0.0
    sample_volume: float = 0.0
    host_density: float = DIAMOND_CARBON_DENSITY
    mass: float = 0.0
    molar_mass: float = DPPH_MOLAR_MASS
    spins_per_molecule: float = 1.0

    def __post_init__(self):
        if self.species not in ("P1", "DPPH"):
            raise DomainError(f"species must be 'P1' or 'DPPH', got {self.species!r}")
        if not 0 <= self.concentration_ppm <= 1e6:
            raise DomainError("concentration_ppm must lie in [0, 1e6]")
        for name in ("sample_volume", "mass", "spins_per_molecule"):
            check_positive(getattr(self, name), name, allow_zero=True)
        check_positive(self.host_density, "host_density")
        check_positive(self.molar_mass, "molar_mass")


def vacuum_field(omega_r, mode_volume):
    """Zero-point magnetic field sqrt(mu0 h f / (2 V)) in tesla."""
    check_positive(omega_r, "omega_r")
    check_positive(mode_volume, "mode_volume")
    return float(np.sqrt(MU_0 * H_PLANCK * omega_r / (2 * mode_volume)))


def mode_volume(omega_r, b_vac):
    check_positive(omega_r, "omega_r")
    check_positive(b_vac, "b_vac")
    return float(MU_0 * H_PLANCK * omega_r / (2 * b_vac ** 2))


def single_spin_coupling(b_vac, g_factor=2.0):
    """g_single in Hz for a spin-1/2 (transverse matrix element 1/2)."""
    check_positive(b_vac, "b_vac", allow_zero=True)
    check_positive(g_factor, "g_factor")
    return g_factor * MU_B_OVER_H * b_vac / 2


def ensemble_coupling(g_single, n_spins, polarization=1.0):
    check_positive(n_spins, "n_spins", allow_zero=True)
    check_fraction(polarization, "polarization")
    return float(g_single * np.sqrt(n_spins * polarization))


def spins_for_coupling(g_single, g_ens, polarization=1.0):
    """Number of (polarized) spins needed to reach ``g_ens``."""
    check_positive(g_single, "g_single")
    return float((g_ens / g_single) ** 2 / polarization)


def thermal_polarization(frequency, temperature):
    """Spin-1/2 polarization tanh(h f / 2 k T); 1 at zero temperature."""
    check_positive(frequency, "frequency", allow_zero=True)
    check_positive(temperature, "temperature", allow_zero=True)
    if temperature == 0:
        return 1.0
    return float(np.tanh(H_PLANCK * frequency / (2 * K_B * temperature)))


def spin_count(spec):
    if spec.species == "P1":
        return spec.concentration_ppm * 1e-6 * spec.host_density * spec.sample_volume
    return spec.mass / spec.molar_mass * N_A * spec.spins_per_molecule


def loss_budget(params):
    """Internal Q and per-channel fractions of the total loss.

    1/Q_int = p_e tan(delta) + 1/Q_conductor + 1/Q_radiation.
    """
    channels = {
        "dielectric": params.electric_filling * params.tan_delta,
        "conductor": 1.0 / params.q_conductor,
        "radiation": 1.0 / params.q_radiation,
    }
    total = sum(channels.values())
    if total == 0:
        return np.inf, {k: 0.0 for k in channels}
    return 1.0 / total, {k: v / total for k, v in channels.items()}
