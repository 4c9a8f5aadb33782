"""Field-swept reflection maps: container and forward simulation."""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .cavity import EnsembleParams, reflection_coupled
from .exceptions import DomainError
from .validation import check_increasing


@dataclass
class FieldSweepMap:
    """Reflection magnitude on a (field, frequency) grid.

    ``magnitude[i, j]`` is the response at ``fields[i]`` (tesla) and
    ``frequencies[j]`` (Hz), in dB (20 log10 |S11|) or linear units as
    declared by ``scale``.
    """

    fields: np.ndarray
    frequencies: np.ndarray
    magnitude: np.ndarray
    scale: str = "dB"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.fields = check_increasing(self.fields, "fields", min_length=1)
        self.frequencies = check_increasing(self.frequencies, "frequencies")
        self.magnitude = np.asarray(self.magnitude, dtype=float)
        if self.scale not in ("dB", "linear"):
            raise DomainError(f"scale must be 'dB' or 'linear', got {self.scale!r}")
        expected = (self.fields.size, self.frequencies.size)
        if self.magnitude.shape != expected:
            raise DomainError(f"magnitude shape {self.magnitude.shape} does not match axes {expected}")
        if self.fields.size == 1:
            self.metadata.setdefault("degenerate_sweep", True)

    @property
    def shape(self):
        return self.magnitude.shape

    def to_linear(self):
        if self.scale == "linear":
            return self.magnitude.copy()
        return 10.0 ** (self.magnitude / 20.0)

    def to_db(self):
        if self.scale == "dB":
            return self.magnitude.copy()
        return 20.0 * np.log10(np.maximum(self.magnitude, 1e-300))


def shift_ensemble(ens, omega_s):
    """Copy of ``ens`` centred at ``omega_s`` (tabulated grids move with it)."""
    if ens.lineshape == "tabulated":
        x, rho = ens.density
        return dataclasses.replace(ens, omega_s=omega_s, density=(x + (omega_s - ens.omega_s), rho))
    return dataclasses.replace(ens, omega_s=omega_s)


def simulate_field_sweep(spin_model, resonator, ensembles, fields, frequencies,
                         noise=0.0, seed=0, scale="dB"):
    """Forward-model a field sweep.

    Parameters
    ----------
    spin_model : callable
        ``fields -> (n_fields, n_modes)`` spin transition frequencies in Hz,
        e.g. from :func:`spinres.spin.transition_function`.
    resonator : ResonatorParams
    ensembles : EnsembleParams or sequence of EnsembleParams
        One per spin mode; ``omega_s`` is overwritten column by column.
    fields, frequencies : array_like
    noise : float
        Standard deviation of complex Gaussian noise added to S11 (per
        quadrature, linear units).
    seed : int
    scale : {"dB", "linear"}

    Returns
    -------
    FieldSweepMap
    """
    fields = check_increasing(fields, "fields", min_length=1)
    frequencies = check_increasing(frequencies, "frequencies")
    if isinstance(ensembles, EnsembleParams):
        ensembles = [ensembles]
    spin = np.asarray(spin_model(fields), dtype=float).reshape(fields.size, -1)
    if spin.shape[1] != len(ensembles):
        raise DomainError(f"spin model gives {spin.shape[1]} modes but {len(ensembles)} ensembles were given")

    def column(i):
        ens = [shift_ensemble(e, w) for e, w in zip(ensembles, spin[i]) if np.isfinite(w)]
        return reflection_coupled(frequencies, resonator, ens)

    s = np.array(ordered_map(column, range(fields.size)))
    if noise > 0:
        rng = np.random.default_rng(seed)
        s = s + noise * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    mag = np.abs(s)
    meta = {"noise": noise, "seed": seed, "n_modes": len(ensembles)}
    m = FieldSweepMap(fields, frequencies, mag, "linear", meta)
    if scale == "dB":
        m = FieldSweepMap(fields, frequencies, m.to_db(), "dB", meta)
    return m
