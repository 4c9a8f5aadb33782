"""Rotating-frame Bloch dynamics and pulse-ESR relaxation models.

Magnetisation rotates as dM/dt = Omega x M with
Omega = 2 pi (Omega_R cos phi, Omega_R sin phi, Delta); during free evolution
the transverse part decays with T2 and M_z relaxes to equilibrium with T1.
All frequencies are in Hz and times in seconds.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, NumericError

MAX_SUBSTEPS = 10_000_000


@dataclass(frozen=True)
class Pulse:
    duration: float
    rabi_frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError(f"pulse duration must be > 0, got {self.duration}")


@dataclass(frozen=True)
class HardPulse:
    """Instantaneous rotation by ``angle`` about an axis at ``phase`` in the xy-plane."""

    angle: float
    phase: float = 0.0
    duration = 0.0


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError(f"delay duration must be > 0, got {self.duration}")


@dataclass
class PulseSequence:
    segments: list
    acquisition: tuple = None
    n_acquisition: int = 101

    def __post_init__(self):
        total = self.total_duration
        if not np.isfinite(total):
            raise DomainError("sequence duration must be finite")
        if self.acquisition is not None:
            start, length = self.acquisition
            if start < 0 or length < 0 or start + length > total * (1 + 1e-12):
                raise DomainError(f"acquisition window {self.acquisition} outside sequence span {total}")

    @property
    def total_duration(self):
        return float(sum(s.duration for s in self.segments))

    def acquisition_times(self):
        if self.acquisition is None:
            return np.empty(0)
        start, length = self.acquisition
        return np.linspace(start, start + length, self.n_acquisition)


@dataclass(frozen=True)
class RelaxationParams:
    t1: float
    t2: float
    stretch_p: float = 1.0
    equilibrium_mz: float = 1.0

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise DomainError("t1 and t2 must be positive")
        if not 0.5 <= self.stretch_p <= 3:
            raise DomainError(f"stretch_p must lie in [0.5, 3], got {self.stretch_p}")
        if self.t2 > 2 * self.t1:
            warnings.warn("t2 > 2 t1 is unphysical for Bloch relaxation", stacklevel=3)


@dataclass
class Trajectory:
    """Magnetisation at segment boundaries (``times``/``m``) and acquisition samples."""

    times: np.ndarray
    m: np.ndarray
    acquisition_times: np.ndarray = None
    acquisition_m: np.ndarray = None


@dataclass
class EchoTrace:
    times: np.ndarray
    magnetization: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0) or not np.all(np.isfinite(self.magnetization)):
            raise DomainError("echo trace needs strictly increasing times and finite values")

    @property
    def amplitude(self):
        return np.abs(self.magnetization)

    @property
    def peak_time(self):
        return float(self.times[np.argmax(self.amplitude)])

    @property
    def peak_amplitude(self):
        return float(np.max(self.amplitude))


def _rotate(m, axis, angle):
    """Rodrigues rotation of vectors ``m`` (..., 3) about unit ``axis`` (..., 3)."""
    c = np.cos(angle)[..., None]
    s = np.sin(angle)[..., None]
    dot = np.sum(axis * m, axis=-1, keepdims=True)
    return m * c + np.cross(axis, m) * s + axis * dot * (1 - c)


def _precess(m, rabi, phase, detuning, t):
    omega = np.stack(np.broadcast_arrays(rabi * np.cos(phase), rabi * np.sin(phase), detuning), axis=-1)
    omega = np.broadcast_to(omega, m.shape)
    rate = np.linalg.norm(omega, axis=-1)
    axis = np.divide(omega, rate[..., None], out=np.zeros_like(omega), where=rate[..., None] > 0)
    return _rotate(m, axis, 2 * np.pi * rate * t)


def _relax(m, relax, t):
    if relax is None or t == 0:
        return m
    out = m.copy()
    e2 = np.exp(-t / relax.t2)
    out[..., 0] *= e2
    out[..., 1] *= e2
    out[..., 2] = relax.equilibrium_mz + (m[..., 2] - relax.equilibrium_mz) * np.exp(-t / relax.t1)
    return out


def _advance(m, seg, relax, detuning, t):
    """Evolve ``m`` for time ``t`` within segment ``seg``."""
    if isinstance(seg, Delay):
        return _relax(_precess(m, 0.0, 0.0, detuning, t), relax, t)
    if relax is None or t < relax.t2 / 100:
        return _precess(m, seg.rabi_frequency, seg.phase, detuning, t)
    # long pulse: Strang splitting with steps no longer than T2/100
    n = int(np.ceil(t / (relax.t2 / 100)))
    if n > MAX_SUBSTEPS:
        raise NumericError(f"pulse of {t} s needs {n} relaxation sub-steps (T2 = {relax.t2} s)")
    dt = t / n
    for _ in range(n):
        m = _relax(m, relax, dt / 2)
        m = _precess(m, seg.rabi_frequency, seg.phase, detuning, dt)
        m = _relax(m, relax, dt / 2)
    return m


def propagate_bloch(seq, relax, detuning, m0=(0.0, 0.0, 1.0)):
    """Piecewise-exact propagation through ``seq``.

    ``detuning`` may be a scalar or an array; the returned ``Trajectory.m``
    has shape ``(n_times, 3)`` or ``(n_detunings, n_times, 3)``.  Output times
    are the segment boundaries plus the acquisition samples.  Pass
    ``relax=None`` to switch relaxation off.
    """
    det = np.asarray(detuning, dtype=float)
    scalar = det.ndim == 0
    det = np.atleast_1d(det)
    m = np.broadcast_to(np.asarray(m0, dtype=float), det.shape + (3,)).copy()
    samples = seq.acquisition_times()
    times = [0.0]
    states = [m.copy()]
    acq = []
    t = 0.0
    k = 0
    for seg in seq.segments:
        if isinstance(seg, HardPulse):
            axis = np.array([np.cos(seg.phase), np.sin(seg.phase), 0.0])
            m = _rotate(m, np.broadcast_to(axis, m.shape), np.full(det.shape, seg.angle))
            times.append(t)
            states.append(m.copy())
            continue
        end = t + seg.duration
        while k < samples.size and samples[k] <= end * (1 + 1e-15):
            dt = samples[k] - t
            if dt > 0:
                m = _advance(m, seg, relax, det, dt)
                t = samples[k]
            times.append(t)
            states.append(m.copy())
            acq.append(m.copy())
            k += 1
        if end > t:
            m = _advance(m, seg, relax, det, end - t)
            t = end
        times.append(t)
        states.append(m.copy())
    times = np.array(times)
    states = np.stack(states, axis=-2)
    # collapse repeated time stamps, keeping the latest state
    keep = np.append(np.diff(times) > 0, True)
    times, states = times[keep], states[..., keep, :]
    acq_m = np.stack(acq, axis=-2) if acq else np.empty(det.shape + (0, 3))
    if scalar:
        states, acq_m = states[0], acq_m[0]
    return Trajectory(times, states, samples[: len(acq)], acq_m)


def stratified_detunings(fwhm, n, lineshape="lorentzian"):
    """Deterministic inverse-CDF samples at the midpoints of ``n`` equal-probability bins."""
    u = (np.arange(n) + 0.5) / n
    if lineshape == "lorentzian":
        return fwhm / 2 * np.tan(np.pi * (u - 0.5))
    if lineshape == "gaussian":
        from scipy.special import ndtri

        return fwhm / (2 * np.sqrt(2 * np.log(2))) * ndtri(u)
    raise DomainError(f"unknown lineshape {lineshape!r}")


def simulate_hahn_echo(tau, ensemble_fwhm, relax, n_spins=1001, lineshape="lorentzian",
                       n_points=201, window=None):
    """Ensemble-averaged pi/2 - tau - pi - tau echo with ideal pulses.

    Bloch propagation handles refocusing and T1; transverse decay enters as
    the stretched envelope ``exp(-(t / T2) ** p)`` measured from the first
    pulse.  The trace is sampled on a symmetric grid centred on ``2 tau``.
    """
    if n_spins < 100:
        warnings.warn(f"n_spins={n_spins} is too small for a converged ensemble average", stacklevel=2)
    if tau < 0:
        raise DomainError("tau must be >= 0")
    det = stratified_detunings(ensemble_fwhm, n_spins, lineshape)
    if window is None:
        window = min(10.0 / (np.pi * ensemble_fwhm), 2 * tau) if tau > 0 else 0.0
    half = window / 2
    segments = [HardPulse(np.pi / 2)]
    if tau > 0:
        segments += [Delay(tau), HardPulse(np.pi), Delay(tau + half)]
        seq = PulseSequence(segments, (2 * tau - half, 2 * half), n_points if half > 0 else 1)
    else:
        segments += [HardPulse(np.pi), Delay(max(half, 1e-12))]
        seq = PulseSequence(segments, (0.0, half), n_points if half > 0 else 1)
    traj = propagate_bloch(seq, _NoT2(relax), det)
    m = traj.acquisition_m.mean(axis=0)
    times = traj.acquisition_times
    envelope = np.exp(-((times / relax.t2) ** relax.stretch_p))
    mxy = (m[:, 0] + 1j * m[:, 1]) * envelope
    meta = {"tau": tau, "ensemble_fwhm": ensemble_fwhm, "n_spins": n_spins, "lineshape": lineshape}
    return EchoTrace(times, mxy, meta)


class _NoT2:
    """Relaxation view with transverse Bloch decay disabled (the envelope carries T2)."""

    def __init__(self, relax):
        self.t1 = relax.t1
        self.t2 = np.inf
        self.equilibrium_mz = relax.equilibrium_mz


def saturation_recovery_model(T, t1, amplitude=1.0):
    T = np.asarray(T, dtype=float)
    return amplitude * (1 - np.exp(-T / t1))


def echo_decay_model(two_tau, t2, p, amplitude=1.0):
    two_tau = np.asarray(two_tau, dtype=float)
    return amplitude * np.exp(-((two_tau / t2) ** p))
