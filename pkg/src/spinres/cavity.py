"""Input-output model of a single-port resonator coupled to a spin ensemble.

All rates are ordinary frequencies in Hz (value / 2pi), so the reflection
coefficient reads

    S11(f) = a exp(i phi) [1 - kappa_ext / (i (f - f_r) + kappa_tot / 2 + W(f))]

with the ensemble susceptibility

    W(f) = g_ens^2  integral rho(x) / (i (f - x) + gamma_hom / 2) dx.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.integrate import trapezoid
from scipy.special import wofz

from .exceptions import DomainError, NumericError
from .validation import check_increasing, check_positive

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class ResonatorParams:
    omega_r: float
    kappa_int: float
    kappa_ext: float
    phase_offset: float = 0.0
    amplitude_scale: float = 1.0
    cable_delay: float = 0.0

    def __post_init__(self):
        check_positive(self.omega_r, "omega_r")
        check_positive(self.kappa_int, "kappa_int")
        check_positive(self.kappa_ext, "kappa_ext")
        check_positive(self.amplitude_scale, "amplitude_scale")

    @property
    def kappa_tot(self):
        return self.kappa_int + self.kappa_ext

    @property
    def q_int(self):
        return self.omega_r / self.kappa_int

    @property
    def q_ext(self):
        return self.omega_r / self.kappa_ext

    @property
    def q_loaded(self):
        return self.omega_r / self.kappa_tot

    @classmethod
    def from_q(cls, omega_r, q_int, kappa_ext, **kw):
        return cls(omega_r, omega_r / q_int, kappa_ext, **kw)

    def background(self, omega):
        omega = np.asarray(omega, dtype=float)
        bg = self.amplitude_scale * np.exp(1j * self.phase_offset)
        if self.cable_delay:
            bg = bg * np.exp(-2j * np.pi * (omega - self.omega_r) * self.cable_delay)
        return bg


@dataclass(frozen=True)
class EnsembleParams:
    """Inhomogeneously broadened spin ensemble.

    ``lineshape`` is ``"lorentzian"``, ``"gaussian"`` or ``"tabulated"``; the
    tabulated form takes ``density = (frequencies, rho)`` and is interpolated
    linearly (zero outside the grid).
    """

    g_ens: float
    omega_s: float
    gamma_inhomogeneous: float
    lineshape: str = "lorentzian"
    density: tuple = None
    gamma_hom: float = 0.0

    def __post_init__(self):
        check_positive(self.g_ens, "g_ens", allow_zero=True)
        check_positive(self.gamma_inhomogeneous, "gamma_inhomogeneous")
        check_positive(self.gamma_hom, "gamma_hom", allow_zero=True)
        if self.lineshape not in ("lorentzian", "gaussian", "tabulated"):
            raise DomainError(f"unknown lineshape {self.lineshape!r}")
        if self.lineshape == "tabulated":
            if self.density is None:
                raise DomainError("tabulated lineshape requires density=(frequencies, rho)")
            x = check_increasing(self.density[0], "density frequencies")
            rho = np.asarray(self.density[1], dtype=float)
            if rho.shape != x.shape or np.any(rho < 0):
                raise DomainError("tabulated rho must be non-negative and match its grid")
            mass = trapezoid(rho, x)
            if abs(mass - 1.0) > 1e-6:
                raise DomainError(f"tabulated rho must integrate to 1, got {mass:.9f}")
            object.__setattr__(self, "density", (x, rho))

    @classmethod
    def tabulated(cls, g_ens, frequencies, rho, gamma_hom=0.0):
        """Build a tabulated ensemble, normalising ``rho`` to unit area."""
        x = np.asarray(frequencies, dtype=float)
        rho = np.clip(np.asarray(rho, dtype=float), 0, None)
        rho = rho / trapezoid(rho, x)
        mean = trapezoid(x * rho, x)
        width = np.sqrt(max(trapezoid((x - mean) ** 2 * rho, x), 0.0)) or (x[-1] - x[0])
        return cls(g_ens, mean, width, "tabulated", (x, rho), gamma_hom)

    def rho(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.lineshape == "lorentzian":
            hw = self.gamma_inhomogeneous / 2
            return hw / np.pi / ((omega - self.omega_s) ** 2 + hw ** 2)
        if self.lineshape == "gaussian":
            sigma = self.gamma_inhomogeneous * FWHM_TO_SIGMA
            return np.exp(-0.5 * ((omega - self.omega_s) / sigma) ** 2) / (np.sqrt(2 * np.pi) * sigma)
        x, rho = self.density
        return np.interp(omega, x, rho, left=0.0, right=0.0)


def reflection_bare(omega, res):
    """Reflection of the empty resonator."""
    omega = np.asarray(omega, dtype=float)
    d = 1j * (omega - res.omega_r) + res.kappa_tot / 2
    return res.background(omega) * (1 - res.kappa_ext / d)


def _piecewise_linear_kernel(omega, x, rho, gamma_hom):
    """Exact integral of a piecewise-linear rho against 1/(i(omega - x) + gamma_hom/2)."""
    omega = np.atleast_1d(omega)[:, None]
    z = x[None, :] - omega
    c = 0.5j * gamma_hom
    slope = np.diff(rho) / np.diff(x)
    # value of each segment's linear extension at omega
    a = rho[:-1][None, :] + slope[None, :] * (omega - x[:-1][None, :])
    b = slope[None, :]
    if gamma_hom > 0:
        log = np.log(z + c)
    else:
        with np.errstate(divide="ignore"):
            log = np.log(np.abs(z)) + 1j * np.pi * (z < 0)
        log = np.where(z == 0, 0.0, log)
    coef = a - b * c
    # the log singularity at omega carries a zero coefficient whenever rho is continuous
    term = coef * (log[:, 1:] - log[:, :-1]) + b * (z[:, 1:] - z[:, :-1])
    return 1j * term.sum(axis=1)


def _quad_kernel(omega, ens, epsrel=1e-10):
    """Adaptive quadrature in the scaled variable u = (x - omega_s) / Gamma."""
    scale = ens.gamma_inhomogeneous
    if ens.lineshape == "tabulated":
        lo = (ens.density[0][0] - ens.omega_s) / scale
        hi = (ens.density[0][-1] - ens.omega_s) / scale
    else:
        lo, hi = -np.inf, np.inf

    def rho_u(u):
        return float(ens.rho(ens.omega_s + u * scale)) * scale

    def piece(func, a, b, **kw):
        if a >= b:
            return 0.0
        val, _ = integrate.quad(func, a, b, epsrel=epsrel, epsabs=0, limit=500, **kw)
        return val

    out = np.empty(np.size(omega), dtype=complex)
    for k, w in enumerate(np.atleast_1d(omega)):
        uw = (w - ens.omega_s) / scale
        extra = [c for c in (-30.0, 0.0, 30.0) if abs(c - uw) > 1]
        cuts = sorted({max(lo, min(hi, c)) for c in [uw - 1, uw + 1] + extra})
        edges = [lo] + cuts + [hi]
        if ens.gamma_hom > 0:
            h = ens.gamma_hom / 2 / scale
            re = im = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                re += piece(lambda u: rho_u(u) * h / ((uw - u) ** 2 + h ** 2), a, b)
                im += piece(lambda u: -rho_u(u) * (uw - u) / ((uw - u) ** 2 + h ** 2), a, b)
            re, im = re / scale, im / scale
        else:
            # W/g^2 = pi rho(w) + i PV int rho(x) / (x - w) dx
            re = np.pi * float(ens.rho(w))
            im = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                if a < uw < b:
                    im += piece(rho_u, a, b, weight="cauchy", wvar=uw)
                else:
                    im += piece(lambda u: rho_u(u) / (u - uw), a, b)
            im /= scale
        if not (np.isfinite(re) and np.isfinite(im)):
            raise NumericError(f"quadrature failed at omega={w!r} for {ens!r}")
        out[k] = re + 1j * im
    return out


def ensemble_susceptibility(omega, ens, method="auto"):
    """Complex susceptibility W(omega) in Hz.

    Lorentzian lines use the closed form, Gaussian lines the Faddeeva
    function, tabulated lines an exact piecewise-linear integration.
    ``method="quad"`` forces adaptive quadrature for any lineshape.
    """
    omega_arr = np.asarray(omega, dtype=float)
    flat = np.atleast_1d(omega_arr).ravel()
    g2 = ens.g_ens ** 2
    if g2 == 0:
        return np.zeros_like(omega_arr, dtype=complex)
    if method == "quad":
        k = _quad_kernel(flat, ens)
    elif ens.lineshape == "lorentzian":
        k = 1.0 / (1j * (flat - ens.omega_s) + (ens.gamma_inhomogeneous + ens.gamma_hom) / 2)
    elif ens.lineshape == "gaussian":
        sigma = ens.gamma_inhomogeneous * FWHM_TO_SIGMA
        z = (flat - ens.omega_s + 0.5j * ens.gamma_hom) / (np.sqrt(2) * sigma)
        k = np.conj(np.sqrt(np.pi) * wofz(z) / (np.sqrt(2) * sigma))
    else:
        x, rho = ens.density
        k = _piecewise_linear_kernel(flat, x, rho, ens.gamma_hom)
    return (g2 * k).reshape(omega_arr.shape)


def total_susceptibility(omega, ensembles):
    if isinstance(ensembles, EnsembleParams):
        return ensemble_susceptibility(omega, ensembles)
    W = np.zeros(np.shape(omega), dtype=complex)
    for ens in ensembles:
        W = W + ensemble_susceptibility(omega, ens)
    return W


def reflection_coupled(omega, res, ens):
    """Reflection with one ensemble or a sequence of ensembles attached."""
    omega = np.asarray(omega, dtype=float)
    W = total_susceptibility(omega, ens)
    d = 1j * (omega - res.omega_r) + res.kappa_tot / 2 + W
    return res.background(omega) * (1 - res.kappa_ext / d)


def dressed_frequencies(omega_r, omega_s, g_ens):
    """Upper and lower normal-mode frequencies of the coupled oscillators."""
    if np.any(np.asarray(g_ens) < 0):
        raise DomainError("g_ens must be >= 0")
    mean = (np.asarray(omega_r) + np.asarray(omega_s)) / 2
    half = np.sqrt(np.asarray(g_ens) ** 2 + (np.asarray(omega_r) - np.asarray(omega_s)) ** 2 / 4)
    return mean + half, mean - half


def normal_modes(omega_r, omega_s, g_ens, kappa_tot=0.0, gammas=None):
    """Sorted real parts of the coupled-mode eigenfrequencies for one or many spin modes.

    ``omega_s`` and ``g_ens`` may be arrays of shape ``(..., n_modes)``; with
    zero damping this reduces to :func:`dressed_frequencies` for one mode.
    """
    omega_s = np.atleast_1d(np.asarray(omega_s, dtype=float))
    g = np.broadcast_to(np.asarray(g_ens, dtype=float), omega_s.shape[-1:])
    n = omega_s.shape[-1]
    lead = omega_s.shape[:-1]
    M = np.zeros(lead + (n + 1, n + 1), dtype=complex)
    M[..., 0, 0] = np.asarray(omega_r) - 0.5j * kappa_tot
    idx = np.arange(1, n + 1)
    gam = np.zeros(n) if gammas is None else np.broadcast_to(np.asarray(gammas, float), (n,))
    M[..., idx, idx] = omega_s - 0.5j * gam
    M[..., 0, idx] = g
    M[..., idx, 0] = g
    if gammas is None and not kappa_tot:
        return np.linalg.eigvalsh(M.real)
    return np.sort(np.linalg.eigvals(M).real, axis=-1)


def cooperativity(g_ens, kappa_tot, gamma):
    """Return ``(C, regime)`` with C = g^2 / (kappa_tot * gamma)."""
    if kappa_tot <= 0 or gamma <= 0:
        raise DomainError("kappa_tot and gamma must be positive")
    c = g_ens ** 2 / (kappa_tot * gamma)
    if g_ens > kappa_tot and g_ens > gamma:
        regime = "strong coupling"
    elif c > 1:
        regime = "high cooperativity"
    else:
        regime = "weak"
    return c, regime


@dataclass
class ComplexTrace:
    frequencies: np.ndarray
    s11: np.ndarray
    metadata: dict = field(default_factory=dict)
    magnitude_only: bool = False

    def __post_init__(self):
        self.frequencies = check_increasing(self.frequencies, "frequencies")
        s = np.asarray(self.s11)
        if s.shape != self.frequencies.shape:
            raise DomainError("s11 and frequencies must have equal length")
        self.s11 = s.astype(complex)

    def __len__(self):
        return self.frequencies.size

    @property
    def magnitude(self):
        return np.abs(self.s11)


@dataclass
class DensityEstimate:
    """Spin density recovered from a reflection trace."""

    frequencies: np.ndarray
    rho: np.ndarray
    susceptibility: np.ndarray
    g_ens: float
    normalization: float
    masked: np.ndarray
    clipped_mass: float

    @property
    def integral(self):
        ok = ~self.masked
        return float(trapezoid(self.rho[ok], self.frequencies[ok]))


def invert_spin_distribution(trace, res, g_ens=None, mask_tol=1e-6):
    """Deduct the bare resonator from a trace and return the spin density.

    With ``g_ens`` given, rho = Re W / (pi g^2).  Otherwise rho is normalised
    to unit area and the normalisation constant yields g_ens^2.
    """
    f = np.asarray(trace.frequencies, dtype=float)
    s = np.asarray(trace.s11, dtype=complex) / res.background(f)
    denom = 1 - s
    masked = np.abs(denom) < mask_tol
    safe = np.where(masked, 1.0, denom)
    W = res.kappa_ext / safe - 1j * (f - res.omega_r) - res.kappa_tot / 2
    W = np.where(masked, np.nan + 0j, W)
    raw = W.real / np.pi
    ok = ~masked
    if g_ens is None:
        norm = float(trapezoid(raw[ok], f[ok]))
        if norm <= 0:
            raise NumericError("recovered density has non-positive area; is the ensemble coupled?")
        g_est = float(np.sqrt(norm))
    else:
        check_positive(g_ens, "g_ens")
        norm = float(g_ens) ** 2
        g_est = float(g_ens)
    rho = raw / norm
    negative = np.where(ok & (rho < 0), rho, 0.0)
    clipped = float(-trapezoid(negative, f)) + 0.0
    rho = np.where(ok, np.clip(rho, 0, None), np.nan)
    return DensityEstimate(f, rho, W, g_est, norm, masked, clipped)
