"""Bare-resonator reflection fitting."""

import numpy as np

from ..cavity import ComplexTrace, ResonatorParams
from ..exceptions import NotFoundError
from ..validation import check_xy
from .base import BaseFitter, edge_noise
from .lm import FitProblem, Parameter


def _half_depth_width(f, power, i0, level):
    """Full width where ``1 - power`` falls to ``level`` around index ``i0``."""
    dip = 1 - power
    lo = i0
    while lo > 0 and dip[lo] > level:
        lo -= 1
    hi = i0
    while hi < dip.size - 1 and dip[hi] > level:
        hi += 1

    def cross(a, b):
        if dip[a] == dip[b]:
            return f[a]
        return f[a] + (level - dip[a]) * (f[b] - f[a]) / (dip[b] - dip[a])

    left = cross(lo, lo + 1) if lo < i0 else f[i0]
    right = cross(hi - 1, hi) if hi > i0 else f[i0]
    return right - left


def initial_resonator_guess(f, s, coupling="over"):
    """Heuristic starting point from dip position, depth and half-depth width."""
    mag = np.abs(s)
    n = max(3, int(0.05 * f.size))
    baseline = float(np.median(np.concatenate([mag[:n], mag[-n:]])))
    i0 = int(np.argmin(mag))
    depth = min(mag[i0] / baseline, 0.999)
    power = (mag / baseline) ** 2
    kappa_tot = _half_depth_width(f, power, i0, (1 - depth ** 2) / 2)
    step = float(np.median(np.diff(f)))
    kappa_tot = max(kappa_tot, 3 * step)
    prod = kappa_tot ** 2 * (1 - depth ** 2) / 4
    disc = np.sqrt(max(kappa_tot ** 2 / 4 - prod, 0.0))
    big, small = kappa_tot / 2 + disc, max(kappa_tot / 2 - disc, 1e-3 * kappa_tot)
    k_ext, k_int = (big, small) if coupling == "over" else (small, big)
    edges = np.concatenate([s[:n], s[-n:]])
    phase = float(np.angle(np.mean(edges))) if np.iscomplexobj(s) else 0.0
    return {
        "omega_r": float(f[i0]),
        "kappa_int": float(k_int),
        "kappa_ext": float(k_ext),
        "amplitude_scale": baseline,
        "phase_offset": phase,
        "cable_delay": 0.0,
    }


def _resonator_model(f, v, magnitude):
    d = 1j * (f - v["omega_r"]) + (v["kappa_int"] + v["kappa_ext"]) / 2
    bg = v["amplitude_scale"] * np.exp(1j * (v["phase_offset"] - 2 * np.pi * (f - v["omega_r"]) * v["cable_delay"]))
    s = bg * (1 - v["kappa_ext"] / d)
    return np.abs(s) if magnitude else s


class ResonatorFitter(BaseFitter):
    """Fit ``reflection_bare`` to a single-dip trace.

    Parameters
    ----------
    coupling : {"auto", "over", "under"}
        Which side of critical coupling to start from.  With complex data
        ``"auto"`` tries both and keeps the better fit.  Magnitude data cannot
        distinguish the two (|S11| is symmetric under kappa_int <-> kappa_ext);
        ``"auto"`` then reports the over-coupled solution and sets
        ``coupling_ambiguous_``.
    fit_delay : bool
        Also fit a linear cable-delay phase slope (complex data only).
    noise_sigma : float, optional
        Noise level for the dip-detection test; estimated from the trace
        edges when omitted.
    """

    def __init__(self, coupling="auto", fit_delay=False, noise_sigma=None, initial=None):
        self.coupling = coupling
        self.fit_delay = fit_delay
        self.noise_sigma = noise_sigma
        self.initial = initial

    def _model(self, X, values):
        return _resonator_model(X, values, self.magnitude_only_)

    def _problem(self, f, y, start):
        magnitude = self.magnitude_only_
        span = f[-1] - f[0]
        kt = start["kappa_int"] + start["kappa_ext"]
        params = [
            Parameter("omega_r", start["omega_r"], f[0], f[-1], unit="Hz", scale=kt),
            Parameter("kappa_int", start["kappa_int"], 1e-6 * kt, 10 * span, unit="Hz", scale=kt),
            Parameter("kappa_ext", start["kappa_ext"], 1e-6 * kt, 10 * span, unit="Hz", scale=kt),
            Parameter("amplitude_scale", start["amplitude_scale"], 0.0, np.inf, scale=1.0),
            Parameter("phase_offset", start["phase_offset"], fixed=magnitude, unit="rad", scale=1.0),
            Parameter("cable_delay", start["cable_delay"], fixed=magnitude or not self.fit_delay,
                      unit="s", scale=1.0 / span),
        ]
        return FitProblem(lambda v: _resonator_model(f, v, magnitude), params, y, name="bare-reflection")

    def fit(self, X, y):
        f, y = check_xy(X, y)
        self.magnitude_only_ = not np.iscomplexobj(y)
        mag = np.abs(y)
        sigma = self.noise_sigma if self.noise_sigma is not None else edge_noise(mag)
        if np.ptp(mag) <= 3 * sigma:
            raise NotFoundError(
                f"no resonance dip: trace range {np.ptp(mag):.3g} <= 3 x noise {sigma:.3g}"
            )
        if self.coupling == "auto":
            sides = ["over"] if self.magnitude_only_ else ["over", "under"]
        else:
            sides = [self.coupling]
        best = None
        for side in sides:
            start = initial_resonator_guess(f, y, side)
            if self.initial:
                start.update(self.initial)
            result = self._solve(self._problem(f, y, start))
            if best is None or result.residual_rss < best.residual_rss:
                best = result
        self.result_ = best
        self.params_ = best.as_dict()
        self.coupling_ambiguous_ = self.magnitude_only_
        self.noise_sigma_ = sigma
        self._set_derived()
        return self

    def _set_derived(self):
        r = self.result_
        names = r.names
        i_w, i_i, i_e = (names.index(k) for k in ("omega_r", "kappa_int", "kappa_ext"))
        C = r.covariance
        w, ki, ke = r["omega_r"], r["kappa_int"], r["kappa_ext"]
        self.omega_r_, self.kappa_int_, self.kappa_ext_ = w, ki, ke
        self.kappa_tot_ = ki + ke
        self.q_int_ = w / ki
        var_kt = C[i_i, i_i] + C[i_e, i_e] + 2 * C[i_i, i_e]
        rel_q = C[i_w, i_w] / w ** 2 + C[i_i, i_i] / ki ** 2 - 2 * C[i_w, i_i] / (w * ki)
        r.derived = {
            "kappa_tot": (self.kappa_tot_, float(np.sqrt(max(var_kt, 0))), "Hz"),
            "q_int": (self.q_int_, float(self.q_int_ * np.sqrt(max(rel_q, 0))), ""),
        }
        v = self.params_
        self.resonator_ = ResonatorParams(
            w, ki, ke,
            phase_offset=v["phase_offset"],
            amplitude_scale=v["amplitude_scale"],
            cable_delay=v["cable_delay"],
        )


def fit_resonator(trace, **kwargs):
    """Fit a :class:`ComplexTrace` (or magnitude-only trace) to the bare model.

    Returns the :class:`FitResult`; ``result.derived`` holds kappa_tot and
    Q_int with propagated uncertainties and ``result.estimator`` the fitted
    :class:`ResonatorFitter`.
    """
    est = ResonatorFitter(**kwargs)
    if isinstance(trace, ComplexTrace):
        y = trace.magnitude if trace.magnitude_only else trace.s11
        est.fit(trace.frequencies, y)
    else:
        est.fit(*trace)
    est.result_.estimator = est
    return est.result_
