"""Ensemble parameters from an on-crossing reflection spectrum."""

import numpy as np

from ..cavity import ComplexTrace, EnsembleParams, reflection_coupled
from ..validation import check_xy
from .base import BaseFitter, edge_noise, find_dips
from .lm import FitProblem, Parameter

ENSEMBLE_PARAMS = ("g_ens", "omega_s", "gamma_inhomogeneous")


def initial_ensemble_guess(f, y, res):
    """Starting (g, omega_s, Gamma) from the two deepest dips and the sum rule."""
    mag = np.abs(y) / res.amplitude_scale
    prom = max(5 * edge_noise(mag), 1e-3 * np.ptp(mag))
    pos, _, p = find_dips(f, mag, prom, max_dips=2)
    if pos.size == 2:
        lo, hi = pos
        omega_s = lo + hi - res.omega_r
        g = np.sqrt(max(((hi - lo) / 2) ** 2 - ((res.omega_r - omega_s) / 2) ** 2, (res.kappa_tot / 2) ** 2))
    else:
        omega_s = res.omega_r
        g = res.kappa_tot
    return {"g_ens": float(g), "omega_s": float(omega_s), "gamma_inhomogeneous": float(g)}


class CoupledSpectrumFitter(BaseFitter):
    """Fit (g_ens, omega_s, Gamma) of ``reflection_coupled`` with the resonator held fixed.

    Parameters
    ----------
    resonator : ResonatorParams
        Bare resonator, fitted beforehand at a far-detuned field.
    lineshape : {"lorentzian", "gaussian"}
    initial : dict, optional
        Starting values overriding the dip-based guess.
    hold : dict, optional
        Parameters to hold at the given values, e.g. ``{"g_ens": 0.0}``.
    """

    def __init__(self, resonator=None, lineshape="lorentzian", initial=None, hold=None):
        self.resonator = resonator
        self.lineshape = lineshape
        self.initial = initial
        self.hold = hold

    def _ensemble(self, v):
        return EnsembleParams(max(v["g_ens"], 0.0), v["omega_s"], v["gamma_inhomogeneous"], self.lineshape)

    def _model(self, X, values):
        s = reflection_coupled(X, self.resonator, self._ensemble(values))
        return np.abs(s) if self.magnitude_only_ else s

    def fit(self, X, y):
        f, y = check_xy(X, y)
        self.magnitude_only_ = not np.iscomplexobj(y)
        res = self.resonator
        span = f[-1] - f[0]
        guess = initial_ensemble_guess(f, y, res)
        if self.initial:
            guess.update(self.initial)
        fixed = dict(self.hold or {})
        starts = [guess]
        if not self.initial:
            # Gamma is the least constrained by the dip pattern; try a few
            starts += [dict(guess, gamma_inhomogeneous=guess["g_ens"] * k) for k in (0.2, 2.0)]
        best = None
        for start in starts:
            start = dict(start, **fixed)
            width = max(start["g_ens"], res.kappa_tot)
            params = [
                Parameter("g_ens", start["g_ens"], 0.0, 10 * span, "g_ens" in fixed, "Hz", width),
                Parameter("omega_s", start["omega_s"], f[0] - span, f[-1] + span, "omega_s" in fixed,
                          "Hz", width),
                Parameter("gamma_inhomogeneous", start["gamma_inhomogeneous"], 1e-6 * width, 10 * span,
                          "gamma_inhomogeneous" in fixed, "Hz", width),
            ]
            problem = FitProblem(lambda v: self._model(f, v), params, y, name="coupled-reflection")
            result = self._solve(problem)
            if best is None or result.residual_rss < best.residual_rss:
                best = result
        self.result_ = best
        self.params_ = best.as_dict()
        self.ensemble_ = self._ensemble(self.params_)
        self.g_ens_ = self.params_["g_ens"]
        self.omega_s_ = self.params_["omega_s"]
        self.gamma_ = self.params_["gamma_inhomogeneous"]
        return self


def fit_coupled_spectrum(trace, fixed, **kwargs):
    """Fit ensemble parameters to ``trace`` with resonator ``fixed``; returns a FitResult."""
    est = CoupledSpectrumFitter(resonator=fixed, **kwargs)
    if isinstance(trace, ComplexTrace):
        est.fit(trace.frequencies, trace.magnitude if trace.magnitude_only else trace.s11)
    else:
        est.fit(*trace)
    est.result_.estimator = est
    return est.result_
