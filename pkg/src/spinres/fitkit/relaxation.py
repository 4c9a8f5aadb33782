"""Saturation-recovery (T1) and stretched Hahn-echo (T2) fits."""

import numpy as np

from ..pulse import echo_decay_model, saturation_recovery_model
from ..validation import check_xy
from .base import BaseFitter
from .lm import FitProblem, Parameter


class SaturationRecoveryFitter(BaseFitter):
    """Fit ``amplitude * (1 - exp(-T / t1))`` to recovery data."""

    def _model(self, X, v):
        return saturation_recovery_model(X, v["t1"], v["amplitude"])

    def fit(self, X, y):
        t, y = check_xy(X, y, complex_ok=False, name="delays")
        n = max(3, t.size // 10)
        amp = float(np.mean(y[-n:])) or float(np.max(y))
        frac = np.clip(y / amp, 0, 1)
        crossing = np.nonzero(frac >= 1 - np.exp(-1))[0]
        t1 = float(t[crossing[0]]) if crossing.size else float(t[-1])
        t1 = t1 or float(t[t > 0][0])
        params = [
            Parameter("t1", t1, 1e-6 * t1, np.inf, unit="s", scale=t1),
            Parameter("amplitude", amp, -np.inf, np.inf, scale=abs(amp)),
        ]
        self._solve(FitProblem(lambda v: self._model(t, v), params, y, name="t1-recovery"))
        self.t1_ = self.params_["t1"]
        self.amplitude_ = self.params_["amplitude"]
        return self


class EchoDecayFitter(BaseFitter):
    """Fit ``amplitude * exp(-(2 tau / t2) ** p)`` to echo amplitudes.

    The starting point comes from a straight-line fit of
    ``log(-log(y / amplitude))`` against ``log(2 tau)``.
    """

    def __init__(self, p_bounds=(0.5, 3.0)):
        self.p_bounds = p_bounds

    def _model(self, X, v):
        return echo_decay_model(X, v["t2"], v["p"], v["amplitude"])

    def fit(self, X, y):
        t, y = check_xy(X, y, complex_ok=False, name="echo delays")
        amp = float(np.max(y))
        frac = y / amp
        use = (frac > 0.05) & (frac < 0.95) & (t > 0)
        p_lo, p_hi = self.p_bounds
        if use.sum() >= 2:
            slope, icpt = np.polyfit(np.log(t[use]), np.log(-np.log(frac[use])), 1)
            p = float(np.clip(slope, p_lo, p_hi))
            t2 = float(np.exp(-icpt / slope)) if slope > 0 else float(np.median(t[use]))
        else:
            p, t2 = 1.0, float(np.median(t[t > 0]))
        params = [
            Parameter("t2", t2, 1e-6 * t2, np.inf, unit="s", scale=t2),
            Parameter("p", p, p_lo, p_hi, scale=1.0),
            Parameter("amplitude", amp, 0.0, np.inf, scale=abs(amp)),
        ]
        self._solve(FitProblem(lambda v: self._model(t, v), params, y, name="t2-stretched"))
        self.t2_ = self.params_["t2"]
        self.p_ = self.params_["p"]
        self.amplitude_ = self.params_["amplitude"]
        return self


def fit_saturation_recovery(delays, signal):
    est = SaturationRecoveryFitter().fit(delays, signal)
    est.result_.estimator = est
    return est.result_


def fit_echo_decay(two_tau, signal, **kwargs):
    est = EchoDecayFitter(**kwargs).fit(two_tau, signal)
    est.result_.estimator = est
    return est.result_
