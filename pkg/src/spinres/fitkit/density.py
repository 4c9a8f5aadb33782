"""Lorentzian fit of a recovered spin-density profile."""

import numpy as np
from scipy.integrate import trapezoid

from ..validation import check_xy
from .base import BaseFitter
from .lm import FitProblem, Parameter


def lorentzian_density(f, area, center, fwhm):
    hw = fwhm / 2
    return area * hw / np.pi / ((f - center) ** 2 + hw ** 2)


class LorentzianDensityFitter(BaseFitter):
    """Fit ``area * L(f; center, fwhm)`` to a density profile; NaN samples are ignored."""

    def _model(self, X, v):
        return lorentzian_density(X, v["area"], v["center"], v["fwhm"])

    def fit(self, X, y):
        f = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y)
        f, y = check_xy(f[ok], y[ok])
        area = float(trapezoid(y, f))
        i0 = int(np.argmax(y))
        above = np.nonzero(y >= y[i0] / 2)[0]
        fwhm = float(f[above[-1]] - f[above[0]]) or float(f[1] - f[0])
        span = f[-1] - f[0]
        params = [
            Parameter("area", area, 0.0, np.inf, scale=abs(area) or 1.0),
            Parameter("center", f[i0], f[0], f[-1], unit="Hz", scale=fwhm),
            Parameter("fwhm", fwhm, 1e-9 * fwhm, 10 * span, unit="Hz", scale=fwhm),
        ]
        self._solve(FitProblem(lambda v: self._model(f, v), params, y, name="lorentzian-density"))
        self.area_ = self.params_["area"]
        self.center_ = self.params_["center"]
        self.fwhm_ = self.params_["fwhm"]
        return self
