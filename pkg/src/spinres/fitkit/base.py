"""Shared estimator machinery for the spectroscopy fitters."""

import numpy as np
from scipy.signal import find_peaks
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .lm import least_squares


class BaseFitter(BaseEstimator):
    """Least-squares estimator with the scikit-learn ``fit``/``predict`` surface.

    Subclasses implement ``_problem(X, y)`` returning a
    :class:`~spinres.fitkit.lm.FitProblem` and ``_model(X, values)``.
    After ``fit`` the :class:`~spinres.fitkit.lm.FitResult` is ``result_``.
    """

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")

    def _solve(self, problem):
        result = least_squares(problem)
        self.result_ = result
        self.params_ = result.as_dict()
        return result

    def predict(self, X):
        self._check_fitted()
        return self._model(np.asarray(X, dtype=float), self.params_)

    def score(self, X, y):
        """Coefficient of determination of the prediction (complex-aware)."""
        y = np.asarray(y)
        resid = self.predict(X) - y
        ss_res = float(np.sum(np.abs(resid) ** 2))
        ss_tot = float(np.sum(np.abs(y - y.mean()) ** 2))
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else float(ss_res == 0)


def edge_noise(y, fraction=0.05):
    """Noise sigma from the first and last ``fraction`` of samples.

    A straight line is removed from each edge so that smooth background
    slopes are not counted as noise.
    """
    y = np.asarray(y)
    n = max(3, int(round(fraction * y.size)))
    parts = []
    for seg in (y[:n], y[-n:]):
        t = np.arange(seg.size)
        for comp in ((seg.real, seg.imag) if np.iscomplexobj(seg) else (seg,)):
            coef = np.polyfit(t, comp, 1)
            parts.append(comp - np.polyval(coef, t))
    resid = np.concatenate(parts)
    dof = max(resid.size - 2 * len(parts), 1)
    return float(np.sqrt(np.sum(resid ** 2) / dof))


def find_dips(x, mag, min_prominence, max_dips=None, min_width=None):
    """Local minima of ``mag`` refined by parabolic interpolation.

    ``min_width`` (samples, at half prominence) rejects single-sample noise
    minima.  Returns ``(positions, depths, prominences)`` sorted by position.
    """
    mag = np.asarray(mag, dtype=float)
    idx, props = find_peaks(-mag, prominence=min_prominence, width=min_width)
    if idx.size == 0:
        return np.empty(0), np.empty(0), np.empty(0)
    prom = props["prominences"]
    if max_dips is not None and idx.size > max_dips:
        keep = np.sort(np.argsort(prom)[::-1][:max_dips])
        idx, prom = idx[keep], prom[keep]
    pos = x[idx].astype(float)
    depth = mag[idx]
    inner = (idx > 0) & (idx < mag.size - 1)
    i = idx[inner]
    y0, y1, y2 = mag[i - 1], mag[i], mag[i + 1]
    denom = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(denom > 0, 0.5 * (y0 - y2) / denom, 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    # non-uniform grids: interpolate between neighbour spacings
    step = np.where(shift >= 0, x[np.minimum(i + 1, x.size - 1)] - x[i], x[i] - x[i - 1])
    pos[inner] = x[i] + shift * step
    depth[inner] = y1 - 0.25 * (y0 - y2) * shift
    return pos, depth, prom
