"""Ensemble coupling from the dip ridges of a field-swept reflection map."""

import warnings

import numpy as np

from .._parallel import ordered_map
from ..cavity import EnsembleParams, ResonatorParams, ensemble_susceptibility, normal_modes
from ..exceptions import DomainError, InsufficientDataError
from .base import BaseFitter, edge_noise, find_dips
from .lm import FitProblem, Parameter

MIN_COLUMNS = 5
N_SCAN = 41
MIN_DIP_WIDTH = 3  # samples
# noise minima in a ~1e3-sample column reach ~7 sigma prominence
NOISE_PROMINENCE = 10


def _column_dips(args):
    f, col, min_prominence = args
    prom = min_prominence
    if prom is None:
        prom = max(NOISE_PROMINENCE * edge_noise(col), 1e-3 * np.ptp(col))
    return find_dips(f, col, prom, min_width=MIN_DIP_WIDTH)[0]


class AvoidedCrossingFitter(BaseFitter):
    """Fit ensemble couplings to the dip frequencies of a field sweep.

    Each map column is searched for dips; every dip is assigned to the
    nearest predicted branch at the starting parameters, and the couplings
    (optionally with a field-calibration offset) are fitted so that the
    predicted branches pass through the assigned dips.  The assignment is
    refreshed with the fitted parameters and the fit repeated until it no
    longer changes (at most three passes).

    Parameters
    ----------
    spin_model : callable
        ``fields -> (n_fields, n_modes)`` spin frequencies in Hz.  A
        ``labels`` attribute, if present, names the modes.
    resonator : ResonatorParams or float, optional
        Bare resonator (or just its frequency).  Estimated from far-detuned
        columns when omitted.
    gammas : float or sequence, optional
        Inhomogeneous FWHM per spin mode in Hz.
    g_init : float or sequence, optional
        Starting couplings; by default half the dip splitting nearest each
        crossing.
    fit_field_offset : bool
        Also fit a constant offset added to the map's field axis.
    branch_model : {"auto", "dressed", "lineshape"}
        ``"dressed"`` compares dips with the undamped normal modes.
        ``"lineshape"`` compares them with the minima of the model |S11|,
        which accounts for the pull of broad lines on the observed dips and
        needs ``resonator`` with linewidths and ``gammas``.  ``"auto"``
        picks ``"lineshape"`` when those are available.
    lineshape : {"lorentzian", "gaussian"}
        Spin line shape used by the ``"lineshape"`` branch model.
    min_prominence : float, optional
        Dip prominence threshold in linear |S11|; by default
        ``max(10 sigma, 1e-3 ptp)`` per column.
    """

    def __init__(self, spin_model=None, resonator=None, gammas=None, g_init=None,
                 fit_field_offset=False, branch_model="auto", lineshape="lorentzian",
                 min_prominence=None):
        self.spin_model = spin_model
        self.resonator = resonator
        self.gammas = gammas
        self.g_init = g_init
        self.fit_field_offset = fit_field_offset
        self.branch_model = branch_model
        self.lineshape = lineshape
        self.min_prominence = min_prominence

    # -- branch predictions -------------------------------------------------

    def _spin(self, fields, offset=0.0):
        s = np.asarray(self.spin_model(np.asarray(fields, float) + offset), dtype=float)
        return s.reshape(np.size(fields), -1)

    def _branches(self, spin, g):
        """Predicted dip frequencies, shape ``(n_fields, n_modes + 1)``, relative to omega_r."""
        det = np.nan_to_num(spin - self.omega_r_, nan=1e12)
        g = np.broadcast_to(np.asarray(g, float), det.shape[-1:])
        if self.branch_model_ == "dressed":
            return normal_modes(0.0, det, np.abs(g))
        start = normal_modes(0.0, det, np.abs(g), self.kappa_tot_, self.gammas_)
        return self._lineshape_minima(det, np.abs(g), start)

    def _reflection_power(self, f, det, g):
        """|S11|^2 (up to scale) at offsets ``f`` (..., k) for columns with spin offsets ``det``."""
        W = np.zeros(f.shape, dtype=complex)
        for m in range(det.shape[-1]):
            if g[m] == 0:
                continue
            delta = f - det[:, m].reshape((-1,) + (1,) * (f.ndim - 1))
            W += g[m] ** 2 * ensemble_susceptibility(delta, self._kernels[m])
        d = 1j * f + self.kappa_tot_ / 2 + W
        return np.abs(1 - self.kappa_ext_ / d) ** 2

    def _lineshape_minima(self, det, g, start):
        n_b = start.shape[1]
        reach = 3 * max(float(np.max(g, initial=0.0)), self.kappa_tot_, float(np.max(self.gammas_)))
        mid = (start[:, 1:] + start[:, :-1]) / 2
        lo = np.concatenate([start[:, :1] - reach, mid], axis=1)
        hi = np.concatenate([mid, start[:, -1:] + reach], axis=1)
        lo = np.maximum(lo, start - reach)
        hi = np.minimum(hi, start + reach)
        u = np.linspace(0, 1, N_SCAN)
        grid = lo[..., None] + (hi - lo)[..., None] * u
        F = self._reflection_power(grid, det, g)
        k = np.argmax(-F, axis=-1)
        interior = (k > 0) & (k < N_SCAN - 1)
        x = np.take_along_axis(grid, k[..., None], axis=-1)[..., 0]
        # second, finer scan so the Newton start lies inside the convex core of the dip
        spacing = (hi - lo) / (N_SCAN - 1)
        grid = x[..., None] + spacing[..., None] * (2 * u - 1)
        F = self._reflection_power(grid, det, g)
        x = np.take_along_axis(grid, np.argmin(F, axis=-1)[..., None], axis=-1)[..., 0]
        spacing = spacing * 2 / (N_SCAN - 1)
        h = self._h
        for _ in range(60):
            pts = x[..., None] + np.array([-h, 0.0, h])
            Fp = self._reflection_power(pts, det, g)
            curv = Fp[..., 2] - 2 * Fp[..., 1] + Fp[..., 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(curv > 0, -h * (Fp[..., 2] - Fp[..., 0]) / (2 * curv), 0.0)
            step = np.clip(np.nan_to_num(step), -spacing, spacing)
            x = x + np.where(interior, step, 0.0)
            if np.max(np.abs(step[interior]), initial=0.0) < 1e-6:
                break
        # no dip predicted for this branch: fall back to the mode frequency
        return np.where(interior, x, start) if n_b else start

    # -- fitting ----------------------------------------------------------------

    def _setup_resonator(self, fields, f, mag, dips):
        res = self.resonator
        if isinstance(res, ResonatorParams):
            self.omega_r_ = res.omega_r
            self.kappa_tot_ = res.kappa_tot
            self.kappa_ext_ = res.kappa_ext
            return
        self.kappa_tot_ = self.kappa_ext_ = 0.0
        if res is not None:
            self.omega_r_ = float(res)
            return
        # deepest dip of the columns farthest from every spin line
        deepest = np.array([f[np.argmin(c)] for c in mag])
        guess = np.median(deepest)
        spin = self._spin(fields)
        offset = np.nan_to_num(spin - guess, nan=np.inf)
        nearest = offset[np.arange(fields.size), np.argmin(np.abs(offset), axis=1)]
        far = np.abs(nearest)
        n = max(1, fields.size // 5)
        picked = np.argsort(far)[::-1][:n]
        # dispersive pulls from spin lines above and below have opposite signs,
        # so average the two sides when both are present
        sides = [picked[nearest[picked] > 0], picked[nearest[picked] < 0]]
        per_side = [np.median(deepest[s]) for s in sides if s.size]
        self.omega_r_ = float(np.mean(per_side))

    def _initial_g(self, fields, dips, n_modes):
        if self.g_init is not None:
            return np.broadcast_to(np.asarray(self.g_init, float), (n_modes,)).copy()
        spin = self._spin(fields) - self.omega_r_
        g0 = np.empty(n_modes)
        floor = max(self.kappa_tot_, 1e-6 * self.omega_r_)
        for m in range(n_modes):
            col = int(np.nanargmin(np.abs(np.nan_to_num(spin[:, m], nan=np.inf))))
            d = np.sort(dips[col] - self.omega_r_)
            below, above = d[d <= spin[col, m]], d[d > spin[col, m]]
            if below.size and above.size:
                g0[m] = max((above[0] - below[-1]) / 2, floor)
            else:
                g0[m] = floor
        return g0

    def _assign(self, pred, dips, usable, gate):
        rows, branches, obs = [], [], []
        for i in np.nonzero(usable)[0]:
            d = dips[i] - self.omega_r_
            dist = np.abs(d[:, None] - pred[i][None, :])
            nearest = np.argmin(dist, axis=1)
            for j in np.unique(nearest):
                cand = np.nonzero(nearest == j)[0]
                best = cand[np.argmin(dist[cand, j])]
                if dist[best, j] <= gate:
                    rows.append(i)
                    branches.append(j)
                    obs.append(d[best])
        return np.array(rows, int), np.array(branches, int), np.array(obs)

    def fit(self, X, y=None):
        """Fit to a :class:`~spinres.sweep.FieldSweepMap` ``X`` (``y`` is ignored)."""
        if self.spin_model is None:
            raise DomainError("spin_model is required")
        fields = np.asarray(X.fields, dtype=float)
        f = np.asarray(X.frequencies, dtype=float)
        mag = X.to_linear()
        dips = ordered_map(_column_dips, [(f, col, self.min_prominence) for col in mag])
        usable = np.array([d.size > 0 for d in dips])
        if usable.sum() < MIN_COLUMNS:
            raise InsufficientDataError(
                f"dips found in only {int(usable.sum())} of {fields.size} columns (need {MIN_COLUMNS})")
        if usable.mean() < 0.5:
            warnings.warn(f"dip extraction succeeded on only {usable.mean():.0%} of columns", stacklevel=2)

        self._setup_resonator(fields, f, mag, dips)
        n_modes = self._spin(fields[:1]).shape[1]
        labels = list(getattr(self.spin_model, "labels", range(n_modes)))
        self.gammas_ = None if self.gammas is None else np.broadcast_to(
            np.asarray(self.gammas, float), (n_modes,)).copy()
        model = self.branch_model
        if model == "auto":
            model = "lineshape" if self.gammas_ is not None and self.kappa_tot_ > 0 else "dressed"
        if model == "lineshape" and (self.gammas_ is None or self.kappa_tot_ == 0):
            raise DomainError("the lineshape branch model needs resonator linewidths and gammas")
        if model not in ("dressed", "lineshape"):
            raise DomainError(f"unknown branch_model {model!r}")
        self.branch_model_ = model
        if model == "lineshape":
            self._kernels = [EnsembleParams(1.0, 0.0, gm, self.lineshape) for gm in self.gammas_]

        g0 = self._initial_g(fields, dips, n_modes)
        scale = max(float(np.max(g0)), self.kappa_tot_, 1e-6 * self.omega_r_)
        self._h = 1e-3 * max(scale, float(np.max(self.gammas_, initial=0.0)) if self.gammas_ is not None else scale)
        span = f[-1] - f[0]
        gate = 3 * max(scale, self.kappa_tot_,
                       float(np.max(self.gammas_)) if self.gammas_ is not None else 0.0)
        names = ["g_ens"] if n_modes == 1 else [f"g_ens[{lab}]" for lab in labels]
        self.names_ = names

        def build(values):
            g = np.array([values[n] for n in names])
            offset = values.get("field_offset", 0.0)
            spin = self._spin(fields, offset) if offset else spin0
            return self._branches(spin, g)

        spin0 = self._spin(fields)
        values = {n: float(v) for n, v in zip(names, g0)}
        if self.fit_field_offset:
            values["field_offset"] = 0.0
        assignment = None
        for _ in range(3):
            pred = build(values)
            rows, branches, obs = self._assign(pred, dips, usable, gate)
            if rows.size == 0:
                raise InsufficientDataError("no dips could be assigned to a branch")
            key = (rows.tobytes(), branches.tobytes())
            if key == assignment:
                break
            assignment = key
            params = [Parameter(n, values[n], 0.0, span, unit="Hz", scale=scale) for n in names]
            if self.fit_field_offset:
                b_span = fields[-1] - fields[0] if fields.size > 1 else 1e-3
                params.append(Parameter("field_offset", values["field_offset"], -b_span, b_span,
                                        unit="T", scale=max(b_span / 100, 1e-6)))
            problem = FitProblem(lambda v: build(v)[rows, branches], params, obs, name="dressed-crossing")
            result = self._solve(problem)
            values = result.as_dict()
        self.rows_, self.branches_, self.observed_ = rows, branches, obs + self.omega_r_
        self.usable_fraction_ = float(usable.mean())
        self.g_ens_ = np.array([values[n] for n in names])
        for n in names:
            result.derived["min_splitting" + n[len("g_ens"):]] = (2 * values[n], 2 * result.sigma(n), "Hz")
        result.derived["omega_r"] = (self.omega_r_, 0.0, "Hz")
        return self

    def _model(self, X, values):
        g = np.array([values[n] for n in self.names_])
        spin = self._spin(X, values.get("field_offset", 0.0))
        return self._branches(spin, g) + self.omega_r_


def fit_avoided_crossing(sweep_map, spin_model, **kwargs):
    """Fit ensemble couplings to ``sweep_map``; returns a FitResult (``.estimator`` attached)."""
    est = AvoidedCrossingFitter(spin_model=spin_model, **kwargs).fit(sweep_map)
    est.result_.estimator = est
    return est.result_
