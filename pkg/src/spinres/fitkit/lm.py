"""Bounded Levenberg-Marquardt least squares.

Damped Gauss-Newton with Marquardt's diagonal scaling, a central-difference
Jacobian and bound handling by projection.  Parameters sitting on a bound
whose unconstrained step points outward are frozen for that iteration
(active set).  Only steps that lower the cost are accepted, so the recorded
cost history is non-increasing.
"""

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DomainError, FitError

XTOL = 1e-10
FTOL = 1e-12
MAX_ITER = 500
FD_STEP = 1e-6


@dataclass
class Parameter:
    name: str
    value: float
    lower: float = -np.inf
    upper: float = np.inf
    fixed: bool = False
    unit: str = ""
    scale: float = None

    def __post_init__(self):
        self.value = float(self.value)
        if not self.lower <= self.upper:
            raise DomainError(f"{self.name}: bounds out of order ({self.lower} > {self.upper})")
        if not self.lower <= self.value <= self.upper:
            raise DomainError(
                f"{self.name}: initial value {self.value} outside [{self.lower}, {self.upper}]"
            )
        if self.scale is None:
            self.scale = abs(self.value) if self.value else 1.0


@dataclass
class FitProblem:
    """A model, its parameters and the data it is fitted to.

    ``model(values)`` receives a dict of all parameter values (fixed ones
    included) and returns an array shaped like ``data``; complex outputs are
    fitted on real and imaginary parts.
    """

    model: object
    parameters: list
    data: np.ndarray
    sigma: object = None
    name: str = "custom"

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.size == 0:
            raise DomainError("dataset is empty")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise DomainError("parameter names must be unique")
        if not any(not p.fixed for p in self.parameters):
            raise DomainError("at least one parameter must be free")
        if self.sigma is not None:
            s = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.data.shape)
            if np.any(s <= 0):
                raise DomainError("sigma must be positive")
            self.sigma = s

    def residuals(self, values):
        pred = np.asarray(self.model(values))
        if not np.all(np.isfinite(pred)):
            raise FitError(f"model returned non-finite values at parameters {values}")
        r = pred - self.data
        if self.sigma is not None:
            r = r / self.sigma
        r = r.ravel()
        if np.iscomplexobj(r):
            r = np.concatenate([r.real, r.imag])
        return r


@dataclass
class FitResult:
    names: list
    values: np.ndarray
    sigmas: np.ndarray
    residual_rss: float
    n_iter: int
    converged: bool
    status: str
    covariance: np.ndarray
    correlation: np.ndarray
    free: list
    units: dict = field(default_factory=dict)
    cost_history: list = field(default_factory=list)
    n_data: int = 0
    model: str = "custom"
    derived: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def sigma(self, name):
        return self.sigmas[self.names.index(name)]

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def report(self):
        """Parameter table (fitted and derived) in the machine-readable report layout."""
        table = {
            n: {"value": float(v), "sigma": float(s), "unit": self.units.get(n, "")}
            for n, v, s in zip(self.names, self.values, self.sigmas)
        }
        for n, (v, s, unit) in self.derived.items():
            table[n] = {"value": float(v), "sigma": float(s), "unit": unit}
        return table


def _jacobian(problem, values, free_idx, names, r0):
    J = np.empty((r0.size, len(free_idx)))
    for col, i in enumerate(free_idx):
        p = problem.parameters[i]
        h = FD_STEP * max(abs(values[i]), p.scale)
        up, dn = values.copy(), values.copy()
        up[i] += h
        dn[i] -= h
        # keep stencil inside the bounds; fall back to one-sided differences
        if up[i] > p.upper:
            up[i] = values[i]
        if dn[i] < p.lower:
            dn[i] = values[i]
        rp = problem.residuals(dict(zip(names, up)))
        rm = problem.residuals(dict(zip(names, dn)))
        J[:, col] = (rp - rm) / (up[i] - dn[i])
    return J


def least_squares(problem, max_iter=MAX_ITER, xtol=XTOL, ftol=FTOL, damping=1e-3):
    """Minimise the sum of squared (weighted) residuals of ``problem``."""
    params = problem.parameters
    names = [p.name for p in params]
    values = np.array([p.value for p in params], dtype=float)
    lower = np.array([p.lower for p in params])
    upper = np.array([p.upper for p in params])
    free_idx = [i for i, p in enumerate(params) if not p.fixed]
    scales = np.array([params[i].scale for i in free_idx])

    r = problem.residuals(dict(zip(names, values)))
    cost = float(r @ r)
    history = [cost]
    J = _jacobian(problem, values, free_idx, names, r)
    lam = damping
    status = "max_iter"
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if cost == 0.0:
            status = "converged: zero residual"
            break
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        x_free = values[free_idx]
        lo_f, hi_f = lower[free_idx], upper[free_idx]
        accepted = False
        while lam < 1e16:
            active = np.zeros(len(free_idx), dtype=bool)
            for _ in range(len(free_idx) + 1):
                step = np.zeros(len(free_idx))
                keep = ~active
                if not keep.any():
                    break
                # solve in unit-diagonal variables so mixed parameter units stay well conditioned
                dk = np.sqrt(diag[keep])
                M = A[np.ix_(keep, keep)] / np.outer(dk, dk) + lam * np.eye(dk.size)
                step[keep] = np.linalg.lstsq(M, -g[keep] / dk, rcond=None)[0] / dk
                outward = ((x_free <= lo_f) & (step < 0)) | ((x_free >= hi_f) & (step > 0))
                if not np.any(outward & ~active):
                    break
                active |= outward
            trial = values.copy()
            trial[free_idx] = np.clip(x_free + step, lo_f, hi_f)
            r_new = problem.residuals(dict(zip(names, trial)))
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            status = "converged: no further decrease"
            break
        dx = trial[free_idx] - x_free
        rel_step = np.max(np.abs(dx) / np.maximum(np.abs(x_free), scales))
        rel_cost = (cost - cost_new) / cost
        values, r, cost = trial, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if rel_step < xtol:
            status = "converged: relative step"
            break
        if rel_cost < ftol:
            status = "converged: relative cost change"
            break
        J = _jacobian(problem, values, free_idx, names, r)

    J = _jacobian(problem, values, free_idx, names, r)
    m, n = J.shape
    dof = m - n
    s2 = cost / dof if dof > 0 else 1.0
    A = J.T @ J
    # conditioning is judged on the unit-diagonal form so parameter units do not matter
    d = np.sqrt(np.diag(A))
    degenerate = bool(np.any(d == 0))
    if not degenerate:
        As = A / np.outer(d, d)
        cond = np.linalg.cond(As)
        degenerate = not np.isfinite(cond) or cond > 1e14
    if degenerate:
        cov_free = np.linalg.pinv(A) * s2
    else:
        cov_free = np.linalg.inv(As) / np.outer(d, d) * s2
    cov = np.zeros((len(params), len(params)))
    cov[np.ix_(free_idx, free_idx)] = cov_free
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sig, sig)
    corr = np.where(np.outer(sig, sig) > 0, corr, 0.0)
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2
    if degenerate:
        status = "degenerate"
    converged = status.startswith("converged")
    return FitResult(
        names=names,
        values=values,
        sigmas=sig,
        residual_rss=cost,
        n_iter=n_iter,
        converged=converged,
        status=status,
        covariance=cov,
        correlation=corr,
        free=[names[i] for i in free_idx],
        units={p.name: p.unit for p in params},
        cost_history=history,
        n_data=m,
        model=problem.name,
    )
