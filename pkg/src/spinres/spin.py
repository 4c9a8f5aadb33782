"""Spin Hamiltonians and ESR transitions.

The Hamiltonian of an electron spin S = 1/2 coupled to a nuclear spin I is

    H / h = (g mu_B / h) B . S + S . A . I

with an axially symmetric hyperfine tensor A = diag(A_perp, A_perp, A_par) in
the defect frame.  Energies are returned as ordinary frequencies (Hz).  The
nuclear Zeeman and quadrupole terms are omitted.

Transition labels follow the high-field product basis: allowed
(nuclear-spin-conserving) lines carry their nuclear projection ``m_I``;
``I = 0`` systems give a single ``"electron"`` line.  Weak lines that survive
the matrix-element threshold are tagged ``"forbidden"`` (Delta m_I != 0) or
``"nuclear"`` (Delta m_S = 0).
"""

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from .exceptions import DomainError, NotFoundError
from .validation import check_positive, check_unit_vector, normalize

MU_B_OVER_H = constants.physical_constants["Bohr magneton in Hz/T"][0]

G_P1 = 2.0024
G_DPPH = 2.0036
P1_A_PERP = 114.03e6
P1_A_PAR = 81.33e6

AXES_111 = tuple(
    normalize(v) for v in ([1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1])
)


def spin_operators(s):
    """Return (Sx, Sy, Sz) for spin quantum number ``s`` in the |m> basis, m descending."""
    s = float(s)
    m = np.arange(s, -s - 1, -1)
    dim = m.size
    sz = np.diag(m).astype(complex)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    sp = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        sp[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sm = sp.conj().T
    return (sp + sm) / 2, (sp - sm) / 2j, sz


@dataclass(frozen=True)
class SpinSystem:
    """Electron spin 1/2 with an optional axially symmetric hyperfine partner.

    Hyperfine constants are ordinary frequencies in Hz (A / 2pi).
    """

    g_factor: float = G_P1
    nuclear_spin: float = 0.0
    hyperfine_perp: float = 0.0
    hyperfine_par: float = 0.0
    symmetry_axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        check_positive(self.g_factor, "g_factor")
        if float(self.nuclear_spin) not in (0.0, 0.5, 1.0):
            raise DomainError(f"nuclear_spin must be 0, 1/2 or 1, got {self.nuclear_spin}")
        check_positive(self.hyperfine_perp, "hyperfine_perp", allow_zero=True)
        check_positive(self.hyperfine_par, "hyperfine_par", allow_zero=True)
        axis = check_unit_vector(self.symmetry_axis, "symmetry_axis")
        object.__setattr__(self, "symmetry_axis", tuple(float(a) for a in axis))

    @classmethod
    def p1(cls, axis=AXES_111[0], g_factor=G_P1, hyperfine_perp=P1_A_PERP,
           hyperfine_par=P1_A_PAR):
        """Substitutional nitrogen (P1) in diamond, S = 1/2 coupled to 14N."""
        return cls(g_factor, 1.0, hyperfine_perp, hyperfine_par, tuple(axis))

    @classmethod
    def dpph(cls, g_factor=G_DPPH):
        return cls(g_factor=g_factor)

    @property
    def dimension(self):
        return int(2 * (2 * self.nuclear_spin + 1))

    @property
    def gamma(self):
        """Electron gyromagnetic ratio in Hz/T."""
        return self.g_factor * MU_B_OVER_H

    def hyperfine_tensor(self):
        """3x3 hyperfine tensor (Hz) in the crystal frame."""
        n = np.asarray(self.symmetry_axis)
        return self.hyperfine_perp * np.eye(3) + (self.hyperfine_par - self.hyperfine_perp) * np.outer(n, n)

    def effective_hyperfine(self, direction):
        """First-order hyperfine splitting sqrt(A_par^2 cos^2 + A_perp^2 sin^2) for a field direction."""
        b = check_unit_vector(direction, "direction")
        cos2 = float(np.dot(b, self.symmetry_axis)) ** 2
        return float(np.sqrt(self.hyperfine_par ** 2 * cos2 + self.hyperfine_perp ** 2 * (1 - cos2)))


@dataclass(frozen=True)
class FieldPoint:
    magnitude: float
    direction: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise DomainError(f"field magnitude must be >= 0, got {self.magnitude}")
        d = check_unit_vector(self.direction, "field direction")
        object.__setattr__(self, "direction", tuple(float(a) for a in d))

    @property
    def vector(self):
        return self.magnitude * np.asarray(self.direction)


@dataclass(frozen=True)
class Transition:
    frequency: float
    matrix_element: float
    label: object
    upper: int
    lower: int


@dataclass
class TransitionSet:
    transitions: list = field(default_factory=list)
    ambiguous: bool = False

    def __iter__(self):
        return iter(self.transitions)

    def __len__(self):
        return len(self.transitions)

    @property
    def frequencies(self):
        return np.array([t.frequency for t in self.transitions])

    @property
    def labels(self):
        return [t.label for t in self.transitions]

    def allowed(self):
        """Nuclear-spin-conserving (or free-electron) lines, sorted by frequency."""
        keep = [t for t in self.transitions if t.label not in ("forbidden", "nuclear")]
        return sorted(keep, key=lambda t: t.frequency)

    def strong(self, min_element=0.5):
        return [t for t in self.transitions if t.matrix_element >= min_element]

    def by_label(self, label):
        for t in self.transitions:
            if t.label == label:
                return t
        raise NotFoundError(f"no transition labelled {label!r}")


def zeeman_transition(g_factor, field):
    """Free-spin resonance frequency g mu_B B / h in Hz."""
    if field < 0:
        raise DomainError(f"field must be >= 0, got {field}")
    return g_factor * MU_B_OVER_H * field


def _operators(system):
    s_ops = spin_operators(0.5)
    i_ops = spin_operators(system.nuclear_spin)
    ni = i_ops[0].shape[0]
    S = [np.kron(op, np.eye(ni)) for op in s_ops]
    I = [np.kron(np.eye(2), op) for op in i_ops]
    return S, I


def build_hamiltonian(system, field):
    """Hamiltonian H/h in Hz on the product basis |m_S> x |m_I> (m descending)."""
    S, I = _operators(system)
    b = field.vector
    H = system.gamma * sum(b[k] * S[k] for k in range(3))
    if system.nuclear_spin:
        A = system.hyperfine_tensor()
        for i in range(3):
            for j in range(3):
                if A[i, j]:
                    H = H + A[i, j] * (S[i] @ I[j])
    return (H + H.conj().T) / 2


def _assign_labels(system, vecs, vals, direction):
    """Return (manifold sign, m_I label) per eigenstate and an ambiguity flag."""
    S, _ = _operators(system)
    sb = sum(direction[k] * S[k] for k in range(3))
    proj = np.real(np.einsum("ij,ik,kj->j", vecs.conj(), sb, vecs))
    nI = int(2 * system.nuclear_spin + 1)
    upper = proj > 0
    ambiguous = bool(np.any(np.abs(proj) < 0.25)) or int(upper.sum()) != nI
    if np.any(np.diff(np.sort(vals)) < 1.0):
        ambiguous = True
    m_values = [Fraction(int(2 * system.nuclear_spin) - 2 * k, 2) for k in range(nI)]
    m_values = sorted(m_values)
    labels = [None] * len(vals)
    for sign in (True, False):
        idx = [k for k in range(len(vals)) if upper[k] == sign]
        idx.sort(key=lambda k: vals[k])
        # upper manifold: energy rises with m_I; lower manifold: energy falls
        order = m_values if sign else m_values[::-1]
        for k, m in zip(idx, order):
            labels[k] = int(m) if m.denominator == 1 else float(m)
    return upper, labels, ambiguous


def transitions(system, field, drive_axis=(1.0, 0.0, 0.0), threshold=1e-3, include_weak=False):
    """Eigen-decompose the Hamiltonian and list ESR transitions.

    Matrix elements are ``2 |<a| S.drive |b>|`` so a free-spin pi transition
    gives 1.  Lines below ``threshold`` are dropped unless ``include_weak``.
    """
    drive = check_unit_vector(drive_axis, "drive_axis")
    direction = np.asarray(field.direction)
    if abs(np.dot(drive, direction)) > 1e-9:
        warnings.warn("drive_axis is not perpendicular to the static field", stacklevel=2)
    H = build_hamiltonian(system, field)
    vals, vecs = np.linalg.eigh(H)
    S, _ = _operators(system)
    sd = sum(drive[k] * S[k] for k in range(3))
    elements = 2 * np.abs(vecs.conj().T @ sd @ vecs)

    if system.nuclear_spin == 0:
        upper = np.array([False, True])
        labels = ["electron", "electron"]
        ambiguous = field.magnitude == 0
    else:
        upper, labels, ambiguous = _assign_labels(system, vecs, vals, direction)

    out = []
    n = len(vals)
    for a in range(n):
        for b in range(a):
            freq = vals[a] - vals[b]
            el = float(min(elements[a, b], 1.0))
            if el < threshold and not include_weak:
                continue
            if upper[a] == upper[b]:
                label = "nuclear"
            else:
                u, l = (a, b) if upper[a] else (b, a)
                label = labels[u] if labels[u] == labels[l] else "forbidden"
            out.append(Transition(float(freq), el, label, a, b))
    out.sort(key=lambda t: t.frequency)
    return TransitionSet(out, ambiguous)


def transition_frequency(system, magnitude, direction, label, drive_axis=None):
    """Frequency (Hz) of the transition ``label`` at field ``magnitude``; NaN if unlabelled."""
    if drive_axis is None:
        drive_axis = perpendicular(direction)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ts = transitions(system, FieldPoint(magnitude, tuple(direction)), drive_axis, threshold=0.0)
    if ts.ambiguous:
        return np.nan
    try:
        return ts.by_label(label).frequency
    except NotFoundError:
        return np.nan


def perpendicular(direction):
    """A unit vector perpendicular to ``direction``."""
    d = normalize(direction)
    trial = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    p = trial - np.dot(trial, d) * d
    return p / np.linalg.norm(p)


def resonance_field(system, target_frequency, direction=(0.0, 0.0, 1.0), label=None,
                    bracket=(0.0, 2.0), n_scan=201):
    """Field (T) at which transition ``label`` crosses ``target_frequency``.

    The bracket is scanned on a coarse grid; the first sign change is refined
    with Brent's method to well below 1 kHz in frequency.
    """
    direction = check_unit_vector(direction, "direction")
    if label is None:
        label = "electron" if system.nuclear_spin == 0 else 0
    if system.nuclear_spin == 0 and label == "electron":
        def f(b):
            return zeeman_transition(system.g_factor, b) - target_frequency
    else:
        def f(b):
            return transition_frequency(system, b, direction, label) - target_frequency
    grid = np.linspace(bracket[0], bracket[1], n_scan)
    vals = np.array([f(b) for b in grid])
    for k in range(n_scan - 1):
        lo, hi = vals[k], vals[k + 1]
        if not (np.isfinite(lo) and np.isfinite(hi)):
            continue
        if lo == 0:
            return float(grid[k])
        if lo * hi < 0:
            root = brentq(f, grid[k], grid[k + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps)
            return float(root)
    if vals[-1] == 0:
        return float(grid[-1])
    raise NotFoundError(
        f"transition {label!r} does not reach {target_frequency:.6g} Hz for fields in {bracket} T"
    )


def transition_function(system, direction=(0.0, 0.0, 1.0), labels=None):
    """Vectorised map ``fields -> (n_fields, n_labels)`` of transition frequencies in Hz.

    Useful as the spin model of an avoided-crossing fit.
    """
    direction = tuple(check_unit_vector(direction, "direction"))
    if labels is None:
        labels = ["electron"] if system.nuclear_spin == 0 else [
            int(m) if float(m).is_integer() else float(m)
            for m in np.arange(system.nuclear_spin, -system.nuclear_spin - 1, -1)
        ]
    labels = list(labels)

    def model(fields):
        fields = np.atleast_1d(np.asarray(fields, dtype=float))
        if system.nuclear_spin == 0:
            return (system.gamma * fields)[:, None] * np.ones(len(labels))
        out = np.empty((fields.size, len(labels)))
        for i, b in enumerate(fields):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ts = transitions(system, FieldPoint(max(b, 0.0), direction),
                                 perpendicular(direction), threshold=0.0)
            for j, lab in enumerate(labels):
                try:
                    out[i, j] = ts.by_label(lab).frequency
                except NotFoundError:
                    out[i, j] = np.nan
        return out

    model.labels = labels
    return model
