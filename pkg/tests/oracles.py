"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical kernels: the spin Hamiltonian is
built element by element from explicit Kronecker products with hard-coded
spin-1/2 and spin-1 matrices, eigenvalues come from a cyclic Jacobi sweep on
the real symmetric embedding of the Hermitian matrix, and susceptibilities are
computed by direct quadrature.
"""

import numpy as np
from scipy import integrate

MU_B_HZ_PER_T = 13.9962449171e9  # Bohr magneton / h, CODATA 2022

SX_HALF = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
SY_HALF = np.array([[0, -0.5j], [0.5j, 0]], dtype=complex)
SZ_HALF = np.array([[0.5, 0], [0, -0.5]], dtype=complex)
_r = 1 / np.sqrt(2)
IX_ONE = np.array([[0, _r, 0], [_r, 0, _r], [0, _r, 0]], dtype=complex)
IY_ONE = np.array([[0, -1j * _r, 0], [1j * _r, 0, -1j * _r], [0, 1j * _r, 0]], dtype=complex)
IZ_ONE = np.diag([1.0, 0.0, -1.0]).astype(complex)


def p1_hamiltonian(field_T, direction, axis, g=2.0024, a_perp=114.03e6, a_par=81.33e6):
    """S = 1/2, I = 1 Hamiltonian in Hz from explicit Kronecker products."""
    b = np.asarray(direction, float) / np.linalg.norm(direction)
    n = np.asarray(axis, float) / np.linalg.norm(axis)
    S = [np.kron(s, np.eye(3)) for s in (SX_HALF, SY_HALF, SZ_HALF)]
    I = [np.kron(np.eye(2), i) for i in (IX_ONE, IY_ONE, IZ_ONE)]
    H = np.zeros((6, 6), dtype=complex)
    for k in range(3):
        H += g * MU_B_HZ_PER_T * field_T * b[k] * S[k]
    A = a_perp * np.eye(3) + (a_par - a_perp) * np.outer(n, n)
    for j in range(3):
        for k in range(3):
            H += A[j, k] * S[j] @ I[k]
    return H


def jacobi_eigvalsh(H, tol=1e-14, max_sweeps=100):
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.

    The n x n Hermitian matrix is embedded as the 2n x 2n real symmetric
    matrix [[Re, -Im], [Im, Re]], whose spectrum is that of ``H`` with every
    eigenvalue doubled; one copy of each pair is returned.
    """
    H = np.asarray(H, dtype=complex)
    A = np.block([[H.real, -H.imag], [H.imag, H.real]]).astype(float)
    m = A.shape[0]
    scale = np.max(np.abs(A)) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A ** 2) - np.sum(np.diag(A) ** 2), 0.0))
        if off < tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta ** 2 + 1)) if theta else 1.0
                c = 1 / np.sqrt(t ** 2 + 1)
                s = t * c
                R = np.eye(m)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
    ev = np.sort(np.diag(A))
    return ev[::2]


def lorentzian_w_quad(omega, g, center, fwhm):
    """g^2 * integral rho(x) / (i (omega - x)) dx for Lorentzian rho by quadrature.

    The kernel has a simple pole on the real axis; its real part is a
    delta-function contribution pi * rho(omega) and its imaginary part a
    principal value, computed here with the Cauchy weight.
    """
    hw = fwhm / 2

    def rho(x):
        return hw / np.pi / ((x - center) ** 2 + hw ** 2)

    span = 400 * fwhm
    pv, _ = integrate.quad(rho, center - span, center + span, weight="cauchy", wvar=omega,
                           limit=2000, epsabs=0, epsrel=1e-12)
    # tails beyond the span, where the integrand is smooth
    tail_lo, _ = integrate.quad(lambda x: rho(x) / (x - omega), -np.inf, center - span)
    tail_hi, _ = integrate.quad(lambda x: rho(x) / (x - omega), center + span, np.inf)
    # 1/(i(w - x)) = -i/(w - x) = i/(x - w): real part from the pole, imaginary from PV
    return g ** 2 * (np.pi * rho(omega) + 1j * (pv + tail_lo + tail_hi))


def hilbert_imag_from_real(re_func, omega, center, width, n_widths=400):
    """Kramers-Kronig partner: Im W(omega) = (1/pi) PV integral Re W(x) / (x - omega) dx.

    Only valid when Re W is negligible beyond ``n_widths`` widths of ``center``.
    """
    span = n_widths * width
    pv, _ = integrate.quad(re_func, center - span, center + span, weight="cauchy", wvar=omega,
                           limit=4000, epsabs=0, epsrel=1e-11)
    return pv / np.pi


def ols_sigmas(X, y):
    """Closed-form linear-regression standard errors."""
    X = np.asarray(X, float)
    beta, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = X.shape[0] - X.shape[1]
    s2 = float(np.sum((y - X @ beta) ** 2)) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return beta, np.sqrt(np.diag(cov))


def bloch_ode(m0, rabi, phase, detuning, t1, t2, duration, m_eq=1.0):
    """Integrate the rotating-frame Bloch equations with an adaptive ODE solver."""
    w = 2 * np.pi * np.array([rabi * np.cos(phase), rabi * np.sin(phase), detuning])

    def rhs(_, m):
        d = np.cross(w, m)
        d[0] -= m[0] / t2
        d[1] -= m[1] / t2
        d[2] -= (m[2] - m_eq) / t1
        return d

    sol = integrate.solve_ivp(rhs, (0, duration), np.asarray(m0, float), method="DOP853",
                              rtol=1e-11, atol=1e-12)
    return sol.y[:, -1]
