"""Numba inner loops for the momentum-ladder backend.

The ladder propagator advances c_n amplitudes with exact sub-exponentials:
kinetic phases are diagonal; the lattice-coupling operator
M(phi) = -(amp) (e^{i phi} S_- + e^{-i phi} S_+) is similarity-equivalent to
the constant tridiagonal Toeplitz matrix -(amp) T1 via D = diag(e^{-i n phi}),
so exp(-i theta M) = D^H V exp(+i theta amp mu) V^H D with (mu, V) the fixed
eigensystem of T1. Everything time dependent enters through per-substep
scalars, which keeps each substep at two dense matvecs plus diagonal work.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def ladder_run(c, sub_dt, phi, amp, q1, q2, nb, Vt, mu, omega_r):
    """General kin/2 - pot - kin/2 substep loop.

    Parameters are per-substep arrays: sub_dt durations (s), phi coupling
    phase (rad), amp coupling amplitude (E_R), q1/q2 quasimomentum (k_L) at
    the 1/4 and 3/4 points of the substep. Vt is the transposed eigenvector
    matrix of the ones-tridiagonal, mu its eigenvalues, omega_r = E_R/hbar.
    Mutates and returns c.
    """
    K = 2 * nb + 1
    d = np.empty(K, np.complex128)
    e = np.empty(K, np.complex128)
    for j in range(sub_dt.shape[0]):
        h = sub_dt[j]
        half = 0.5 * omega_r * h
        for i in range(K):
            tn = 2.0 * (i - nb) + q1[j]
            c[i] *= np.exp(-1j * tn * tn * half)
        ephi = np.exp(-1j * phi[j])
        f = ephi ** (-nb)
        for i in range(K):
            d[i] = f * c[i]
            f *= ephi
        theta = amp[j] * omega_r * h
        for k in range(K):
            s = 0.0 + 0.0j
            for i in range(K):
                s += Vt[k, i] * d[i]
            e[k] = s * np.exp(1j * theta * mu[k])
        for k in range(K):
            s = 0.0 + 0.0j
            for i in range(K):
                s += Vt[i, k] * e[i]
            d[k] = s
        f = ephi ** (-nb)
        for i in range(K):
            c[i] = d[i] / f
            f *= ephi
        for i in range(K):
            tn = 2.0 * (i - nb) + q2[j]
            c[i] *= np.exp(-1j * tn * tn * half)
    return c


@njit(cache=True, nogil=True)
def ladder_run_uniform(c, phi, P, ehalf, nb):
    """Fast path for force-free, constant-amplitude, constant-step schedules.

    P = V diag(exp(i theta mu)) V^H is the precomputed full-substep coupling
    propagator and ehalf the constant half-substep kinetic phases, so each
    substep costs one dense matvec and two diagonal sweeps.
    """
    K = 2 * nb + 1
    d = np.empty(K, np.complex128)
    for j in range(phi.shape[0]):
        ephi = np.exp(-1j * phi[j])
        f = ephi ** (-nb)
        for i in range(K):
            d[i] = f * ehalf[i] * c[i]
            f *= ephi
        for k in range(K):
            s = 0.0 + 0.0j
            for i in range(K):
                s += P[k, i] * d[i]
            c[k] = s
        f = ephi ** (-nb)
        for i in range(K):
            c[i] = ehalf[i] * c[i] / f
            f *= ephi
    return c
