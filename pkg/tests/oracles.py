"""Independent reference computations used to freeze expected values.

These work in a larger two-mode Fock space built from ladder-operator
matrices and matrix exponentials; they share no code with the package.
"""

import numpy as np
from scipy.linalg import expm

CUT = 4  # photons per mode kept by the oracle
_BASIS = ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0))


def ladder(cut=CUT):
    a = np.diag(np.sqrt(np.arange(1, cut)), 1)
    eye = np.eye(cut)
    return np.kron(a, eye), np.kron(eye, a)  # (a_L, a_R)


def _idx(n, m, cut=CUT):
    return n * cut + m


def embed(rho6):
    big = np.zeros((CUT * CUT, CUT * CUT), dtype=complex)
    for i, (n, m) in enumerate(_BASIS):
        for j, (k, l) in enumerate(_BASIS):
            big[_idx(n, m), _idx(k, l)] = rho6[i, j]
    return big


def project(big):
    out = np.zeros((6, 6), dtype=complex)
    for i, (n, m) in enumerate(_BASIS):
        for j, (k, l) in enumerate(_BASIS):
            out[i, j] = big[_idx(n, m), _idx(k, l)]
    return out


def mode_generator_unitary(h):
    """Fock-space unitary exp(i sum_jk H_jk a_j^dag a_k) for 2x2 Hermitian H."""
    al, ar = ladder()
    ops = (al, ar)
    gen = sum(h[j, k] * ops[j].conj().T @ ops[k] for j in range(2) for k in range(2))
    return expm(1j * gen)


def beam_splitter(theta):
    """exp(theta (a_L^dag a_R - a_L a_R^dag))."""
    al, ar = ladder()
    return expm(theta * (al.conj().T @ ar - al @ ar.conj().T))


def evolve(rho6, unitary):
    return project(unitary @ embed(rho6) @ unitary.conj().T)


def click_probabilities(rho6, eta1, eta2):
    """Threshold-detector patterns from a state already in the detector basis."""
    pops = np.real(np.diag(embed(rho6)))
    out = np.zeros(4)
    for n in range(CUT):
        for m in range(CUT):
            p = pops[_idx(n, m)]
            q1, q2 = (1 - eta1) ** n, (1 - eta2) ** m
            out += p * np.array([q1 * q2, (1 - q1) * q2, q1 * (1 - q2), (1 - q1) * (1 - q2)])
    return out


def binomial_thinning(dist, eta):
    """Photon-number distribution after loss with transmission eta."""
    from math import comb

    out = np.zeros(len(dist))
    for n, p in enumerate(dist):
        for k in range(n + 1):
            out[k] += p * comb(n, k) * eta**k * (1 - eta) ** (n - k)
    return out
