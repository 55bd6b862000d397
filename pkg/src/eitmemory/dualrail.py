"""Two-rail bosonic states truncated at two photons in total.

Basis ordering (``|n_L, m_R>``)::

    0: |0,0>   1: |0,1>   2: |1,0>   3: |1,1>   4: |0,2>   5: |2,0>

Passive optics conserve photon number, so every linear-optical element acts
exactly on this space; loss only lowers occupations and is exact as well.

Conventions
-----------
* A linear-optical element is a 2x2 unitary ``U`` on the mode creation
  operators: ``a_i^dag -> sum_j U[j, i] a_j^dag`` with mode 0 = L, 1 = R.
* A half-waveplate at angle ``theta`` is the reflection
  ``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]``; after it, slot L feeds detector
  D1 and slot R feeds detector D2.
* A phase ``phi`` on rail L multiplies ``|n_L, m_R>`` by ``exp(i n_L phi)``.
* The which-rail coherence is ``d = <1,0| rho |0,1>``; a phase ``phi`` on L
  sends ``d -> d exp(i phi)``. At ``phi_rel = 0`` the split state has real,
  positive ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial, sqrt

import numpy as np

from .errors import ValidationError

BASIS = ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0))
INDEX = {nm: i for i, nm in enumerate(BASIS)}
DIM = len(BASIS)

RAILS = ("L", "R")

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class SingleModePhotonStats:
    """Photon-number distribution of a single (diagonal) mode."""

    p0: float
    p1: float
    p2: float = 0.0

    def __post_init__(self):
        probs = (self.p0, self.p1, self.p2)
        if any(not np.isfinite(p) for p in probs):
            raise ValidationError(f"non-finite photon probabilities {probs}")
        if any(p < -_PROB_TOL or p > 1 + _PROB_TOL for p in probs):
            raise ValidationError(f"photon probabilities outside [0, 1]: {probs}")
        if abs(sum(probs) - 1.0) > _PROB_TOL:
            raise ValidationError(f"photon probabilities sum to {sum(probs)!r}, not 1")

    def as_array(self):
        return np.array([self.p0, self.p1, self.p2])


class TwoModeFockState:
    """Density matrix over the six-state two-rail basis.

    Instances are treated as immutable; every operation returns a new state.
    """

    __slots__ = ("_rho",)

    def __init__(self, rho, *, validate=True, atol=1e-10):
        rho = np.array(rho, dtype=complex)
        if rho.shape != (DIM, DIM):
            raise ValidationError(f"expected a {DIM}x{DIM} matrix, got {rho.shape}")
        if validate:
            _check_density_matrix(rho, atol)
        rho.setflags(write=False)
        self._rho = rho

    @classmethod
    def vacuum(cls):
        return cls.from_pure({(0, 0): 1.0})

    @classmethod
    def from_pure(cls, amplitudes):
        """Build ``|psi><psi|`` from a ``{(n, m): amplitude}`` mapping."""
        psi = np.zeros(DIM, dtype=complex)
        for nm, amp in amplitudes.items():
            psi[INDEX[tuple(nm)]] = amp
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ValidationError("zero state vector")
        psi /= norm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def bell(cls, phase=0.0):
        """``(|0,1> + e^{i phase} |1,0>)/sqrt(2)``."""
        return cls.from_pure({(0, 1): 1.0, (1, 0): np.exp(1j * phase)})

    @property
    def rho(self):
        return self._rho

    def prob(self, n, m):
        return float(self._rho[INDEX[(n, m)], INDEX[(n, m)]].real)

    @property
    def p00(self):
        return self.prob(0, 0)

    @property
    def p01(self):
        return self.prob(0, 1)

    @property
    def p10(self):
        return self.prob(1, 0)

    @property
    def p11(self):
        return self.prob(1, 1)

    @property
    def coherence(self):
        """Which-rail coherence ``d = <1,0|rho|0,1>``."""
        return complex(self._rho[INDEX[(1, 0)], INDEX[(0, 1)]])

    @property
    def visibility(self):
        """``2|d| / (p01 + p10)``; zero when the one-photon sector is empty."""
        s = self.p01 + self.p10
        return 2 * abs(self.coherence) / s if s > 0 else 0.0

    def rail_marginal(self, rail):
        """Photon-number distribution ``[P(0), P(1), P(2)]`` of one rail."""
        k = _rail_index(rail)
        out = np.zeros(3)
        for i, nm in enumerate(BASIS):
            out[nm[k]] += self._rho[i, i].real
        return out

    def total_photon_distribution(self):
        out = np.zeros(3)
        for i, (n, m) in enumerate(BASIS):
            out[n + m] += self._rho[i, i].real
        return out

    def trace(self):
        return float(np.trace(self._rho).real)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self._rho).min())

    def __repr__(self):
        return (
            f"TwoModeFockState(p00={self.p00:.6g}, p01={self.p01:.6g}, "
            f"p10={self.p10:.6g}, p11={self.p11:.6g}, d={self.coherence:.6g})"
        )


def _check_density_matrix(rho, atol):
    if not np.all(np.isfinite(rho)):
        raise ValidationError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(rho))):
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValidationError(f"density matrix trace is {tr!r}, not 1")
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lam < -atol:
        raise ValidationError(f"density matrix not positive semidefinite (min eig {lam:.3e})")


def _rail_index(rail):
    try:
        return RAILS.index(rail)
    except ValueError:
        raise ValidationError(f"rail must be 'L' or 'R', got {rail!r}") from None


def fock_unitary(mode_unitary):
    """Lift a 2x2 mode unitary to the 6x6 truncated Fock space.

    Each basis state is written as a polynomial in the creation operators,
    the substitution ``a_i^dag -> sum_j U[j, i] a_j^dag`` is expanded, and the
    monomials are converted back to normalized Fock amplitudes.
    """
    u = np.asarray(mode_unitary, dtype=complex)
    out = np.zeros((DIM, DIM), dtype=complex)
    for col, (n_l, n_r) in enumerate(BASIS):
        # polynomial {(pL, pR): coeff}; start from 1/sqrt(nL! nR!)
        poly = {(0, 0): 1.0 / sqrt(factorial(n_l) * factorial(n_r))}
        for mode, count in ((0, n_l), (1, n_r)):
            for _ in range(count):
                nxt = {}
                for (pl, pr), c in poly.items():
                    nxt[(pl + 1, pr)] = nxt.get((pl + 1, pr), 0) + c * u[0, mode]
                    nxt[(pl, pr + 1)] = nxt.get((pl, pr + 1), 0) + c * u[1, mode]
                poly = nxt
        for (pl, pr), c in poly.items():
            out[INDEX[(pl, pr)], col] += c * sqrt(factorial(pl) * factorial(pr))
    return out


def _conjugate(state, unitary):
    rho = unitary @ state.rho @ unitary.conj().T
    return TwoModeFockState((rho + rho.conj().T) / 2)


@dataclass(frozen=True)
class OpticalElementSetting:
    """One linear-optical element acting on the two rails.

    ``kind`` is ``"waveplate"`` (uses ``angle``), ``"phase"`` (uses ``phase``
    and ``rail``), ``"displacer-split"`` or ``"displacer-combine"``.
    """

    kind: str
    angle: float = 0.0
    phase: float = 0.0
    rail: str = "L"

    def mode_unitary(self):
        if self.kind == "waveplate":
            c, s = np.cos(2 * self.angle), np.sin(2 * self.angle)
            return np.array([[c, s], [s, -c]], dtype=complex)
        if self.kind == "phase":
            u = np.eye(2, dtype=complex)
            k = _rail_index(self.rail)
            u[k, k] = np.exp(1j * self.phase)
            return u
        if self.kind == "displacer-split":
            return _SPLIT
        if self.kind == "displacer-combine":
            return _SPLIT.conj().T
        raise ValidationError(f"unknown optical element kind {self.kind!r}")

    def fock_unitary(self):
        return fock_unitary(self.mode_unitary())


# photon entering on L leaves as (|1,0> + |0,1>)/sqrt(2)
_SPLIT = np.array([[1, -1], [1, 1]], dtype=complex) / np.sqrt(2)


def apply_element(state, element):
    return _conjugate(state, element.fock_unitary())


def apply_waveplate(state, theta):
    """Half-waveplate at ``theta`` (radians): rails mixed by angle ``2 theta``."""
    return apply_element(state, OpticalElementSetting("waveplate", angle=theta))


def apply_phase(state, phi, rail="L"):
    return apply_element(state, OpticalElementSetting("phase", phase=phi, rail=rail))


def embed_single_mode(source, rail="L"):
    """Place a diagonal single-mode distribution on one rail, other rail empty."""
    k = _rail_index(rail)
    rho = np.zeros((DIM, DIM), dtype=complex)
    for n, p in enumerate(source.as_array()):
        nm = (n, 0) if k == 0 else (0, n)
        rho[INDEX[nm], INDEX[nm]] = p
    return TwoModeFockState(rho)


def split_single_photon(source, phi_rel=0.0):
    """Split a single-mode source 50/50 into rails L and R.

    The one-photon part becomes ``(|0,1> + e^{i phi_rel}|1,0>)/sqrt(2)``.
    """
    if not isinstance(source, SingleModePhotonStats):
        source = SingleModePhotonStats(*source)
    state = apply_element(embed_single_mode(source, "L"), OpticalElementSetting("displacer-split"))
    return apply_phase(state, phi_rel, "L")


def combine_rails(state):
    """Inverse of the 50/50 split (second beam displacer)."""
    return apply_element(state, OpticalElementSetting("displacer-combine"))


def _loss_kraus(eta, rail):
    k = _rail_index(rail)
    ops = []
    for lost in range(3):
        K = np.zeros((DIM, DIM))
        for col, nm in enumerate(BASIS):
            n = nm[k]
            if n < lost:
                continue
            amp = sqrt(comb(n, lost) * eta ** (n - lost) * (1 - eta) ** lost)
            new = list(nm)
            new[k] = n - lost
            K[INDEX[tuple(new)], col] = amp
        ops.append(K)
    return ops


def apply_loss(state, eta, rail):
    """Beam-splitter loss with intensity transmission ``eta`` on one rail."""
    if not (0.0 <= eta <= 1.0) or not np.isfinite(eta):
        raise ValidationError(f"transmission must lie in [0, 1], got {eta!r}")
    rho = sum(K @ state.rho @ K.T for K in _loss_kraus(float(eta), rail))
    return TwoModeFockState((rho + rho.conj().T) / 2)


def apply_dephasing(state, visibility):
    """Mix ``rho`` with its rail-phase-averaged version.

    ``rho -> V rho + (1 - V) <rho>_phase`` where the average over a random
    phase on rail L removes coherences between different ``n_L``. In the
    one-photon sector this scales ``d`` by ``V`` and leaves populations alone.
    """
    if not (0.0 <= visibility <= 1.0):
        raise ValidationError(f"visibility factor must lie in [0, 1], got {visibility!r}")
    n_l = np.array([nm[0] for nm in BASIS])
    mask = (n_l[:, None] == n_l[None, :]).astype(float)
    weights = visibility + (1 - visibility) * mask
    return TwoModeFockState(state.rho * weights)


def one_photon_projection(state):
    """Populations and coherence restricted to ``{0,1}`` photons per rail."""
    return {
        "p00": state.p00,
        "p01": state.p01,
        "p10": state.p10,
        "p11": state.p11,
        "d": state.coherence,
    }
