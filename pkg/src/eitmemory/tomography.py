"""Reconstruction of the one-excitation-per-rail density matrix.

The state is constrained to ``{|00>, |01>, |10>, |11>}`` with every
coherence between different photon numbers set to zero; the only
off-diagonal element is the which-rail coherence ``d``, fixed from the
measured fringe visibility as ``d = V (p01 + p10) / 2``. The resulting
matrix is a lower bound on the entanglement of the full state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .counting import CountsTable
from .errors import (
    DataInsufficientError,
    FitError,
    UndefinedStatisticError,
    ValidationError,
)

KEYS = ("p00", "p01", "p10", "p11")


@dataclass(frozen=True)
class PijEstimate:
    p00: float
    p01: float
    p10: float
    p11: float
    errors: dict = field(default_factory=dict)
    clamped: bool = False

    def as_dict(self):
        return {k: getattr(self, k) for k in KEYS}


@dataclass(frozen=True)
class VisibilityFit:
    visibility: float
    error: float
    offset: float
    amplitude: float
    phase0: float


@dataclass(frozen=True)
class DensityMatrixEstimate:
    p00: float
    p01: float
    p10: float
    p11: float
    d: complex
    V: float
    P: float
    C: float
    errors: dict = field(default_factory=dict)

    def matrix(self):
        """Normalized 4x4 matrix in the basis ``(00, 01, 10, 11)``."""
        m = np.diag([self.p00, self.p01, self.p10, self.p11]).astype(complex)
        m[1, 2] = self.d
        m[2, 1] = np.conj(self.d)
        return m / self.P


def _thinning_matrix(eta_l, eta_r):
    """Detected frequencies ``(f00, f10, f01, f11)`` from true ``(p00, p01, p10, p11)``."""
    a, b = eta_l, eta_r
    return np.array(
        [
            [1.0, 1 - b, 1 - a, (1 - a) * (1 - b)],
            [0.0, 0.0, a, a * (1 - b)],
            [0.0, b, 0.0, (1 - a) * b],
            [0.0, 0.0, 0.0, a * b],
        ]
    )


def estimate_pij(counts, det=None, correct_losses=False):
    """Photon-number populations from the 0-degree (photon statistics) setting.

    D1 records rail L and D2 rail R. In corrected mode the per-rail binomial
    thinning by ``det.eta_d1`` / ``det.eta_d2`` is inverted on the
    ``{0, 1}``-per-rail subspace; errors are multinomial standard errors
    carried through the same linear map.
    """
    if counts.n_trials <= 0:
        raise DataInsufficientError("no trials recorded for the photon-statistics setting")
    n = counts.n_trials
    f = counts.frequencies  # (none, d1, d2, both) = (f00, f10, f01, f11)
    cov_f = (np.diag(f) - np.outer(f, f)) / n
    if not correct_losses:
        p = np.array([f[0], f[2], f[1], f[3]])
        err = np.sqrt(np.clip(np.diag(cov_f), 0, None))[[0, 2, 1, 3]]
        return PijEstimate(*p, errors=dict(zip(KEYS, err)))
    if det is None:
        raise ValidationError("loss correction needs detector efficiencies")
    if det.eta_d1 <= 0 or det.eta_d2 <= 0:
        raise UndefinedStatisticError("cannot invert losses with zero efficiency")
    m_inv = np.linalg.inv(_thinning_matrix(det.eta_d1, det.eta_d2))
    p = m_inv @ f
    cov_p = m_inv @ cov_f @ m_inv.T
    err = np.sqrt(np.clip(np.diag(cov_p), 0, None))
    clamped = bool(np.any(p < 0))
    if clamped:
        warnings.warn(f"clamping negative corrected populations {p[p < 0]} to zero", stacklevel=2)
        p = np.clip(p, 0.0, None)
    return PijEstimate(*p, errors=dict(zip(KEYS, err)), clamped=clamped)


def fringe_fraction(table):
    """Per-trial fraction of D1-only clicks."""
    return table.n_d1 / table.n_trials


def fit_visibility(fringe):
    """Weighted least-squares fit of ``A + B cos(phi - phi0)`` to D1 fractions.

    Returns ``V = B / A`` with its standard error from the fit covariance
    (weights are binomial variances of each point).
    """
    fringe = list(fringe)
    if len(fringe) < 4:
        raise ValidationError("visibility fit needs at least 4 phase points")
    phases = np.array([t.phase for t in fringe], dtype=float)
    if _span(phases) <= np.pi:
        raise ValidationError("fringe phases must span more than pi")
    if any(t.n_trials <= 0 for t in fringe):
        raise DataInsufficientError("fringe point with no trials")
    n = np.array([t.n_trials for t in fringe], dtype=float)
    y = np.array([fringe_fraction(t) for t in fringe])
    var = np.maximum(y * (1 - y), 1.0 / n) / n
    x = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    w = 1.0 / var
    xtw = x.T * w
    cov = np.linalg.inv(xtw @ x)
    a, bc, bs = cov @ (xtw @ y)
    if a <= 0:
        raise FitError(f"degenerate fringe fit (offset {a:.3g} <= 0)")
    b = np.hypot(bc, bs)
    v = b / a
    if b > 0:
        grad = np.array([-b / a**2, bc / (a * b), bs / (a * b)])
    else:
        grad = np.array([0.0, 1.0 / a, 0.0])
    sigma = float(np.sqrt(grad @ cov @ grad))
    return VisibilityFit(float(v), sigma, float(a), float(b), float(np.arctan2(bs, bc)))


def _span(phases):
    """Largest arc covered by the phases on the circle."""
    ph = np.sort(np.mod(phases, 2 * np.pi))
    gaps = np.diff(np.concatenate([ph, [ph[0] + 2 * np.pi]]))
    return 2 * np.pi - gaps.max()


def assemble_rho(p, V, errors=None):
    """Fill the constrained matrix from populations and visibility."""
    if isinstance(p, PijEstimate):
        errors = {**p.errors, **(errors or {})}
        p = p.as_dict()
    vals = [float(p[k]) for k in KEYS]
    if any(v < 0 or v > 1 for v in vals):
        raise ValidationError(f"populations outside [0, 1]: {vals}")
    if not 0.0 <= V <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {V!r}")
    p00, p01, p10, p11 = vals
    total = p00 + p01 + p10 + p11
    if total <= 0:
        raise DataInsufficientError("all populations vanish")
    d = V * (p01 + p10) / 2
    c = _concurrence(p00, p01, p10, p11, V)
    errors = dict(errors or {})
    if errors:
        errors["C"] = _concurrence_error(vals, V, errors)
        errors["d"] = sqrt(
            ((p01 + p10) / 2 * errors.get("V", 0.0)) ** 2
            + (V / 2) ** 2 * (errors.get("p01", 0.0) ** 2 + errors.get("p10", 0.0) ** 2)
        )
    return DensityMatrixEstimate(p00, p01, p10, p11, complex(d), float(V), total, c, errors)


def _concurrence(p00, p01, p10, p11, V):
    d = V * (p01 + p10) / 2
    total = p00 + p01 + p10 + p11
    return max(0.0, 2 * abs(d) - 2 * sqrt(p00 * p11)) / total


def _concurrence_error(vals, V, errors):
    """Linear propagation with independent errors on populations and V."""
    x = np.array([*vals, V])
    sig = np.array([errors.get(k, 0.0) for k in (*KEYS, "V")])
    var = 0.0
    for i in range(5):
        if sig[i] == 0:
            continue
        step = max(1e-9, 1e-4 * sig[i])
        hi, lo = x.copy(), x.copy()
        hi[i] += step
        lo[i] = max(lo[i] - step, 0.0)
        deriv = (_concurrence(*hi) - _concurrence(*lo)) / (hi[i] - lo[i])
        var += (deriv * sig[i]) ** 2
    return sqrt(var)


def concurrence(est):
    """``C = max(0, 2|d| - 2 sqrt(p00 p11)) / P``."""
    return max(0.0, 2 * abs(est.d) - 2 * sqrt(est.p00 * est.p11)) / est.P


def transfer_ratio(c_out, c_in, sigma_out=0.0, sigma_in=0.0):
    """``lambda = C_out / C_in`` with relative errors added in quadrature."""
    if c_in == 0:
        raise UndefinedStatisticError("transfer ratio undefined for C_in = 0")
    lam = c_out / c_in
    rel = 0.0
    if c_out != 0:
        rel += (sigma_out / c_out) ** 2
    rel += (sigma_in / c_in) ** 2
    sigma = abs(lam) * sqrt(rel) if c_out != 0 else abs(sigma_out / c_in)
    return lam, sigma


def resample(table, rng):
    p = table.frequencies
    counts = rng.multinomial(int(round(table.n_trials)), p / p.sum())
    return CountsTable(table.n_trials, *counts, phase=table.phase, setting_id=table.setting_id)


def bootstrap_errors(tables, estimator, n_resamples, seed):
    """Standard deviation of ``estimator(tables)`` under multinomial resampling.

    Resample ``i`` uses its own stream derived from ``seed``.
    """
    if n_resamples < 2:
        raise ValidationError("bootstrap needs at least 2 resamples")
    tables = list(tables)
    root = np.random.SeedSequence(int(seed))
    values = []
    for child in root.spawn(n_resamples):
        rng = np.random.default_rng(child)
        values.append(np.asarray(estimator([resample(t, rng) for t in tables]), dtype=float))
    return np.std(np.array(values), axis=0, ddof=1)


def reconstruct(stats_counts, fringe, det=None, correct_losses=False):
    """Populations from the statistics setting, visibility from the fringe."""
    pij = estimate_pij(stats_counts, det, correct_losses)
    fit = fit_visibility(fringe)
    v = float(np.clip(fit.visibility, 0.0, 1.0))
    return assemble_rho(pij, v, {"V": fit.error}), fit
