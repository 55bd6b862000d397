"""Detector click statistics and seeded Monte Carlo click records.

Detectors are threshold (non-number-resolving) devices: a detector clicks
when at least one photon is detected or a dark count occurs. Click patterns
are always ordered ``(none, D1 only, D2 only, both)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import radians

import numpy as np

from .dualrail import BASIS, apply_phase, apply_waveplate
from .errors import ValidationError

PATTERNS = ("none", "d1", "d2", "both")
THETA_STATS = 0.0
THETA_FRINGE = radians(22.5)


@dataclass(frozen=True)
class DetectorParams:
    eta_d1: float = 1.0
    eta_d2: float = 1.0
    dark_d1: float = 0.0
    dark_d2: float = 0.0

    def __post_init__(self):
        for name in ("eta_d1", "eta_d2", "dark_d1", "dark_d2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class MeasurementSetting:
    theta_v: float = THETA_STATS
    phi_rel: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi_rel", float(np.mod(self.phi_rel, 2 * np.pi)))


@dataclass(frozen=True)
class CountsTable:
    """Click-pattern tallies for one measurement setting.

    Counts are integers for sampled data; the analytic path stores expected
    (real-valued) counts through :meth:`expected`.
    """

    n_trials: float
    n_none: float
    n_d1: float
    n_d2: float
    n_both: float
    phase: float = 0.0
    setting_id: str = ""

    def __post_init__(self):
        counts = self.counts
        if np.any(counts < 0):
            raise ValidationError("negative counts")
        if abs(counts.sum() - self.n_trials) > 1e-9 * max(1.0, self.n_trials):
            raise ValidationError(
                f"pattern counts sum to {counts.sum()!r}, expected n_trials={self.n_trials!r}"
            )

    @classmethod
    def expected(cls, probabilities, n_trials, phase=0.0, setting_id=""):
        p = _check_probabilities(probabilities)
        return cls(n_trials, *(n_trials * p), phase=phase, setting_id=setting_id)

    @property
    def counts(self):
        return np.array([self.n_none, self.n_d1, self.n_d2, self.n_both], dtype=float)

    @property
    def frequencies(self):
        if self.n_trials == 0:
            return np.full(4, np.nan)
        return self.counts / self.n_trials


def _check_probabilities(p):
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"invalid click probability vector {p!r}")
    return np.clip(p, 0.0, 1.0)


def click_probabilities(state, setting, det):
    """Exact probabilities of the four click patterns."""
    rotated = apply_waveplate(apply_phase(state, setting.phi_rel, "L"), setting.theta_v)
    pops = np.clip(np.real(np.diag(rotated.rho)), 0.0, None)
    probs = np.zeros(4)
    for p, (n1, n2) in zip(pops, BASIS):
        q1 = (1 - det.eta_d1) ** n1 * (1 - det.dark_d1)
        q2 = (1 - det.eta_d2) ** n2 * (1 - det.dark_d2)
        probs += p * np.array([q1 * q2, (1 - q1) * q2, q1 * (1 - q2), (1 - q1) * (1 - q2)])
    return probs / probs.sum()


def derive_seed(master_seed, *key):
    """Independent stream for the point identified by ``key``."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def sample_trials(probabilities, n, seed, phase=0.0, setting_id=""):
    """Multinomial click record; identical for identical ``seed``."""
    p = _check_probabilities(probabilities)
    if n < 0:
        raise ValidationError("number of trials must be non-negative")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(int(n), p / p.sum())
    return CountsTable(int(n), *(int(c) for c in counts), phase=phase, setting_id=setting_id)


def default_phases(n_points=12):
    return np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)


def fringe_probabilities(state, phases, det, theta_v=THETA_FRINGE):
    return [click_probabilities(state, MeasurementSetting(theta_v, ph), det) for ph in phases]


def fringe_scan(state, phases, det, n_per_point, seed, setting_id="fringe", stream=0):
    """Sampled fringe: one :class:`CountsTable` per phase at 22.5 degrees.

    Point ``i`` draws from ``derive_seed(seed, stream, i)``, so each point is
    reproducible on its own regardless of evaluation order.
    """
    out = []
    for i, (ph, p) in enumerate(zip(phases, fringe_probabilities(state, phases, det))):
        out.append(
            sample_trials(p, n_per_point, derive_seed(seed, stream, i), phase=float(ph), setting_id=setting_id)
        )
    return out


def expected_fringe(state, phases, det, n_per_point, setting_id="fringe"):
    """Noise-free counterpart of :func:`fringe_scan`."""
    return [
        CountsTable.expected(p, n_per_point, phase=float(ph), setting_id=setting_id)
        for ph, p in zip(phases, fringe_probabilities(state, phases, det))
    ]


def write_counts_csv(tables, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting_id", "phase_radians", "n_trials", "n_none", "n_d1", "n_d2", "n_both"])
        for t in tables:
            w.writerow([t.setting_id, f"{t.phase:.9f}", *(_fmt_count(c) for c in (t.n_trials, *t.counts))])


def _fmt_count(c):
    c = float(c)
    return str(int(c)) if c.is_integer() else f"{c:.6f}"
