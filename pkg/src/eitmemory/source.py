"""Heralded single-photon source statistics.

The two-photon contamination is summarized by the suppression

    w = 2 p0 p2 / p1**2,

which equals 1 for Poissonian (coherent-state) statistics and 0 for an
ideal single photon.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

from .dualrail import SingleModePhotonStats
from .errors import UndefinedStatisticError, ValidationError


@dataclass(frozen=True)
class SourceParams:
    """Single-photon source as seen at the face of the memory ensembles.

    ``alpha`` is the source-to-entangler transmission. It is carried for
    bookkeeping; ``p1_at_face`` is already referred to the ensemble faces.
    """

    p1_at_face: float = 0.15
    w: float = 0.09
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p1_at_face <= 1.0:
            raise ValidationError(f"p1_at_face must lie in [0, 1], got {self.p1_at_face!r}")
        if self.w < 0:
            raise ValidationError(f"w must be non-negative, got {self.w!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha!r}")


def build_heralded_state(params):
    """Diagonal single-mode statistics with ``p1`` fixed and ``w`` exact.

    Substituting ``p0 = 1 - p1 - p2`` into ``w = 2 p0 p2 / p1^2`` gives
    ``p2^2 - (1 - p1) p2 + w p1^2 / 2 = 0``; the small root is the physical
    one (it tends to zero with ``w``).
    """
    p1, w = params.p1_at_face, params.w
    q = 1.0 - p1
    c = 0.5 * w * p1 * p1
    disc = q * q - 4 * c
    if disc < 0:
        raise ValidationError(f"no valid photon statistics for p1={p1!r}, w={w!r}")
    # numerically stable small root of p2^2 - q p2 + c = 0
    p2 = 2 * c / (q + sqrt(disc)) if c > 0 else 0.0
    p0 = q - p2
    if p0 < 0 or p2 < 0:
        raise ValidationError(f"p1={p1!r}, w={w!r} imply negative probabilities")
    return SingleModePhotonStats(p0, p1, p2)


def estimate_w(stats):
    if stats.p1 <= 0:
        raise UndefinedStatisticError("w is undefined when p1 = 0")
    return 2 * stats.p0 * stats.p2 / stats.p1**2
