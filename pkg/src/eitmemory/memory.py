"""Per-rail quantum-memory channel with storage-time-dependent efficiency."""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, log

from .dualrail import apply_dephasing, apply_loss
from .errors import ValidationError

DECAY_FORMS = ("exponential", "gaussian")


@dataclass(frozen=True)
class MemoryChannelParams:
    """Retrieval efficiency model ``eta(tau) = eta_r0 * decay(tau / tau_m)``.

    ``eta_l`` and ``eta_r`` multiply the efficiency of each rail.
    ``visibility_factor`` optionally scales the which-rail coherence on top of
    the loss (1 means the memory adds no dephasing).
    """

    eta_r0: float
    tau_m: float = 8e-6
    tau: float = 1.1e-6
    eta_l: float = 1.0
    eta_r: float = 1.0
    decay_form: str = "exponential"
    visibility_factor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta_r0 <= 1.0:
            raise ValidationError(f"eta_r0 must lie in [0, 1], got {self.eta_r0!r}")
        if not self.tau_m > 0:
            raise ValidationError(f"memory lifetime must be positive, got {self.tau_m!r}")
        if self.tau < 0:
            raise ValidationError(f"storage time must be non-negative, got {self.tau!r}")
        if self.decay_form not in DECAY_FORMS:
            raise ValidationError(f"decay_form must be one of {DECAY_FORMS}, got {self.decay_form!r}")
        if not 0.0 <= self.visibility_factor <= 1.0:
            raise ValidationError("visibility_factor must lie in [0, 1]")
        for rail, factor in (("L", self.eta_l), ("R", self.eta_r)):
            if factor < 0 or efficiency_at(self) * factor > 1.0:
                raise ValidationError(f"rail {rail} transmission outside [0, 1]")

    def rail_transmission(self, rail):
        return efficiency_at(self) * (self.eta_l if rail == "L" else self.eta_r)


def _decay(tau, tau_m, form):
    if form == "exponential":
        return exp(-tau / tau_m)
    return exp(-((tau / tau_m) ** 2))


def efficiency_at(params):
    """Retrieval efficiency after storing for ``params.tau``."""
    return params.eta_r0 * _decay(params.tau, params.tau_m, params.decay_form)


def eta_r0_for(eta_target, tau, tau_m=8e-6, decay_form="exponential"):
    """Zero-delay efficiency that yields ``eta_target`` after ``tau``."""
    return eta_target / _decay(tau, tau_m, decay_form)


def lifetime_from_efficiencies(tau_a, eta_a, tau_b, eta_b):
    """Exponential lifetime through two ``(tau, eta)`` measurements."""
    if eta_a <= 0 or eta_b <= 0 or tau_a == tau_b:
        raise ValidationError("need two distinct storage times with positive efficiency")
    return (tau_b - tau_a) / log(eta_a / eta_b)


def apply_memory(state, params):
    """Store and retrieve both rails; each rail is an independent loss channel."""
    out = apply_loss(state, params.rail_transmission("L"), "L")
    out = apply_loss(out, params.rail_transmission("R"), "R")
    if params.visibility_factor < 1.0:
        out = apply_dephasing(out, params.visibility_factor)
    return out
