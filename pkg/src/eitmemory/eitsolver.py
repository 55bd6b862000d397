"""Storage and retrieval of a light pulse in a Lambda-type EIT medium.

Linearized Maxwell-Bloch equations in the frame co-moving with the pulse
(retarded time ``t``, control co-propagating with the signal)::

    dE/dz = i k P
    dP/dt = -(Gamma/2) P + i k E + i Omega(t) S
    dS/dt = -gamma_s S + i Omega(t) P

``E`` is normalized so that ``|E|^2`` is a photon flux (per second) and
``P``, ``S`` so that ``|P|^2 + |S|^2`` is an excitation density per unit
length. With these units excitation is conserved exactly when
``Gamma = gamma_s = 0``. The coupling is fixed by requiring that with the
control off a spectrally narrow resonant pulse is transmitted with intensity
factor ``exp(-d0)``, which gives ``k**2 L = d0 Gamma / 4`` and
``g**2 N = c d0 Gamma / (4 L)``.

Discretization
--------------
Space: ``nz`` cells of width ``h = L/nz``; ``P`` and ``S`` live at cell
centres and the field at cell faces, ``E_j = E_{j-1} + i k h P_j``. Cells see
the face average ``(E_{j-1} + E_j)/2``, which makes the semi-discrete system
conserve excitation exactly. Time: implicit midpoint rule, which is
A-stable and preserves that quadratic balance to round-off.

While the control is fully off the spin wave is decoupled from ``P``; that
interval is bridged analytically (``S`` decays as ``exp(-gamma_s t)``, the
``P``/field subsystem is propagated with a matrix exponential and its
radiated energy obtained from the Van Loan block exponential).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import inf, isfinite, pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.signal import lfilter

from .errors import GridStabilityError, ValidationError

C_LIGHT = 299_792_458.0
# cesium D2 natural linewidth
GAMMA_CS_D2 = 2 * pi * 5.2e6


@dataclass(frozen=True)
class MediumParams:
    """EIT ensemble.

    ``gamma`` is the excited-state linewidth that, with ``optical_depth``,
    fixes the light-matter coupling. ``polarization_decay`` is the rate
    actually used to damp ``P`` (defaults to ``gamma``); setting it and
    ``gamma_s`` to zero gives the lossless limit at unchanged coupling.
    """

    optical_depth: float = 15.0
    length_m: float = 3e-3
    gamma: float = GAMMA_CS_D2
    gamma_s: float = 0.0
    polarization_decay: float | None = None

    def __post_init__(self):
        if not self.optical_depth > 0:
            raise ValidationError(f"optical depth must be positive, got {self.optical_depth!r}")
        if not self.length_m > 0:
            raise ValidationError(f"medium length must be positive, got {self.length_m!r}")
        if not self.gamma > 0:
            raise ValidationError(f"linewidth gamma must be positive, got {self.gamma!r}")
        if self.gamma_s < 0 or (self.polarization_decay or 0.0) < 0:
            raise ValidationError("decay rates must be non-negative")

    @property
    def p_decay(self):
        return self.gamma if self.polarization_decay is None else self.polarization_decay

    @property
    def g2n(self):
        """Collective coupling ``g**2 N`` in rad^2/s^2."""
        return C_LIGHT * self.optical_depth * self.gamma / (4 * self.length_m)

    @property
    def g_sqrt_n(self):
        return sqrt(self.g2n)

    @property
    def scaled_coupling(self):
        """``k sqrt(L)``: coupling in units where ``z`` runs over [0, 1]."""
        return sqrt(self.optical_depth * self.gamma / 4)


@dataclass(frozen=True)
class ControlWaveform:
    """Control Rabi frequency with raised-cosine switch-off and switch-on.

    ``switch_off`` is the start of the switch-off ramp; ``off_duration`` is the
    dark time between the end of that ramp and the start of the switch-on
    ramp. ``switch_off = inf`` keeps the control on for all times.
    """

    omega0: float
    switch_off: float = inf
    ramp: float = 20e-9
    off_duration: float = inf
    ramp_on: float | None = None

    def __post_init__(self):
        if self.omega0 < 0:
            raise ValidationError("control Rabi frequency must be non-negative")
        if self.ramp <= 0 or (self.ramp_on is not None and self.ramp_on <= 0):
            raise ValidationError("ramp durations must be positive")
        if self.off_duration < 0:
            raise ValidationError("off duration must be non-negative")

    @classmethod
    def storage(cls, omega0, switch_off, storage_time, ramp=20e-9):
        """Switch-on starts ``storage_time`` after switch-off starts."""
        if storage_time < ramp:
            raise ValidationError("storage time shorter than the switch-off ramp")
        return cls(omega0, switch_off, ramp, storage_time - ramp)

    @property
    def ramp_up(self):
        return self.ramp if self.ramp_on is None else self.ramp_on

    @property
    def off_end(self):
        """Time the switch-off ramp completes."""
        return self.switch_off + self.ramp

    @property
    def switch_on(self):
        """Start of the switch-on ramp."""
        return self.switch_off + self.ramp + self.off_duration

    @property
    def on_end(self):
        return self.switch_on + self.ramp_up

    @property
    def stores(self):
        return isfinite(self.switch_off) and self.omega0 > 0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(self.omega0))
        if isfinite(self.switch_off):
            x = (t - self.switch_off) / self.ramp
            down = 0.5 * (1 + np.cos(pi * np.clip(x, 0.0, 1.0)))
            out = np.where(t >= self.switch_off, self.omega0 * down, out)
            if isfinite(self.off_duration):
                y = (t - self.switch_on) / self.ramp_up
                up = 0.5 * (1 - np.cos(pi * np.clip(y, 0.0, 1.0)))
                out = np.where(t >= self.switch_on, self.omega0 * up, out)
        return out if out.ndim else float(out)


def control_waveform_eval(control, t):
    return control(t)


@dataclass(frozen=True)
class PulseEnvelope:
    """Resonant input amplitude ``eps(t)`` with ``int |eps|^2 dt = 1``.

    ``support`` is a ``(t_min, t_max)`` interval outside which the pulse is
    negligible; it sizes the simulation window.
    """

    amplitude: object
    support: tuple
    resonant: bool = True

    def __post_init__(self):
        lo, hi = self.support
        if not hi > lo:
            raise ValidationError("pulse support must be a non-empty interval")
        norm = self.norm()
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"input pulse is not normalized (integral {norm!r})")

    def norm(self):
        lo, hi = self.support
        mid = 0.5 * (lo + hi)
        f = lambda t: abs(self.amplitude(t)) ** 2
        # split at the midpoint so narrow pulses are not missed
        return quad(f, lo, mid, epsabs=1e-13, epsrel=1e-12, limit=400)[0] + quad(
            f, mid, hi, epsabs=1e-13, epsrel=1e-12, limit=400
        )[0]

    @classmethod
    def gaussian(cls, width_1e, center=0.0, n_widths=4.0):
        """Gaussian probability density with full width ``width_1e`` at 1/e."""
        a = 2.0 / width_1e
        peak = a / sqrt(pi)

        def amp(t):
            t = np.asarray(t, dtype=float)
            return np.sqrt(peak * np.exp(-((a * (t - center)) ** 2)))

        half = n_widths * width_1e
        return cls(amp, (center - half, center + half))

    def __call__(self, t):
        return self.amplitude(t)


@dataclass(frozen=True)
class SolverGrid:
    """Resolution and window of a solve.

    ``settle``: time simulated after the switch-off ramp before the dark
    interval is bridged analytically. ``tail``: time simulated after the
    switch-on ramp (or after the pulse, with no storage). ``t_end``
    overrides the end time for runs without storage.
    """

    nz: int = 100
    dt: float = 0.25e-9
    settle: float = 300e-9
    tail: float = 500e-9
    t_end: float | None = None

    def check(self, medium, control, pulse):
        rate = max(medium.p_decay / 2, medium.optical_depth * medium.gamma / 4, control.omega0)
        problems = []
        if self.nz < 4:
            problems.append(f"nz={self.nz} < 4")
        if medium.optical_depth / self.nz > 1.0:
            problems.append(f"optical depth per cell {medium.optical_depth / self.nz:.3g} > 1")
        if self.dt * rate > 0.5:
            problems.append(f"dt * fastest rate = {self.dt * rate:.3g} > 0.5")
        if control.stores and self.dt > min(control.ramp, control.ramp_up) / 4:
            problems.append("dt does not resolve the control ramps (need dt <= ramp/4)")
        width = pulse.support[1] - pulse.support[0]
        if self.dt > width / 40:
            problems.append("dt does not resolve the input pulse (need dt <= support/40)")
        if problems:
            raise GridStabilityError("unstable or unresolved grid: " + "; ".join(problems))


@dataclass(frozen=True)
class Segment:
    """One directly time-stepped window of the solution."""

    t: np.ndarray  # step midpoints
    dt: float
    input_field: np.ndarray
    output_field: np.ndarray
    field: np.ndarray  # (nt, nz) face-averaged field at cell centres
    polarization: np.ndarray
    spin: np.ndarray


@dataclass(frozen=True)
class FieldSolution:
    """Result of :func:`solve_maxwell_bloch`.

    Energies are fractions of the discretized input energy. Accounting is
    complete: ``leakage + gap_output + retrieved + spontaneous_loss +
    spin_loss + residual == 1`` to round-off.
    """

    z: np.ndarray  # cell centres in metres
    segments: tuple
    input_energy: float
    leakage: float
    gap_output: float
    retrieved: float
    spontaneous_loss: float
    spin_loss: float
    stored: float
    residual: float
    gap: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t(self):
        return np.concatenate([s.t for s in self.segments])

    @property
    def dt(self):
        return np.concatenate([np.full(len(s.t), s.dt) for s in self.segments])

    @property
    def output_field(self):
        return np.concatenate([s.output_field for s in self.segments])

    @property
    def input_field(self):
        return np.concatenate([s.input_field for s in self.segments])

    @property
    def field(self):
        return np.concatenate([s.field for s in self.segments])

    @property
    def polarization(self):
        return np.concatenate([s.polarization for s in self.segments])

    @property
    def spin(self):
        return np.concatenate([s.spin for s in self.segments])

    @property
    def output_density(self):
        """``|E(L, t)|^2`` normalized to unit input energy (1/s)."""
        return np.abs(self.output_field) ** 2 / self.input_energy

    @property
    def transmission(self):
        """All output energy (leakage, gap and retrieved) over input."""
        return self.leakage + self.gap_output + self.retrieved

    @property
    def spontaneous_fraction(self):
        return self.spontaneous_loss

    @property
    def balance_error(self):
        total = (
            self.leakage
            + self.gap_output
            + self.retrieved
            + self.spontaneous_loss
            + self.spin_loss
            + self.residual
        )
        return total - 1.0

    def output_energy_between(self, t0=-inf, t1=inf):
        """Output energy (fraction) emitted in simulated steps with ``t0 <= t < t1``."""
        t, dt = self.t, self.dt
        sel = (t >= t0) & (t < t1)
        return float(np.sum(np.abs(self.output_field[sel]) ** 2 * dt[sel]) / self.input_energy)

    def group_delay(self):
        """Centroid of the output intensity minus centroid of the input."""
        t, dt = self.t, self.dt
        w_in = np.abs(self.input_field) ** 2 * dt
        w_out = np.abs(self.output_field) ** 2 * dt
        return float(np.sum(t * w_out) / np.sum(w_out) - np.sum(t * w_in) / np.sum(w_in))

    def photon_to_spin_ratio(self, step, medium):
        """Photonic over spin excitation per unit length at one step, per cell.

        Lab-frame photon density is ``|E|^2 / c``; spin density is ``|S|^2``.
        """
        e = np.abs(self.field[step]) ** 2 / C_LIGHT
        s = np.abs(self.spin[step]) ** 2 / medium.length_m
        return e / s


@dataclass(frozen=True)
class Partition:
    leak: float
    loss: float
    retrieved: float
    residual: float
    between: float


def partition_efficiencies(sol, t_store, t_retrieve):
    """Split the output into leakage, retrieval and the remainder.

    ``leak`` is output before ``t_store`` and ``retrieved`` output after
    ``t_retrieve``. ``between`` is output emitted in between (including the
    analytically bridged dark interval). ``loss = 1 - leak - retrieved -
    residual``, so it contains ``between`` plus all dissipation.
    """
    t = sol.t
    if t_store > t_retrieve:
        raise ValidationError("t_store must not come after t_retrieve")
    if t_store < t[0] or t_retrieve > t[-1] + sol.segments[-1].dt:
        raise ValidationError("t_store and t_retrieve must lie within the solution grid")
    leak = sol.output_energy_between(-inf, t_store)
    retrieved = sol.output_energy_between(t_retrieve, inf)
    between = sol.output_energy_between(t_store, t_retrieve)
    if sol.gap is not None and t_store <= sol.gap[0] and t_retrieve >= sol.gap[1]:
        between += sol.gap_output
    loss = 1.0 - leak - retrieved - sol.residual
    return Partition(leak, loss, retrieved, sol.residual, between)


def polariton_mixing_angle(omega_c, g_sqrt_n):
    """``cos^2 theta = Omega^2 / (Omega^2 + g^2 N)`` (equals ``v_g / c``)."""
    if g_sqrt_n <= 0:
        raise ValidationError("g sqrt(N) must be positive")
    omega_c = np.asarray(omega_c, dtype=float)
    with np.errstate(invalid="ignore"):
        out = omega_c**2 / (omega_c**2 + g_sqrt_n**2)
    out = np.where(np.isinf(omega_c), 1.0, out)
    return out if out.ndim else float(out)


def slow_light_delay(omega_c, medium):
    """Excess transit time ``L / v_g - L / c`` through the medium."""
    cos2 = polariton_mixing_angle(omega_c, medium.g_sqrt_n)
    return medium.length_m / C_LIGHT * (1.0 / cos2 - 1.0)


class _Stepper:
    """Implicit-midpoint stepper solved by a forward sweep in ``z``.

    The midpoint system couples cell ``j`` only to cells upstream of it, so
    after eliminating ``S_j`` the cumulative polarization obeys a first-order
    linear recurrence, evaluated with :func:`scipy.signal.lfilter`.
    """

    def __init__(self, medium, nz, dt):
        self.nz = nz
        self.dt = dt
        self.h = 1.0 / nz
        self.k = medium.scaled_coupling
        self.gamma = medium.p_decay
        self.gamma_s = medium.gamma_s
        # face average seen by cell j: E_in + i k h (sum_{i<j} P_i + P_j / 2)
        self.lower = np.tril(np.ones((nz, nz)), -1) + 0.5 * np.eye(nz)
        self.a_pp = -0.5 * self.gamma * np.eye(nz) - self.k**2 * self.h * self.lower

    def step(self, y, omega, e_in):
        n, a, kh = self.nz, 0.5 * self.dt, self.k * self.h
        p0, s0 = y[:n], y[n:]
        ds = 1.0 + a * self.gamma_s
        alpha = 1.0 + 0.5 * a * self.gamma + 0.5 * a * self.k * kh + (a * omega) ** 2 / ds
        beta = a * self.k * kh
        r = p0 + 1j * a * self.k * e_in + 1j * a * omega * s0 / ds
        cum = lfilter([1.0 / alpha], [1.0, beta / alpha - 1.0], r)
        p_mid = np.diff(cum, prepend=0.0)
        s_mid = (s0 + 1j * a * omega * p_mid) / ds
        y_mid = np.concatenate([p_mid, s_mid])
        e_face = e_in + 1j * kh * (cum - 0.5 * p_mid)
        e_out = e_in + 1j * kh * cum[-1]
        return 2.0 * y_mid - y, y_mid, e_face, e_out


def _run_segment(stepper, y, t0, t1, control, pulse):
    dt = stepper.dt
    n = max(1, int(round((t1 - t0) / dt)))
    tm = t0 + (np.arange(n) + 0.5) * dt
    omegas = np.asarray(control(tm), dtype=float)
    e_in = np.asarray(pulse(tm), dtype=complex)
    nz = stepper.nz
    out = np.empty(n, dtype=complex)
    fields = np.empty((n, nz), dtype=complex)
    pol = np.empty((n, nz), dtype=complex)
    spin = np.empty((n, nz), dtype=complex)
    for i in range(n):
        y, y_mid, e_face, e_out = stepper.step(y, omegas[i], e_in[i])
        out[i] = e_out
        fields[i] = e_face
        pol[i] = y_mid[:nz]
        spin[i] = y_mid[nz:]
    h = stepper.h
    spont = stepper.gamma * h * np.sum(np.abs(pol) ** 2) * dt
    spin_loss = 2 * stepper.gamma_s * h * np.sum(np.abs(spin) ** 2) * dt
    seg = Segment(tm, dt, e_in, out, fields, pol, spin)
    return seg, y, t0 + n * dt, spont, spin_loss


def _bridge_dark(stepper, y, duration):
    """Exact evolution with the control off and no input over ``duration``."""
    nz, h, k = stepper.nz, stepper.h, stepper.k
    p, s = y[:nz], y[nz:]
    s_new = s * np.exp(-stepper.gamma_s * duration)
    spin_loss = h * (np.sum(np.abs(s) ** 2) - np.sum(np.abs(s_new) ** 2))
    a = stepper.a_pp
    # output flux = p^H Q p with Q = (k h)^2 1 1^T
    q = (k * h) ** 2 * np.ones((nz, nz))
    block = np.zeros((2 * nz, 2 * nz), dtype=complex)
    block[:nz, :nz] = -a.conj().T
    block[:nz, nz:] = q
    block[nz:, nz:] = a
    f = expm(block * duration)
    prop = f[nz:, nz:]
    gram = prop.conj().T @ f[:nz, nz:]
    p_new = prop @ p
    emitted = float(np.real(p.conj() @ gram @ p))
    content_drop = h * (np.sum(np.abs(p) ** 2) - np.sum(np.abs(p_new) ** 2))
    spont = content_drop - emitted
    return np.concatenate([p_new, s_new]), emitted, spont, spin_loss


def solve_maxwell_bloch(medium, control, pulse, grid=None):
    """Propagate ``pulse`` through ``medium`` under ``control``.

    Returns a :class:`FieldSolution`. With a storing control the run is split
    into a write window (pulse arrival until ``grid.settle`` after the
    switch-off ramp), an analytically bridged dark interval, and a read
    window (switch-on until ``grid.tail`` after the ramp). Output before the
    dark interval is leakage; output in the read window is retrieval.
    """
    grid = grid or SolverGrid()
    if not isinstance(pulse, PulseEnvelope):
        raise ValidationError("input must be a normalized PulseEnvelope")
    grid.check(medium, control, pulse)
    stepper = _Stepper(medium, grid.nz, grid.dt)
    nz = grid.nz
    y = np.zeros(2 * nz, dtype=complex)
    t_start = pulse.support[0]

    segments = []
    spont = spin_loss = 0.0
    gap = None
    gap_output = 0.0
    stored = 0.0

    if control.stores:
        write_end = control.off_end + grid.settle
        if write_end < pulse.support[1]:
            raise ValidationError(
                "input pulse still arriving after the write window; move switch-off later"
            )
        bridged = control.switch_on > write_end and isfinite(control.switch_on)
        end1 = write_end if bridged else control.on_end + grid.tail
        if not isfinite(end1):
            raise ValidationError("control never switches back on; set off_duration")
        seg, y, t_now, sp, sl = _run_segment(stepper, y, t_start, end1, control, pulse)
        segments.append(seg)
        spont += sp
        spin_loss += sl
        stored = stepper.h * np.sum(np.abs(y[nz:]) ** 2)
        if bridged:
            gap = (t_now, control.switch_on)
            y, gap_output, sp, sl = _bridge_dark(stepper, y, control.switch_on - t_now)
            spont += sp
            spin_loss += sl
            seg, y, _, sp, sl = _run_segment(
                stepper, y, control.switch_on, control.on_end + grid.tail, control, pulse
            )
            segments.append(seg)
            spont += sp
            spin_loss += sl
    else:
        t_end = grid.t_end if grid.t_end is not None else pulse.support[1] + grid.tail
        seg, y, _, sp, sl = _run_segment(stepper, y, t_start, t_end, control, pulse)
        segments.append(seg)
        spont += sp
        spin_loss += sl

    e_in = sum(np.sum(np.abs(s.input_field) ** 2) * s.dt for s in segments)
    if e_in <= 0:
        raise ValidationError("input pulse has no energy inside the simulated window")
    retrieved = 0.0
    if len(segments) == 2:
        leak_raw = np.sum(np.abs(segments[0].output_field) ** 2) * segments[0].dt
        retrieved = np.sum(np.abs(segments[1].output_field) ** 2) * segments[1].dt
    elif control.stores:
        s0 = segments[0]
        w = np.abs(s0.output_field) ** 2 * s0.dt
        leak_raw = np.sum(w[s0.t < control.switch_on])
        retrieved = np.sum(w[s0.t >= control.switch_on])
    else:
        leak_raw = np.sum(np.abs(segments[0].output_field) ** 2) * segments[0].dt
    residual = stepper.h * np.sum(np.abs(y) ** 2)
    z = (np.arange(nz) + 0.5) * medium.length_m / nz
    return FieldSolution(
        z=z,
        segments=tuple(segments),
        input_energy=float(e_in),
        leakage=float(leak_raw / e_in),
        gap_output=float(gap_output / e_in),
        retrieved=float(retrieved / e_in),
        spontaneous_loss=float(spont / e_in),
        spin_loss=float(spin_loss / e_in),
        stored=float(stored / e_in),
        residual=float(residual / e_in),
        gap=gap,
        meta={"nz": nz, "dt": grid.dt},
    )


def write_output_csv(sol, path):
    """Write ``t_seconds,probability_density`` for the output field at z = L."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_seconds", "probability_density"])
        for t, p in zip(sol.t, sol.output_density):
            writer.writerow([f"{t:.6e}", f"{p:.9e}"])
