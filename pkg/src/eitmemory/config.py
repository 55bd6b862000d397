"""Experiment configuration: sectioned ``key = value`` text (INI).

Every physical quantity carries its unit in the key name. Angular
frequencies given as ``*_mhz_2pi`` are ``omega / (2 pi)`` in MHz; decay
rates given as ``*_per_us`` are in rad/us.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, fields, replace
from math import pi

from .counting import DetectorParams
from .eitsolver import ControlWaveform, MediumParams, PulseEnvelope, SolverGrid
from .errors import ValidationError
from .memory import DECAY_FORMS, MemoryChannelParams, eta_r0_for
from .source import SourceParams

SCENARIOS = ("fig2", "fringe_in", "fringe_out", "table1", "full_report")
FIDELITIES = ("analytic", "sampled")

# Rabi frequency that gives eta_r = 0.17 on the default grid (see `calibrate`)
CALIBRATED_RABI_MHZ_2PI = 20.4


@dataclass
class RunSection:
    scenario: str = "full_report"
    master_seed: int = 20071
    output_dir: str = "out"
    fidelity: str = "sampled"


@dataclass
class SourceSection:
    p1_at_face: float = 0.15
    w: float = 0.09
    alpha: float = 1.0


@dataclass
class EntanglerSection:
    visibility: float = 0.93
    phi_rel_rad: float = 0.0


@dataclass
class MediumSection:
    optical_depth: float = 15.0
    length_mm: float = 3.0
    linewidth_mhz_2pi: float = 5.2
    gamma_s_per_us: float = 0.0625
    lossless: bool = False


@dataclass
class ControlSection:
    rabi_mhz_2pi: float = CALIBRATED_RABI_MHZ_2PI
    switch_off_ns: float = 10.0
    ramp_ns: float = 20.0
    storage_us: float = 1.1


@dataclass
class PulseSection:
    width_1e_ns: float = 28.0
    center_ns: float = 0.0


@dataclass
class GridSection:
    nz: int = 100
    dt_ns: float = 0.25
    settle_ns: float = 300.0
    tail_ns: float = 500.0


@dataclass
class MemorySection:
    eta_retrieval: float = 0.17
    derive_from_solver: bool = False
    tau_m_us: float = 8.0
    tau_storage_us: float = 1.1
    decay_form: str = "exponential"
    eta_l_factor: float = 1.0
    eta_r_factor: float = 1.0
    visibility_factor: float = 0.91 / 0.93


@dataclass
class DetectorSection:
    eta_d1: float = 1.0
    eta_d2: float = 1.0
    dark_d1: float = 0.0
    dark_d2: float = 0.0


@dataclass
class StatisticsSection:
    heralds_per_point_in: int = 20_000
    heralds_per_point_out: int = 100_000
    stats_trials_in: int = 2_000_000
    stats_trials_out: int = 4_000_000
    fringe_points: int = 12
    bootstrap_resamples: int = 200


@dataclass
class MetadataSection:
    trial_period_ns: float = 575.0
    mot_cycle_ms: float = 25.0


def _detectors_in():
    # single-photon probability 0.15 at the faces -> 0.075 per rail
    return DetectorSection(eta_d1=0.01043 / 0.075, eta_d2=0.00957 / 0.075)


def _detectors_out():
    per_rail = 0.075 * 0.17
    return DetectorSection(eta_d1=0.00209 / per_rail, eta_d2=0.00167 / per_rail)


@dataclass
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    source: SourceSection = field(default_factory=SourceSection)
    entangler: EntanglerSection = field(default_factory=EntanglerSection)
    medium: MediumSection = field(default_factory=MediumSection)
    control: ControlSection = field(default_factory=ControlSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    grid: GridSection = field(default_factory=GridSection)
    memory: MemorySection = field(default_factory=MemorySection)
    detectors_in: DetectorSection = field(default_factory=_detectors_in)
    detectors_out: DetectorSection = field(default_factory=_detectors_out)
    statistics: StatisticsSection = field(default_factory=StatisticsSection)
    metadata: MetadataSection = field(default_factory=MetadataSection)

    # physics objects ------------------------------------------------------

    def source_params(self):
        s = self.source
        return SourceParams(s.p1_at_face, s.w, s.alpha)

    def medium_params(self):
        m = self.medium
        gamma = 2 * pi * m.linewidth_mhz_2pi * 1e6
        return MediumParams(
            optical_depth=m.optical_depth,
            length_m=m.length_mm * 1e-3,
            gamma=gamma,
            gamma_s=0.0 if m.lossless else m.gamma_s_per_us * 1e6,
            polarization_decay=0.0 if m.lossless else None,
        )

    def control_waveform(self, rabi_mhz_2pi=None):
        c = self.control
        rabi = c.rabi_mhz_2pi if rabi_mhz_2pi is None else rabi_mhz_2pi
        return ControlWaveform.storage(
            2 * pi * rabi * 1e6, c.switch_off_ns * 1e-9, c.storage_us * 1e-6, c.ramp_ns * 1e-9
        )

    def pulse_envelope(self):
        return PulseEnvelope.gaussian(self.pulse.width_1e_ns * 1e-9, self.pulse.center_ns * 1e-9)

    def solver_grid(self):
        g = self.grid
        return SolverGrid(g.nz, g.dt_ns * 1e-9, g.settle_ns * 1e-9, g.tail_ns * 1e-9)

    def memory_params(self, eta_retrieval=None):
        m = self.memory
        eta = m.eta_retrieval if eta_retrieval is None else eta_retrieval
        tau = m.tau_storage_us * 1e-6
        tau_m = m.tau_m_us * 1e-6
        return MemoryChannelParams(
            eta_r0=eta_r0_for(eta, tau, tau_m, m.decay_form),
            tau_m=tau_m,
            tau=tau,
            eta_l=m.eta_l_factor,
            eta_r=m.eta_r_factor,
            decay_form=m.decay_form,
            visibility_factor=m.visibility_factor,
        )

    def detector_params(self, stage):
        d = self.detectors_in if stage == "in" else self.detectors_out
        return DetectorParams(d.eta_d1, d.eta_d2, d.dark_d1, d.dark_d2)

    # validation -----------------------------------------------------------

    def validate(self):
        """Raise :class:`ValidationError` listing every offending field."""
        problems = []
        r = self.run
        if r.scenario not in SCENARIOS:
            problems.append(f"run.scenario: unknown scenario {r.scenario!r} (expected one of {SCENARIOS})")
        if r.fidelity not in FIDELITIES:
            problems.append(f"run.fidelity: {r.fidelity!r} not in {FIDELITIES}")
        if r.master_seed < 0:
            problems.append("run.master_seed: must be non-negative")
        if not 0.0 <= self.entangler.visibility <= 1.0:
            problems.append("entangler.visibility: must lie in [0, 1]")
        if self.memory.decay_form not in DECAY_FORMS:
            problems.append(f"memory.decay_form: {self.memory.decay_form!r} not in {DECAY_FORMS}")
        if not 0.0 <= self.memory.eta_retrieval <= 1.0:
            problems.append("memory.eta_retrieval: must lie in [0, 1]")
        st = self.statistics
        for name in ("heralds_per_point_in", "heralds_per_point_out", "stats_trials_in", "stats_trials_out"):
            if getattr(st, name) < 0:
                problems.append(f"statistics.{name}: must be non-negative")
        if st.fringe_points < 4:
            problems.append("statistics.fringe_points: need at least 4")
        if st.bootstrap_resamples < 2:
            problems.append("statistics.bootstrap_resamples: need at least 2")
        checks = (
            ("source", self.source_params),
            ("medium", self.medium_params),
            ("control", self.control_waveform),
            ("pulse", self.pulse_envelope),
            ("memory", self.memory_params),
            ("detectors_in", lambda: self.detector_params("in")),
            ("detectors_out", lambda: self.detector_params("out")),
        )
        for section, build in checks:
            try:
                build()
            except (ValidationError, ValueError, ZeroDivisionError) as exc:
                problems.append(f"{section}: {exc}")
        if problems:
            raise ValidationError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    # serialization --------------------------------------------------------

    def to_text(self):
        parser = configparser.ConfigParser()
        for f in fields(self):
            section = getattr(self, f.name)
            parser[f.name] = {k: _format(v) for k, v in asdict(section).items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ValidationError(f"cannot parse configuration: {exc}") from None
        cfg = cls()
        known = {f.name for f in fields(cls)}
        unknown = [s for s in parser.sections() if s not in known]
        if unknown:
            raise ValidationError(f"unknown configuration sections: {unknown}")
        for name in parser.sections():
            section = getattr(cfg, name)
            types = {f.name: f.type for f in fields(section)}
            updates = {}
            for key, raw in parser[name].items():
                if key not in types:
                    raise ValidationError(f"{name}.{key}: unknown key")
                updates[key] = _parse(raw, getattr(section, key), f"{name}.{key}")
            setattr(cfg, name, replace(section, **updates))
        return cfg

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw, default, where):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw
