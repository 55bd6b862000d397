"""Scenario runner: source -> entangler -> memory (or bypass) -> verification."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import counting, tomography
from .counting import CountsTable, MeasurementSetting, THETA_STATS
from .dualrail import apply_dephasing, split_single_photon
from .eitsolver import partition_efficiencies, solve_maxwell_bloch, write_output_csv
from .errors import CalibrationError, DataInsufficientError, ValidationError
from .memory import apply_memory
from .source import build_heralded_state, estimate_w

log = logging.getLogger(__name__)

# independent random streams per (stage, measurement)
_STREAMS = {("in", "fringe"): 1, ("in", "stats"): 2, ("out", "fringe"): 3, ("out", "stats"): 4}


@dataclass
class StageResult:
    stage: str
    state: object
    stats: CountsTable
    fringe: list
    fit: tomography.VisibilityFit
    raw: tomography.DensityMatrixEstimate
    corrected: tomography.DensityMatrixEstimate
    bootstrap: dict = field(default_factory=dict)
    eta_memory: float | None = None


@dataclass
class ScenarioResult:
    scenario: str
    files: list
    values: dict


# --- model chain ------------------------------------------------------------


def input_state(cfg):
    """State of the two signal modes at the input faces of the ensembles."""
    stats = build_heralded_state(cfg.source_params())
    split = split_single_photon(stats, cfg.entangler.phi_rel_rad)
    return apply_dephasing(split, cfg.entangler.visibility)


def solve_eit(cfg, rabi_mhz_2pi=None):
    return solve_maxwell_bloch(
        cfg.medium_params(),
        cfg.control_waveform(rabi_mhz_2pi),
        cfg.pulse_envelope(),
        cfg.solver_grid(),
    )


def memory_efficiency(cfg):
    """Retrieval efficiency after the configured storage time."""
    if cfg.memory.derive_from_solver:
        return solve_eit(cfg).retrieved
    return cfg.memory.eta_retrieval


def stage_state(cfg, stage, eta=None):
    rho = input_state(cfg)
    if stage == "in":
        return rho
    if stage == "out":
        eta = memory_efficiency(cfg) if eta is None else eta
        return apply_memory(rho, cfg.memory_params(eta))
    raise ValidationError(f"stage must be 'in' or 'out', got {stage!r}")


# --- measurement and reconstruction ---------------------------------------


def measure_stage(cfg, stage, fidelity=None, seed=None, eta=None):
    fidelity = fidelity or cfg.run.fidelity
    seed = cfg.run.master_seed if seed is None else seed
    st = cfg.statistics
    eta = (memory_efficiency(cfg) if eta is None else eta) if stage == "out" else None
    state = stage_state(cfg, stage, eta)
    det = cfg.detector_params(stage)
    phases = counting.default_phases(st.fringe_points)
    n_fringe = st.heralds_per_point_in if stage == "in" else st.heralds_per_point_out
    n_stats = st.stats_trials_in if stage == "in" else st.stats_trials_out
    p_stats = counting.click_probabilities(state, MeasurementSetting(THETA_STATS, 0.0), det)
    if fidelity == "analytic":
        fringe = counting.expected_fringe(state, phases, det, n_fringe, setting_id=f"fringe_{stage}")
        stats = CountsTable.expected(p_stats, n_stats, setting_id=f"stats_{stage}")
    elif fidelity == "sampled":
        fringe = counting.fringe_scan(
            state, phases, det, n_fringe, seed, setting_id=f"fringe_{stage}", stream=_STREAMS[(stage, "fringe")]
        )
        stats = counting.sample_trials(
            p_stats,
            n_stats,
            counting.derive_seed(seed, _STREAMS[(stage, "stats")], 0),
            setting_id=f"stats_{stage}",
        )
    else:
        raise ValidationError(f"unknown fidelity {fidelity!r}")
    if n_fringe == 0 or n_stats == 0:
        err = DataInsufficientError(f"stage {stage}: no trials (fringe {n_fringe}, statistics {n_stats})")
        err.partial = (state, stats, fringe)
        raise err
    raw, fit = tomography.reconstruct(stats, fringe)
    corrected, _ = tomography.reconstruct(stats, fringe, det, correct_losses=True)
    boot = {}
    if fidelity == "sampled":
        boot = _bootstrap(stats, fringe, det, st.bootstrap_resamples, counting.derive_seed(seed, 10 + _STREAMS[(stage, "stats")]))
    return StageResult(stage, state, stats, fringe, fit, raw, corrected, boot, eta)


def _bootstrap(stats, fringe, det, n_resamples, seed_seq):
    def estimator(tables):
        s, fr = tables[0], tables[1:]
        raw, fit = tomography.reconstruct(s, fr)
        cor, _ = tomography.reconstruct(s, fr, det, correct_losses=True)
        return [fit.visibility, raw.C, cor.C]

    seed = int(seed_seq.generate_state(1)[0])
    sd = tomography.bootstrap_errors([stats, *fringe], estimator, n_resamples, seed)
    return {"V": float(sd[0]), "C_raw": float(sd[1]), "C_corrected": float(sd[2])}


def consistency(cfg, stage, seed=None):
    """Largest |sampled - analytic| / sigma over V and the corrected populations."""
    a = measure_stage(cfg, stage, "analytic")
    s = measure_stage(cfg, stage, "sampled", seed)
    z = [abs(s.fit.visibility - a.fit.visibility) / s.fit.error]
    for k in tomography.KEYS:
        sig = s.corrected.errors.get(k, 0.0)
        if sig > 0:
            z.append(abs(getattr(s.corrected, k) - getattr(a.corrected, k)) / sig)
    return max(z)


# --- calibration ---------------------------------------------------------


@dataclass
class CalibrationResult:
    rabi_mhz_2pi: float
    eta: float
    trace: list
    config: object


def calibrate(cfg, target=0.17, bounds=(14.0, 40.0), tol=0.002, scan_points=5, max_iter=40):
    """Tune the control Rabi frequency so the solver gives ``eta_r = target``.

    The bracket is searched on the high-Rabi-frequency branch, where
    efficiency falls monotonically as leakage grows. Bisection stops once the
    solver's efficiency is within ``tol / 4`` of the target.
    """
    trace = []

    def eta(rabi):
        value = solve_eit(cfg, rabi).retrieved
        trace.append((float(rabi), float(value)))
        log.info("calibrate: rabi %.5f MHz -> eta_r %.5f", rabi, value)
        return value - target

    def done(rabi, value):
        new = replace(cfg, control=replace(cfg.control, rabi_mhz_2pi=float(rabi)))
        return CalibrationResult(float(rabi), value + target, trace, new)

    f_now = eta(cfg.control.rabi_mhz_2pi)
    if abs(f_now) <= tol:
        return done(cfg.control.rabi_mhz_2pi, f_now)

    grid = np.linspace(bounds[0], bounds[1], scan_points)
    values = [eta(x) for x in grid]
    bracket = None
    for i in range(scan_points - 1):
        if values[i] == 0:
            return done(grid[i], values[i])
        if values[i] * values[i + 1] < 0:
            bracket = (grid[i], grid[i + 1], values[i])
            break
    if bracket is None:
        raise CalibrationError(f"target eta_r={target} not bracketed on {bounds} MHz", trace)
    lo, hi, f_lo = bracket
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = eta(mid)
        if abs(f_mid) <= tol / 4:
            return done(mid, f_mid)
        if f_lo * f_mid < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    if abs(f_mid) <= tol:
        return done(mid, f_mid)
    raise CalibrationError("bisection did not converge", trace)


# --- output ----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, complex):
        return f"{v.real:.10g}{v.imag:+.10g}j"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_report(values, path):
    """Structured ``key = value`` report, keys in insertion order."""
    with open(path, "w") as fh:
        for k, v in values.items():
            fh.write(f"{k} = {_fmt(v)}\n")


def write_fringe_csv(fringe, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase_radians", "fraction", "error"])
        for t in fringe:
            y = tomography.fringe_fraction(t)
            err = np.sqrt(max(y * (1 - y), 0.0) / t.n_trials)
            w.writerow([f"{t.phase:.9f}", f"{y:.9e}", f"{err:.9e}"])


def _estimate_values(prefix, est):
    out = {}
    for k in ("p00", "p01", "p10", "p11", "V", "d", "P", "C"):
        out[f"{prefix}.{k}"] = getattr(est, k)
        if k in est.errors:
            out[f"{prefix}.{k}_err"] = est.errors[k]
    return out


def stage_values(res):
    s = res.stage
    v = {f"{s}.fit.V": res.fit.visibility, f"{s}.fit.V_err": res.fit.error}
    if res.eta_memory is not None:
        v[f"{s}.memory.eta_r"] = res.eta_memory
    v.update(_estimate_values(f"{s}.raw", res.raw))
    v.update(_estimate_values(f"{s}.corrected", res.corrected))
    for k, x in res.bootstrap.items():
        v[f"{s}.bootstrap.{k}_err"] = x
    return v


def _fig2(cfg, out):
    sol = solve_eit(cfg)
    control = cfg.control_waveform()
    # everything leaving before the dark interval counts as leakage
    t_store = sol.gap[0] if sol.gap is not None else control.off_end
    part = partition_efficiencies(sol, t_store, control.switch_on)
    csv_path = out / "fig2_output.csv"
    write_output_csv(sol, csv_path)
    values = {
        "fig2.rabi_mhz_2pi": cfg.control.rabi_mhz_2pi,
        "fig2.eta_r": sol.retrieved,
        "fig2.leakage": part.leak,
        "fig2.between": part.between,
        "fig2.loss": part.loss,
        "fig2.spontaneous_loss": sol.spontaneous_loss,
        "fig2.spin_loss": sol.spin_loss,
        "fig2.stored": sol.stored,
        "fig2.residual": sol.residual,
        "fig2.balance_error": sol.balance_error,
    }
    return [csv_path], values


def _stage(cfg, stage, out, fidelity, eta=None):
    res = measure_stage(cfg, stage, fidelity, eta=eta)
    files = [out / f"fringe_{stage}.csv", out / f"counts_{stage}.csv"]
    write_fringe_csv(res.fringe, files[0])
    counting.write_counts_csv([res.stats, *res.fringe], files[1])
    return res, files


def _header(cfg, scenario, fidelity):
    src = build_heralded_state(cfg.source_params())
    return {
        "scenario": scenario,
        "fidelity": fidelity,
        "master_seed": cfg.run.master_seed,
        "source.p0": src.p0,
        "source.p1": src.p1,
        "source.p2": src.p2,
        "source.w": estimate_w(src) if src.p1 > 0 else float("nan"),
        "metadata.trial_period_ns": cfg.metadata.trial_period_ns,
        "metadata.mot_cycle_ms": cfg.metadata.mot_cycle_ms,
    }


def run_scenario(cfg, scenario=None, out_dir=None, fidelity=None):
    """Run one scenario and write its data files; returns a :class:`ScenarioResult`."""
    cfg.validate()
    scenario = scenario or cfg.run.scenario
    fidelity = fidelity or cfg.run.fidelity
    out = Path(out_dir or cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    values = _header(cfg, scenario, fidelity)
    files = []

    if scenario == "fig2":
        f, v = _fig2(cfg, out)
        files += f
        values.update(v)
    elif scenario in ("fringe_in", "fringe_out"):
        stage = scenario.split("_")[1]
        try:
            res, f = _stage(cfg, stage, out, fidelity)
        except DataInsufficientError as exc:
            _write_partial(exc, out, stage, values)
            raise
        files += f
        values.update(stage_values(res))
    elif scenario == "table1":
        for stage in ("in", "out"):
            res = measure_stage(cfg, stage, fidelity)
            values.update(_estimate_values(f"{stage}.raw", res.raw))
        path = out / "table1.csv"
        _write_table1(values, path)
        files.append(path)
    elif scenario == "full_report":
        f, v = _fig2(cfg, out)
        files += f
        values.update(v)
        eta = v["fig2.eta_r"] if cfg.memory.derive_from_solver else cfg.memory.eta_retrieval
        results = {}
        for stage in ("in", "out"):
            res, f = _stage(cfg, stage, out, fidelity, eta=eta if stage == "out" else None)
            results[stage] = res
            files += f
            values.update(stage_values(res))
        lam, sig = tomography.transfer_ratio(
            results["out"].corrected.C,
            results["in"].corrected.C,
            _c_error(results["out"]),
            _c_error(results["in"]),
        )
        values["transfer.lambda"] = lam
        values["transfer.lambda_err"] = sig
        path = out / "table1.csv"
        _write_table1(values, path)
        files.append(path)
    else:
        raise ValidationError(f"unknown scenario {scenario!r}")

    report = out / f"report_{scenario}.txt"
    write_report(values, report)
    files.append(report)
    return ScenarioResult(scenario, files, values)


def _c_error(res):
    return res.bootstrap.get("C_corrected", res.corrected.errors.get("C", 0.0))


def _write_partial(exc, out, stage, values):
    partial = getattr(exc, "partial", None)
    if partial is not None:
        _, stats, fringe = partial
        counting.write_counts_csv([stats, *fringe], out / f"counts_{stage}.csv")
    values["status"] = "data-insufficient"
    write_report(values, out / f"report_fringe_{stage}.txt")


def _write_table1(values, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "rho_in", "rho_in_err", "rho_out", "rho_out_err"])
        for k in ("p00", "p10", "p01", "p11", "C"):
            row = [k]
            for stage in ("in", "out"):
                row.append(_fmt(values.get(f"{stage}.raw.{k}", float("nan"))))
                row.append(_fmt(values.get(f"{stage}.raw.{k}_err", float("nan"))))
            w.writerow(row)
