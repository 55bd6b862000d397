"""Acceptance criteria 1-8, one test each.

Every test records a ``PASS``/``FAIL`` line (shown in the pytest terminal
summary and printed when the module runs as a script) before asserting.
"""

import re
import time
from dataclasses import replace
from math import exp, pi

import numpy as np
import pytest

from conftest import ACCEPTANCE
from eitmemory.cli import main
from eitmemory.config import ExperimentConfig
from eitmemory.counting import default_phases, fringe_scan
from eitmemory.dualrail import (
    DIM,
    OpticalElementSetting,
    SingleModePhotonStats,
    TwoModeFockState,
    apply_dephasing,
    apply_element,
    apply_loss,
    split_single_photon,
)
from eitmemory.eitsolver import (
    ControlWaveform,
    PulseEnvelope,
    SolverGrid,
    partition_efficiencies,
    slow_light_delay,
    solve_maxwell_bloch,
)
from eitmemory.memory import MemoryChannelParams, apply_memory
from eitmemory.orchestrator import run_scenario, stage_state
from eitmemory.tomography import assemble_rho, concurrence, fit_visibility, transfer_ratio


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def read_report(path):
    out = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


def test_1_eit_efficiency(tmp_path):
    start = time.perf_counter()
    code = main(["simulate-eit", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - start
    eta = float(read_report(tmp_path / "report_fig2.txt")["fig2.eta_r"])
    ok = code == 0 and 0.12 <= eta <= 0.22 and elapsed < 30
    assert record(1, ok, f"eta_r = {eta:.4f} in [0.12, 0.22], runtime {elapsed:.1f} s < 30 s")


def test_2_beer_law():
    cfg = ExperimentConfig()
    start = time.perf_counter()
    # spectrally narrow pulse on the default spatial and temporal grid
    sol = solve_maxwell_bloch(
        cfg.medium_params(), ControlWaveform(0.0), PulseEnvelope.gaussian(1e-6), replace(cfg.solver_grid(), tail=0.0)
    )
    elapsed = time.perf_counter() - start
    ratio = sol.transmission / exp(-15)
    ok = 0.5 <= ratio <= 2.0 and elapsed < 10
    assert record(2, ok, f"T = {sol.transmission:.3e}, T / e^-15 = {ratio:.3f}, runtime {elapsed:.1f} s < 10 s")


def test_3_conservation():
    cfg = ExperimentConfig()
    cfg = replace(cfg, medium=replace(cfg.medium, lossless=True))
    sol = solve_maxwell_bloch(cfg.medium_params(), cfg.control_waveform(), cfg.pulse_envelope(), cfg.solver_grid())
    part = partition_efficiencies(sol, sol.gap[0], cfg.control_waveform().switch_on)
    total = part.leak + part.between + part.retrieved + part.residual
    ok = abs(total - 1) <= 1e-6 and abs(sol.balance_error) <= 1e-6
    assert record(3, ok, f"leak + between + retrieved + residual - 1 = {total - 1:.2e}")


def test_4_concurrence_arithmetic():
    rows_in = {"p00": 0.9800, "p10": 1.043e-2, "p01": 0.957e-2, "p11": 8e-6}
    rows_out = {"p00": 0.99625, "p10": 2.09e-3, "p01": 1.67e-3, "p11": 2e-7}
    c_in = concurrence(assemble_rho(rows_in, 0.93))
    c_out = concurrence(assemble_rho(rows_out, 0.91))
    ok = abs(c_in - 1.30e-2) <= 0.09e-2 and abs(c_out - 2.53e-3) <= 0.5e-3
    assert record(4, ok, f"C_in = {c_in:.4e} (1.30e-2 +- 0.09e-2), C_out = {c_out:.4e} (2.53e-3 +- 0.5e-3)")


def test_5_corrected_chain(tmp_path):
    cfg = ExperimentConfig()
    v = run_scenario(cfg, "full_report", tmp_path, fidelity="analytic").values
    c_in, c_out, lam = v["in.corrected.C"], v["out.corrected.C"], v["transfer.lambda"]
    ok = 0.08 <= c_in <= 0.12 and 0.013 <= c_out <= 0.023 and 0.15 <= lam <= 0.25
    assert record(
        5, ok, f"C_in = {c_in:.4f} in [0.08, 0.12], C_out = {c_out:.4f} in [0.013, 0.023], lambda = {lam:.3f} in [0.15, 0.25]"
    )


def test_6_sampled_visibility():
    cfg = ExperimentConfig()
    phases = default_phases(cfg.statistics.fringe_points)
    runs = 50
    hits = {"in": 0, "out": 0}
    bars = {"in": (0.93, 0.04, cfg.statistics.heralds_per_point_in), "out": (0.91, 0.03, cfg.statistics.heralds_per_point_out)}
    for stage, (centre, bar, n) in bars.items():
        state = stage_state(cfg, stage, eta=0.17)
        det = cfg.detector_params(stage)
        for seed in range(runs):
            v = fit_visibility(fringe_scan(state, phases, det, n, seed)).visibility
            hits[stage] += abs(v - centre) <= bar
    ok = all(h >= 0.9 * runs for h in hits.values())
    assert record(6, ok, f"V within error bars in {hits['in']}/{runs} (in) and {hits['out']}/{runs} (out) runs, need >= 45")


def _random_state(rng, max_photons=2):
    g = rng.normal(size=(DIM, rng.integers(1, DIM + 1)))
    g = g + 1j * rng.normal(size=g.shape)
    if max_photons < 2:
        g[3:] = 0
    rho = g @ g.conj().T
    return TwoModeFockState(rho / np.trace(rho).real)


def _random_element(rng):
    kind = rng.integers(5)
    if kind == 0:
        return lambda s: apply_element(s, OpticalElementSetting("waveplate", angle=rng.uniform(-pi, pi)))
    if kind == 1:
        return lambda s: apply_element(s, OpticalElementSetting("phase", phase=rng.uniform(-pi, pi), rail="LR"[rng.integers(2)]))
    if kind == 2:
        return lambda s: apply_element(s, OpticalElementSetting("displacer-split"))
    if kind == 3:
        return lambda s: apply_element(s, OpticalElementSetting("displacer-combine"))
    return lambda s: apply_loss(s, rng.uniform(), "LR"[rng.integers(2)])


def test_7_property_suites():
    rng = np.random.default_rng(7)
    # trace and positivity through random element chains
    worst_trace = worst_eig = 0.0
    for _ in range(1000):
        s = _random_state(rng)
        for _ in range(rng.integers(1, 7)):
            s = _random_element(rng)(s)
            worst_trace = max(worst_trace, abs(s.trace() - 1))
            worst_eig = min(worst_eig, s.min_eigenvalue())
    chains_ok = worst_trace <= 1e-10 and worst_eig >= -1e-10

    # balanced loss keeps 2|d| / (p01 + p10) in the one-photon sector
    worst_vis = 0.0
    for _ in range(200):
        s = _random_state(rng, max_photons=1)
        eta = rng.uniform(0.001, 1)
        out = apply_loss(apply_loss(s, eta, "L"), eta, "R")
        worst_vis = max(worst_vis, abs(out.visibility - s.visibility))
    vis_ok = worst_vis <= 1e-10

    # lambda = eta for channels without a two-photon part
    worst_lam = 0.0
    for _ in range(200):
        p1, v, eta = rng.uniform(0.01, 1), rng.uniform(0.05, 1), rng.uniform(0.01, 1)
        s = apply_dephasing(split_single_photon(SingleModePhotonStats(1 - p1, p1, 0.0)), v)
        out = apply_memory(s, MemoryChannelParams(eta, tau=0.0))
        c = [concurrence(assemble_rho({"p00": x.p00, "p01": x.p01, "p10": x.p10, "p11": x.p11}, x.visibility)) for x in (s, out)]
        worst_lam = max(worst_lam, abs(transfer_ratio(c[1], c[0])[0] - eta))
    lam_ok = worst_lam <= 1e-9

    # group delay against L / v_g with v_g = c cos^2(theta)
    cfg = ExperimentConfig()
    medium = cfg.medium_params()
    om = 2 * pi * 10e6
    sol = solve_maxwell_bloch(medium, ControlWaveform(om), PulseEnvelope.gaussian(200e-9), SolverGrid(dt=1e-9, tail=600e-9))
    delay_err = sol.group_delay() / slow_light_delay(om, medium) - 1
    delay_ok = abs(delay_err) < 0.05

    # grid halving
    args = medium, cfg.control_waveform(), cfg.pulse_envelope()
    coarse = solve_maxwell_bloch(*args, SolverGrid(nz=100, dt=0.25e-9)).retrieved
    fine = solve_maxwell_bloch(*args, SolverGrid(nz=200, dt=0.125e-9)).retrieved
    grid_err = fine / coarse - 1
    grid_ok = abs(grid_err) < 0.01

    ok = chains_ok and vis_ok and lam_ok and delay_ok and grid_ok
    assert record(
        7,
        ok,
        f"trace err {worst_trace:.1e}, min eig {worst_eig:.1e}; visibility err {worst_vis:.1e}; "
        f"|lambda - eta| {worst_lam:.1e}; group delay {delay_err:+.2%}; grid halving {grid_err:+.3%}",
    )


def test_8_determinism(tmp_path):
    args = ["report", "--seed", "20071"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = names == sorted(p.name for p in (tmp_path / "b").iterdir()) and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names
    )
    assert record(8, same, f"{len(names)} output files byte-identical across two report runs")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
