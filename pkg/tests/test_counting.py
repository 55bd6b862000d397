import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from eitmemory import ValidationError
from eitmemory.counting import (
    THETA_FRINGE,
    CountsTable,
    DetectorParams,
    MeasurementSetting,
    click_probabilities,
    default_phases,
    derive_seed,
    expected_fringe,
    fringe_scan,
    sample_trials,
    write_counts_csv,
)
from eitmemory.dualrail import DIM, TwoModeFockState, apply_phase, apply_waveplate
from eitmemory.tomography import fit_visibility

IDEAL = DetectorParams()


def random_state(rng, max_photons=2):
    g = rng.normal(size=(DIM, 3)) + 1j * rng.normal(size=(DIM, 3))
    if max_photons < 2:
        g[3:] = 0
    rho = g @ g.conj().T
    return TwoModeFockState(rho / np.trace(rho).real)


def test_vacuum_never_clicks():
    p = click_probabilities(TwoModeFockState.vacuum(), MeasurementSetting(), IDEAL)
    np.testing.assert_allclose(p, [1, 0, 0, 0])


@pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 9))
def test_bell_fringe(phi):
    p = click_probabilities(TwoModeFockState.bell(0.0), MeasurementSetting(THETA_FRINGE, phi), IDEAL)
    assert p[1] == pytest.approx((1 + np.cos(phi)) / 2, abs=1e-12)
    assert p[2] == pytest.approx((1 - np.cos(phi)) / 2, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_click_probabilities_match_oracle(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng)
    setting = MeasurementSetting(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
    det = DetectorParams(rng.uniform(0.1, 1), rng.uniform(0.1, 1))
    rotated = apply_waveplate(apply_phase(s, setting.phi_rel), setting.theta_v)
    ref = oracles.click_probabilities(rotated.rho, det.eta_d1, det.eta_d2)
    np.testing.assert_allclose(click_probabilities(s, setting, det), ref, atol=1e-12)


def test_two_photons_on_one_detector_never_both():
    s = TwoModeFockState.from_pure({(2, 0): 1.0})
    p = click_probabilities(s, MeasurementSetting(0.0), DetectorParams(0.5, 0.5))
    np.testing.assert_allclose(p, [0.25, 0.75, 0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0, 1))
def test_linear_in_state(seed, lam):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng), random_state(rng)
    mix = TwoModeFockState(lam * a.rho + (1 - lam) * b.rho)
    det = DetectorParams(0.7, 0.4, 0.01, 0.02)
    setting = MeasurementSetting(0.3, 1.0)
    expected = lam * click_probabilities(a, setting, det) + (1 - lam) * click_probabilities(b, setting, det)
    np.testing.assert_allclose(click_probabilities(mix, setting, det), expected, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ideal_stats_setting_reads_populations(seed):
    s = random_state(np.random.default_rng(seed), max_photons=1)
    p = click_probabilities(s, MeasurementSetting(0.0), IDEAL)
    np.testing.assert_allclose(p, [s.p00, s.p10, s.p01, 0.0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dark=st.floats(0.0, 0.2))
def test_dark_counts_only_add_clicks(seed, dark):
    s = random_state(np.random.default_rng(seed))
    setting = MeasurementSetting(THETA_FRINGE, 0.7)
    base = click_probabilities(s, setting, DetectorParams(0.6, 0.6))
    noisy = click_probabilities(s, setting, DetectorParams(0.6, 0.6, dark, dark))
    # marginal click probability of each detector can only grow
    assert noisy[1] + noisy[3] >= base[1] + base[3] - 1e-12
    assert noisy[2] + noisy[3] >= base[2] + base[3] - 1e-12
    assert noisy[3] >= base[3] - 1e-12


def test_sample_deterministic_pattern():
    t = sample_trials([1, 0, 0, 0], 100, 3)
    assert (t.n_none, t.n_d1, t.n_d2, t.n_both) == (100, 0, 0, 0)


def test_sample_concentration():
    t = sample_trials([0.5, 0.5, 0, 0], 10**6, 11)
    assert abs(t.n_d1 / 1e6 - 0.5) < 1.5e-3  # 3 sigma of a binomial


def test_sample_is_reproducible():
    a = sample_trials([0.9, 0.05, 0.04, 0.01], 5000, 42)
    b = sample_trials([0.9, 0.05, 0.04, 0.01], 5000, 42)
    assert a == b
    assert sample_trials([0.9, 0.05, 0.04, 0.01], 5000, 43) != a


def test_sample_rejects_bad_vector():
    with pytest.raises(ValidationError):
        sample_trials([0.5, 0.6, 0, 0], 10, 0)
    with pytest.raises(ValidationError):
        CountsTable(10, 5, 4, 0, 0)


def test_fringe_points_independent_of_order():
    s = TwoModeFockState.bell(0.0)
    phases = default_phases(8)
    full = fringe_scan(s, phases, DetectorParams(0.3, 0.3), 1000, 7)
    # the point at index 5 alone, drawn from its derived stream
    p = click_probabilities(s, MeasurementSetting(THETA_FRINGE, phases[5]), DetectorParams(0.3, 0.3))
    single = sample_trials(p, 1000, derive_seed(7, 0, 5), phase=float(phases[5]), setting_id="fringe")
    assert full[5] == single


def test_ideal_bell_fringe_visibility_one():
    fringe = expected_fringe(TwoModeFockState.bell(0.0), default_phases(), IDEAL, 1000)
    assert fit_visibility(fringe).visibility == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_noiseless_visibility_identity(seed):
    s = random_state(np.random.default_rng(seed), max_photons=1)
    fringe = expected_fringe(s, default_phases(), DetectorParams(0.3, 0.8), 10_000)
    assert fit_visibility(fringe).visibility == pytest.approx(s.visibility, abs=1e-9)


def test_counts_csv(tmp_path):
    tables = fringe_scan(TwoModeFockState.bell(0.0), default_phases(4), IDEAL, 10, 1)
    path = tmp_path / "c.csv"
    write_counts_csv(tables, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["setting_id", "phase_radians", "n_trials", "n_none", "n_d1", "n_d2", "n_both"]
    assert len(rows) == 5
    assert all(sum(int(x) for x in r[3:]) == int(r[2]) for r in rows[1:])
