import math

import numpy as np
import pytest

from qkr.core import GaussianSpec, Lattice, ResonanceParams, gaussian_state
from qkr.experiments import (LinearFit, ResourceError, auto_half_width, default_window,
                             figure1_data, fit_group_velocity, nonlinearity,
                             period_pi_mismatch, run_moment_series, snapshot_distributions,
                             sweep_kappa, sweep_theta)
from qkr.observables import MomentEntry, MomentSeries
from qkr.theory import drift_rate, gaussian_moments, predict_m1, predict_m2

KAPPA = 0.25
VG_PRIMARY = -0.25 * math.exp(-1 / 8)


def line_series(slope, intercept, n_max, noise=None):
    series = MomentSeries()
    for n in range(n_max + 1):
        m1 = intercept + slope * n + (noise[n] if noise is not None else 0.0)
        series.append(MomentEntry(n, m1, m1 * m1 + 1, 1.0, 1.0, 0.0))
    return series


def test_fit_exact_line():
    fit = fit_group_velocity(line_series(-0.2, 3.0, 50), (0, 50))
    assert isinstance(fit, LinearFit)
    assert fit.slope == pytest.approx(-0.2, abs=1e-14)
    assert fit.intercept == pytest.approx(3.0, abs=1e-12)
    assert fit.residual_rms < 1e-13 and fit.stderr_slope < 1e-13
    assert fit.window == (0, 50)


def test_fit_stderr_matches_ols_formula(rng):
    noise = rng.standard_normal(101)
    fit = fit_group_velocity(line_series(0.1, 0.0, 100, noise), (0, 100))
    t = np.arange(101.0)
    resid = 0.1 * t + noise - (fit.intercept + fit.slope * t)
    s2 = np.sum(resid ** 2) / (len(t) - 2)
    assert fit.stderr_slope == pytest.approx(math.sqrt(s2 / np.sum((t - t.mean()) ** 2)), rel=1e-10)
    assert fit.residual_rms == pytest.approx(math.sqrt(np.mean(resid ** 2)), rel=1e-12)


def test_fit_window_is_clamped():
    fit = fit_group_velocity(line_series(1.0, 0.0, 40), (-100, 1000))
    assert fit.window == (0, 40)
    assert fit_group_velocity(line_series(1.0, 0.0, 40)).window == default_window(40)


def test_fit_rejects_short_windows():
    with pytest.raises(ValueError, match="points"):
        fit_group_velocity(line_series(1.0, 0.0, 40), (10, 15))
    with pytest.raises(ValueError):
        fit_group_velocity(MomentSeries())


def test_primary_series_is_exactly_linear():
    spec = GaussianSpec(1.0, math.pi / 2)
    series = run_moment_series(spec, ResonanceParams(1, 1, KAPPA), 300)
    fit = fit_group_velocity(series)
    init = gaussian_state(Lattice.symmetric(30), spec)
    assert fit.slope == pytest.approx(KAPPA * drift_rate(init), abs=1e-6)
    assert fit.slope == pytest.approx(-0.2206, abs=1e-4)


def test_secondary_series_drifts_slowly_and_oscillates():
    series = run_moment_series(GaussianSpec(1.0, math.pi / 2), ResonanceParams(1, 3, KAPPA), 600)
    fit = fit_group_velocity(series)
    assert abs(fit.slope) < KAPPA / 20
    # the "average linear behavior" hides oscillations much larger than the drift per step
    assert fit.residual_rms > 10 * abs(fit.slope)


def test_series_zero_steps():
    series = run_moment_series(GaussianSpec(1.0, 0.3), ResonanceParams(1, 3, KAPPA), 0)
    assert len(series) == 1 and series[0].n == 0
    assert series[0].norm == pytest.approx(1.0, abs=1e-14)


def test_series_primary_matches_exact_sums():
    spec = GaussianSpec(1.0, math.pi / 2)
    series = run_moment_series(spec, ResonanceParams(1, 1, KAPPA), 500, record_every=25)
    assert series.n.tolist() == list(range(0, 501, 25))
    init = gaussian_state(Lattice.symmetric(30), spec)
    last = series[-1]
    assert last.m1 == pytest.approx(-110.3, rel=0.01)
    want_var = predict_m2(init, KAPPA, 500) - predict_m1(init, KAPPA, 500) ** 2
    assert last.variance == pytest.approx(want_var, rel=1e-9)
    # (kappa n)^2/2 [1 + e^{-1/2} - 2 e^{-1/4}] + sigma0^2 at sigma0 = 1
    assert last.variance == pytest.approx(
        125 ** 2 / 2 * (1 + math.exp(-0.5) - 2 * math.exp(-0.25)) + 1, rel=1e-6)
    assert max(e.tail_mass for e in series) < 1e-20


def test_series_records_final_step_off_stride():
    series = run_moment_series(GaussianSpec(1.0), ResonanceParams(1, 1, KAPPA), 23, record_every=10)
    assert series.n.tolist() == [0, 10, 20, 23]


def test_series_antiresonance_second_moment_revives():
    series = run_moment_series(GaussianSpec(2.0, 0.7), ResonanceParams(1, 2, 1.3), 40)
    m2 = series.m2
    np.testing.assert_allclose(m2[::2], m2[0], rtol=1e-12)
    assert np.max(np.abs(m2[1::2] - m2[0])) > 1e-3


def test_series_resource_guard():
    with pytest.raises(ResourceError):
        run_moment_series(GaussianSpec(1.0), ResonanceParams(1, 1, 10.0), 10_000, max_sites=5000)


def test_series_spectral_method_agrees():
    spec = GaussianSpec(1.0, 1.0)
    params = ResonanceParams(1, 3, KAPPA)
    a = run_moment_series(spec, params, 100)
    b = run_moment_series(spec, params, 100, method="spectral")
    np.testing.assert_allclose(a.m1, b.m1, rtol=0, atol=1e-10)
    np.testing.assert_allclose(a.m2, b.m2, rtol=1e-12)


def test_auto_half_width_meets_minimum():
    for sigma0, kappa, n in [(1.0, 0.25, 500), (10.0, 0.4, 600), (3.0, 0.0, 100)]:
        spec = GaussianSpec(sigma0)
        assert auto_half_width(spec, kappa, n) >= math.ceil(n * kappa) + 6 * sigma0 + 50


# ----------------------------------------------------------- sweeps

def test_sweep_theta_primary():
    recs = sweep_theta(ResonanceParams(1, 1, KAPPA), 1.0, [0.0, math.pi / 2], n_steps=200)
    assert [r.value for r in recs] == [0.0, math.pi / 2]
    assert recs[0].vg == pytest.approx(0.0, abs=1e-12)
    assert recs[1].vg == pytest.approx(VG_PRIMARY, abs=1e-6)
    assert recs[1].window == (40, 200)


def test_sweep_records_rerun_identically():
    recs = sweep_theta(ResonanceParams(1, 3, KAPPA), 1.0, [0.4, -1.9], n_steps=150)
    for r in recs:
        again = r.rerun()
        assert abs(again.vg - r.vg) <= 1e-12
        assert again == r


def test_sweep_parallel_matches_serial():
    grid = np.linspace(-math.pi, math.pi, 5)
    serial = sweep_theta(ResonanceParams(1, 3, KAPPA), 1.0, grid, n_steps=120)
    parallel = sweep_theta(ResonanceParams(1, 3, KAPPA), 1.0, grid, n_steps=120, workers=3)
    assert serial == parallel


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        sweep_theta(ResonanceParams(1, 1, KAPPA), 1.0, [])
    with pytest.raises(ValueError):
        sweep_kappa(2, 4, 1.0, 0.0, [0.1])


def test_sweep_kappa_zero_kick_does_not_move():
    for p, q in [(1, 1), (1, 3)]:
        rec, = sweep_kappa(p, q, 1.0, math.pi / 4, [0.0], n_steps=100)
        assert rec.vg == pytest.approx(0.0, abs=1e-14)


def test_sweep_kappa_primary_is_linear():
    grid = [0.1, 0.2, 0.3, 0.45]
    recs = sweep_kappa(1, 1, 1.0, math.pi / 4, grid, n_steps=200)
    slopes = [r.vg / r.value for r in recs]
    want = -math.sin(math.pi / 4) * math.exp(-1 / 8)
    assert np.allclose(slopes, want, atol=1e-6)


@pytest.mark.parametrize("sigma0", [1.0, 3.0, 10.0])
def test_primary_sweep_matches_squared_closed_form(sigma0):
    grid = [-2.0, math.pi / 4, math.pi / 2]
    for r in sweep_theta(ResonanceParams(1, 1, KAPPA), sigma0, grid, n_steps=200):
        want = gaussian_moments(GaussianSpec(sigma0, r.value), KAPPA, 200).vg
        assert r.vg == pytest.approx(want, rel=5e-3)


def test_nonlinearity_metric():
    k = np.linspace(0.05, 0.5, 10)
    assert nonlinearity(k, -3 * k) == pytest.approx(0.0, abs=1e-15)
    assert nonlinearity(k, k ** 2) > 0.2


def test_period_pi_mismatch_metric():
    theta = np.linspace(-math.pi, math.pi, 33)
    assert period_pi_mismatch(theta, np.sin(2 * theta)) < 1e-12
    assert period_pi_mismatch(theta, np.sin(theta)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        period_pi_mismatch([0.0, 1.0], [1.0, 2.0])


# ----------------------------------------------------------- figure data

def test_figure1_values():
    rows = figure1_data([1.0, 10.0, 100.0], [0.0, math.pi / 4, math.pi / 2])
    table = {(r.sigma0, r.theta0): r.coefficient for r in rows}
    assert len(rows) == 9
    assert table[(1.0, math.pi / 2)] == pytest.approx(1 + math.exp(-0.5) - 2 * math.exp(-0.25),
                                                      abs=1e-15)
    assert table[(1.0, math.pi / 2)] == pytest.approx(0.0489290935698237, abs=1e-15)
    for s in (1.0, 10.0, 100.0):
        assert table[(s, math.pi / 4)] == pytest.approx(1 - math.exp(-1 / (4 * s * s)), abs=1e-15)
    assert table[(100.0, 0.0)] < 1e-4 < table[(1.0, 0.0)]


def test_figure1_printed_mode():
    rows = figure1_data([10.0], [math.pi / 4], "paper_printed")
    assert rows[0].coefficient == pytest.approx(1 - math.exp(-1 / 40), abs=1e-15)


# ----------------------------------------------------------- snapshots

def test_snapshots():
    spec = GaussianSpec(1.0, math.pi / 2)
    snaps = snapshot_distributions(spec, ResonanceParams(1, 1, KAPPA), [0, 250, 500])
    assert [s.time for s in snaps] == [0, 250, 500]
    first, _, last = snaps
    assert first.l[np.argmax(first.p)] == 0
    mean = float(np.sum(last.l * last.p))
    assert mean == pytest.approx(-110.3, rel=0.01)
    var = float(np.sum(last.l ** 2 * last.p)) - mean ** 2
    assert var == pytest.approx(125 ** 2 / 2 * 0.0489290935698237 + 1, rel=1e-6)


@pytest.mark.parametrize("pq", [(1, 1), (1, 3)])
def test_snapshots_mirror_under_theta_flip(pq):
    params = ResonanceParams(*pq, KAPPA)
    plus = snapshot_distributions(GaussianSpec(1.0, math.pi / 2), params, [0, 60])
    minus = snapshot_distributions(GaussianSpec(1.0, -math.pi / 2), params, [0, 60])
    for a, b in zip(plus, minus):
        np.testing.assert_allclose(a.p, b.p[::-1], rtol=0, atol=1e-12)


def test_snapshots_reject_bad_times():
    spec, params = GaussianSpec(1.0), ResonanceParams(1, 1, KAPPA)
    for times in ([250, 0], [0, 0], [-1, 3], []):
        with pytest.raises(ValueError):
            snapshot_distributions(spec, params, times)
