import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atomtronics.analysis import (
    FitError,
    ImbalanceTrace,
    RadiusSeries,
    RclModel,
    UndefinedImbalanceError,
    fit_gaussian_radius,
    fit_temperature,
    fit_two_regime,
    fringe_phase,
    imbalance,
    phase_drift_series,
    rcl_trace,
    region_mask,
    reservoir_counts,
    unwrap,
    wrap_phase,
)
from atomtronics.core import K_B, M_RB87, DensityMap, Grid2D, InvalidInputError
from atomtronics.trap import TrapConfig, synthetic_fringe_image

SLOPE_8NK = K_B * 8e-9 / M_RB87


def _gaussian_density(sigma, pitch=1e-6, size=120e-6, center=(3e-6, -2e-6)):
    g = Grid2D.centered(size, size, pitch)
    x, y = g.meshgrid()
    return g, np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * sigma**2))


def _two_regime_trace(t_break=0.04, tau=0.08, omega=40.0, amp=0.6, phase=0.3, slope=-5.0, n=61):
    t = np.linspace(0.0, 0.3, n)
    y_b = 1.0 + slope * t_break
    offset = y_b - amp * math.cos(phase)
    s = t - t_break
    tail = amp * np.exp(-s / tau) * np.cos(omega * s + phase) + offset
    return t, np.where(t < t_break, 1.0 + slope * t, tail)


# radius and temperature

def test_radius_of_exact_gaussian():
    g, v = _gaussian_density(10e-6)
    fit = fit_gaussian_radius(DensityMap(g, v))
    assert fit.radius == pytest.approx(10e-6, rel=1e-3)
    assert fit.center == pytest.approx((3e-6, -2e-6), abs=1e-9)


def test_radius_with_uniform_background():
    g, v = _gaussian_density(10e-6)
    fit = fit_gaussian_radius(DensityMap(g, v + 0.05))
    assert fit.radius == pytest.approx(10e-6, rel=0.02)
    assert fit.background == pytest.approx(0.05, rel=0.01)


def test_radius_of_degenerate_density_fails():
    g = Grid2D.centered(40e-6, 40e-6, 1e-6)
    v = np.zeros(g.shape)
    v[20, 20] = v[20, 21] = 1.0
    with pytest.raises(FitError):
        fit_gaussian_radius(DensityMap(g, v))
    with pytest.raises(FitError):
        fit_gaussian_radius(DensityMap(g, np.zeros(g.shape)))


def test_slope_for_eight_nanokelvin():
    # k_B * 8 nK / m by hand
    assert SLOPE_8NK == pytest.approx(7.66e-7, rel=2e-3)


@settings(max_examples=50)
@given(st.floats(1.0, 50.0), st.floats(0.1e-6, 20e-6))
def test_temperature_from_exact_ballistic_law(temp_nk, r0):
    t = np.linspace(0.008, 0.1, 24)
    slope = K_B * temp_nk * 1e-9 / M_RB87
    r = np.sqrt(r0**2 + slope * t**2)
    fit = fit_temperature(RadiusSeries(t, r, 1e-7 * np.ones_like(t)))
    assert fit.temperature == pytest.approx(temp_nk * 1e-9, rel=1e-8)


def test_temperature_from_noisy_series_within_error():
    rng = np.random.default_rng(0)
    t = np.linspace(0.008, 0.1, 24)
    r = np.sqrt(1e-12 + SLOPE_8NK * t**2)
    err = 0.01 * r
    fit = fit_temperature(RadiusSeries(t, r + err * rng.standard_normal(t.size), err))
    assert abs(fit.temperature - 8e-9) <= 3 * fit.temperature_err
    temperature, temperature_err = fit
    assert temperature == fit.temperature and temperature_err > 0


def test_constant_radius_gives_zero_temperature():
    fit = fit_temperature(RadiusSeries([0.01, 0.02, 0.03, 0.04], [5e-6] * 4))
    assert abs(fit.temperature) < 1e-15


def test_shrinking_cloud_is_flagged():
    t = np.array([0.01, 0.02, 0.03, 0.04])
    fit = fit_temperature(RadiusSeries(t, 10e-6 - 1e-4 * t))
    assert fit.temperature < 0 and "negative_slope" in fit.flags


def test_radius_series_validation():
    with pytest.raises(InvalidInputError):
        RadiusSeries([0.0, 0.0, 1.0], [1.0, 1.0, 1.0])
    with pytest.raises(InvalidInputError):
        RadiusSeries([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(InvalidInputError):
        fit_temperature(RadiusSeries([0.0, 1.0], [1.0, 2.0]))


# imbalance

def _two_cells():
    g = Grid2D(2, 1, 1e-6)
    return g, np.array([[True, False]]), np.array([[False, True]])


@pytest.mark.parametrize("counts,expected", [((5.0, 0.0), 1.0), ((2.0, 2.0), 0.0), ((300.0, 100.0), 0.5)])
def test_imbalance_examples(counts, expected):
    g, left, right = _two_cells()
    assert imbalance(DensityMap(g, np.array([counts])), left, right) == expected


def test_imbalance_of_empty_reservoirs_is_undefined():
    g, left, right = _two_cells()
    with pytest.raises(UndefinedImbalanceError):
        imbalance(DensityMap(g, np.zeros((1, 2))), left, right)


def test_overlapping_masks_rejected():
    g, left, _ = _two_cells()
    with pytest.raises(InvalidInputError):
        reservoir_counts(DensityMap(g, np.ones((1, 2))), left, left)


densities = arrays(np.float64, (6, 8), elements=st.one_of(st.just(0.0), st.floats(1e-3, 1e6)))


@settings(max_examples=1000)
@given(densities)
def test_imbalance_antisymmetric(values):
    g = Grid2D(8, 6, 1e-6)
    left = region_mask({"kind": "halfplane", "side": "left", "x0": 3.6e-6}, g)
    right = ~left
    if values[left].sum() + values[right].sum() == 0:
        return
    d = DensityMap(g, values)
    assert imbalance(d, left, right) == -imbalance(d, right, left)


@settings(max_examples=1000)
@given(densities, st.floats(1e-6, 1e6), st.integers(-20, 20))
def test_imbalance_scale_invariant(values, c, k):
    g = Grid2D(8, 6, 1e-6)
    left = region_mask({"kind": "halfplane", "side": "left", "x0": 3.6e-6}, g)
    if values.sum() == 0:
        return
    base = imbalance(DensityMap(g, values), left, ~left)
    # power-of-two scaling is exact in binary floating point
    assert imbalance(DensityMap(g, values * 2.0**k), left, ~left) == base
    assert imbalance(DensityMap(g, values * c), left, ~left) == pytest.approx(base, rel=1e-14, abs=1e-14)


def test_region_masks():
    g = Grid2D.centered(20e-6, 20e-6, 1e-6)
    annulus = region_mask({"kind": "annulus", "r_inner": 3e-6, "r_outer": 6e-6}, g)
    outside = region_mask({"kind": "annulus", "r_inner": 3e-6, "r_outer": 6e-6, "invert": True}, g)
    assert np.array_equal(annulus, ~outside)
    left_disk = region_mask({"kind": "disk", "radius": 5e-6,
                             "within": {"kind": "halfplane", "side": "left"}}, g)
    assert not np.any(left_disk[:, g.nx // 2:])
    with pytest.raises(InvalidInputError):
        region_mask({"kind": "blob"}, g)


# RCL model and two-regime fit

def test_lossless_rcl_zero_crossings():
    model = RclModel(L=2.0, C=0.5)
    w = model.omega
    for k in range(5):
        t0 = (2 * k + 1) * math.pi / (2 * w)
        ts = np.array([t0 * (1 - 1e-9), t0 * (1 + 1e-9)])
        y = rcl_trace(model, ts).dn
        assert y[0] * y[1] < 0


def test_critical_rcl_never_crosses_zero():
    model = RclModel(L=1.0, C=1.0, R=2.0)
    trace = rcl_trace(model, np.linspace(0, 50, 2001))
    assert trace.metadata["regime"] == "critical"
    assert np.all(trace.dn > 0)


def test_damped_rcl_matches_closed_form():
    t = np.linspace(0, 30, 301)
    y = rcl_trace(RclModel(L=1.0, C=1.0, R=0.2), t).dn
    wd = math.sqrt(1 - 0.01)
    expect = np.exp(-0.1 * t) * (np.cos(wd * t) + 0.1 / wd * np.sin(wd * t))
    np.testing.assert_allclose(y, expect, atol=1e-12)


def test_two_regime_recovers_synthetic_parameters():
    t, y = _two_regime_trace()
    fit = fit_two_regime(ImbalanceTrace(t, y))
    assert fit.t_break == pytest.approx(0.04, abs=t[1] - t[0])
    assert fit.tau == pytest.approx(0.08, rel=0.05)
    assert fit.omega == pytest.approx(40.0, rel=0.05)
    assert fit.ballistic_slope == pytest.approx(-5.0, rel=0.05)
    assert not fit.flags


def test_two_regime_breakpoint_on_rcl_with_linear_lead():
    model = RclModel(L=1.0, C=1.0 / 1600.0, R=1.0 / 80.0)
    t = np.linspace(0.0, 0.3, 121)
    t_break = t[24]
    tail = rcl_trace(RclModel(model.L, model.C, model.R, dn0=0.7), np.clip(t - t_break, 0, None)).dn
    y = np.where(t < t_break, 0.7 + 3.0 * (t_break - t), tail)
    fit = fit_two_regime(ImbalanceTrace(t, y))
    assert abs(fit.t_break - t_break) <= t[1] - t[0]


def test_two_regime_recovers_circuit_frequency():
    model = RclModel(L=1.0, C=1.0 / 1600.0, R=2.5)  # omega = 40 rad/s
    t = np.linspace(0.0, 0.3, 121)
    fit = fit_two_regime(rcl_trace(model, t))
    assert fit.tau > 0
    assert fit.omega_natural == pytest.approx(model.omega, rel=0.01)


def test_pure_linear_trace_is_single_regime():
    t = np.linspace(0.0, 0.3, 40)
    fit = fit_two_regime(ImbalanceTrace(t, 1.0 - 2.0 * t))
    assert "single_regime" in fit.flags
    assert fit.t_break == t[-1] and math.isinf(fit.tau)
    assert fit.to_dict()["tau_s"] is None


def test_two_regime_needs_enough_samples():
    with pytest.raises(InvalidInputError):
        fit_two_regime(ImbalanceTrace(np.arange(10.0), np.zeros(10)))


# fringes

def _fringe_grid():
    return Grid2D(8, 128, 0.25e-6, (0.0, -16e-6))


def test_fringe_phase_example():
    cfg, g = TrapConfig(), _fringe_grid()
    fit = fringe_phase(synthetic_fringe_image(cfg, 0.3, 0.0, g), cfg.fringe_spacing, g.y)
    assert fit.phase == pytest.approx(0.3, abs=0.005)
    assert fit.amplitude == pytest.approx(1.0) and not fit.low_contrast


def test_fringe_phase_is_2pi_periodic():
    cfg, g = TrapConfig(), _fringe_grid()
    a = fringe_phase(synthetic_fringe_image(cfg, 0.3, 0.0, g), cfg.fringe_spacing, g.y)
    b = fringe_phase(synthetic_fringe_image(cfg, 0.3 + 2 * math.pi, 0.0, g), cfg.fringe_spacing, g.y)
    assert a.phase == pytest.approx(b.phase, abs=1e-12)


def test_fringe_phase_needs_three_periods():
    cfg = TrapConfig()
    g = Grid2D(4, 40, 0.25e-6)
    with pytest.raises(InvalidInputError):
        fringe_phase(synthetic_fringe_image(cfg, 0.0, 0.0, g), cfg.fringe_spacing, g.y)


def test_flat_image_is_low_contrast():
    g = _fringe_grid()
    assert fringe_phase(np.ones(g.shape), 8e-6, g.y).low_contrast


def test_wrap_phase_range():
    assert wrap_phase(-math.pi) == math.pi
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def _drift_images(phases, noise=0.0, seed=0):
    cfg, g = TrapConfig(), _fringe_grid()
    rng = np.random.default_rng(seed)
    t = 60.0 * np.arange(len(phases))
    return [(ti, synthetic_fringe_image(cfg, p, noise, g, rng=rng)) for ti, p in zip(t, phases)], cfg, g


def test_constant_phase_series_is_flat():
    images, cfg, g = _drift_images(np.full(10, 1.2))
    series = phase_drift_series(images, cfg.fringe_spacing, g.y)
    np.testing.assert_allclose(series.phase, 1.2, atol=1e-9)


def test_drift_of_fifteen_degrees_recovered():
    phases = 3.0 + np.radians(15.0) * np.arange(61) / 60
    images, cfg, g = _drift_images(phases, noise=0.05, seed=1)
    series = phase_drift_series(images, cfg.fringe_spacing, g.y)
    assert math.degrees(series.total_drift) == pytest.approx(15.0, abs=1.0)
    assert not series.ambiguous.any()


def test_unwrap_across_pi():
    true = np.linspace(2.5, 8.0, 40)
    wrapped = [wrap_phase(p) for p in true]
    out, flags = unwrap(wrapped)
    np.testing.assert_allclose(out, true, atol=1e-12)
    assert not flags.any()
    _, flags = unwrap([0.0, 3.0])
    assert flags[0]


def test_phase_noise_rms_recovered():
    rng = np.random.default_rng(2)
    sigma = math.radians(2.0)
    phases = 0.5 + sigma * rng.standard_normal(400)
    images, cfg, g = _drift_images(phases)
    series = phase_drift_series(images, cfg.fringe_spacing, g.y)
    assert series.rms == pytest.approx(sigma, rel=0.2)
