import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import jv

from cryoeo.electromech import (TWO_PI, BelowThresholdError, ElectromechParams, PumpConfig,
                                comb_weights, coupling, effective_linewidth,
                                fit_transparency_window, instability_threshold,
                                intracavity_photons, omit_reflection, reference_device,
                                reflection_minima, self_oscillation_comb)
from cryoeo.units import HBAR


def _s11_linear_solve(delta, params, pump):
    """Oracle: solve the linearized cavity + mechanics equations for each probe detuning."""
    g = coupling(params, pump)
    out = []
    for d in np.atleast_1d(delta):
        dm = d - pump.detuning - params.f_mech
        m = np.array([[params.kappa / 2 - 1j * d, 1j * g],
                      [1j * g, params.gamma_m / 2 - 1j * dm]])
        a, _ = np.linalg.solve(m, [np.sqrt(params.kappa_ext), 0.0])
        out.append(1 - np.sqrt(params.kappa_ext) * a)
    return np.array(out)


def test_reference_device_values(device):
    assert device.f_cavity == pytest.approx(TWO_PI * 8.2e9)
    assert device.kappa_ext / device.kappa == pytest.approx(0.75)


def test_gamma_eff_no_pump(device):
    assert effective_linewidth(device, PumpConfig.red(device, 0.0)) == pytest.approx(device.gamma_m)


def test_gamma_eff_hand_value(device):
    g = effective_linewidth(device, PumpConfig.red(device, 1e6))
    assert g / TWO_PI == pytest.approx(10 + 4 * 150**2 * 1e6 / 3e6, rel=1e-12)
    assert g / TWO_PI == pytest.approx(30.01e3, rel=1e-4)


def test_gamma_eff_linear_in_n_cav(device):
    a = effective_linewidth(device, PumpConfig.red(device, 1e5)) - device.gamma_m
    b = effective_linewidth(device, PumpConfig.red(device, 2e5)) - device.gamma_m
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_gamma_eff_needs_red_pump(device):
    with pytest.raises(ValueError):
        effective_linewidth(device, PumpConfig.blue(device, 1e5))


def test_intracavity_photons_hand_value(device):
    p = 1e-9
    d = -device.f_mech
    want = device.kappa_ext * p / (HBAR * (device.f_cavity + d) * ((device.kappa / 2) ** 2 + d**2))
    assert intracavity_photons(p, device, d) == pytest.approx(want, rel=1e-12)


def test_matches_linear_solve(device):
    pump = PumpConfig.red(device, 3e5)
    x = np.linspace(-2, 2, 41) * device.kappa
    np.testing.assert_allclose(omit_reflection(x, device, pump),
                               _s11_linear_solve(x, device, pump), rtol=1e-10, atol=1e-12)


def test_bare_dip_width_is_kappa(device):
    pump = PumpConfig.red(device, 0.0)
    x = np.linspace(-5, 5, 20001) * device.kappa
    depth = 1 - np.abs(omit_reflection(x, device, pump)) ** 2
    half = x[depth >= depth.max() / 2]
    assert half[-1] - half[0] == pytest.approx(device.kappa, rel=1e-3)
    assert np.argmax(depth) == x.size // 2


def test_weak_coupling_window_fit(device):
    pump = PumpConfig.red(device, (0.01 * device.kappa / device.g0) ** 2)
    gamma = effective_linewidth(device, pump) / TWO_PI
    x = np.linspace(-5 * gamma, 5 * gamma, 401)
    fit = fit_transparency_window(x, np.abs(omit_reflection(TWO_PI * x, device, pump)))
    assert fit.width == pytest.approx(gamma, rel=0.02)
    assert abs(fit.center) < 0.01 * gamma


@pytest.mark.parametrize("ratio,tol", [(0.5, 0.05), (5.0, 0.05)])
def test_strong_coupling_splitting(device, ratio, tol):
    g = ratio * device.kappa
    pump = PumpConfig.red(device, (g / device.g0) ** 2)
    x = np.linspace(-(ratio + 2) * device.kappa, (ratio + 2) * device.kappa, 40001)
    minima = reflection_minima(x, np.abs(omit_reflection(x, device, pump)))
    assert minima.size == 2
    assert minima[1] - minima[0] == pytest.approx(2 * g, rel=tol)


@given(st.floats(0, 1e9), st.floats(-3, 3))
def test_passivity(n_cav, probe):
    dev = reference_device()
    s = omit_reflection(probe * dev.kappa, dev, PumpConfig.red(dev, n_cav))
    assert np.all(np.abs(s) <= 1 + 1e-12)


def test_threshold_hand_value(device):
    assert instability_threshold(device) == pytest.approx(10 * 3e6 / (4 * 150**2), rel=1e-12)
    assert instability_threshold(device) == pytest.approx(333.3, rel=1e-3)


def test_threshold_limits():
    a = ElectromechParams.from_hz(8e9, 3e6, 6e6, 1e-9, 150.0)
    assert instability_threshold(a) < 1e-6
    b = ElectromechParams.from_hz(8e9, 3e6, 6e6, 10.0, 300.0)
    c = ElectromechParams.from_hz(8e9, 3e6, 6e6, 10.0, 150.0)
    assert instability_threshold(b) == pytest.approx(instability_threshold(c) / 4)


def test_comb_requires_threshold(device):
    with pytest.raises(BelowThresholdError):
        self_oscillation_comb(device, PumpConfig.blue(device, 100.0), 0.1)
    with pytest.raises(BelowThresholdError):
        self_oscillation_comb(device, PumpConfig.red(device, 1e4), 0.1)


def test_comb_zero_beta_pump_only(device):
    s = self_oscillation_comb(device, PumpConfig.blue(device, 1e4), 0.0)
    assert np.count_nonzero(s.values) == 1
    assert s.frequencies[np.argmax(s.values)] == 0.0


def test_comb_first_sideband_ratio(device):
    beta = 0.05
    s = self_oscillation_comb(device, PumpConfig.blue(device, 1e4), beta, rbw=1e4)
    f = s.frequencies
    pump = s.values[f == 0][0]
    up = s.values[np.isclose(f, 6e6)][0]
    down = s.values[np.isclose(f, -6e6)][0]
    assert up / pump == pytest.approx(beta**2 / 4, rel=0.01)
    assert up == pytest.approx(down, rel=1e-12)
    assert s.integrate() == pytest.approx(1.0, rel=1e-9)


@given(st.floats(0.0, 20.0))
def test_comb_weights_conserve_power(beta):
    orders, w = comb_weights(beta)
    assert w.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(w, jv(orders, beta) ** 2)
