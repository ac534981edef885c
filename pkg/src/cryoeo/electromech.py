"""Microwave cavity electromechanics: OMIT reflection, strong coupling, comb.

All rates are angular (rad/s).  The reflection model is the linearized,
rotating-wave input-output response of a cavity coupled to one mechanical
mode by a strong pump of detuning ``pump.detuning`` from the cavity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks
from scipy.special import jv

from .signal import SpectralDensity
from .units import HBAR

TWO_PI = 2 * np.pi


class BelowThresholdError(ValueError):
    """Raised when a comb is requested below the parametric instability."""


@dataclass(frozen=True)
class ElectromechParams:
    f_cavity: float
    kappa: float
    kappa_ext: float
    f_mech: float
    gamma_m: float
    g0: float

    def __post_init__(self):
        for name in ("f_cavity", "kappa", "kappa_ext", "f_mech", "gamma_m", "g0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa_ext > self.kappa:
            raise ValueError("kappa_ext cannot exceed kappa")
        if self.gamma_m >= self.f_mech:
            raise ValueError("mechanical linewidth must be far below the mechanical frequency")

    @classmethod
    def from_hz(cls, f_cavity, kappa, f_mech, gamma_m, g0, kappa_ext=None,
                kappa_ext_ratio=0.75) -> "ElectromechParams":
        k_ext = kappa * kappa_ext_ratio if kappa_ext is None else kappa_ext
        return cls(TWO_PI * f_cavity, TWO_PI * kappa, TWO_PI * k_ext, TWO_PI * f_mech,
                   TWO_PI * gamma_m, TWO_PI * g0)


def reference_device(kappa_ext_ratio: float = 0.75) -> ElectromechParams:
    """Vacuum-gap capacitor device: 8.2 GHz cavity, 6 MHz drum."""
    return ElectromechParams.from_hz(8.2e9, 3e6, 6e6, 10.0, 150.0,
                                     kappa_ext_ratio=kappa_ext_ratio)


@dataclass(frozen=True)
class PumpConfig:
    detuning: float
    n_cav: float

    def __post_init__(self):
        if self.n_cav < 0:
            raise ValueError("intracavity photon number must be non-negative")

    @classmethod
    def red(cls, params: ElectromechParams, n_cav: float) -> "PumpConfig":
        return cls(-params.f_mech, n_cav)

    @classmethod
    def blue(cls, params: ElectromechParams, n_cav: float) -> "PumpConfig":
        return cls(params.f_mech, n_cav)


def coupling(params: ElectromechParams, pump: PumpConfig) -> float:
    return params.g0 * np.sqrt(pump.n_cav)


def intracavity_photons(p_in: float, params: ElectromechParams, detuning: float) -> float:
    """Steady-state photon number for ``p_in`` watts incident at the given detuning."""
    omega = params.f_cavity + detuning
    return float(params.kappa_ext * p_in / (HBAR * omega * ((params.kappa / 2) ** 2 + detuning**2)))


def _require_red(params, pump):
    if abs(pump.detuning + params.f_mech) > params.kappa / 2:
        raise ValueError("pump must sit on the red motional sideband (detuning = -Omega_m)")


def effective_linewidth(params: ElectromechParams, pump: PumpConfig) -> float:
    """``Gamma_m + 4 g^2 / kappa`` for a red-sideband pump."""
    _require_red(params, pump)
    return params.gamma_m + 4 * coupling(params, pump) ** 2 / params.kappa


def omit_reflection(probe_detuning, params: ElectromechParams, pump: PumpConfig) -> np.ndarray:
    """Complex reflection S11 at probe detunings (rad/s) from the cavity.

    The mechanics sees the probe-pump beat, detuned from Omega_m by
    ``probe_detuning - pump.detuning - Omega_m`` (zero on cavity resonance
    for a pump exactly on the red sideband).
    """
    delta = np.atleast_1d(np.asarray(probe_detuning, dtype=float))
    if delta.size == 0:
        raise ValueError("probe detuning grid is empty")
    _require_red(params, pump)
    g2 = coupling(params, pump) ** 2
    delta_m = delta - pump.detuning - params.f_mech
    chi_m_inv = params.gamma_m / 2 - 1j * delta_m
    return 1 - params.kappa_ext / (params.kappa / 2 - 1j * delta + g2 / chi_m_inv)


def instability_threshold(params: ElectromechParams) -> float:
    """Intracavity photon number at which blue-sideband anti-damping cancels Gamma_m."""
    return params.gamma_m * params.kappa / (4 * params.g0**2)


def comb_weights(beta: float, tol: float = 1e-15):
    """Orders ``n`` and weights ``J_n(beta)^2``, truncated once the tail is below ``tol``."""
    beta = abs(float(beta))
    n_max = 0
    while 1.0 - np.sum(jv(np.arange(-n_max, n_max + 1), beta) ** 2) > tol and n_max < 10_000:
        n_max += 1
    orders = np.arange(-n_max, n_max + 1)
    return orders, jv(orders, beta) ** 2


def self_oscillation_comb(params: ElectromechParams, pump: PumpConfig, beta_mech: float,
                          total_flux: float = 1.0, rbw: float = 1e3) -> SpectralDensity:
    """Sideband comb emitted by a self-oscillating mechanical mode.

    A limit cycle of fixed amplitude phase-modulates the cavity output with
    index ``beta_mech``; line ``n`` at ``pump + n Omega_m`` carries
    ``total_flux * J_n(beta_mech)^2`` photons/s.  Each line occupies a single
    bin of width ``rbw``.  Frequencies are offsets (Hz) from the pump.
    """
    if pump.detuning <= 0:
        raise BelowThresholdError("self-oscillation needs a blue-detuned pump")
    n_star = instability_threshold(params)
    if pump.n_cav <= n_star:
        raise BelowThresholdError(
            f"n_cav = {pump.n_cav:g} is below the instability threshold {n_star:g}; "
            "use a thermal sideband model instead")
    orders, weights = comb_weights(beta_mech)
    f_m = params.f_mech / TWO_PI
    n_max = int(orders.max())
    half_bins = int(np.ceil((n_max + 1) * f_m / rbw))
    freqs = rbw * np.arange(-half_bins, half_bins + 1)
    values = np.zeros(freqs.size)
    idx = np.rint(orders * f_m / rbw).astype(int) + half_bins
    np.add.at(values, idx, total_flux * weights / rbw)
    center = (params.f_cavity + pump.detuning) / TWO_PI
    return SpectralDensity(freqs, values, rbw, center_hz=center, reference="dut_output",
                           meta={"orders": orders.tolist(), "weights": weights.tolist()})


@dataclass(frozen=True)
class TransparencyFit:
    """Complex-Lorentzian fit of a transparency feature; widths in the units of the axis."""

    width: float
    center: float
    width_stderr: float
    residual_rms: float


def _lorentz_model(p, x):
    a, cr, ci, br, bi, width, x0 = p
    lor = (width / 2) / (width / 2 - 1j * (x - x0))
    return np.abs(a + (cr + 1j * ci) * (x - x0) + (br + 1j * bi) * lor) ** 2


def fit_transparency_window(detuning, s11_mag) -> TransparencyFit:
    """Fit ``|S11|^2`` near a narrow feature with ``|a + c x + b L(x)|^2``.

    ``L`` is a unit complex Lorentzian of full width ``width`` centred at
    ``x0``; ``a`` (real) and ``c`` (complex) absorb the slowly varying cavity
    background, ``b`` the feature's complex amplitude.  FWHM of the feature
    is the fitted ``width``.
    """
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(s11_mag, dtype=float) ** 2
    if x.size < 8:
        raise ValueError("need at least 8 points to fit a transparency window")
    # background from the window edges, feature from the residual peak
    n_edge = max(2, x.size // 20)
    xb = np.r_[x[:n_edge], x[-n_edge:]]
    yb = np.r_[y[:n_edge], y[-n_edge:]]
    slope, intercept = np.polyfit(xb, yb, 1)
    d = y - (slope * x + intercept)
    k = int(np.argmax(np.abs(d)))
    half = np.abs(d) >= np.abs(d[k]) / 2
    lo = k
    while lo > 0 and half[lo - 1]:
        lo -= 1
    hi = k
    while hi < x.size - 1 and half[hi + 1]:
        hi += 1
    w0 = max(x[hi] - x[lo], 2 * np.median(np.diff(x)))
    x0 = x[k]
    scale = w0
    a0 = float(np.sqrt(max(intercept + slope * x0, 1e-12)))
    best = None
    # the feature's phase relative to the background is unknown; try a few
    for phase in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        amp = np.sqrt(abs(d[k]) + a0**2) if d[k] > 0 else a0 / 2
        p0 = [a0, 0.0, 0.0, amp * np.cos(phase), amp * np.sin(phase), w0 / scale, 0.0]

        def resid(p):
            q = np.array(p)
            return _lorentz_model([q[0], q[1], q[2], q[3], q[4], q[5] * scale, x0 + q[6] * scale],
                                  x) - y

        r = least_squares(resid, p0, bounds=([-np.inf] * 5 + [1e-6, -10], [np.inf] * 5 + [1e3, 10]),
                          x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=4000)
        if best is None or r.cost < best.cost:
            best = r
    p = best.x
    dof = max(x.size - p.size, 1)
    s2 = 2 * best.cost / dof
    try:
        cov = np.linalg.pinv(best.jac.T @ best.jac) * s2
        w_err = float(np.sqrt(max(cov[5, 5], 0.0)) * scale)
    except np.linalg.LinAlgError:
        w_err = float("nan")
    return TransparencyFit(width=float(p[5] * scale), center=float(x0 + p[6] * scale),
                           width_stderr=w_err, residual_rms=float(np.sqrt(s2)))


def reflection_minima(detuning, s11_mag, prominence: float = 0.02) -> np.ndarray:
    """Detunings of the local minima of ``|S11|``."""
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(s11_mag, dtype=float)
    idx, _ = find_peaks(-y, prominence=prominence)
    return x[idx]
