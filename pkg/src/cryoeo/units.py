"""Unit conversions between power, photon flux and thermal occupancy.

Flux convention used throughout the package: a power ``P`` at frequency ``f``
corresponds to ``P / (h f)`` photons per second, and a power spectral density
in W/Hz maps to quanta/(s*Hz) the same way.  Spectral densities are one-sided
in physical frequency: each bin is a distinct physical frequency, and the
vacuum contributes 1/2 quantum per (s*Hz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# CODATA 2018 (exact SI values)
PLANCK = 6.62607015e-34
HBAR = PLANCK / (2 * np.pi)
BOLTZMANN = 1.380649e-23
SPEED_OF_LIGHT = 299792458.0

PowerDbm = float
Occupancy = float


@dataclass(frozen=True)
class Frequency:
    """Angular frequency in rad/s."""

    value: float

    @classmethod
    def from_hz(cls, f_hz: float) -> "Frequency":
        return cls(2 * np.pi * f_hz)

    @classmethod
    def from_wavelength(cls, wavelength_m: float) -> "Frequency":
        return cls.from_hz(SPEED_OF_LIGHT / wavelength_m)

    @property
    def hz(self) -> float:
        return self.value / (2 * np.pi)


def as_hz(f):
    """Return ``f`` in Hz; plain numbers are taken to be Hz already."""
    if isinstance(f, Frequency):
        return f.hz
    return f


def _unwrap(out):
    return float(out) if np.ndim(out) == 0 else out


def dbm_to_watts(p_dbm):
    return _unwrap(1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0))


def watts_to_dbm(p_w):
    return _unwrap(10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3))


def db_to_ratio(db):
    return _unwrap(10.0 ** (np.asarray(db, dtype=float) / 10.0))


def ratio_to_db(ratio):
    return _unwrap(10.0 * np.log10(np.asarray(ratio, dtype=float)))


def _positive_hz(f):
    f_hz = np.asarray(as_hz(f), dtype=float)
    if np.any(f_hz <= 0):
        raise ValueError(f"frequency must be positive, got {f}")
    return f_hz


def power_to_flux(p_w, f):
    """Convert power (W) at frequency ``f`` to photon flux (1/s).

    Applied to a PSD in W/Hz this gives quanta/(s*Hz).
    """
    f_hz = _positive_hz(f)
    return _unwrap(np.asarray(p_w, dtype=float) / (PLANCK * f_hz))


def flux_to_power(flux, f):
    f_hz = _positive_hz(f)
    return _unwrap(np.asarray(flux, dtype=float) * PLANCK * f_hz)


def thermal_occupancy(f, temperature):
    """Bose-Einstein occupation ``1 / (exp(h f / k T) - 1)``."""
    f_hz = _positive_hz(f)
    t = np.asarray(temperature, dtype=float)
    if np.any(t <= 0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    x = PLANCK * f_hz / (BOLTZMANN * t)
    with np.errstate(over="ignore"):
        return _unwrap(1.0 / np.expm1(x))
