"""Electro-optic phase modulator: exact modulation, sidebands, gain and noise."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import jv

from .signal import SpectralDensity, TimeSeries
from .units import PLANCK, SPEED_OF_LIGHT, as_hz, thermal_occupancy

# first zero of J0; beyond it the carrier vanishes and MD is undefined
J0_FIRST_ZERO = 2.404825557695773


@dataclass(frozen=True)
class VpiTable:
    """Half-wave voltage vs microwave frequency, linearly interpolated.

    A single entry describes a frequency-independent V_pi valid everywhere.
    """

    frequencies_hz: tuple[float, ...]
    values_v: tuple[float, ...]

    def __post_init__(self):
        f = tuple(float(x) for x in np.atleast_1d(self.frequencies_hz))
        v = tuple(float(x) for x in np.atleast_1d(self.values_v))
        if len(f) != len(v) or not f:
            raise ValueError("V_pi table needs matching, non-empty frequency and value lists")
        if any(x <= 0 for x in v):
            raise ValueError(f"V_pi must be positive at every tabulated frequency: {v}")
        if any(b <= a for a, b in zip(f, f[1:])):
            raise ValueError("V_pi table frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies_hz", f)
        object.__setattr__(self, "values_v", v)

    @classmethod
    def flat(cls, v_pi: float) -> "VpiTable":
        return cls((1.0,), (v_pi,))

    @property
    def is_flat(self) -> bool:
        return len(set(self.values_v)) == 1

    def __call__(self, f_hz=None):
        if f_hz is None:
            if not self.is_flat:
                raise ValueError("a microwave frequency is required for a frequency-dependent V_pi")
            return self.values_v[0]
        f = np.asarray(f_hz, dtype=float)
        if len(self.values_v) == 1:
            out = np.full(f.shape, self.values_v[0])
        else:
            lo, hi = self.frequencies_hz[0], self.frequencies_hz[-1]
            if np.any(f < lo) or np.any(f > hi):
                raise ValueError(f"frequency {f_hz} Hz outside V_pi table range [{lo}, {hi}] Hz")
            out = np.interp(f, self.frequencies_hz, self.values_v)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ModulatorParams:
    v_pi: VpiTable = field(default_factory=lambda: VpiTable.flat(7.5))
    z0: float = 50.0
    insertion_transmission: float = 0.23
    p_opt_out: float = 1.1e-3
    f_opt: float = SPEED_OF_LIGHT / 1555e-9
    mount_temperature: float = 0.8

    def __post_init__(self):
        if isinstance(self.v_pi, (int, float)):
            object.__setattr__(self, "v_pi", VpiTable.flat(float(self.v_pi)))
        if not 0 < self.insertion_transmission <= 1:
            raise ValueError("insertion_transmission must lie in (0, 1]")
        if self.p_opt_out < 0:
            raise ValueError("p_opt_out must be non-negative")
        if self.z0 <= 0 or self.f_opt <= 0:
            raise ValueError("z0 and f_opt must be positive")

    @property
    def carrier_flux(self) -> float:
        """Optical photons/s leaving the modulator."""
        return self.p_opt_out / (PLANCK * self.f_opt)

    def with_v_pi(self, v_pi: float) -> "ModulatorParams":
        return replace(self, v_pi=VpiTable.flat(v_pi))


@dataclass(frozen=True)
class SidebandPair:
    carrier_flux: float
    upper_flux: float
    lower_flux: float
    md: float
    md_small_signal: float
    beta: float


def phase_modulate(carrier, v: TimeSeries, params: ModulatorParams, f_mw=None) -> TimeSeries:
    """Apply ``exp(-i pi V(t) / V_pi)`` to the optical field, without linearizing."""
    volts = np.asarray(v.samples)
    if not np.all(np.isfinite(volts)):
        raise ValueError("drive voltage must be finite")
    if np.iscomplexobj(volts):
        raise ValueError("drive voltage must be real")
    field_in = carrier.samples if isinstance(carrier, TimeSeries) else carrier
    field_in = np.broadcast_to(np.asarray(field_in, dtype=complex), volts.shape)
    v_pi = params.v_pi(as_hz(f_mw) if f_mw is not None else None)
    return TimeSeries(field_in * np.exp(-1j * np.pi * volts / v_pi), v.sample_rate, v.seed)


def drive_amplitude(p_mw: float, z0: float = 50.0) -> float:
    """Peak voltage of a sinusoid delivering ``p_mw`` watts into ``z0``."""
    return float(np.sqrt(2.0 * z0 * p_mw))


def modulation_depth(v_amp: float, f_mw, params: ModulatorParams) -> SidebandPair:
    """Sideband-to-carrier power ratio for a sinusoidal drive of peak ``v_amp``."""
    if v_amp < 0:
        raise ValueError("drive amplitude must be non-negative")
    beta = np.pi * v_amp / params.v_pi(as_hz(f_mw))
    if beta >= J0_FIRST_ZERO:
        raise ValueError(f"modulation index {beta:.4f} reaches the first zero of J0")
    j0 = jv(0, beta)
    j1 = jv(1, beta)
    flux = params.carrier_flux
    return SidebandPair(
        carrier_flux=flux * j0**2,
        upper_flux=flux * j1**2,
        lower_flux=flux * j1**2,
        md=float((j1 / j0) ** 2),
        md_small_signal=float(beta**2 / 4.0),
        beta=float(beta),
    )


def small_signal_md(p_mw, v_pi: float, z0: float = 50.0):
    """``MD = pi^2 Z0 P_MW / (2 V_pi^2)``."""
    return np.pi**2 * z0 * np.asarray(p_mw, dtype=float) / (2.0 * v_pi**2)


def vpi_from_md(p_mw: float, md: float, z0: float = 50.0) -> float:
    """Invert the small-signal modulation depth for the half-wave voltage."""
    if md <= 0 or p_mw <= 0:
        raise ValueError("p_mw and md must be positive")
    return float(np.pi * np.sqrt(z0 * p_mw / (2.0 * md)))


def transduction_gain(f_mw, params: ModulatorParams):
    """Optical sideband photons per microwave input photon."""
    f_hz = np.asarray(as_hz(f_mw), dtype=float)
    if np.any(f_hz <= 0):
        raise ValueError("microwave frequency must be positive")
    v_pi = params.v_pi(f_hz)
    g = params.p_opt_out * (f_hz / params.f_opt) * np.pi**2 * params.z0 / (2.0 * np.asarray(v_pi) ** 2)
    return float(g) if np.ndim(g) == 0 else g


def added_noise(gain, n_th):
    """Input-referred added noise of the transducer, quanta/(s*Hz)."""
    return 1.0 / (2.0 * np.asarray(gain)) + n_th + 0.5


def transduce_spectrum(s_in: SpectralDensity, params: ModulatorParams,
                       t_bath: float | None = None, gain=None) -> SpectralDensity:
    """Map a microwave PSD at the modulator port to the optical sideband PSD.

    ``S_out = G S_in + G (n_th + 1/2) + 1/2``, evaluated bin by bin at the
    physical microwave frequency of each bin.  ``gain`` overrides the
    computed G (scalar).  The output keeps the microwave frequency axis.
    """
    f_phys = s_in.physical_frequencies
    t = params.mount_temperature if t_bath is None else t_bath
    g = transduction_gain(f_phys, params) if gain is None else np.full(f_phys.shape, float(gain))
    n_th = thermal_occupancy(f_phys, t)
    out = g * s_in.values + g * (n_th + 0.5) + 0.5
    return s_in.with_values(out, reference="pm_optical_output")
