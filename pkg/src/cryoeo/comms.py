"""Binary phase-shift keying through the phase modulator, eye analysis and BER bounds.

The receiver beats the modulated carrier against a reference arm held at the
quadrature point, so the normalized intensity is ``(1 + sin(phi)) / 2`` for a
modulator phase ``-phi``; a bit of 1 applies ``phi = pi drive_v / V_pi``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import correlate
from scipy.stats import beta as beta_dist

from .modulator import ModulatorParams, phase_modulate
from .signal import TimeSeries, seed_sequence

EYE_CSV_COLUMNS = ("time_within_symbol", "amplitude")


class AlignmentError(RuntimeError):
    """The received waveform does not correlate with the transmitted bits."""


def prbs(order: int = 15, n_bits: int | None = None, seed: int = 0x7FFF) -> np.ndarray:
    """Fibonacci LFSR pseudo-random bit sequence (PRBS7/15/23/31 taps).

    ``seed`` is the initial register state and must be non-zero.
    """
    taps = {7: (7, 6), 15: (15, 14), 23: (23, 18), 31: (31, 28)}
    if order not in taps:
        raise ValueError(f"unsupported PRBS order {order}")
    mask = (1 << order) - 1
    state = seed & mask
    if state == 0:
        raise ValueError("PRBS seed must be non-zero")
    a, b = taps[order]
    n = (1 << order) - 1 if n_bits is None else n_bits
    period = (1 << order) - 1
    m = min(n, period)
    out = np.empty(m, dtype=np.uint8)
    for i in range(m):
        bit = ((state >> (a - 1)) ^ (state >> (b - 1))) & 1
        state = ((state << 1) | bit) & mask
        out[i] = bit
    if n > m:
        out = np.resize(out, n)
    return out


@dataclass(frozen=True)
class BitStream:
    bits: np.ndarray
    baud_rate: float
    prbs_order: int = 15
    seed: int = 0x7FFF

    def __post_init__(self):
        if not self.baud_rate > 0:
            raise ValueError("baud rate must be positive")
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=np.uint8))

    @classmethod
    def prbs(cls, n_bits: int, baud_rate: float = 5e9, order: int = 15,
             seed: int = 0x7FFF) -> "BitStream":
        return cls(prbs(order, n_bits, seed), baud_rate, order, seed)

    def __len__(self):
        return self.bits.size


def psk_transmit(bits: BitStream, modulator: ModulatorParams, drive_v: float,
                 noise: float = 0.0, seed=None, samples_per_symbol: int = 8,
                 rise_fraction: float = 0.15, delay_samples: int = 0) -> TimeSeries:
    """Received quadrature-point intensity for a binary phase-keyed drive.

    The NRZ drive (0 or ``drive_v``) is smoothed with a Gaussian of width
    ``rise_fraction`` symbols, applied through the exact modulator, and the
    field picks up white complex noise of ``noise`` quanta/(s*Hz) before the
    interferometer.  Output samples are intensities normalized so the rails
    sit at 1/2 and ``(1 + sin phi)/2``.
    """
    if not 0 <= drive_v:
        raise ValueError("drive voltage must be non-negative")
    fs = bits.baud_rate * samples_per_symbol
    v_pi = modulator.v_pi(bits.baud_rate / 2 if not modulator.v_pi.is_flat else None)
    if drive_v >= v_pi:
        raise ValueError("drive voltage must stay below V_pi")
    drive = np.repeat(bits.bits.astype(float) * drive_v, samples_per_symbol)
    if rise_fraction > 0:
        drive = gaussian_filter1d(drive, rise_fraction * samples_per_symbol, mode="wrap")
    if delay_samples:
        drive = np.roll(drive, delay_samples)
    flux = modulator.carrier_flux
    amp = np.sqrt(flux)
    v = TimeSeries(drive, fs)
    sig = phase_modulate(amp, v, modulator, bits.baud_rate / 2 if not modulator.v_pi.is_flat else None)
    field = sig.samples
    if noise > 0:
        rng = np.random.default_rng(seed_sequence(seed))
        sigma = np.sqrt(noise * fs / 2)
        field = field + sigma * (rng.standard_normal(field.size) + 1j * rng.standard_normal(field.size))
    ref = amp * np.exp(-1j * np.pi / 2)
    intensity = np.abs(field + ref) ** 2 / (4 * flux)
    return TimeSeries(intensity, fs, seed if isinstance(seed, int) else None)


def quadrature_intensity(phi):
    """Noise-free detected intensity for modulator phase ``-phi``."""
    return (1 + np.sin(phi)) / 2


def ber_upper_bound(errors: int, n: int, confidence: float = 0.95) -> float:
    """One-sided Clopper-Pearson upper bound on the error probability.

    With zero errors this is ``1 - (1 - confidence)**(1/n)``, which is
    ``-ln(1 - confidence)/n`` to first order.
    """
    if not 0 <= confidence < 1:
        raise ValueError("confidence must lie in [0, 1)")
    if n <= 0 or not 0 <= errors <= n:
        raise ValueError("need 0 <= errors <= n and n > 0")
    if errors == n:
        return 1.0
    if errors == 0:
        return float(-np.expm1(np.log1p(-confidence) / n))
    return float(beta_dist.ppf(confidence, errors + 1, n - errors))


@dataclass(frozen=True)
class EyeReport:
    eye_height: float
    eye_width: float
    error_count: int
    n_samples: int
    ber_upper_bound: float
    confidence_level: float
    threshold: float
    delay_samples: int
    samples_per_symbol: int
    correlation: float

    def to_dict(self) -> dict:
        return asdict(self)


def _align(rx: np.ndarray, ideal: np.ndarray, max_lag: int, min_corr: float):
    n = min(rx.size, 1 << 16)
    a = rx[:n] - rx[:n].mean()
    b = ideal[:n] - ideal[:n].mean()
    best_lag, best = 0, -np.inf
    c = correlate(np.r_[a, a[:max_lag]], b, mode="valid", method="fft")
    norm = np.sqrt(np.sum(a**2) * np.sum(b**2))
    if norm == 0:
        raise AlignmentError("received or transmitted waveform is constant")
    c = c / norm
    best_lag = int(np.argmax(c))
    best = float(c[best_lag])
    if best < min_corr:
        raise AlignmentError(f"correlation {best:.3f} below threshold {min_corr}")
    return best_lag, best


def eye_analyze(rx: TimeSeries, bits: BitStream, confidence: float = 0.95,
                samples_per_symbol: int | None = None, min_correlation: float = 0.5) -> EyeReport:
    """Align, slice at mid-bit, count decision errors and bound the BER.

    The threshold is the midpoint of the two rail means at the sampling
    instant.  Eye height is the worst-case opening normalized to the rail
    separation; eye width is the fraction of the symbol over which the
    rails do not overlap.
    """
    sps = samples_per_symbol or int(round(rx.sample_rate / bits.baud_rate))
    x = np.real(rx.samples)
    n_bits = min(len(bits), x.size // sps)
    if n_bits < 2:
        raise AlignmentError("record shorter than two symbols")
    ideal = np.repeat(bits.bits[:n_bits].astype(float), sps)
    lag, corr = _align(x[: n_bits * sps], ideal, max_lag=4 * sps, min_corr=min_correlation)
    x = np.roll(x, -lag)[: n_bits * sps].reshape(n_bits, sps)
    b = bits.bits[:n_bits].astype(bool)
    if b.all() or not b.any():
        raise ValueError("eye analysis needs both symbols present")
    mid = sps // 2
    samples = x[:, mid]
    mu1, mu0 = samples[b].mean(), samples[~b].mean()
    threshold = (mu1 + mu0) / 2
    decided = samples > threshold if mu1 > mu0 else samples < threshold
    errors = int(np.count_nonzero(decided != b))
    sep = abs(mu1 - mu0)
    hi, lo = (b, ~b) if mu1 > mu0 else (~b, b)
    opening = x[hi].min(axis=0) - x[lo].max(axis=0)
    height = float(opening[mid] / sep) if sep > 0 else 0.0
    width = float(np.count_nonzero(opening > 0) / sps)
    return EyeReport(
        eye_height=height, eye_width=width, error_count=errors, n_samples=n_bits,
        ber_upper_bound=ber_upper_bound(errors, n_bits, confidence),
        confidence_level=confidence, threshold=float(threshold), delay_samples=lag,
        samples_per_symbol=sps, correlation=corr)


def eye_diagram_points(rx: TimeSeries, baud_rate: float, delay_samples: int = 0,
                       max_symbols: int = 2000):
    """(time within symbol in units of the symbol period, amplitude) pairs."""
    sps = int(round(rx.sample_rate / baud_rate))
    x = np.roll(np.real(rx.samples), -delay_samples)
    n = min(x.size // sps, max_symbols)
    seg = x[: n * sps].reshape(n, sps)
    t = np.tile(np.arange(sps) / sps, n)
    return t, seg.ravel()


def write_eye_csv(path, rx: TimeSeries, baud_rate: float, delay_samples: int = 0,
                  max_symbols: int = 2000) -> None:
    t, a = eye_diagram_points(rx, baud_rate, delay_samples, max_symbols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EYE_CSV_COLUMNS)
        for ti, ai in zip(t, a):
            w.writerow([repr(float(ti)), repr(float(ai))])
