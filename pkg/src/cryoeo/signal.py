"""Synthetic time series and Welch PSD estimation.

Fields are complex baseband envelopes in units of sqrt(quanta/s), so that
``mean(|x|**2)`` is a photon flux and a PSD estimated from them is in
quanta/(s*Hz).  Carrier frequencies are carried as metadata (``center_hz``),
never sampled.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal as sps

CSV_COLUMNS = ("freq_hz", "value_quanta_per_s_hz")
TIMESERIES_CSV_COLUMNS = ("time_s", "real", "imag")


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sample_rate: float
    seed: int | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def mean_square(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def to_csv(self, path) -> None:
        x = self.samples.astype(complex)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TIMESERIES_CSV_COLUMNS)
            for t, v in zip(self.times, x):
                w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])

    def to_dict(self) -> dict:
        x = self.samples.astype(complex)
        return {
            "sample_rate_hz": self.sample_rate,
            "seed": self.seed,
            "real": x.real.tolist(),
            "imag": x.imag.tolist(),
        }


@dataclass(frozen=True)
class SpectralDensity:
    """PSD on a strictly increasing frequency grid.

    ``frequencies`` are offsets in Hz from ``center_hz``; the physical
    frequency of bin ``i`` is ``center_hz + frequencies[i]``.  ``reference``
    names the plane the values are referred to.
    """

    frequencies: np.ndarray
    values: np.ndarray
    rbw: float
    center_hz: float = 0.0
    reference: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if f.ndim != 1 or f.shape != v.shape:
            raise ValueError("frequencies and values must be 1-D arrays of equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not self.rbw > 0:
            raise ValueError(f"rbw must be positive, got {self.rbw}")
        if np.any(v < 0):
            raise ValueError("spectral density values must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    @property
    def physical_frequencies(self) -> np.ndarray:
        return self.center_hz + self.frequencies

    def integrate(self, f_lo: float | None = None, f_hi: float | None = None) -> float:
        """Sum of ``values * rbw`` over bins with ``f_lo <= f <= f_hi`` (offsets)."""
        mask = np.ones(self.frequencies.size, dtype=bool)
        if f_lo is not None:
            mask &= self.frequencies >= f_lo
        if f_hi is not None:
            mask &= self.frequencies <= f_hi
        return float(np.sum(self.values[mask]) * self.rbw)

    def scaled(self, factor: float, reference: str | None = None) -> "SpectralDensity":
        return replace(self, values=self.values * factor,
                       reference=self.reference if reference is None else reference)

    def shifted(self, offset: float, reference: str | None = None) -> "SpectralDensity":
        return replace(self, values=self.values + offset,
                       reference=self.reference if reference is None else reference)

    def with_values(self, values, reference: str | None = None) -> "SpectralDensity":
        return replace(self, values=np.asarray(values, dtype=float),
                       reference=self.reference if reference is None else reference)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for f, v in zip(self.physical_frequencies, self.values):
                w.writerow([repr(float(f)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, rbw: float | None = None, center_hz: float = 0.0,
                 reference: str = "") -> "SpectralDensity":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected header {CSV_COLUMNS}, got {rows[0]}")
        data = np.array(rows[1:], dtype=float).reshape(-1, 2)
        f = data[:, 0] - center_hz
        if rbw is None:
            if f.size < 2:
                raise ValueError("rbw cannot be inferred from a single bin")
            rbw = float(np.median(np.diff(f)))
        return cls(f, data[:, 1], rbw, center_hz=center_hz, reference=reference)

    def to_dict(self) -> dict:
        return {
            "rbw_hz": self.rbw,
            "center_hz": self.center_hz,
            "reference": self.reference,
            "units": "quanta/(s*Hz)",
            "freq_hz": self.frequencies.tolist(),
            "value_quanta_per_s_hz": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralDensity":
        return cls(np.array(d["freq_hz"]), np.array(d["value_quanta_per_s_hz"]),
                   d["rbw_hz"], center_hz=d.get("center_hz", 0.0),
                   reference=d.get("reference", ""))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "SpectralDensity":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def flat_spectrum(level, frequencies, rbw: float, center_hz: float = 0.0,
                  reference: str = "") -> SpectralDensity:
    f = np.asarray(frequencies, dtype=float)
    return SpectralDensity(f, np.full(f.shape, float(level)), rbw, center_hz, reference)


def synthesize_noise(floor: float, duration: float, sample_rate: float, seed=None) -> TimeSeries:
    """White complex Gaussian noise whose PSD is ``floor`` quanta/(s*Hz).

    Each sample has ``E|x|^2 = floor * sample_rate``.  ``seed`` may be an int
    or a ``numpy.random.SeedSequence``.
    """
    if floor < 0:
        raise ValueError(f"noise floor must be non-negative, got {floor}")
    if not duration > 0 or not sample_rate > 0:
        raise ValueError("duration and sample_rate must be positive")
    n = int(round(duration * sample_rate))
    if floor == 0:
        return TimeSeries(np.zeros(n, dtype=complex), sample_rate, _seed_int(seed))
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(floor * sample_rate / 2.0)
    x = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return TimeSeries(x, sample_rate, _seed_int(seed))


def _seed_int(seed):
    return seed if isinstance(seed, (int, np.integer)) else None


def seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an int, ``None`` or ``SeedSequence`` to a ``SeedSequence``."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def add_tone(ts: TimeSeries, f: float, amplitude: float, phase: float = 0.0) -> TimeSeries:
    """Superpose ``amplitude * exp(i(2 pi f t + phase))``; tone flux is amplitude**2."""
    if abs(f) >= ts.sample_rate / 2:
        raise ValueError(f"tone at {f} Hz aliases at sample rate {ts.sample_rate} Hz")
    if amplitude == 0:
        return ts
    tone = amplitude * np.exp(1j * (2 * np.pi * f * ts.times + phase))
    return replace(ts, samples=ts.samples + tone)


def estimate_psd(ts: TimeSeries, rbw: float, center_hz: float = 0.0,
                 reference: str = "") -> SpectralDensity:
    """Welch PSD with a Hann window and 50% overlap.

    The segment length is ``round(sample_rate / rbw)`` so the bin spacing (the
    reported ``rbw``) is ``sample_rate / nperseg``.  Complex input gives a
    two-sided baseband spectrum sorted by frequency; real input gives the
    positive-frequency half with the usual doubling.  Either way the PSD sums
    to the windowed mean square, which equals the plain mean square of any
    constant-envelope signal.
    """
    if not rbw > 0:
        raise ValueError(f"rbw must be positive, got {rbw}")
    nperseg = int(round(ts.sample_rate / rbw))
    if nperseg > len(ts):
        raise ValueError(
            f"rbw {rbw} Hz is finer than the record allows (duration {ts.duration} s)")
    if nperseg < 2:
        raise ValueError(f"rbw {rbw} Hz is coarser than the sample rate allows")
    x = ts.samples
    is_complex = np.iscomplexobj(x)
    f, p = sps.welch(x, fs=ts.sample_rate, window="hann", nperseg=nperseg,
                     noverlap=nperseg // 2, detrend=False, scaling="density",
                     return_onesided=not is_complex)
    if is_complex:
        f = np.fft.fftshift(f)
        p = np.fft.fftshift(p)
    p = np.clip(np.real(p), 0.0, None)
    return SpectralDensity(f, p, ts.sample_rate / nperseg, center_hz, reference)
