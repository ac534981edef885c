"""Half-wave voltage extraction and transduction-gain calibration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .chain import ChainStage, heterodyne_detect
from .modulator import ModulatorParams, small_signal_md, transduce_spectrum
from .signal import (SpectralDensity, add_tone, estimate_psd, flat_spectrum, seed_sequence,
                     synthesize_noise)

# integration half-window around a line, in effective linewidths
AREA_HALF_WINDOW = 5.0


@dataclass(frozen=True)
class VpiFit:
    v_pi_hat: float
    stderr: float
    points: tuple
    z0: float = 50.0

    def to_dict(self) -> dict:
        return {"v_pi_hat_v": self.v_pi_hat, "stderr_v": self.stderr, "z0_ohm": self.z0,
                "points": [{"p_mw_w": p, "md": m} for p, m in self.points]}


def fit_vpi(points, z0: float = 50.0, weighting: str = "relative") -> VpiFit:
    """Least-squares fit of ``MD = k P_MW`` through the origin, ``k = pi^2 Z0 / (2 V_pi^2)``.

    ``weighting="relative"`` weights each point by ``1/P^2`` so equal
    fractional MD scatter counts equally across a dB-spaced power sweep;
    ``"uniform"`` is the ordinary unweighted fit.
    """
    pts = [(float(p), float(m)) for p, m in points]
    if len(pts) < 3:
        raise ValueError("fitting V_pi needs at least 3 (P_MW, MD) points")
    p = np.array([q[0] for q in pts])
    md = np.array([q[1] for q in pts])
    if np.any(md <= 0):
        raise ValueError("modulation depths must be positive")
    if np.any(p <= 0):
        raise ValueError("microwave powers must be positive")
    if weighting == "relative":
        w = 1.0 / p**2
    elif weighting == "uniform":
        w = np.ones_like(p)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    k = np.sum(w * p * md) / np.sum(w * p**2)
    resid = md - k * p
    s2 = np.sum(w * resid**2) / (p.size - 1)
    k_err = np.sqrt(s2 / np.sum(w * p**2))
    v_pi = np.pi * np.sqrt(z0 / (2 * k))
    return VpiFit(float(v_pi), float(v_pi * k_err / (2 * k)), tuple(pts), z0)


def synthetic_md_points(v_pi: float, powers_w, z0: float = 50.0, noise_rel: float = 0.0,
                        seed=None, exact: bool = False):
    """Modulation depths a measurement at ``powers_w`` would return.

    ``exact`` uses the Bessel ratio instead of the small-signal law;
    ``noise_rel`` applies seeded multiplicative Gaussian scatter.
    """
    from scipy.special import jv

    p = np.asarray(powers_w, dtype=float)
    if exact:
        beta = np.pi * np.sqrt(2 * z0 * p) / v_pi
        md = (jv(1, beta) / jv(0, beta)) ** 2
    else:
        md = small_signal_md(p, v_pi, z0)
    if noise_rel > 0:
        rng = np.random.default_rng(seed)
        md = md * (1 + noise_rel * rng.standard_normal(p.size))
    return list(zip(p.tolist(), md.tolist()))


@dataclass(frozen=True)
class LineArea:
    area: float
    floor: float
    center: float
    window: tuple


def line_area(psd: SpectralDensity, center: float | None = None,
              linewidth: float | None = None) -> LineArea:
    """Floor-subtracted integrated power of the strongest line.

    The window spans ``AREA_HALF_WINDOW`` effective linewidths either side of
    the line, where the effective linewidth is the larger of ``linewidth``
    and the RBW.  The floor is the median of the bins outside the window.
    """
    f = psd.frequencies
    if center is None:
        center = float(f[int(np.argmax(psd.values))])
    lw = max(psd.rbw, linewidth or 0.0)
    half = AREA_HALF_WINDOW * lw
    inside = np.abs(f - center) <= half
    if inside.all() or not inside.any():
        raise ValueError("integration window must be smaller than the spectrum")
    floor = float(np.median(psd.values[~inside]))
    area = float(np.sum(psd.values[inside] - floor) * psd.rbw)
    return LineArea(area, floor, center, (center - half, center + half))


@dataclass(frozen=True)
class GainCalibration:
    g_hat: float
    s_signal: float
    gs_signal: float
    hemt_floor_input: float
    optical_floor_detector: float
    hemt_floor_measured: float
    optical_floor_measured: float
    hemt_window: tuple
    optical_window: tuple
    floor_gap_db: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hemt_window"] = list(self.hemt_window)
        d["optical_window"] = list(self.optical_window)
        return d


def calibrate_gain(hemt_psd: SpectralDensity, opt_psd: SpectralDensity, hemt: ChainStage,
                   detector_floor: float = 1.0, linewidth: float | None = None,
                   floor_tolerance: float | None = 0.1) -> GainCalibration:
    """Transduction gain from simultaneous HEMT and optical spectra of one line.

    The HEMT spectrum is scaled so its floor equals ``hemt.n_add``; its line
    area is then the microwave signal ``S``.  The optical spectrum is scaled
    so its floor equals ``detector_floor`` (vacuum plus heterodyne, 1
    quantum); its line area is ``G S``.  With ``floor_tolerance`` set, the
    measured HEMT floor divided by ``hemt.gain`` must match ``hemt.n_add``
    within that relative tolerance.
    """
    h = line_area(hemt_psd, linewidth=linewidth)
    o = line_area(opt_psd, linewidth=linewidth)
    if h.floor <= 0 or o.floor <= 0:
        raise ValueError("spectra need a non-zero noise floor to be referred")
    if floor_tolerance is not None:
        referred = h.floor / hemt.gain
        if abs(referred - hemt.n_add) > floor_tolerance * hemt.n_add:
            raise ValueError(
                f"HEMT floor {referred:.4g} quanta/(s*Hz) at the input is inconsistent "
                f"with the stated added noise {hemt.n_add:.4g}")
    hemt_scale = hemt.n_add / h.floor
    opt_scale = detector_floor / o.floor
    s = h.area * hemt_scale
    gs = o.area * opt_scale
    if s <= 0 or gs <= 0:
        raise ValueError("signal area must be positive in both branches")
    g = gs / s
    gap = 10 * np.log10((detector_floor / g) / hemt.n_add)
    return GainCalibration(
        g_hat=float(g), s_signal=float(s), gs_signal=float(gs),
        hemt_floor_input=hemt.n_add, optical_floor_detector=detector_floor,
        hemt_floor_measured=h.floor, optical_floor_measured=o.floor,
        hemt_window=h.window, optical_window=o.window, floor_gap_db=float(gap),
        extra={"hemt_scale": hemt_scale, "optical_scale": opt_scale})


def synthesize_dual_spectra(signal_flux: float, gain: float, hemt: ChainStage,
                            modulator: ModulatorParams | None = None, f_mw: float = 8.2e9,
                            t_bath: float | None = None, offset_hz: float = 100.0,
                            sample_rate: float = 1000.0, duration: float = 64.0,
                            rbw: float = 1.0, detection_efficiency: float = 1.0, seed=None):
    """HEMT-output and detector spectra of one microwave line split to both branches.

    Both branches see the same line of ``signal_flux`` photons/s at
    ``f_mw + offset_hz``.  The HEMT branch adds ``hemt.n_add`` and multiplies
    by ``hemt.gain``; the optical branch applies gain ``gain``, the
    transducer's thermal and vacuum noise, and heterodyne detection.
    Returns ``(hemt_psd, optical_psd)`` centred on ``f_mw``.
    """
    modulator = modulator or ModulatorParams()
    s_hemt, s_opt, s_phase = seed_sequence(seed).spawn(3)
    phases = np.random.default_rng(s_phase).uniform(0, 2 * np.pi, 2)

    probe = flat_spectrum(0.0, [offset_hz], rbw, center_hz=f_mw)
    pm_floor = transduce_spectrum(probe, modulator, t_bath, gain=gain)
    det = heterodyne_detect(pm_floor, detection_efficiency)
    opt_floor = float(det.values[0])
    opt_amp = np.sqrt(detection_efficiency * gain * signal_flux)

    hemt_ts = synthesize_noise(hemt.n_add, duration, sample_rate, s_hemt)
    hemt_ts = add_tone(hemt_ts, offset_hz, np.sqrt(signal_flux), phases[0])
    hemt_psd = estimate_psd(hemt_ts, rbw, center_hz=f_mw, reference="hemt_output").scaled(hemt.gain)

    opt_ts = synthesize_noise(opt_floor, duration, sample_rate, s_opt)
    opt_ts = add_tone(opt_ts, offset_hz, opt_amp, phases[1])
    opt_psd = estimate_psd(opt_ts, rbw, center_hz=f_mw, reference="detector")
    return hemt_psd, opt_psd
