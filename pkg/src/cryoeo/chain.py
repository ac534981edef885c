"""Readout chains: Friis composition and referral of spectra between planes.

A stage maps an input PSD ``S`` to ``gain * (S + n_add)``; ``n_add`` is the
input-referred added noise in quanta/(s*Hz).  Stage noise is uncorrelated
between stages.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .modulator import ModulatorParams, added_noise, transduction_gain
from .signal import SpectralDensity
from .units import db_to_ratio, thermal_occupancy


@dataclass(frozen=True)
class ChainStage:
    gain: float
    n_add: float
    label: str = ""

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError(f"stage gain must be positive, got {self.gain}")
        if self.n_add < 0:
            raise ValueError(f"added noise must be non-negative, got {self.n_add}")


@dataclass(frozen=True)
class ReferencePlane:
    """``dut_output`` (input of stage 0), ``stage_input`` k, or ``detector`` (after last stage)."""

    kind: str
    index: int = 0

    @classmethod
    def dut_output(cls):
        return cls("dut_output")

    @classmethod
    def stage_input(cls, k: int):
        return cls("stage_input", k)

    @classmethod
    def detector(cls):
        return cls("detector")

    def position(self, n_stages: int) -> int:
        if self.kind == "dut_output":
            return 0
        if self.kind == "detector":
            return n_stages
        if self.kind == "stage_input":
            if not 0 <= self.index < n_stages:
                raise ValueError(f"stage index {self.index} outside chain of {n_stages} stages")
            return self.index
        raise ValueError(f"unknown reference plane {self.kind!r}")


def compose(stages: Sequence[ChainStage]) -> ChainStage:
    """Collapse a cascade into one stage (Friis formula for added noise)."""
    stages = list(stages)
    if not stages:
        raise ValueError("cannot compose an empty chain")
    if len(stages) == 1:
        return stages[0]
    gain = 1.0
    n_total = 0.0
    for st in stages:
        n_total += st.n_add / gain
        gain *= st.gain
    label = " -> ".join(st.label for st in stages if st.label)
    return ChainStage(gain, n_total, label)


def refer_spectrum(s: SpectralDensity, stages: Sequence[ChainStage], src: ReferencePlane,
                   dst: ReferencePlane, include_noise: bool = False) -> SpectralDensity:
    """Re-express ``s`` at a different plane of the chain.

    By default only the intervening gains are applied, which is how a trace
    is referred to an amplifier input: a HEMT output floor of ``8 G`` becomes
    8 quanta/(s*Hz).  With ``include_noise`` the spectrum is propagated
    physically: moving downstream adds each stage's noise, moving upstream
    removes it.  Both directions are exact inverses of each other.
    """
    stages = list(stages)
    i = src.position(len(stages))
    j = dst.position(len(stages))
    values = s.values.astype(float).copy()
    if j > i:
        for st in stages[i:j]:
            values = st.gain * (values + st.n_add) if include_noise else st.gain * values
    elif j < i:
        # largest magnitude handled so far, referred to the current plane; bounds round-off
        ref = np.abs(values)
        for st in reversed(stages[j:i]):
            if not include_noise:
                values = values / st.gain
                continue
            scaled = values / st.gain
            values = scaled - st.n_add
            ref = np.maximum(ref / st.gain, np.abs(scaled) + st.n_add)
            # round-off leaves tiny negatives where the signal was exactly zero
            tiny = (values < 0) & (-values <= 1e-9 * ref)
            values = np.where(tiny, 0.0, values)
            if np.any(values < 0):
                raise ValueError("spectrum lies below the chain's added noise at "
                                 f"plane {dst.kind}")
    return s.with_values(values, reference=_plane_name(dst))


def _plane_name(p: ReferencePlane) -> str:
    return f"stage_input_{p.index}" if p.kind == "stage_input" else p.kind


def heterodyne_detect(s_optical: SpectralDensity, efficiency: float = 1.0) -> SpectralDensity:
    """Balanced heterodyne detection referred to the detector input.

    A beamsplitter of transmission ``efficiency`` mixes in vacuum, then the
    heterodyne measurement costs another half quantum:
    ``S -> eta S + (1 - eta)/2 + 1/2``.
    """
    if not 0 < efficiency <= 1:
        raise ValueError("detection efficiency must lie in (0, 1]")
    out = efficiency * s_optical.values + (1 - efficiency) / 2 + 0.5
    return s_optical.with_values(out, reference="detector")


def heterodyne_stage(efficiency: float = 1.0) -> ChainStage:
    return ChainStage(efficiency, (1 - efficiency / 2) / efficiency, "heterodyne")


def hemt_stage(gain_db: float = 40.0, n_add: float = 8.0) -> ChainStage:
    return ChainStage(db_to_ratio(gain_db), n_add, "hemt")


def transducer_stage(params: ModulatorParams, f_mw: float, t_bath: float | None = None,
                     gain: float | None = None) -> ChainStage:
    """The modulator as a stage: gain G, added noise ``1/(2G) + n_th + 1/2``."""
    g = transduction_gain(f_mw, params) if gain is None else gain
    t = params.mount_temperature if t_bath is None else t_bath
    return ChainStage(g, float(added_noise(g, thermal_occupancy(f_mw, t))), "phase_modulator")


def preamp_stage(gain: float = 1e3, n_add: float = 1.0) -> ChainStage:
    return ChainStage(gain, n_add, "preamp")
