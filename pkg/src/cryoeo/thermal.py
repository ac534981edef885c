"""Cryostat heat budget: conducted heat, dissipation heating, stage budgets."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator


@dataclass(frozen=True, eq=False)
class ConductivityTable:
    """Thermal conductivity vs temperature, interpolated monotonically in log-log."""

    temperatures: np.ndarray
    kappa: np.ndarray
    name: str = ""

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        if t.ndim != 1 or t.shape != k.shape or t.size < 2:
            raise ValueError("conductivity table needs at least two (T, kappa) rows")
        if np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ValueError("table temperatures must be positive and strictly increasing")
        if np.any(k <= 0):
            raise ValueError("conductivities must be positive")
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "_interp", PchipInterpolator(np.log(t), np.log(k)))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.temperatures[0]), float(self.temperatures[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo) or np.any(t > hi):
            raise ValueError(f"temperature outside {self.name or 'table'} domain [{lo}, {hi}] K")
        return np.exp(self._interp(np.log(t)))

    @classmethod
    def from_csv(cls, path, name: str = "") -> "ConductivityTable":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if [c.strip() for c in rows[0]] != ["T_kelvin", "kappa_w_per_m_k"]:
            raise ValueError(f"{path}: expected header T_kelvin,kappa_w_per_m_k")
        data = np.array(rows[1:], dtype=float)
        return cls(data[:, 0], data[:, 1], name or str(path))


@lru_cache(maxsize=None)
def material(name: str) -> ConductivityTable:
    """Bundled table: ``stainless_steel_304``, ``ptfe`` or ``fused_silica``."""
    ref = resources.files("cryoeo").joinpath("data").joinpath(f"{name}.csv")
    with resources.as_file(ref) as path:
        return ConductivityTable.from_csv(path, name)


@dataclass(frozen=True)
class Layer:
    area: float
    table: ConductivityTable

    def __post_init__(self):
        if not self.area > 0:
            raise ValueError("layer cross-section must be positive")


@dataclass(frozen=True)
class ConductorSpec:
    kind: str
    length: float
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if self.kind not in ("coax", "fiber"):
            raise ValueError(f"conductor kind must be 'coax' or 'fiber', got {self.kind!r}")
        if not self.length > 0:
            raise ValueError("conductor length must be positive")
        if not self.layers:
            raise ValueError("a conductor needs at least one layer")


def _annulus(d_in: float, d_out: float) -> float:
    return np.pi / 4 * (d_out**2 - d_in**2)


def default_coax(length: float = 1.0) -> ConductorSpec:
    """0.085-inch semi-rigid coax, stainless outer and inner conductor, PTFE dielectric."""
    ss, ptfe = material("stainless_steel_304"), material("ptfe")
    return ConductorSpec("coax", length, (
        Layer(_annulus(1.68e-3, 2.19e-3), ss),
        Layer(_annulus(0.0, 0.511e-3), ss),
        Layer(_annulus(0.511e-3, 1.68e-3), ptfe),
    ))


def default_fiber(length: float = 1.0) -> ConductorSpec:
    """Single-mode fiber, 125 um silica with a 900 um fluoropolymer buffer."""
    return ConductorSpec("fiber", length, (
        Layer(_annulus(0.0, 125e-6), material("fused_silica")),
        Layer(_annulus(125e-6, 900e-6), material("ptfe")),
    ))


def conductivity_integral(table: ConductivityTable, t_cold: float, t_hot: float,
                          step: float = 0.01) -> float:
    """Composite-Simpson integral of ``kappa(T) dT`` with at most ``step`` kelvin spacing."""
    if t_hot == t_cold:
        return 0.0
    n = max(2, int(np.ceil((t_hot - t_cold) / step)))
    n += n % 2
    t = np.linspace(t_cold, t_hot, n + 1)
    k = table(t)
    h = (t_hot - t_cold) / n
    return float(h / 3 * (k[0] + k[-1] + 4 * np.sum(k[1:-1:2]) + 2 * np.sum(k[2:-1:2])))


def conducted_heat(c: ConductorSpec, t_hot: float, t_cold: float, step: float = 0.01) -> float:
    """Heat (W) flowing from ``t_hot`` to ``t_cold`` along the conductor."""
    if t_cold <= 0:
        raise ValueError("temperatures must be positive")
    if t_hot < t_cold:
        raise ValueError("t_hot must not be below t_cold")
    return sum(layer.area / c.length * conductivity_integral(layer.table, t_cold, t_hot, step)
               for layer in c.layers)


@dataclass(frozen=True)
class ThermalStage:
    """A cryostat flange.  ``heating_slope`` is the temperature rise per watt, K/W."""

    name: str
    base_temp: float
    cooling_power: float
    heating_slope: float | None = None

    def __post_init__(self):
        if not self.base_temp > 0 or not self.cooling_power > 0:
            raise ValueError(f"stage {self.name}: temperature and cooling power must be positive")
        if self.heating_slope is not None and not self.heating_slope > 0:
            raise ValueError(f"stage {self.name}: heating slope must be positive")


# flange rise per power dissipated on the 800 mK flange, mK/mW (= K/W)
_SLOPES_MK_PER_MW = {
    "optical": {"still": 13.3, "4k": 6.5},
    "resistive": {"still": 14.1, "4k": 8.3},
}


def default_stages(source: str = "optical") -> list[ThermalStage]:
    """Dilution-refrigerator flanges with their available cooling powers.

    Slopes are those measured for dissipation on the 800 mK flange with an
    optical (modulator absorption) or resistive (heater) source; the mixing
    chamber has no measured slope.
    """
    s = _SLOPES_MK_PER_MW[source]
    return [
        ThermalStage("mxc", 0.015, 12e-6),
        ThermalStage("still", 0.8, 30e-3, s["still"]),
        ThermalStage("4k", 3.0, 300e-3, s["4k"]),
    ]


def dissipation_heating(stage: ThermalStage, p_dissipated: float) -> float:
    """Stage temperature (K) under a dissipated power, linear response."""
    if p_dissipated < 0:
        raise ValueError("dissipated power must be non-negative")
    if stage.heating_slope is None:
        raise ValueError(f"stage {stage.name} has no heating slope")
    return stage.base_temp + stage.heating_slope * p_dissipated


def optical_dissipation(p_incident: float, transmission: float) -> float:
    """Power absorbed in a modulator package of the given optical transmission."""
    if not 0 < transmission <= 1:
        raise ValueError("transmission must lie in (0, 1]")
    return p_incident * (1 - transmission)


@dataclass(frozen=True)
class StageBudget:
    stage: str
    load: float
    cooling_power: float
    margin: float
    margin_fraction: float
    passed: bool


@dataclass(frozen=True)
class BudgetReport:
    stages: tuple[StageBudget, ...]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stages)

    def __getitem__(self, name: str) -> StageBudget:
        for s in self.stages:
            if s.stage == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "stages": [asdict(s) for s in self.stages]}

    def table(self) -> str:
        lines = [f"{'stage':<10}{'load (W)':>14}{'cooling (W)':>14}{'margin':>10}  status"]
        for s in self.stages:
            lines.append(f"{s.stage:<10}{s.load:>14.4g}{s.cooling_power:>14.4g}"
                         f"{s.margin_fraction:>10.1%}  {'PASS' if s.passed else 'FAIL'}")
        return "\n".join(lines)


def budget_check(stages: Sequence[ThermalStage], loads: Sequence[tuple[str, float]]) -> BudgetReport:
    """Sum loads per stage and compare each against its cooling power."""
    totals = {s.name: 0.0 for s in stages}
    for name, p in loads:
        if name not in totals:
            raise ValueError(f"unknown stage {name!r}; known stages: {sorted(totals)}")
        if p < 0:
            raise ValueError("heat loads must be non-negative")
        totals[name] += p
    rows = []
    for s in stages:
        load = totals[s.name]
        margin = s.cooling_power - load
        rows.append(StageBudget(s.name, load, s.cooling_power, margin,
                                margin / s.cooling_power, load <= s.cooling_power))
    return BudgetReport(tuple(rows))
