"""Scenario configuration: YAML documents validated into a ``Scenario``.

Frequencies and rates in the file are ordinary frequencies in Hz; they are
converted to angular units when the domain objects are built.  Powers are
in W unless the key ends in ``_dbm``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import thermal
from .chain import ChainStage, hemt_stage, preamp_stage
from .electromech import ElectromechParams
from .modulator import ModulatorParams, VpiTable
from .units import SPEED_OF_LIGHT

Experiment = Literal["omit_sweep", "comb_calibration", "psk_link", "vpi_characterization",
                     "heat_budget"]


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` names the offending field and line."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModulatorConfig(_Model):
    v_pi: float = Field(7.5, gt=0)
    v_pi_table: Optional[list[tuple[float, float]]] = None
    z0: float = Field(50.0, gt=0)
    insertion_transmission: float = Field(0.23, gt=0, le=1)
    p_opt_out: float = Field(1.1e-3, ge=0)
    wavelength: float = Field(1555e-9, gt=0)
    mount_temperature: float = Field(0.8, gt=0)

    @field_validator("v_pi_table")
    @classmethod
    def _table_positive(cls, v):
        if v is not None:
            if not v:
                raise ValueError("v_pi_table must not be empty")
            if any(val <= 0 for _, val in v):
                raise ValueError("v_pi_table values must be positive")
            if any(f <= 0 for f, _ in v):
                raise ValueError("v_pi_table frequencies must be positive")
        return v

    def build(self) -> ModulatorParams:
        if self.v_pi_table:
            f, v = zip(*sorted(self.v_pi_table))
            table = VpiTable(f, v)
        else:
            table = VpiTable.flat(self.v_pi)
        return ModulatorParams(table, self.z0, self.insertion_transmission, self.p_opt_out,
                               SPEED_OF_LIGHT / self.wavelength, self.mount_temperature)


class DutConfig(_Model):
    f_cavity: float = Field(gt=0)
    kappa: float = Field(gt=0)
    kappa_ext_ratio: float = Field(0.75, gt=0, le=1)
    f_mech: float = Field(gt=0)
    gamma_m: float = Field(gt=0)
    g0: float = Field(gt=0)

    def build(self) -> ElectromechParams:
        return ElectromechParams.from_hz(self.f_cavity, self.kappa, self.f_mech, self.gamma_m,
                                         self.g0, kappa_ext_ratio=self.kappa_ext_ratio)


class HemtConfig(_Model):
    gain_db: float = 40.0
    n_add: float = Field(8.0, ge=0)

    def build(self) -> ChainStage:
        return hemt_stage(self.gain_db, self.n_add)


class OpticalConfig(_Model):
    """``gain`` fixes G for the optical branch; null computes it from the modulator."""

    detection_efficiency: float = Field(1.0, gt=0, le=1)
    gain: Optional[float] = Field(0.9e-7, gt=0)


class PreampConfig(_Model):
    gain: float = Field(1e3, gt=0)
    n_add: float = Field(1.0, ge=0)

    def build(self) -> ChainStage:
        return preamp_stage(self.gain, self.n_add)


class ChainsConfig(_Model):
    hemt: HemtConfig = HemtConfig()
    optical: OpticalConfig = OpticalConfig()
    preamp: Optional[PreampConfig] = None


class StageConfig(_Model):
    name: str
    base_temp: float = Field(gt=0)
    cooling_power: float = Field(gt=0)
    heating_slope: Optional[float] = Field(None, gt=0)

    def build(self) -> thermal.ThermalStage:
        return thermal.ThermalStage(self.name, self.base_temp, self.cooling_power,
                                    self.heating_slope)


class LoadConfig(_Model):
    stage: str
    power: float = Field(ge=0)
    label: str = ""


class ModulatorHeatConfig(_Model):
    stage: str = "still"
    incident_power: float = Field(15e-3, ge=0)
    transmission: Optional[float] = Field(None, gt=0, le=1)


class ThermalConfig(_Model):
    source: Literal["optical", "resistive"] = "optical"
    stages: Optional[list[StageConfig]] = None
    loads: list[LoadConfig] = []
    modulator: Optional[ModulatorHeatConfig] = None
    hemt_dissipation: float = Field(10e-3, gt=0)
    coax_fiber_length: float = Field(1.0, gt=0)

    def build_stages(self) -> list[thermal.ThermalStage]:
        if self.stages is None:
            return thermal.default_stages(self.source)
        return [s.build() for s in self.stages]


class OmitConfig(_Model):
    pump_powers_dbm: list[Optional[float]] = Field([-20.0, 0.0, 5.0, 10.0, 15.0, 20.0],
                                                   min_length=1)
    probe_power_dbm: float = -20.0
    line_attenuation_db: float = Field(56.0, ge=0)
    sweep_points: int = Field(801, ge=16)
    span_kappa: float = Field(3.0, gt=0)
    zoom_points: int = Field(401, ge=16)
    zoom_span: float = Field(5.0, gt=0)
    ifbw_hz: float = Field(100.0, gt=0)
    fit_max_g_over_kappa: float = Field(0.05, gt=0)


class CombConfig(_Model):
    pump_n_cav: float = Field(1e4, gt=0)
    beta_mech: float = Field(0.1, gt=0)
    dut_output_power_dbm: float = -70.0
    order: int = 1
    rbw_hz: float = Field(1.0, gt=0)
    sample_rate_hz: float = Field(1000.0, gt=0)
    duration_s: float = Field(128.0, gt=0)
    offset_hz: float = 100.0
    overview_rbw_hz: float = Field(1e4, gt=0)

    @field_validator("order")
    @classmethod
    def _nonzero(cls, v):
        if v == 0:
            raise ValueError("order 0 is the pump, choose a mechanical sideband")
        return v


class PskConfig(_Model):
    n_bits: int = Field(800_000, ge=16)
    baud_rate: float = Field(5e9, gt=0)
    drive_v: Optional[float] = Field(None, gt=0)
    noise: float = Field(0.0, ge=0)
    samples_per_symbol: int = Field(8, ge=2)
    rise_fraction: float = Field(0.15, ge=0)
    prbs_order: Literal[7, 15, 23, 31] = 15
    prbs_seed: int = Field(0x7FFF, gt=0)
    confidence: float = Field(0.95, ge=0, lt=1)
    eye_symbols: int = Field(2000, ge=1)
    delay_samples: int = 0


class PowerSweep(_Model):
    start_dbm: float = -20.0
    stop_dbm: float = 0.0
    num: int = Field(20, ge=3)

    def watts(self) -> np.ndarray:
        return 1e-3 * 10 ** (np.linspace(self.start_dbm, self.stop_dbm, self.num) / 10)


class VpiConfig(_Model):
    frequencies_hz: list[float] = Field([5e9], min_length=1)
    temperatures_k: list[float] = Field([300.0, 100.0, 10.0, 0.8], min_length=1)
    temperature_scale: Optional[list[tuple[float, float]]] = None
    powers: PowerSweep = PowerSweep()
    md_noise: float = Field(0.05, ge=0)
    exact_bessel: bool = True


class Scenario(_Model):
    experiment: Experiment
    seed: int = 12345
    output_dir: str = "runs"
    modulator: ModulatorConfig = ModulatorConfig()
    dut: Optional[DutConfig] = None
    chains: ChainsConfig = ChainsConfig()
    thermal: Optional[ThermalConfig] = None
    omit: OmitConfig = OmitConfig()
    comb: CombConfig = CombConfig()
    psk: PskConfig = PskConfig()
    vpi: VpiConfig = VpiConfig()

    @model_validator(mode="after")
    def _components_exist(self):
        if self.experiment in ("omit_sweep", "comb_calibration") and self.dut is None:
            raise ValueError(f"experiment {self.experiment} needs a 'dut' section")
        if self.experiment == "heat_budget" and self.thermal is None:
            raise ValueError("experiment heat_budget needs a 'thermal' section")
        if self.thermal is not None:
            names = ({s.name for s in self.thermal.stages} if self.thermal.stages is not None
                     else {s.name for s in thermal.default_stages()})
            for load in self.thermal.loads:
                if load.stage not in names:
                    raise ValueError(f"thermal load references unknown stage {load.stage!r}")
            if self.thermal.modulator and self.thermal.modulator.stage not in names:
                raise ValueError(
                    f"modulator mount stage {self.thermal.modulator.stage!r} is not defined")
        return self

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _set_path(doc: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if node.get(k) is None:
            node[k] = {}
        node = node[k]
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted}: '{k}' is not a section")
    node[keys[-1]] = value


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as YAML scalars."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        if isinstance(value, (dict, list)):
            raise ConfigError(f"override {key}: only scalar leaves may be overridden")
        _set_path(doc, key.strip(), value)
    return doc


def _line_of(node, loc) -> int | None:
    """1-based line of the deepest YAML node along ``loc`` that exists."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def _format_errors(err: ValidationError, root, source: str) -> str:
    lines = []
    for e in err.errors():
        loc = tuple(x for x in e["loc"] if not (isinstance(x, str) and x.startswith("function-")))
        field = ".".join(str(x) for x in loc) or "<root>"
        ln = _line_of(root, loc) if root is not None else None
        where = f"{source}:{ln}" if ln else source
        msg = e["msg"]
        if e["type"] == "missing":
            msg = f"missing required field '{field}'"
        lines.append(f"{where}: {field}: {msg}")
    return "\n".join(lines)


def parse_scenario(text: str, overrides=None, source: str = "<config>") -> Scenario:
    try:
        root = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    doc = apply_overrides(doc, overrides)
    try:
        return Scenario.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, root, source)) from None


def load_scenario(path, overrides=None) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    return parse_scenario(p.read_text(encoding="utf-8"), overrides, str(p))
