from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from cryoeo.config import ConfigError, Scenario, apply_overrides, load_scenario, parse_scenario
from conftest import REFERENCE_DUT_YAML

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    assert isinstance(load_scenario(path), Scenario)


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_snapshot_round_trip(path):
    sc = load_scenario(path)
    assert parse_scenario(sc.to_yaml()) == sc


@given(st.floats(0.01, 100), st.integers(0, 2**31), st.floats(1e6, 1e7))
def test_round_trip_with_overrides(v_pi, seed, kappa):
    sc = parse_scenario("experiment: omit_sweep\n" + REFERENCE_DUT_YAML,
                        [f"modulator.v_pi={v_pi!r}", f"seed={seed}", f"dut.kappa={kappa!r}"])
    assert sc.modulator.v_pi == v_pi and sc.dut.kappa == kappa
    assert parse_scenario(sc.to_yaml()) == sc


def test_missing_kappa_names_field_and_line():
    text = "experiment: omit_sweep\ndut:\n  f_cavity: 8.2e9\n  f_mech: 6e6\n  gamma_m: 10\n  g0: 150\n"
    with pytest.raises(ConfigError) as e:
        parse_scenario(text, source="x.yaml")
    assert "dut.kappa" in str(e.value) and "x.yaml:2" in str(e.value)


def test_bad_value_reports_its_line():
    text = "experiment: psk_link\nmodulator:\n  z0: 50\n  v_pi: -3\n"
    with pytest.raises(ConfigError) as e:
        parse_scenario(text, source="c.yaml")
    assert "modulator.v_pi" in str(e.value) and "c.yaml:4" in str(e.value)


def test_negative_vpi_table_rejected():
    with pytest.raises(ConfigError, match="v_pi_table"):
        parse_scenario("experiment: psk_link\nmodulator: {v_pi_table: [[5e9, -7.5]]}\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="kapa"):
        parse_scenario("experiment: omit_sweep\n" + REFERENCE_DUT_YAML + "omit: {kapa: 1}\n")


def test_components_must_exist():
    with pytest.raises(ConfigError, match="dut"):
        parse_scenario("experiment: comb_calibration\n")
    with pytest.raises(ConfigError, match="thermal"):
        parse_scenario("experiment: heat_budget\n")
    with pytest.raises(ConfigError, match="unknown stage"):
        parse_scenario("experiment: heat_budget\nthermal: {loads: [{stage: 1k, power: 1}]}\n")


def test_sweep_axes_non_empty():
    with pytest.raises(ConfigError, match="pump_powers_dbm"):
        parse_scenario("experiment: omit_sweep\n" + REFERENCE_DUT_YAML + "omit: {pump_powers_dbm: []}\n")
    with pytest.raises(ConfigError, match="frequencies_hz"):
        parse_scenario("experiment: vpi_characterization\nvpi: {frequencies_hz: []}\n")


def test_overrides_scalar_only():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["omit.pump_powers_dbm=[1, 2]"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["noequals"])
    assert apply_overrides({}, ["a.b=3"]) == {"a": {"b": 3}}


def test_invalid_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario("experiment: [unclosed\n")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "nope.yaml")


def test_domain_objects_built():
    sc = parse_scenario("experiment: omit_sweep\n" + REFERENCE_DUT_YAML)
    assert sc.dut.build().kappa == pytest.approx(2 * 3.14159265358979 * 3e6)
    assert sc.modulator.build().v_pi(None) == 7.5
