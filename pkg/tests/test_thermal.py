import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from cryoeo import thermal
from cryoeo.thermal import (ConductorSpec, Layer, ThermalStage, budget_check, conducted_heat,
                            conductivity_integral, default_coax, default_fiber,
                            dissipation_heating, material, optical_dissipation, default_stages)


def test_equal_temperatures_no_heat():
    assert conducted_heat(default_coax(), 3.0, 3.0) == 0.0


def test_coax_fiber_ratio():
    ratio = conducted_heat(default_coax(), 300, 3) / conducted_heat(default_fiber(), 300, 3)
    assert 30 <= ratio <= 300


def test_half_length_doubles_heat():
    assert conducted_heat(default_coax(0.5), 300, 3) == pytest.approx(
        2 * conducted_heat(default_coax(1.0), 300, 3), rel=1e-12)


@pytest.mark.parametrize("name", ["stainless_steel_304", "ptfe", "fused_silica"])
def test_integral_matches_adaptive_quadrature(name):
    tab = material(name)
    lo, hi = max(tab.domain[0], 3.0), 300.0
    ref, _ = quad(lambda t: float(tab(t)), lo, hi, limit=400, epsrel=1e-9)
    assert conductivity_integral(tab, lo, hi) == pytest.approx(ref, rel=1e-7)


def test_step_convergence():
    c = default_coax()
    a = conducted_heat(c, 300, 3, step=0.01)
    b = conducted_heat(c, 300, 3, step=0.005)
    assert abs(a - b) / a < 1e-6


def test_stainless_known_integral():
    # NIST 304: integral of kappa from 4 K to 300 K is about 3.06 kW/m
    assert conductivity_integral(material("stainless_steel_304"), 4, 300) == pytest.approx(3060, rel=0.05)


def test_table_domain_enforced():
    with pytest.raises(ValueError):
        material("ptfe")(0.5)


@given(st.floats(3.1, 299), st.floats(3.1, 299))
def test_monotone_in_hot_temperature(t1, t2):
    lo, hi = sorted((t1, t2))
    c = default_fiber()
    assert conducted_heat(c, lo, 3.0, step=0.5) <= conducted_heat(c, hi, 3.0, step=0.5)


@given(st.floats(1e-8, 1e-4))
def test_monotone_in_area(area):
    tab = material("stainless_steel_304")
    small = ConductorSpec("coax", 1.0, (Layer(area, tab),))
    big = ConductorSpec("coax", 1.0, (Layer(2 * area, tab),))
    assert conducted_heat(small, 50, 4, 0.1) < conducted_heat(big, 50, 4, 0.1)


def test_zero_power_base_temperature():
    st_ = default_stages()[1]
    assert dissipation_heating(st_, 0.0) == st_.base_temp


def test_modulator_on_still_example():
    p = optical_dissipation(10e-3, 0.23)
    assert p == pytest.approx(7.7e-3)
    rise = dissipation_heating(default_stages("optical")[1], p) - 0.8
    assert rise == pytest.approx(7.7 * 13.3e-3, rel=1e-12)
    assert rise == pytest.approx(0.102, abs=1e-3)


def test_resistive_on_4k_example():
    rise = dissipation_heating(default_stages("resistive")[2], 10e-3) - 3.0
    assert rise == pytest.approx(0.083, rel=1e-12)


@pytest.mark.parametrize("source,stage,slope", [("optical", 1, 13.3), ("optical", 2, 6.5),
                                                ("resistive", 1, 14.1), ("resistive", 2, 8.3)])
def test_slopes(source, stage, slope):
    assert default_stages(source)[stage].heating_slope == slope


@given(st.floats(0, 1e-2), st.floats(0, 1e-2))
def test_heating_affine(p1, p2):
    s = default_stages()[2]
    d = lambda p: dissipation_heating(s, p) - s.base_temp
    assert d(p1 + p2) == pytest.approx(d(p1) + d(p2), rel=1e-12, abs=1e-15)


def test_mxc_has_no_slope():
    with pytest.raises(ValueError):
        dissipation_heating(default_stages()[0], 1e-6)


def test_improved_modulator_budget():
    p = optical_dissipation(15e-3, 0.66)
    rep = budget_check(default_stages(), [("4k", p)])
    assert rep.passed
    assert p / 10e-3 == pytest.approx(0.5, abs=0.02)


def test_overloaded_mixing_chamber():
    rep = budget_check(default_stages(), [("mxc", 50e-6)])
    assert not rep.passed and not rep["mxc"].passed


def test_empty_loads_full_margin():
    rep = budget_check(default_stages(), [])
    assert rep.passed
    assert all(s.margin_fraction == 1.0 for s in rep.stages)


def test_unknown_stage_rejected():
    with pytest.raises(ValueError):
        budget_check(default_stages(), [("1k", 1e-3)])


def test_stage_validation():
    with pytest.raises(ValueError):
        ThermalStage("x", -1.0, 1.0)
    assert "PASS" in budget_check(default_stages(), []).table()
