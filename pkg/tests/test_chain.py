import numpy as np
import pytest
from hypothesis import given, strategies as st

from cryoeo.chain import (ChainStage, ReferencePlane, compose, hemt_stage, heterodyne_detect,
                          heterodyne_stage, preamp_stage, refer_spectrum, transducer_stage)
from cryoeo.modulator import ModulatorParams, transduce_spectrum
from cryoeo.signal import flat_spectrum

stage = st.builds(ChainStage, st.floats(1e-8, 1e6), st.floats(0, 1e7))
noisy_stage = st.builds(ChainStage, st.floats(1e-8, 1e6), st.floats(1e-3, 1e7))
DUT, DET = ReferencePlane.dut_output(), ReferencePlane.detector()


def _propagate(stages, s_in):
    """Oracle: push a signal and each stage's noise forward one stage at a time."""
    out = s_in
    for st_ in stages:
        out = st_.gain * (out + st_.n_add)
    return out


def test_single_stage_is_itself():
    s = ChainStage(3.0, 2.0)
    assert compose([s]) == s


def test_empty_chain_rejected():
    with pytest.raises(ValueError):
        compose([])


def test_preamp_then_transducer_example():
    g = 1e-3
    total = compose([preamp_stage(1e3, 1.0), ChainStage(g, 1 / (2 * g))]).n_add
    assert total == pytest.approx(1.5, rel=1e-12)


def test_preamp_then_full_transducer():
    pm = transducer_stage(ModulatorParams(), 8.2e9, t_bath=0.8, gain=1e-3)
    total = compose([preamp_stage(), pm]).n_add
    assert total == pytest.approx(1 + pm.n_add / 1e3, rel=1e-12)
    assert total < 1.5 + 2.1e-3


@given(st.floats(1.0, 1e5), st.floats(0, 10), st.floats(0, 1e8))
def test_two_term_friis(g_pa, n_pa, n2):
    total = compose([ChainStage(g_pa, n_pa), ChainStage(1.0, n2)]).n_add
    assert total == pytest.approx(n_pa + n2 / g_pa, rel=1e-12)


@given(st.lists(stage, min_size=1, max_size=5), st.floats(0, 1e3))
def test_compose_matches_forward_propagation(stages, s_in):
    c = compose(stages)
    want = _propagate(stages, s_in)
    assert c.gain * (s_in + c.n_add) == pytest.approx(want, rel=1e-9)


@given(stage, stage, stage)
def test_compose_associative(a, b, c):
    left = compose([a, compose([b, c])])
    right = compose([compose([a, b]), c])
    assert left.gain == pytest.approx(right.gain, rel=1e-12)
    assert left.n_add == pytest.approx(right.n_add, rel=1e-12)


def test_identity_referral():
    s = flat_spectrum(3.0, [0.0, 1.0], 1.0)
    out = refer_spectrum(s, [hemt_stage()], DUT, DUT)
    assert np.array_equal(out.values, s.values)


def test_hemt_floor_referral():
    h = hemt_stage()
    s = flat_spectrum(8.0 * h.gain, [0.0, 1.0], 1.0)
    out = refer_spectrum(s, [h], DET, DUT)
    np.testing.assert_allclose(out.values, 8.0, rtol=1e-12)
    assert out.reference == "dut_output"


def test_optical_floor_referred_to_input():
    g = 0.9e-7
    det = flat_spectrum(1.0, [0.0], 1.0)
    out = refer_spectrum(det, [ChainStage(g, 0.0)], DET, DUT)
    assert out.values[0] == pytest.approx(1 / g, rel=1e-12)


@given(st.lists(stage, min_size=1, max_size=4), st.floats(0, 1e4), st.booleans())
def test_referral_round_trip(stages, level, noise):
    s = flat_spectrum(level, [0.0, 1.0], 1.0)
    down = refer_spectrum(s, stages, DUT, DET, include_noise=noise)
    back = refer_spectrum(down, stages, DET, DUT, include_noise=noise)
    np.testing.assert_allclose(back.values, s.values, rtol=1e-9,
                               atol=1e-9 * (level + compose(stages).n_add))


@given(st.lists(noisy_stage, min_size=2, max_size=4), st.floats(1, 1e6), st.integers(0, 1))
def test_snr_independent_of_plane(stages, signal, k):
    # signal and noise referred together keep their ratio
    c = compose(stages)
    sig = flat_spectrum(signal, [0.0], 1.0)
    noise = flat_spectrum(c.n_add, [0.0], 1.0)
    dst = ReferencePlane.stage_input(k)
    ratio = (refer_spectrum(sig, stages, DUT, dst).values[0]
             / refer_spectrum(noise, stages, DUT, dst).values[0])
    assert ratio == pytest.approx(signal / c.n_add, rel=1e-12)


def test_heterodyne_vacuum_floor_is_one():
    assert heterodyne_detect(flat_spectrum(0.5, [0.0], 1.0)).values[0] == pytest.approx(1.0)


def test_heterodyne_unit_efficiency():
    s = flat_spectrum(10.0, [0.0], 1.0)
    assert heterodyne_detect(s).values[0] == pytest.approx(10.5)


@given(st.floats(0.01, 1.0), st.floats(0, 1e3))
def test_heterodyne_beamsplitter_model(eta, level):
    s = flat_spectrum(level, [0.0], 1.0)
    want = eta * level + (1 - eta) / 2 + 0.5
    assert heterodyne_detect(s, eta).values[0] == pytest.approx(want, rel=1e-12)
    hs = heterodyne_stage(eta)
    assert hs.gain * (level + hs.n_add) == pytest.approx(want, rel=1e-12)


def test_transducer_stage_matches_spectrum_model():
    p = ModulatorParams()
    st_ = transducer_stage(p, 8.2e9, t_bath=0.8, gain=1e-6)
    out = transduce_spectrum(flat_spectrum(5.0, [0.0], 1.0, center_hz=8.2e9), p, t_bath=0.8,
                             gain=1e-6)
    assert st_.gain * (5.0 + st_.n_add) == pytest.approx(out.values[0], rel=1e-12)


def test_bad_planes():
    with pytest.raises(ValueError):
        refer_spectrum(flat_spectrum(1.0, [0.0], 1.0), [hemt_stage()], DUT,
                       ReferencePlane.stage_input(3))
    with pytest.raises(ValueError):
        ChainStage(0.0, 1.0)


def test_round_trip_with_negligible_stage_noise():
    # a denormal n_add upstream of a noisy stage must not trip the below-floor check
    stages = [ChainStage(1.0, 5e-324), ChainStage(1.0, 1.0)]
    s = flat_spectrum(0.0, [0.0, 1.0], 1.0)
    down = refer_spectrum(s, stages, DUT, DET, include_noise=True)
    back = refer_spectrum(down, stages, DET, DUT, include_noise=True)
    np.testing.assert_array_equal(back.values, 0.0)
