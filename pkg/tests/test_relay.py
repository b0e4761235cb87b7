import numpy as np
import pytest

from hdmf.channel import ChannelState, FadingConfig, draw_channel, mac_phase
from hdmf.llr import Scheme
from hdmf.modem import BPSK, QPSK, modulate
from hdmf.relay import RELAYS, anc_gain, anc_relay, classic_dmf_relay, hdmf_relay, pnc_relay
from oracles import direct_dmf_noiseless_rates


def _uplink(h_a, h_b, bits_a, bits_b, c, n0=1e-3):
    ch = ChannelState.reciprocal(h_a, h_b, n0)
    return mac_phase(modulate(bits_a, c), modulate(bits_b, c), ch), ch


def test_hdmf_worked_example():
    bits_a = [1, 1] * 8
    bits_b = [0, 1] * 8
    y, ch = _uplink(1.0, 1.0, bits_a, bits_b, QPSK)
    d = hdmf_relay(y, ch, QPSK)
    assert d.scheme == Scheme.DIFFERENTIAL
    assert d.bits.tolist() == [1, 0] * 8


def test_hdmf_forwards_strong_user():
    rng = np.random.default_rng(0)
    bits_a = rng.integers(0, 2, 64)
    bits_b = rng.integers(0, 2, 64)
    y, ch = _uplink(1.0, 1e-3, bits_a, bits_b, QPSK)
    d = hdmf_relay(y, ch, QPSK)
    assert d.scheme == Scheme.DIRECT_A
    np.testing.assert_array_equal(d.bits, bits_a)
    assert set(d.symbols.tolist()) <= set(QPSK.points.tolist())


def test_hdmf_selection_frequencies_at_symmetry():
    from hdmf.harness import selection_frequencies

    freq = selection_frequencies(10**4, 10**4, QPSK, 6000, np.random.default_rng(1))
    assert freq.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(freq, [1 / 3] * 3, atol=0.03)


def test_classic_dmf_picks_stronger_channel():
    bits = np.zeros(8, dtype=np.int8)
    y, ch = _uplink(2.0, 1.0, bits, bits, BPSK)
    assert classic_dmf_relay(y, ch, BPSK).scheme == Scheme.DIRECT_A
    y, ch = _uplink(1.0, 2.0, bits, bits, BPSK)
    assert classic_dmf_relay(y, ch, BPSK).scheme == Scheme.DIRECT_B


def test_classic_dmf_equal_gain_error_rate_matches_oracle():
    rng = np.random.default_rng(2)
    n = 10**5
    for c in (BPSK, QPSK):
        bits_a = rng.integers(0, 2, (1, n * c.order))
        bits_b = rng.integers(0, 2, (1, n * c.order))
        y, ch = _uplink(np.ones(1), np.ones(1), bits_a, bits_b, c, n0=1e-4)
        got = classic_dmf_relay(y, ch, c).bits
        ber = np.mean(got != bits_a)
        ser = np.mean((got != bits_a).reshape(-1, c.order).any(axis=1))
        ref_ber, ref_ser = direct_dmf_noiseless_rates(list(c.points), c.labels.tolist())
        assert abs(ber - ref_ber) < 0.01 and abs(ser - ref_ser) < 0.01


def test_pnc():
    rng = np.random.default_rng(3)
    bits_a, bits_b = rng.integers(0, 2, 64), rng.integers(0, 2, 64)
    y, ch = _uplink(0.7j, 0.7j, bits_a, bits_b, QPSK)
    d = pnc_relay(y, ch, QPSK)
    assert d.scheme == Scheme.DIFFERENTIAL
    np.testing.assert_array_equal(d.bits, bits_a ^ bits_b)


def test_anc_gain_and_errors():
    ch = ChannelState.reciprocal(1.0, 1.0, 0.0)
    assert anc_gain(ch, BPSK) == pytest.approx(1 / np.sqrt(2))
    bits = [1, 0, 1, 1]
    y, _ = _uplink(1.0, 1.0, bits, bits, BPSK, n0=0.0)
    d = anc_relay(y, ch, BPSK)
    np.testing.assert_allclose(d.symbols, y / np.sqrt(2))
    assert d.bits is None
    with pytest.raises(ValueError):
        anc_gain(ChannelState.reciprocal(0.0, 0.0, 0.0), BPSK)
    with pytest.raises(ValueError):
        anc_gain(ch, BPSK, power_budget=0.0)


def test_anc_output_power_matches_budget():
    rng = np.random.default_rng(4)
    ch = draw_channel(FadingConfig(), 0.2, rng)
    x_a = modulate(rng.integers(0, 2, 2 * 10**5), QPSK)
    x_b = modulate(rng.integers(0, 2, 2 * 10**5), QPSK)
    y = mac_phase(x_a, x_b, ch, rng)
    out = anc_relay(y, ch, QPSK, power_budget=3.0).symbols
    assert np.mean(np.abs(out) ** 2) == pytest.approx(3.0, rel=0.02)


def test_batched_relays_emit_points():
    rng = np.random.default_rng(5)
    ch = draw_channel(FadingConfig(), 0.05, rng, size=20)
    bits = rng.integers(0, 2, (2, 20, 32))
    y = mac_phase(modulate(bits[0], QPSK), modulate(bits[1], QPSK), ch, rng)
    for name in ("HDMF", "DMF", "PNC"):
        d = RELAYS[name](y, ch, QPSK)
        assert d.symbols.shape == (20, 16)
        assert np.isin(d.symbols, QPSK.points).all()
        assert np.asarray(d.scheme).shape == (20,)
