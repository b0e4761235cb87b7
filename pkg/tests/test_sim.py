import numpy as np
import pytest

from hdmf.channel import FIXED, FadingConfig
from hdmf.modem import BPSK, QPSK
from hdmf.sim import LinkCounts, random_packets, simulate_exchange, simulate_point


@pytest.mark.parametrize("proto", ["HDMF", "ANC"])
def test_noiseless_exchange_is_error_free(proto):
    for c in (BPSK, QPSK):
        counts = simulate_exchange(proto, c, FadingConfig(), 10.0, 200, np.random.default_rng(0), noise=False)
        assert counts.packet_errors == 0 and counts.symbol_errors == 0


def test_noiseless_equal_fixed_gains():
    # equal real gains: XOR is always resolvable, a single user never is
    fixed = FadingConfig(FIXED)
    pnc = simulate_exchange("PNC", QPSK, fixed, 10.0, 200, np.random.default_rng(0), noise=False)
    dmf = simulate_exchange("DMF", QPSK, fixed, 10.0, 200, np.random.default_rng(0), noise=False)
    assert pnc.per == 0.0
    assert dmf.per == 1.0


def test_noiseless_hdmf_any_ratio():
    for g in (-0.7, 0.0, 0.5):
        counts = simulate_exchange("HDMF", QPSK, FadingConfig(gain_ratio_log10=g), 10.0, 300,
                                   np.random.default_rng(1), noise=False)
        assert counts.per == 0.0 and counts.packets > 0


def test_packet_layout():
    pk = random_packets(3, QPSK, np.random.default_rng(0))
    assert pk.shape == (3, 256)
    assert random_packets(2, BPSK, np.random.default_rng(0)).shape == (2, 128)


def test_delivery_accounting():
    counts = simulate_point("HDMF", QPSK, FadingConfig(), 20.0, 700, np.random.default_rng(2), batch=300)
    direct = counts.schemes[1] + counts.schemes[2]
    assert counts.schemes.sum() == 700
    assert counts.packets == 2 * counts.schemes[0] + direct
    assert counts.symbols == counts.packets * 128
    assert 0 <= counts.packet_errors <= counts.packets
    anc = simulate_point("ANC", QPSK, FadingConfig(), 20.0, 500, np.random.default_rng(2))
    assert anc.packets == 1000


def test_counts_add_and_zero_rates():
    a = LinkCounts()
    assert a.per == 0.0 and a.ser == 0.0
    a += LinkCounts(10, 1, 1280, 3, np.array([1, 2, 3]))
    a += LinkCounts(10, 1, 1280, 3, np.array([1, 0, 0]))
    assert a.per == pytest.approx(0.1) and a.schemes.tolist() == [2, 2, 3]


def test_unknown_protocol():
    with pytest.raises(ValueError):
        simulate_exchange("DNC", QPSK, FadingConfig(), 10.0, 5, np.random.default_rng(0))


def test_gaussian_setting_runs():
    counts = simulate_point("HDMF", QPSK, FadingConfig(FIXED), 10.0, 200, np.random.default_rng(3))
    assert counts.packets > 0
