"""Relay processing for HDMF and the baselines it is compared against.

Every relay takes the superposed uplink ``y_r`` (one packet or a ``(P, M)``
batch) with its ``ChannelState`` and returns a ``RelayDecision``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .llr import Scheme, User, decide_scheme, detect_bits_diff, detect_bits_direct, hard_bits, packet_llr_summary
from .modem import Constellation, modulate


@dataclass
class RelayDecision:
    """What the relay puts on the air in the broadcast slot.

    ``scheme`` is a ``Scheme`` (or an int8 array of codes for a batch) and is
    bookkeeping only: it is never transmitted.  Digital relays set ``bits``
    and emit constellation points; ANC leaves ``bits`` as None and records
    its amplification ``gain``.
    """

    scheme: Scheme | np.ndarray | None
    symbols: np.ndarray
    bits: np.ndarray | None = None
    gain: float | np.ndarray | None = None


def _scalar_scheme(code, y_r):
    return Scheme(int(code)) if np.ndim(y_r) == 1 else code


def hdmf_relay(y_r, ch: ChannelState, c: Constellation) -> RelayDecision:
    """Per packet, forward the XOR or one user's bits, whichever the
    packet-minimum LLR rule trusts more, then re-modulate."""
    s = packet_llr_summary(y_r, ch, c)
    scheme = np.asarray(decide_scheme(s))
    candidates = np.stack([hard_bits(s.bits_dif), hard_bits(s.bits_dir_a), hard_bits(s.bits_dir_b)])
    bits = np.take_along_axis(candidates, scheme[None, ..., None].astype(np.intp), axis=0)[0]
    return RelayDecision(_scalar_scheme(scheme, y_r), modulate(bits, c), bits)


def classic_dmf_relay(y_r, ch: ChannelState, c: Constellation) -> RelayDecision:
    """Always direct DMF on the instantaneously stronger uplink (A on ties)."""
    use_a = np.abs(ch.h_ar) >= np.abs(ch.h_br)
    swapped = ChannelState(
        np.where(use_a, ch.h_ar, ch.h_br), np.where(use_a, ch.h_br, ch.h_ar), ch.h_ra, ch.h_rb, ch.n0
    )
    bits = detect_bits_direct(y_r, swapped, c, User.A)
    scheme = np.where(use_a, Scheme.DIRECT_A, Scheme.DIRECT_B).astype(np.int8)
    return RelayDecision(_scalar_scheme(scheme, y_r), modulate(bits, c), bits)


def pnc_relay(y_r, ch: ChannelState, c: Constellation) -> RelayDecision:
    """Physical-layer network coding: always forward the detected XOR."""
    bits = detect_bits_diff(y_r, ch, c)
    scheme = np.full(np.shape(y_r)[:-1], Scheme.DIFFERENTIAL, dtype=np.int8)
    return RelayDecision(_scalar_scheme(scheme, y_r), modulate(bits, c), bits)


def anc_gain(ch: ChannelState, c: Constellation, power_budget: float | None = None):
    """Amplification that scales the expected received power to the budget.

    The budget defaults to the constellation's symbol energy, i.e. the power
    a digital relay would transmit.
    """
    budget = c.symbol_energy if power_budget is None else power_budget
    if not budget > 0:
        raise ValueError("ANC power budget must be positive")
    rx_power = (np.abs(ch.h_ar) ** 2 + np.abs(ch.h_br) ** 2) * c.symbol_energy + ch.n0
    if np.any(rx_power <= 0):
        raise ValueError("ANC input power is zero; gain undefined")
    return np.sqrt(budget / rx_power)


def anc_relay(y_r, ch: ChannelState, c: Constellation, power_budget: float | None = None) -> RelayDecision:
    """Analog network coding: amplify the superposition and forward it."""
    gain = anc_gain(ch, c, power_budget)
    y_r = np.asarray(y_r, dtype=complex)
    g = gain[..., None] if np.ndim(gain) else gain
    return RelayDecision(None, g * y_r, None, gain)


RELAYS = {
    "HDMF": hdmf_relay,
    "DMF": classic_dmf_relay,
    "PNC": pnc_relay,
    "ANC": anc_relay,
}
