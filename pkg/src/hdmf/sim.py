"""Batched Monte Carlo of full two-way exchanges.

One call pushes a batch of packet pairs through uplink, relay, downlink and
end-node detection and returns error counts.  Only the deliveries a relay
actually attempts are counted: a direct-forwarded packet carries one user's
data, so the other user's packet that slot is left to retransmission and is
neither a success nor an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelState, FadingConfig, bc_phase, draw_channel, mac_phase
from .endnode import CRC_BITS, Detected, anc_detect, blind_detect_batch, make_packet
from .llr import Scheme
from .modem import Constellation, demodulate_ml, modulate
from .relay import RELAYS

PACKET_SYMBOLS = 128
NOISELESS_N0 = 1e-12


@dataclass
class LinkCounts:
    """Error tallies for one simulated point; counts add across batches."""

    packets: int = 0
    packet_errors: int = 0
    symbols: int = 0
    symbol_errors: int = 0
    schemes: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))

    def __iadd__(self, other: "LinkCounts"):
        self.packets += other.packets
        self.packet_errors += other.packet_errors
        self.symbols += other.symbols
        self.symbol_errors += other.symbol_errors
        self.schemes = self.schemes + other.schemes
        return self

    @property
    def per(self) -> float:
        return self.packet_errors / self.packets if self.packets else 0.0

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols if self.symbols else 0.0


def random_packets(n: int, c: Constellation, rng: np.random.Generator, n_symbols: int = PACKET_SYMBOLS) -> np.ndarray:
    """``n`` CRC-framed packets that fill exactly ``n_symbols`` symbols."""
    payload_bits = n_symbols * c.order - CRC_BITS
    if payload_bits <= 0:
        raise ValueError("packet too short to hold a checksum")
    return make_packet(rng.integers(0, 2, (n, payload_bits), dtype=np.int8))


def _symbol_errors(bits_hat, bits_true, c: Constellation) -> np.ndarray:
    wrong = (bits_hat != bits_true).reshape(*bits_hat.shape[:-1], -1, c.order)
    return wrong.any(axis=-1).sum(axis=-1)


def simulate_exchange(
    protocol: str,
    c: Constellation,
    fading: FadingConfig,
    ebn0_db: float,
    n_packets: int,
    rng: np.random.Generator,
    *,
    noise: bool = True,
    n_symbols: int = PACKET_SYMBOLS,
) -> LinkCounts:
    """Simulate ``n_packets`` uplink slots and their broadcasts.

    Packet errors use blind CRC detection at the end nodes (a discard is an
    error).  Symbol errors are scored with the relay's actual scheme known to
    the scorer, so symbols of discarded packets still count individually.
    """
    try:
        relay = RELAYS[protocol.upper()]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; have {sorted(RELAYS)}") from None
    # noise off is the N0 -> 0 limit: detectors see a vanishing N0 too
    n0 = float(c.n0_from_ebn0_db(ebn0_db)) if noise else NOISELESS_N0 * c.bit_energy
    noise_rng = rng if noise else None

    bits_a = random_packets(n_packets, c, rng, n_symbols)
    bits_b = random_packets(n_packets, c, rng, n_symbols)
    x_a, x_b = modulate(bits_a, c), modulate(bits_b, c)
    ch = draw_channel(fading, n0, rng, size=n_packets)
    y_r = mac_phase(x_a, x_b, ch, noise_rng)
    decision = relay(y_r, ch, c)
    y_a = bc_phase(decision.symbols, ch.h_ra, n0, noise_rng)
    y_b = bc_phase(decision.symbols, ch.h_rb, n0, noise_rng)

    counts = LinkCounts()
    if decision.bits is None:
        # ANC: every slot carries both directions
        hat_at_b = anc_detect(y_b, ch.h_rb, ch.h_br, ch.h_ar, decision.gain, x_b, n0, c)
        hat_at_a = anc_detect(y_a, ch.h_ra, ch.h_ar, ch.h_br, decision.gain, x_a, n0, c)
        to_b = to_a = np.ones(n_packets, dtype=bool)
        ok_b, ok_a = to_b, to_a
        sym_hat_b, sym_hat_a = hat_at_b, hat_at_a
    else:
        scheme = np.asarray(decision.scheme)
        counts.schemes = np.bincount(scheme, minlength=3)
        to_b = scheme != Scheme.DIRECT_B
        to_a = scheme != Scheme.DIRECT_A
        hat_at_b, status_b = blind_detect_batch(y_b, ch.h_rb, n0, c, bits_b)
        hat_at_a, status_a = blind_detect_batch(y_a, ch.h_ra, n0, c, bits_a)
        ok_b = status_b != Detected.DISCARDED
        ok_a = status_a != Detected.DISCARDED
        # genie-scheme symbol decisions, independent of the CRC outcome
        xor = scheme == Scheme.DIFFERENTIAL
        raw_b = demodulate_ml(y_b, ch.h_rb, n0, c)[1]
        raw_a = demodulate_ml(y_a, ch.h_ra, n0, c)[1]
        sym_hat_b = np.where(xor[:, None], raw_b ^ bits_b, raw_b)
        sym_hat_a = np.where(xor[:, None], raw_a ^ bits_a, raw_a)

    pay = slice(0, bits_a.shape[-1] - CRC_BITS)
    err_b = ~ok_b | np.any(hat_at_b[:, pay] != bits_a[:, pay], axis=-1)
    err_a = ~ok_a | np.any(hat_at_a[:, pay] != bits_b[:, pay], axis=-1)
    counts.packets = int(to_b.sum() + to_a.sum())
    counts.packet_errors = int((err_b & to_b).sum() + (err_a & to_a).sum())
    counts.symbols = counts.packets * n_symbols
    counts.symbol_errors = int(
        _symbol_errors(sym_hat_b, bits_a, c)[to_b].sum() + _symbol_errors(sym_hat_a, bits_b, c)[to_a].sum()
    )
    return counts


def simulate_point(
    protocol: str,
    c: Constellation,
    fading: FadingConfig,
    ebn0_db: float,
    n_packets: int,
    rng: np.random.Generator,
    *,
    batch: int = 1000,
    noise: bool = True,
    n_symbols: int = PACKET_SYMBOLS,
) -> LinkCounts:
    """``simulate_exchange`` in memory-bounded batches."""
    total = LinkCounts()
    done = 0
    while done < n_packets:
        n = min(batch, n_packets - done)
        total += simulate_exchange(protocol, c, fading, ebn0_db, n, rng, noise=noise, n_symbols=n_symbols)
        done += n
    return total
