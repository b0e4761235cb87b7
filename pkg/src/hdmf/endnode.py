"""Source/destination side: CRC framing, blind scheme detection at the
receiving node and partner-bit recovery."""

from __future__ import annotations

import binascii
import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .modem import Constellation, demodulate_ml

CRC_BITS = 16


class StateError(RuntimeError):
    """A node was asked to do something its stored history cannot support."""


@dataclass(frozen=True)
class CrcConfig:
    """Non-reflected CRC-16 with no output XOR (CCITT-FALSE by default)."""

    poly: int = 0x1021
    init: int = 0xFFFF

    def __post_init__(self):
        if self.poly != 0x1021:
            # binascii only implements the CCITT polynomial
            raise ValueError("only polynomial 0x1021 is supported")


CCITT_FALSE = CrcConfig()


def crc16(data: bytes, cfg: CrcConfig = CCITT_FALSE) -> int:
    return binascii.crc_hqx(data, cfg.init)


def _crc_of_bits(bits: np.ndarray, cfg: CrcConfig) -> np.ndarray:
    # bits: (P, L) with L % 8 == 0 -> (P,) checksums
    packed = np.packbits(bits.astype(np.uint8), axis=-1)
    return np.array([binascii.crc_hqx(row.tobytes(), cfg.init) for row in packed], dtype=np.int64)


def _word_to_bits(words: np.ndarray) -> np.ndarray:
    shifts = np.arange(CRC_BITS - 1, -1, -1)
    return ((words[..., None] >> shifts) & 1).astype(np.int8)


def make_packet(payload_bits, crc_cfg: CrcConfig = CCITT_FALSE) -> np.ndarray:
    """Append the 16-bit checksum (MSB first) to one payload or a batch.

    Payloads must be whole bytes.
    """
    payload = np.asarray(payload_bits, dtype=np.int8)
    if payload.shape[-1] == 0:
        raise ValueError("empty payload")
    if payload.shape[-1] % 8:
        raise ValueError(f"payload length {payload.shape[-1]} is not a whole number of bytes")
    if np.any((payload != 0) & (payload != 1)):
        raise ValueError("payload must contain only 0/1")
    flat = payload.reshape(-1, payload.shape[-1])
    words = _crc_of_bits(flat, crc_cfg).reshape(payload.shape[:-1])
    return np.concatenate([payload, _word_to_bits(words)], axis=-1)


def crc_ok(packet_bits, crc_cfg: CrcConfig = CCITT_FALSE) -> np.ndarray | bool:
    """True where the trailing 16 bits match the checksum of the rest."""
    packet = np.asarray(packet_bits, dtype=np.int8)
    if packet.shape[-1] <= CRC_BITS:
        raise ValueError("packet shorter than its checksum")
    flat = packet.reshape(-1, packet.shape[-1])
    payload, tail = flat[:, :-CRC_BITS], flat[:, -CRC_BITS:]
    if payload.shape[-1] % 8:
        raise ValueError("payload is not a whole number of bytes")
    stored = tail.astype(np.int64) @ (1 << np.arange(CRC_BITS - 1, -1, -1))
    ok = (_crc_of_bits(payload, crc_cfg) == stored).reshape(packet.shape[:-1])
    return bool(ok) if ok.ndim == 0 else ok


def payload_of(packet_bits) -> np.ndarray:
    return np.asarray(packet_bits)[..., :-CRC_BITS]


def xor_recover(relay_bits, own_prev_bits) -> np.ndarray:
    """Partner bits from an XOR packet and the node's own previous packet."""
    return np.bitwise_xor(np.asarray(relay_bits, dtype=np.int8), np.asarray(own_prev_bits, dtype=np.int8))


class Detected(enum.IntEnum):
    """What the receiving node concluded the relay did."""

    DISCARDED = -1
    DIFFERENTIAL = 0
    DIRECT = 1


class Recovered(NamedTuple):
    bits: np.ndarray
    scheme: Detected


DISCARD = None


@dataclass
class NodeState:
    """Own-packet history kept by one end node.

    The relay forwards slot n-1's uplink in slot n, so the packet sent in the
    previous slot is what an XOR-forwarded packet must be combined with.
    """

    crc: CrcConfig = CCITT_FALSE
    history: dict[int, np.ndarray] = field(default_factory=dict)
    keep: int = 4

    def remember(self, slot: int, packet_bits) -> None:
        self.history[slot] = np.asarray(packet_bits, dtype=np.int8)
        for old in [s for s in self.history if s <= slot - self.keep]:
            del self.history[old]

    def sent_in(self, slot: int) -> np.ndarray:
        try:
            return self.history[slot]
        except KeyError:
            raise StateError(f"no own packet stored for slot {slot}") from None

    def receive(self, slot: int, y, h, n0, c: Constellation):
        """Blind-detect the relay packet heard in ``slot``."""
        return blind_detect(y, h, n0, c, self.sent_in(slot - 1), self.crc)


def blind_detect(y, h, n0, c: Constellation, own_prev, crc_cfg: CrcConfig = CCITT_FALSE):
    """Tell a direct-forwarded packet from an XOR one using the CRC only.

    Step one checks the plainly demodulated bits; step two XORs them with the
    node's own previous packet and checks again.  Returns
    ``Recovered(bits, scheme)`` or ``DISCARD`` (None) when both fail.
    """
    if own_prev is None:
        raise StateError("blind detection needs the node's own previous packet")
    _, bits = demodulate_ml(y, h, n0, c)
    if bits.shape != np.shape(own_prev):
        raise ValueError(f"received {bits.shape[-1]} bits, own packet has {np.shape(own_prev)[-1]}")
    if crc_ok(bits, crc_cfg):
        return Recovered(bits, Detected.DIRECT)
    partner = xor_recover(bits, own_prev)
    if crc_ok(partner, crc_cfg):
        return Recovered(partner, Detected.DIFFERENTIAL)
    return DISCARD


def blind_detect_batch(y, h, n0, c: Constellation, own_prev, crc_cfg: CrcConfig = CCITT_FALSE):
    """Batched blind detection.

    Returns ``(bits, status)`` with ``Detected`` codes per packet.  Discarded
    rows keep the plainly demodulated bits.
    """
    _, bits = demodulate_ml(y, h, n0, c)
    own_prev = np.asarray(own_prev, dtype=np.int8)
    direct_ok = crc_ok(bits, crc_cfg)
    partner = xor_recover(bits, own_prev)
    xor_ok = crc_ok(partner, crc_cfg) & ~direct_ok
    out = np.where(xor_ok[..., None], partner, bits)
    status = np.full(direct_ok.shape, Detected.DISCARDED, dtype=np.int8)
    status[direct_ok] = Detected.DIRECT
    status[xor_ok] = Detected.DIFFERENTIAL
    return out, status


def anc_detect(y, h_down, h_own, h_partner, gain, own_symbols, n0, c: Constellation) -> np.ndarray:
    """Analog network coding receiver.

    The node hears ``h_down * G * (h_own x_own + h_partner x_partner + w_r)``
    plus its own noise; it removes its own known term and runs single-user ML
    on the partner's effective channel ``h_down * G * h_partner``.
    """
    gain = np.asarray(gain, dtype=float)
    if np.any(gain <= 0):
        raise ValueError("ANC gain must be positive")
    col = lambda v: np.asarray(v, dtype=complex)[..., None] if np.ndim(v) else np.asarray(v, dtype=complex)
    loop = col(h_down) * col(gain) * col(h_own)
    cleaned = np.asarray(y, dtype=complex) - loop * np.asarray(own_symbols, dtype=complex)
    h_eff = np.asarray(h_down, dtype=complex) * gain * np.asarray(h_partner, dtype=complex)
    _, bits = demodulate_ml(cleaned, h_eff, n0, c)
    return bits
