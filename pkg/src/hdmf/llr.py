"""Bit LLRs for the superposed uplink, the packet-level DMF switch and
bitwise detection.

The received sample is modelled as ``y = h_a x_a + h_b x_b + w`` with
equiprobable symbols and circular noise of total variance N0, so every
hypothesis likelihood is a uniform mixture of ``exp(-|y - s|^2 / N0)`` over
the superposition points ``s`` it contains.  Mixture sums run through
log-sum-exp, so values stay finite at any SNR.

Sign convention: LLR >= 0 decides bit 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .modem import Constellation

L_MAX = 50.0


class Scheme(enum.IntEnum):
    DIFFERENTIAL = 0
    DIRECT_A = 1
    DIRECT_B = 2


class User(enum.Enum):
    A = "A"
    B = "B"


def _metric(y, h_a, h_b, n0, c: Constellation) -> np.ndarray:
    """Log-likelihood of every (x_a, x_b) pair: shape (..., S, S)."""
    if np.any(np.asarray(n0) <= 0):
        raise ValueError("N0 must be positive")
    y = np.asarray(y, dtype=complex)
    h_a = np.asarray(h_a, dtype=complex)
    h_b = np.asarray(h_b, dtype=complex)
    if h_a.ndim and y.ndim > h_a.ndim:
        # per-packet coefficients against (..., M) samples
        h_a = h_a[..., None]
    if h_b.ndim and y.ndim > h_b.ndim:
        h_b = h_b[..., None]
    s = (h_a[..., None, None] * c.points[:, None]) + (h_b[..., None, None] * c.points[None, :])
    diff = y[..., None, None] - s
    return -(diff.real**2 + diff.imag**2) / n0


def _masks(c: Constellation):
    # [k] -> boolean (S, S) tables over (index_a, index_b)
    la = c.labels[:, None, :]
    lb = c.labels[None, :, :]
    a_one = np.broadcast_to(la == 1, (c.size, c.size, c.order))
    b_one = np.broadcast_to(lb == 1, (c.size, c.size, c.order))
    differ = la != lb
    return a_one, b_one, differ


def _lse(values) -> np.ndarray:
    top = values.max(axis=-1)
    return top + np.log(np.exp(values - top[..., None]).sum(axis=-1))


def _ratio(metric, mask_one) -> np.ndarray:
    flat = metric.reshape(*metric.shape[:-2], -1)
    m = mask_one.reshape(-1)
    return _lse(flat[..., m]) - _lse(flat[..., ~m])


def _clamp(values, l_max):
    return values if l_max is None else np.clip(values, -l_max, l_max)


def bit_llrs(y, h_a, h_b, n0, c: Constellation, l_max: float | None = L_MAX):
    """All bit LLRs of a block of samples.

    Returns ``(dir_a, dir_b, dif)``, each of shape ``y.shape + (K,)``.
    """
    metric = _metric(y, h_a, h_b, n0, c)
    a_one, b_one, differ = _masks(c)
    out = []
    for masks in (a_one, b_one, differ):
        llr = np.stack([_ratio(metric, masks[..., k]) for k in range(c.order)], axis=-1)
        out.append(_clamp(llr, l_max))
    return tuple(out)


def llr_direct_bit(y, h_self, h_other, n0, c: Constellation, k: int, l_max: float | None = L_MAX):
    """LLR of bit ``k`` of one user, the other user's symbol marginalised."""
    if not 0 <= k < c.order:
        raise ValueError(f"bit index {k} outside 0..{c.order - 1}")
    metric = _metric(y, h_self, h_other, n0, c)
    a_one = _masks(c)[0]
    return _clamp(_ratio(metric, a_one[..., k]), l_max)


def llr_diff_bit(y, h_ar, h_br, n0, c: Constellation, k: int, l_max: float | None = L_MAX):
    """LLR that bit ``k`` of A differs from bit ``k`` of B (XOR = 1)."""
    if not 0 <= k < c.order:
        raise ValueError(f"bit index {k} outside 0..{c.order - 1}")
    metric = _metric(y, h_ar, h_br, n0, c)
    differ = _masks(c)[2]
    return _clamp(_ratio(metric, differ[..., k]), l_max)


@dataclass
class PacketLlrSummary:
    """Per-symbol confidence sums for one packet, or a batch of packets.

    ``dir_a``, ``dir_b`` and ``dif`` are the per-symbol sums of absolute bit
    LLRs, shape (..., M); the ``min_*`` fields are their minima over the
    symbol axis.  The raw bit LLRs are kept for detection.
    """

    dir_a: np.ndarray
    dir_b: np.ndarray
    dif: np.ndarray
    bits_dir_a: np.ndarray
    bits_dir_b: np.ndarray
    bits_dif: np.ndarray

    @property
    def min_dir_a(self):
        return self.dir_a.min(axis=-1)

    @property
    def min_dir_b(self):
        return self.dir_b.min(axis=-1)

    @property
    def min_dir(self):
        # per symbol the stronger user's confidence, then the packet minimum
        return np.maximum(np.abs(self.dir_a), np.abs(self.dir_b)).min(axis=-1)

    @property
    def min_dif(self):
        return np.abs(self.dif).min(axis=-1)


def packet_llr_summary(y_r, ch: ChannelState, c: Constellation, l_max: float | None = None) -> PacketLlrSummary:
    """Aggregate bit LLRs per symbol for the packet-level scheme decision.

    Aggregates are unclamped by default: a clamp flattens every confident
    packet to the same value and turns the min-vs-min comparison into a tie.
    """
    y_r = np.asarray(y_r, dtype=complex)
    if y_r.ndim == 0 or y_r.shape[-1] == 0:
        raise ValueError("packet must contain at least one symbol")
    dir_a, dir_b, dif = bit_llrs(y_r, ch.h_ar, ch.h_br, ch.n0, c, l_max=l_max)
    return PacketLlrSummary(
        dir_a=np.abs(dir_a).sum(axis=-1),
        dir_b=np.abs(dir_b).sum(axis=-1),
        dif=np.abs(dif).sum(axis=-1),
        bits_dir_a=dir_a,
        bits_dir_b=dir_b,
        bits_dif=dif,
    )


def decide_from_minima(min_a, min_b, min_dif):
    """Scheme codes from packet minima; works elementwise on batches.

    Direct wins only on a strict ``>`` against the differential minimum; the
    forwarded user is the one with the larger packet minimum, A on ties.
    """
    min_a, min_b, min_dif = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (min_a, min_b, min_dif)))
    return _decide(np.maximum(min_a, min_b), min_a >= min_b, min_dif)


def _decide(min_dir, prefer_a, min_dif):
    direct_user = np.where(prefer_a, Scheme.DIRECT_A, Scheme.DIRECT_B)
    out = np.where(min_dir > min_dif, direct_user, Scheme.DIFFERENTIAL).astype(np.int8)
    return Scheme(int(out)) if out.ndim == 0 else out


def decide_scheme(s: PacketLlrSummary):
    """HDMF switch: direct DMF if its weakest symbol beats differential's.

    The direct branch forwards the user with the larger packet minimum.  The
    two minima are often exactly equal (the weakest symbol is a superposition
    point confusable in both users' bits at once), so exact ties fall back to
    the larger total confidence, then to A.
    """
    min_a, min_b = s.min_dir_a, s.min_dir_b
    total_a, total_b = s.dir_a.sum(axis=-1), s.dir_b.sum(axis=-1)
    prefer_a = (min_a > min_b) | ((min_a == min_b) & (total_a >= total_b))
    return _decide(s.min_dir, prefer_a, s.min_dif)


def hard_bits(llrs) -> np.ndarray:
    """Flatten (..., M, K) bit LLRs into a (..., M*K) bit array, 1 iff LLR >= 0."""
    llrs = np.asarray(llrs)
    bits = (llrs >= 0).astype(np.int8)
    if bits.ndim < 2:
        return bits
    return bits.reshape(*bits.shape[:-2], -1)


def detect_bits_direct(y_r, ch: ChannelState, c: Constellation, user: User | str = User.A) -> np.ndarray:
    user = User(user)
    h_self, h_other = (ch.h_ar, ch.h_br) if user is User.A else (ch.h_br, ch.h_ar)
    metric = _metric(y_r, h_self, h_other, ch.n0, c)
    a_one = _masks(c)[0]
    llr = np.stack([_ratio(metric, a_one[..., k]) for k in range(c.order)], axis=-1)
    return hard_bits(llr)


def detect_bits_diff(y_r, ch: ChannelState, c: Constellation) -> np.ndarray:
    metric = _metric(y_r, ch.h_ar, ch.h_br, ch.n0, c)
    differ = _masks(c)[2]
    llr = np.stack([_ratio(metric, differ[..., k]) for k in range(c.order)], axis=-1)
    return hard_bits(llr)
