"""Constellations, Gray bit mapping and single-user ML demodulation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Constellation:
    """A Gray-labelled constellation.

    ``points[i]`` carries the bit label ``labels[i]`` (MSB first, length K).
    The point order doubles as the ML tie-break order.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray
    _lookup: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=complex)
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.ndim != 2 or labels.shape[0] != points.size:
            raise ValueError("labels must be (n_points, K)")
        k = labels.shape[1]
        if points.size != 2**k:
            raise ValueError(f"{self.name}: need 2^K = {2**k} points, got {points.size}")
        codes = labels @ (1 << np.arange(k - 1, -1, -1))
        if len(set(codes.tolist())) != points.size:
            raise ValueError(f"{self.name}: bit labels are not a bijection")
        lookup = np.empty(points.size, dtype=np.intp)
        lookup[codes] = np.arange(points.size)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def order(self) -> int:
        """Bits per symbol (K)."""
        return self.labels.shape[1]

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def symbol_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def bit_energy(self) -> float:
        return self.symbol_energy / self.order

    def index_of_bits(self, bits) -> np.ndarray:
        """Point indices for a bit array whose last axis groups K bits."""
        bits = np.asarray(bits)
        codes = bits @ (1 << np.arange(self.order - 1, -1, -1))
        return self._lookup[codes]

    def n0_from_ebn0_db(self, ebn0_db) -> np.ndarray | float:
        """Noise spectral density giving the requested Eb/N0 for this alphabet."""
        return self.bit_energy / 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)


# bit 1 -> +1, bit 0 -> -1 on each rail
BPSK = Constellation("BPSK", np.array([1.0, -1.0]), np.array([[1], [0]]))
QPSK = Constellation(
    "QPSK",
    np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]),
    np.array([[1, 1], [0, 1], [0, 0], [1, 0]]),
)

CONSTELLATIONS = {"BPSK": BPSK, "QPSK": QPSK}


def get_constellation(name: str) -> Constellation:
    try:
        return CONSTELLATIONS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}; have {sorted(CONSTELLATIONS)}") from None


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map bits to symbols, K consecutive bits per symbol.

    ``bits`` may carry leading batch axes; the last axis must be a multiple
    of K and becomes the symbol axis of length ``n_bits // K``.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % c.order:
        raise ValueError(f"bit length {bits.shape[-1]} not divisible by K={c.order}")
    groups = bits.reshape(*bits.shape[:-1], -1, c.order)
    return c.points[c.index_of_bits(groups)]


def demap(indices, c: Constellation) -> np.ndarray:
    """Inverse of the Gray map: point indices (..., M) -> bits (..., M*K)."""
    labels = c.labels[np.asarray(indices)]
    return labels.reshape(*labels.shape[:-2], -1)


def demodulate_ml(y, h, n0, c: Constellation):
    """Single-user ML detection of ``y = h*x + w``.

    Returns ``(symbols, bits)``.  Under circular Gaussian noise the ML rule is
    the minimum of ``|y - h*x|^2``; ``argmin`` keeps the lowest point index on
    ties.  ``h`` is a scalar, one coefficient per packet (the leading axes of
    ``y``), or an array shaped like ``y``.
    """
    if np.any(np.asarray(n0) <= 0):
        raise ValueError("N0 must be positive")
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if h.ndim and y.ndim > h.ndim:
        h = h[..., None]
    diff = y[..., None] - h[..., None] * c.points
    d2 = diff.real**2 + diff.imag**2
    idx = np.argmin(d2, axis=-1)
    if idx.ndim == 0:
        return c.points[idx], c.labels[idx].copy()
    return c.points[idx], demap(idx, c)
