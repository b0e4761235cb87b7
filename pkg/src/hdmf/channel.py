"""Block fading draws, AWGN and the two phases of a two-way relay exchange.

All functions accept leading batch axes: a batch of P packets is carried as
``(P, M)`` symbol arrays with ``(P,)`` coefficient arrays.  Coefficients are
applied per packet (block fading), never per symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RAYLEIGH = "rayleigh"
FIXED = "fixed"


@dataclass
class ChannelState:
    h_ar: np.ndarray | complex
    h_br: np.ndarray | complex
    h_ra: np.ndarray | complex
    h_rb: np.ndarray | complex
    n0: float

    def __post_init__(self):
        for name in ("h_ar", "h_br", "h_ra", "h_rb"):
            value = np.asarray(getattr(self, name), dtype=complex)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} must be finite")
            setattr(self, name, value if value.ndim else complex(value))
        if not self.n0 >= 0:
            raise ValueError("N0 must be non-negative")

    @classmethod
    def reciprocal(cls, h_ar, h_br, n0):
        return cls(h_ar, h_br, h_ar, h_br, n0)

    def take(self, idx) -> "ChannelState":
        """Slice a batched state down to the packets in ``idx``."""
        pick = lambda v: np.asarray(v)[idx] if np.ndim(v) else v
        return ChannelState(pick(self.h_ar), pick(self.h_br), pick(self.h_ra), pick(self.h_rb), self.n0)


@dataclass(frozen=True)
class FadingConfig:
    """How per-packet coefficients are drawn.

    ``gain_ratio_log10`` is log10(E|h_BR| / E|h_AR|); the ratio is split
    symmetrically so the geometric mean of the two mean gains stays at the
    base level.
    """

    model: str = RAYLEIGH
    delta: float = 1 / np.sqrt(2)
    gain_ratio_log10: float = 0.0
    reciprocal: bool = True
    base_gain: float = 1.0

    def __post_init__(self):
        if self.model not in (RAYLEIGH, FIXED):
            raise ValueError(f"unknown fading model {self.model!r}")
        if not self.delta > 0:
            raise ValueError("Rayleigh scale delta must be positive")
        if not self.base_gain > 0:
            raise ValueError("base gain must be positive")

    @property
    def scales(self) -> tuple[float, float]:
        half = 10.0 ** (self.gain_ratio_log10 / 2)
        return 1.0 / half, half


def rayleigh_coefficients(delta: float, size, rng: np.random.Generator) -> np.ndarray:
    """Complex coefficients with Rayleigh(delta) magnitude and uniform phase."""
    return delta * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def draw_channel(cfg: FadingConfig, n0: float, rng: np.random.Generator, size=None) -> ChannelState:
    """Draw one block-fading state, or ``size`` independent ones."""
    s_a, s_b = cfg.scales
    if cfg.model == FIXED:
        shape = () if size is None else size
        h_ar = np.full(shape, cfg.base_gain * s_a, dtype=complex)
        h_br = np.full(shape, cfg.base_gain * s_b, dtype=complex)
        h_ra, h_rb = h_ar, h_br
    else:
        n_draw = 2 if cfg.reciprocal else 4
        shape = (n_draw,) if size is None else (n_draw, *np.atleast_1d(size))
        h = rayleigh_coefficients(cfg.delta, shape, rng) * cfg.base_gain
        h_ar, h_br = h[0] * s_a, h[1] * s_b
        if cfg.reciprocal:
            h_ra, h_rb = h_ar, h_br
        else:
            h_ra, h_rb = h[2] * s_a, h[3] * s_b
    if size is None:
        h_ar, h_br, h_ra, h_rb = (complex(v) for v in (h_ar, h_br, h_ra, h_rb))
    return ChannelState(h_ar, h_br, h_ra, h_rb, n0)


def awgn(shape, n0: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian noise, N0/2 per real dimension."""
    if n0 == 0:
        return np.zeros(shape, dtype=complex)
    sigma = np.sqrt(n0 / 2)
    return sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _col(h):
    # per-packet coefficient against (..., M) symbols
    h = np.asarray(h, dtype=complex)
    return h[..., None] if h.ndim else h


def mac_phase(x_a, x_b, ch: ChannelState, rng: np.random.Generator | None = None) -> np.ndarray:
    """Superposed uplink at the relay: y_r = h_AR x_a + h_BR x_b + w_r.

    ``rng=None`` disables noise regardless of ``ch.n0``.
    """
    x_a = np.asarray(x_a, dtype=complex)
    x_b = np.asarray(x_b, dtype=complex)
    if x_a.shape != x_b.shape:
        raise ValueError(f"packet shapes differ: {x_a.shape} vs {x_b.shape}")
    y = _col(ch.h_ar) * x_a + _col(ch.h_br) * x_b
    if rng is not None:
        y = y + awgn(y.shape, ch.n0, rng)
    return y


def bc_phase(x_r, h, n0: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """One downlink branch: y = h x_r + w."""
    x_r = np.asarray(x_r, dtype=complex)
    y = _col(h) * x_r
    if rng is not None:
        y = y + awgn(y.shape, n0, rng)
    return y
