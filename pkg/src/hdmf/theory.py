"""Closed-form BPSK error-rate analysis of HDMF over i.i.d. Rayleigh links.

SNR arguments are linear average SNRs; ``delta`` is the Rayleigh scale with
``E|h|^2 = 2 delta^2`` (the default makes that 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

DEFAULT_DELTA = 1 / np.sqrt(2)


def _positive(**kwargs):
    for name, value in kwargs.items():
        if np.any(np.asarray(value) <= 0):
            raise ValueError(f"{name} must be positive")


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LinkBudget:
    rho_a: float
    rho_b: float
    rho_ra: float
    rho_rb: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        _positive(rho_a=self.rho_a, rho_b=self.rho_b, rho_ra=self.rho_ra, rho_rb=self.rho_rb, delta=self.delta)

    @classmethod
    def symmetric(cls, snr_db: float, delta: float = DEFAULT_DELTA) -> "LinkBudget":
        rho = 10.0 ** (snr_db / 10)
        return cls(rho, rho, rho, rho, delta)


@dataclass(frozen=True)
class SerBreakdown:
    p_r: float
    p_dif: float
    p_dif_first: float
    p_dif_second: float
    p_dir: float
    p_dir_first: float
    p_dir_second: float
    p_ra: float
    p_rb: float
    p_hdmf: float


def end_to_end_ser(p_r, p_rb):
    """One direction: exactly one of the two hops in error."""
    return 1 - (1 - p_r) * (1 - p_rb) - p_r * p_rb


def instantaneous_ser_hdmf(p_r, p_ra, p_rb):
    """Mean of the two directions' end-to-end SER."""
    for name, v in (("p_r", p_r), ("p_ra", p_ra), ("p_rb", p_rb)):
        if np.any(np.asarray(v) < 0) or np.any(np.asarray(v) > 0.5):
            raise ValueError(f"{name} must lie in [0, 1/2]")
    return p_r + (0.5 - p_r) * (p_ra + p_rb)


def avg_ser_downlink(rho):
    """Average BPSK SER of one Rayleigh relay-to-node hop; rho = 0 gives 1/2."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("SNR must be non-negative")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(rho), 0.0, 0.5 * (1 - np.sqrt(rho / (rho + 1))))
    return float(out) if out.ndim == 0 else out


def selection_probs_avg(rho_a, rho_b):
    """Average probabilities of forwarding the XOR, A's data, B's data."""
    _positive(rho_a=rho_a, rho_b=rho_b)
    p_abr = 2 * rho_a / (2 * rho_a + rho_b) - rho_a / (rho_a + rho_b) + 2 * rho_b / (2 * rho_b + rho_a) - rho_b / (rho_a + rho_b)
    p_ar = rho_a / (rho_a + 2 * rho_b)
    p_br = rho_b / (2 * rho_a + rho_b)
    return p_abr, p_ar, p_br


def selection_regions(alpha, beta, rho_a, rho_b):
    """Which scheme the equivalent-SNR comparison picks for given gains.

    Returns codes 0 (XOR), 1 (A direct), 2 (B direct).  Equivalent SNRs are
    2 min(a^2 rho_a, b^2 rho_b) for the XOR and a^2 rho_a, b^2 rho_b for the
    direct links.
    """
    phi_a = np.asarray(alpha) ** 2 * rho_a
    phi_b = np.asarray(beta) ** 2 * rho_b
    phi_abr = 2 * np.minimum(phi_a, phi_b)
    return np.where(phi_a > phi_abr, 1, np.where(phi_b > phi_abr, 2, 0)).astype(np.int8)


def _dif_terms(rho_a, rho_b, delta):
    d2 = delta**2
    first = 2 * rho_a / (2 * rho_a + rho_b) * (1 - 1 / np.sqrt(1 + 1 / (2 * rho_a * d2) + 1 / (rho_b * d2)))
    second = rho_a / (rho_a + rho_b) * (1 - 1 / np.sqrt(1 + 1 / (rho_a * d2) + 1 / (rho_b * d2)))
    return first, second


def avg_ser_dif(rho_a, rho_b, delta=DEFAULT_DELTA):
    """Average SER contribution of XOR-forwarded symbols, clamped to [0, 1]."""
    _positive(rho_a=rho_a, rho_b=rho_b, delta=delta)
    first, second = _dif_terms(rho_a, rho_b, delta)
    return float(np.clip(first - second, 0.0, 1.0))


def _dir_terms(rho_a, rho_b):
    q = q_function(np.sqrt(2 * rho_b / rho_a))
    first = 2 * rho_a / (2 * rho_b + rho_a) * q
    second = -2 / (1 + 2 * rho_b / rho_a) * q
    return first, second


def avg_ser_dir(rho_a, rho_b):
    """Average SER contribution of direct-forwarded symbols, clamped >= 0.

    The positive term and the lower bound used for the negative term share
    the prefactor 2 rho_a / (rho_a + 2 rho_b), so the assembled value is zero
    for every budget; both terms are reported in ``SerBreakdown``.
    """
    _positive(rho_a=rho_a, rho_b=rho_b)
    first, second = _dir_terms(rho_a, rho_b)
    return float(np.clip(first + second, 0.0, 1.0))


def avg_ser_hdmf(b: LinkBudget) -> SerBreakdown:
    dif_first, dif_second = _dif_terms(b.rho_a, b.rho_b, b.delta)
    dir_first, dir_second = _dir_terms(b.rho_a, b.rho_b)
    p_dif = avg_ser_dif(b.rho_a, b.rho_b, b.delta)
    p_dir = avg_ser_dir(b.rho_a, b.rho_b)
    p_r = p_dif + p_dir
    p_ra = avg_ser_downlink(b.rho_ra)
    p_rb = avg_ser_downlink(b.rho_rb)
    return SerBreakdown(
        p_r=p_r,
        p_dif=p_dif,
        p_dif_first=float(dif_first),
        p_dif_second=float(dif_second),
        p_dir=p_dir,
        p_dir_first=float(dir_first),
        p_dir_second=float(dir_second),
        p_ra=p_ra,
        p_rb=p_rb,
        p_hdmf=float(p_r + (0.5 - p_r) * (p_ra + p_rb)),
    )


def p_abr_bounds(alpha, beta, rho_a, rho_b):
    """Lower and upper bounds on the instantaneous XOR-detection SER."""
    _positive(rho_a=rho_a, rho_b=rho_b)
    a2r = np.asarray(alpha) ** 2 * rho_a
    b2r = np.asarray(beta) ** 2 * rho_b
    lower = q_function(np.sqrt(2 * np.minimum(a2r, b2r)))
    upper = q_function(np.sqrt(2 * a2r)) + q_function(np.sqrt(2 * b2r))
    return lower, upper
