"""Markov analysis of the four-mode relay scheduler.

The chain tracks ``(Q_a, Q_rb)``: packets waiting at source A, and packets
held at the relay for B.  State ``(m, k)`` has flat index ``m * (N_r + 1) + k``.
Each slot the relay picks a mode, the chosen service happens, then Poisson
arrivals join A's queue.  Both queues are capped; overflow is folded onto
the cap state so every row stays stochastic.

Modes:
    I    uplink with HDMF: A's queue loses up to ``n ~ c`` packets, which
         land in the relay queue unless HDMF forwarded B's data instead
    II   broadcast: relay queue drained by ``n ~ r``
    III  relay to B: relay queue drained by ``n ~ q``
    IV   relay to A: tracked queues untouched
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy import stats
from scipy.optimize import brentq

from .theory import DEFAULT_DELTA, selection_probs_avg


class NonErgodicChainError(ArithmeticError):
    """The chain has no unique stationary distribution."""


def _pmf(v, name):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0 or np.any(v < 0) or not np.isclose(v.sum(), 1.0, atol=1e-9):
        raise ValueError(f"{name} must be a non-negative vector summing to 1")
    return v


@dataclass
class SchedulerModel:
    lam: float
    c_pmf: np.ndarray
    r_pmf: np.ndarray
    q_pmf: np.ndarray
    T: float = 1.0
    f: tuple = (0.25, 0.25, 0.25, 0.25)
    p: tuple = (1 / 3, 1 / 3, 1 / 3)
    n_a: int = 40
    n_r: int = 40
    eps: float = 0.0

    def __post_init__(self):
        if self.lam < 0 or self.T < 0:
            raise ValueError("arrival rate and slot length must be non-negative")
        if self.n_a < 1 or self.n_r < 1:
            raise ValueError("buffer caps must be at least 1")
        self.f = tuple(_pmf(self.f, "mode probabilities f"))
        if len(self.f) != 4:
            raise ValueError("need four mode probabilities")
        self.p = tuple(_pmf(self.p, "selection probabilities p"))
        if len(self.p) != 3:
            raise ValueError("need (p_abr, p_ar, p_br)")
        self.c_pmf = _pmf(self.c_pmf, "c_pmf")
        self.r_pmf = _pmf(self.r_pmf, "r_pmf")
        self.q_pmf = _pmf(self.q_pmf, "q_pmf")

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_a + 1, self.n_r + 1

    @property
    def n_states(self) -> int:
        return (self.n_a + 1) * (self.n_r + 1)


@dataclass
class QueueStateDist:
    pi: np.ndarray
    shape: tuple[int, int] | None = None
    qa: float | None = field(init=False, default=None)
    qrb: float | None = field(init=False, default=None)

    def __post_init__(self):
        if self.shape is not None:
            grid = self.pi.reshape(self.shape)
            self.qa = float(np.arange(self.shape[0]) @ grid.sum(axis=1))
            self.qrb = float(np.arange(self.shape[1]) @ grid.sum(axis=0))

    def boundary_mass(self) -> float:
        """Probability of sitting on either cap (a proxy for folding bias)."""
        grid = self.pi.reshape(self.shape)
        return float(grid[-1, :].sum() + grid[:, -1].sum() - grid[-1, -1])


def poisson_pmf(lam: float, T: float, i_max: int) -> np.ndarray:
    """P(i arrivals in a slot) for i = 0..i_max, the tail folded into i_max."""
    if lam < 0 or T < 0:
        raise ValueError("rate and slot length must be non-negative")
    mu = lam * T
    if mu == 0:
        out = np.zeros(i_max + 1)
        out[0] = 1.0
        return out
    out = stats.poisson.pmf(np.arange(i_max + 1), mu)
    out[-1] = stats.poisson.sf(i_max - 1, mu)
    return out


def rate_pmf_from_fading(delta: float, rho: float, n_rate: int, thresholds=None) -> np.ndarray:
    """Distribution of the supported rate n in 0..n_rate over a Rayleigh link.

    By default rate n needs ``|h|^2 rho >= 2^n - 1`` (n = floor(log2(1 + |h|^2 rho))),
    capped at ``n_rate``.  ``thresholds`` overrides the per-rate SNR
    requirements (length n_rate, increasing, for rates 1..n_rate).
    """
    if delta <= 0 or rho < 0 or n_rate < 0:
        raise ValueError("need delta > 0, rho >= 0, n_rate >= 0")
    if thresholds is None:
        thresholds = 2.0 ** np.arange(1, n_rate + 1) - 1
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.size != n_rate or np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be increasing, one per rate 1..n_rate")
    mean_gain = 2 * delta**2
    # P(n >= k) = P(|h|^2 >= t_k / rho), |h|^2 exponential
    with np.errstate(divide="ignore"):
        tail = np.exp(-thresholds / (mean_gain * rho)) if rho > 0 else np.zeros(n_rate)
    at_least = np.concatenate([[1.0], tail, [0.0]])
    return at_least[:-1] - at_least[1:]


def mean_rate(pmf) -> float:
    return float(np.arange(len(pmf)) @ pmf)


def augmented_snr(delta: float, rho: float, n_rate: int, eps: float) -> float:
    """SNR at which the mean supported rate is (1 + eps) times the nominal one."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    base = mean_rate(rate_pmf_from_fading(delta, rho, n_rate))
    target = (1 + eps) * base
    if eps == 0:
        return rho
    if target >= n_rate:
        raise ValueError(f"rate cap {n_rate} too low to add {eps:.0%} service")
    gap = lambda log_s: mean_rate(rate_pmf_from_fading(delta, rho * np.exp(log_s), n_rate)) - target
    hi = 1.0
    while gap(hi) < 0:
        hi *= 2
    return rho * float(np.exp(brentq(gap, 0.0, hi, xtol=1e-12)))


def rayleigh_model(
    eps: float = 0.0,
    lam: float = 0.5,
    T: float = 1.0,
    snr_db: float = 20.0,
    delta: float = DEFAULT_DELTA,
    n_rate: int = 16,
    n_a: int = 70,
    n_r: int = 40,
    f=(0.25, 0.25, 0.25, 0.25),
    p=None,
) -> SchedulerModel:
    """Scheduler model for the queue study: i.i.d. Rayleigh links at one SNR.

    Service is provisioned for ``lam * (1 + eps)`` by raising the SNR that the
    rate distributions are evaluated at until every link's mean rate grows by
    the factor ``1 + eps``.  Selection probabilities default to the closed
    forms at the nominal SNR.
    """
    rho = 10.0 ** (snr_db / 10)
    rho_s = augmented_snr(delta, rho, n_rate, eps)
    pmf = rate_pmf_from_fading(delta, rho_s, n_rate)
    if p is None:
        p = selection_probs_avg(rho, rho)
    return SchedulerModel(lam=lam, T=T, f=f, c_pmf=pmf, r_pmf=pmf, q_pmf=pmf, p=p, n_a=n_a, n_r=n_r, eps=eps)


def _tail(pmf, n):
    """sum_{i >= n} pmf[i]"""
    return float(pmf[n:].sum()) if n < len(pmf) else 0.0


def _at(pmf, n):
    return float(pmf[n]) if n < len(pmf) else 0.0


def _arrival_rows(a: np.ndarray, n_a: int) -> np.ndarray:
    # rows[base, i] = P(Q_a' = i | base packets left before arrivals), capped
    rows = np.zeros((n_a + 1, n_a + 1))
    for base in range(n_a + 1):
        rows[base, base:] = a[: n_a + 1 - base]
        rows[base, n_a] += a[n_a + 1 - base :].sum()
    return rows


def build_transition_matrix(model: SchedulerModel) -> np.ndarray:
    """One-slot transition matrix of ``(Q_a, Q_rb)``, all modes combined.

    For source state ``(m, k)`` the relay-queue target ``j`` falls in one of
    these disjoint cases (A's queue keeps ``base`` packets before arrivals):

        m = 0, j = k      base 0      f1 + f2 r0 + f3 q0 + f4     (k > 0)
        m = 0, k = 0      base 0      1
        m > 0, j = k      base m      f1 (p_br + c0 (p_abr + p_ar)) + f2 r0 + f3 q0 + f4
        j = k - n         base m      f2 r_n + f3 q_n,             0 < n < k
        j = 0 < k         base m      f2 sum_{n>=k} r_n + f3 sum_{n>=k} q_n
        j = k + n         base m - n  f1 c_n (p_abr + p_ar),       0 < n < m
        j = k + m         base 0      f1 (p_abr + p_ar) sum_{n>=m} c_n

    With k = 0 every mode II/III outcome empties (or keeps empty) the relay
    queue, which merges into the ``j = k`` row.  Targets past ``n_r`` fold
    onto ``n_r``; arrivals past ``n_a`` fold onto ``n_a``.
    """
    f1, f2, f3, f4 = model.f
    p_abr, p_ar, p_br = model.p
    fwd = p_abr + p_ar
    c, r, q = model.c_pmf, model.r_pmf, model.q_pmf
    n_a, n_r = model.n_a, model.n_r
    arrivals = _arrival_rows(poisson_pmf(model.lam, model.T, n_a), n_a)

    P = np.zeros((n_a + 1, n_r + 1, n_a + 1, n_r + 1))
    for m in range(n_a + 1):
        for k in range(n_r + 1):
            cases = []  # (j, base, weight)
            if m == 0 and k == 0:
                cases.append((0, 0, 1.0))
            elif m == 0:
                cases.append((k, 0, f1 + f2 * r[0] + f3 * q[0] + f4))
            elif k == 0:
                cases.append((0, m, f1 * (p_br + c[0] * fwd) + f2 + f3 + f4))
            else:
                cases.append((k, m, f1 * (p_br + c[0] * fwd) + f2 * r[0] + f3 * q[0] + f4))
            if k > 0:
                for n in range(1, k):
                    cases.append((k - n, m, f2 * _at(r, n) + f3 * _at(q, n)))
                cases.append((0, m, f2 * _tail(r, k) + f3 * _tail(q, k)))
            if m > 0:
                for n in range(1, m):
                    cases.append((k + n, m - n, f1 * _at(c, n) * fwd))
                cases.append((k + m, 0, f1 * fwd * _tail(c, m)))
            for j, base, w in cases:
                if w:
                    P[m, k, :, min(j, n_r)] += w * arrivals[base]
    return P.reshape(model.n_states, model.n_states)


def stationary(P, shape: tuple[int, int] | None = None, check: bool = False) -> QueueStateDist:
    """Stationary distribution from ``pi (I - P + U) = 1``.

    Raises ``NonErgodicChainError`` when the system is singular or the
    solution is not a probability vector.  ``check=True`` also runs power
    iteration on the lazy chain and demands agreement to 1e-10.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise ValueError("transition matrix must be square")
    if not np.allclose(P.sum(axis=1), 1.0, atol=1e-9) or np.any(P < 0):
        raise ValueError("transition matrix must be row-stochastic")
    A = np.eye(n) - P + 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            pi = scipy.linalg.solve(A.T, np.ones(n))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise NonErgodicChainError(f"no unique stationary distribution: {exc}") from None
    if np.any(pi < -1e-9) or abs(pi.sum() - 1) > 1e-9 or np.abs(pi @ P - pi).max() > 1e-9:
        raise NonErgodicChainError("solution is not a stationary probability vector")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if check:
        ref = power_iteration(P)
        gap = np.abs(ref - pi).max()
        if gap > 1e-10:
            raise NonErgodicChainError(f"power iteration disagrees by {gap:.2e}")
    return QueueStateDist(pi, shape)


def power_iteration(P, tol: float = 1e-14, max_iter: int = 200_000) -> np.ndarray:
    """Stationary vector by iterating the lazy chain (P + I)/2 from uniform."""
    n = P.shape[0]
    lazy = 0.5 * (P + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise NonErgodicChainError("power iteration did not converge")


def evolve(P, pi0, steps: int) -> np.ndarray:
    """Distribution after ``steps`` slots from the initial distribution ``pi0``."""
    pi = np.asarray(pi0, dtype=float)
    for _ in range(steps):
        pi = pi @ P
    return pi


def solve_model(model: SchedulerModel, check: bool = False) -> QueueStateDist:
    return stationary(build_transition_matrix(model), model.shape, check=check)


def simulate_schedule(
    model: SchedulerModel,
    slots: int,
    warmup: int,
    rng: np.random.Generator,
    initial: tuple[int, int] = (0, 0),
) -> tuple[float, float]:
    """Slot-by-slot simulation of the scheduler; returns mean (Q_a, Q_rb).

    Per slot: draw the mode, serve, then add Poisson arrivals to A.  Both
    queues are clipped at the model's caps exactly as in the chain.
    """
    if slots <= warmup:
        raise ValueError("slots must exceed warmup")
    if warmup < 0:
        raise ValueError("warmup must be non-negative")
    n_a, n_r = model.n_a, model.n_r
    modes = rng.choice(4, size=slots, p=model.f)
    u_rate = rng.random(slots)
    u_pick = rng.random(slots)
    arrivals = rng.poisson(model.lam * model.T, size=slots)
    # one rate draw per slot from the pmf the chosen mode uses
    cdfs = [np.cumsum(model.c_pmf), np.cumsum(model.r_pmf), np.cumsum(model.q_pmf)]
    rates = np.zeros(slots, dtype=np.int64)
    for mode, cdf in zip((0, 1, 2), cdfs):
        sel = modes == mode
        rates[sel] = np.minimum(np.searchsorted(cdf, u_rate[sel], side="right"), len(cdf) - 1)
    b_only = u_pick >= model.p[0] + model.p[1]

    qa, qrb = initial
    sum_a = sum_rb = 0
    modes, rates, b_only, arrivals = modes.tolist(), rates.tolist(), b_only.tolist(), arrivals.tolist()
    for t in range(slots):
        mode = modes[t]
        if mode == 0:
            if qa > 0 and not b_only[t]:
                moved = min(rates[t], qa)
                qa -= moved
                qrb = min(qrb + moved, n_r)
        elif mode in (1, 2):
            qrb = max(qrb - rates[t], 0)
        qa = min(qa + arrivals[t], n_a)
        if t >= warmup:
            sum_a += qa
            sum_rb += qrb
    kept = slots - warmup
    return sum_a / kept, sum_rb / kept


def with_eps(model: SchedulerModel, eps: float, **kwargs) -> SchedulerModel:
    return replace(model, eps=eps, **kwargs)
