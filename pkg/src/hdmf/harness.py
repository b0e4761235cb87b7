"""Experiment runners: seeded Monte Carlo campaigns, theory columns, CSV output.

Config files are flat ``key = value`` text; lists are comma separated and
``#`` starts a comment.  Keys mirror ``ExperimentConfig`` fields, e.g.::

    kind = per_sweep
    protocols = HDMF, PNC, DMF, ANC
    modulation = QPSK
    packets = 10000
    ebn0_db = 25
    gain_ratios = -0.7:0.7:15      # start:stop:count is also accepted
    seed = 1
"""

from __future__ import annotations

import configparser
import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import RAYLEIGH, FIXED, ChannelState, FadingConfig, rayleigh_coefficients, mac_phase
from .llr import decide_scheme, packet_llr_summary
from .modem import get_constellation, modulate
from .queue import rayleigh_model, simulate_schedule, solve_model
from .relay import RELAYS
from .sim import simulate_point
from .theory import DEFAULT_DELTA, LinkBudget, avg_ser_hdmf, selection_probs_avg

KINDS = ("per_sweep", "ser_sweep", "theory_vs_sim", "queue_analysis", "selection_probs")


class ConfigError(ValueError):
    pass


def _grid(start, stop, count):
    return [round(float(v), 12) for v in np.linspace(start, stop, count)]


@dataclass
class ExperimentConfig:
    kind: str = "per_sweep"
    protocols: list = field(default_factory=lambda: ["HDMF", "PNC", "DMF", "ANC"])
    modulation: str = "QPSK"
    packets: int = 10_000
    ebn0_db: list = field(default_factory=lambda: [25.0])
    gain_ratios: list = field(default_factory=lambda: _grid(-0.7, 0.7, 15))
    fading: str = RAYLEIGH
    delta: float = DEFAULT_DELTA
    seed: int = 0
    batch: int = 1000
    workers: int = 1
    # queue analysis
    lam: float = 0.5
    T: float = 1.0
    f: list = field(default_factory=lambda: [0.25, 0.25, 0.25, 0.25])
    snr_db: float = 20.0
    n_rate: int = 16
    n_a: int = 70
    n_r: int = 40
    eps_grid: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    slots: int = 1_000_000
    warmup: int = 10_000
    p: list | None = None
    # selection probabilities, paired element-wise
    rho_a_db: list = field(default_factory=lambda: [40.0, 40.0 + 10 * np.log10(2)])
    rho_b_db: list = field(default_factory=lambda: [40.0, 40.0])

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; have {KINDS}")
        if self.packets < 1:
            raise ConfigError("packets per point must be >= 1")
        if not self.protocols:
            raise ConfigError("protocol list is empty")
        for proto in self.protocols:
            if proto.upper() not in RELAYS:
                raise ConfigError(f"unknown protocol {proto!r}; have {sorted(RELAYS)}")
        for name in ("ebn0_db", "gain_ratios", "eps_grid", "rho_a_db"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid is empty")
        if len(self.rho_a_db) != len(self.rho_b_db):
            raise ConfigError("rho_a_db and rho_b_db must pair up")
        if self.fading not in (RAYLEIGH, FIXED):
            raise ConfigError(f"fading must be {RAYLEIGH!r} or {FIXED!r}")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.slots <= self.warmup or self.warmup < 0:
            raise ConfigError("need 0 <= warmup < slots")
        if self.batch < 1 or self.workers < 1:
            raise ConfigError("batch and workers must be >= 1")
        try:
            get_constellation(self.modulation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


_LIST_KEYS = {"protocols", "ebn0_db", "gain_ratios", "f", "eps_grid", "p", "rho_a_db", "rho_b_db"}
_INT_KEYS = {"packets", "seed", "batch", "workers", "n_rate", "n_a", "n_r", "slots", "warmup"}
_STR_KEYS = {"kind", "modulation", "fading"}


def _parse_value(key, raw):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _INT_KEYS:
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if key in _LIST_KEYS:
        if key == "protocols":
            return [p.strip().upper() for p in raw.split(",") if p.strip()]
        if raw.count(":") == 2 and "," not in raw:
            start, stop, count = raw.split(":")
            return _grid(float(start), float(stop), int(count))
        return [float(v) for v in raw.split(",") if v.strip()]
    return float(raw)


def parse_config(text: str, **overrides) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for key, raw in parser["experiment"].items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, **overrides)


def point_rng(seed: int, *index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *index]))


def _fading(cfg, ratio):
    return FadingConfig(cfg.fading, delta=cfg.delta, gain_ratio_log10=ratio)


def _map(cfg, fn, jobs):
    if cfg.workers == 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(cfg.workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _per_point(cfg, proto, ratio, ebn0, i_snr):
    # protocols and ratios at one SNR share a stream: paired comparisons
    rng = point_rng(cfg.seed, i_snr)
    c = get_constellation(cfg.modulation)
    counts = simulate_point(proto, c, _fading(cfg, ratio), ebn0, cfg.packets, rng, batch=cfg.batch)
    return {
        "protocol": proto,
        "modulation": c.name,
        "ebn0_db": ebn0,
        "gain_ratio_log10": ratio,
        "packets": counts.packets,
        "packet_errors": counts.packet_errors,
        "per": counts.per,
    }


def run_per_sweep(cfg: ExperimentConfig) -> list[dict]:
    jobs = [
        (cfg, proto.upper(), ratio, ebn0, i)
        for proto in cfg.protocols
        for i, ebn0 in enumerate(cfg.ebn0_db)
        for ratio in cfg.gain_ratios
    ]
    return _map(cfg, _per_point, jobs)


def theory_ser(cfg: ExperimentConfig, ebn0: float) -> float | None:
    """Closed-form HDMF SER where it applies: BPSK, Rayleigh, symmetric budget."""
    if cfg.modulation.upper() != "BPSK" or cfg.fading != RAYLEIGH:
        return None
    return avg_ser_hdmf(LinkBudget.symmetric(ebn0, cfg.delta)).p_hdmf


def _ser_point(cfg, proto, ebn0, i_snr):
    rng = point_rng(cfg.seed, i_snr)
    c = get_constellation(cfg.modulation)
    counts = simulate_point(proto, c, _fading(cfg, 0.0), ebn0, cfg.packets, rng, batch=cfg.batch)
    return {
        "protocol": proto,
        "ebn0_db": ebn0,
        "symbols": counts.symbols,
        "symbol_errors": counts.symbol_errors,
        "ser": counts.ser,
        "theory_ser": theory_ser(cfg, ebn0) if proto == "HDMF" else None,
    }


def run_ser_sweep(cfg: ExperimentConfig) -> list[dict]:
    jobs = [(cfg, proto.upper(), ebn0, i) for proto in cfg.protocols for i, ebn0 in enumerate(cfg.ebn0_db)]
    return _map(cfg, _ser_point, jobs)


def run_theory_vs_sim(cfg: ExperimentConfig) -> list[dict]:
    return run_ser_sweep(replace(cfg, protocols=["HDMF"]))


def _queue_point(cfg, eps, i_eps):
    model = rayleigh_model(
        eps, lam=cfg.lam, T=cfg.T, snr_db=cfg.snr_db, delta=cfg.delta,
        n_rate=cfg.n_rate, n_a=cfg.n_a, n_r=cfg.n_r, f=tuple(cfg.f), p=cfg.p,
    )
    dist = solve_model(model)
    qa_sim, qrb_sim = simulate_schedule(model, cfg.slots, cfg.warmup, point_rng(cfg.seed, i_eps))
    return {
        "epsilon": eps,
        "qa_markov": dist.qa,
        "qrb_markov": dist.qrb,
        "qa_sim": qa_sim,
        "qrb_sim": qrb_sim,
        "slots": cfg.slots - cfg.warmup,
    }


def run_queue_analysis(cfg: ExperimentConfig) -> list[dict]:
    if cfg.p is not None and len(cfg.p) != 3:
        raise ConfigError("p needs three entries (p_abr, p_ar, p_br)")
    try:
        return _map(cfg, _queue_point, [(cfg, eps, i) for i, eps in enumerate(cfg.eps_grid)])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def selection_frequencies(rho_a, rho_b, c, n_packets, rng, batch=1000, n_symbols=128):
    """How often the HDMF rule picks (XOR, A, B) over Rayleigh uplinks.

    Link SNRs are per bit: ``rho = E|h|^2 Eb / N0``.
    """
    n0 = c.bit_energy
    tally = np.zeros(3, dtype=np.int64)
    done = 0
    while done < n_packets:
        n = min(batch, n_packets - done)
        h_a = rayleigh_coefficients(np.sqrt(rho_a / 2), n, rng)
        h_b = rayleigh_coefficients(np.sqrt(rho_b / 2), n, rng)
        ch = ChannelState.reciprocal(h_a, h_b, n0)
        x_a = modulate(rng.integers(0, 2, (n, n_symbols * c.order)), c)
        x_b = modulate(rng.integers(0, 2, (n, n_symbols * c.order)), c)
        y = mac_phase(x_a, x_b, ch, rng)
        tally += np.bincount(np.asarray(decide_scheme(packet_llr_summary(y, ch, c))), minlength=3)
        done += n
    return tally / n_packets


def _select_point(cfg, a_db, b_db, i):
    rho_a, rho_b = 10 ** (a_db / 10), 10 ** (b_db / 10)
    c = get_constellation(cfg.modulation)
    mc = selection_frequencies(rho_a, rho_b, c, cfg.packets, point_rng(cfg.seed, i), cfg.batch)
    cf = selection_probs_avg(rho_a, rho_b)
    return {
        "rho_a_db": a_db,
        "rho_b_db": b_db,
        "p_abr_mc": float(mc[0]),
        "p_ar_mc": float(mc[1]),
        "p_br_mc": float(mc[2]),
        "p_abr_cf": cf[0],
        "p_ar_cf": cf[1],
        "p_br_cf": cf[2],
    }


def run_selection_probs(cfg: ExperimentConfig) -> list[dict]:
    jobs = [(cfg, a, b, i) for i, (a, b) in enumerate(zip(cfg.rho_a_db, cfg.rho_b_db))]
    return _map(cfg, _select_point, jobs)


COLUMNS = {
    "per_sweep": ["protocol", "modulation", "ebn0_db", "gain_ratio_log10", "packets", "packet_errors", "per"],
    "ser_sweep": ["protocol", "ebn0_db", "symbols", "symbol_errors", "ser", "theory_ser"],
    "theory_vs_sim": ["protocol", "ebn0_db", "symbols", "symbol_errors", "ser", "theory_ser"],
    "queue_analysis": ["epsilon", "qa_markov", "qrb_markov", "qa_sim", "qrb_sim", "slots"],
    "selection_probs": [
        "rho_a_db", "rho_b_db", "p_abr_mc", "p_ar_mc", "p_br_mc", "p_abr_cf", "p_ar_cf", "p_br_cf",
    ],
}

RUNNERS = {
    "per_sweep": run_per_sweep,
    "ser_sweep": run_ser_sweep,
    "theory_vs_sim": run_theory_vs_sim,
    "queue_analysis": run_queue_analysis,
    "selection_probs": run_selection_probs,
}


def run(cfg: ExperimentConfig) -> list[dict]:
    return RUNNERS[cfg.kind](cfg)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(kind: str, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[kind]
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in cols])
    return buf.getvalue()
