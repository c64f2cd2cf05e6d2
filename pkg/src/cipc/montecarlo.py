"""Monte Carlo estimate of the truncated-CIPC outage probability.

Each block draws a Rayleigh MISO channel, applies the truncated inversion
rule, and, if the transmitter speaks, fails decoding with probability
eps(q). Antenna gains |h_i|^2 are drawn directly as Exponential(1); the
matched beamformer removes the phase, so this loses nothing.

Random numbers come from counter-based Philox streams. Trials are grouped in
fixed chunks of ``CHUNK`` and chunk ``k`` uses key ``seed`` with counter
``(0, k, 0, 0)``, so trial ``i`` always sees the same numbers regardless of
how the trial range is sharded across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cipc import model
from cipc.errors import DomainError
from cipc.model import SystemConfig

CHUNK = 1 << 16
MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class McConfig:
    trials: int
    seed: int
    cfg: SystemConfig
    q: float

    def __post_init__(self):
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not self.q > 0:
            raise DomainError(f"q must be > 0, got {self.q!r}")


@dataclass(frozen=True)
class McEstimate:
    p_transmit_hat: float
    outage_hat: float
    std_err_pt: float
    std_err_outage: float
    trials: int
    seed: int


@dataclass
class TrialBatch:
    """Per-trial record for trials ``start .. start + len(gain) - 1``."""

    start: int
    gain: np.ndarray
    transmit: np.ndarray
    power: np.ndarray
    decode_failed: np.ndarray

    @property
    def outage(self) -> np.ndarray:
        return ~self.transmit | self.decode_failed


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, chunk, 0, 0]))


def sample_channel_gain(n_t: int, rng: np.random.Generator, size=None):
    """||h||^2 for h ~ CN(0, I_{n_t}): a sum of n_t unit exponentials."""
    if size is None:
        return float(rng.standard_exponential(n_t).sum())
    shape = (size,) if np.ndim(size) == 0 else tuple(size)
    return rng.standard_exponential(shape + (n_t,)).sum(axis=-1)


def apply_truncated_cipc(cfg: SystemConfig, q: float, gain: float) -> tuple[bool, float]:
    """Transmit power that makes the receive power exactly ``q``, or silence.

    The transmitter speaks iff gain >= q/p_max. The power is capped at
    p_max so rounding in q/gain can never exceed the peak constraint.
    """
    if not gain >= 0:
        raise DomainError(f"channel gain must be >= 0, got {gain}")
    if gain >= q / cfg.p_max:
        return True, min(q / gain, cfg.p_max)
    return False, 0.0


def _cipc_arrays(cfg: SystemConfig, q: float, gain: np.ndarray):
    transmit = gain >= q / cfg.p_max
    with np.errstate(divide="ignore"):
        power = np.where(transmit, np.minimum(q / gain, cfg.p_max), 0.0)
    return transmit, power


def _chunk_draws(cfg: SystemConfig, seed: int, chunk: int):
    rng = chunk_generator(seed, chunk)
    gain = sample_channel_gain(cfg.n_t, rng, CHUNK)
    u = rng.random(CHUNK)
    return gain, u


def draw_trials(cfg: SystemConfig, q: float, seed: int, start: int, stop: int) -> TrialBatch:
    """Simulate trials with indices in [start, stop)."""
    if not 0 <= start <= stop:
        raise DomainError(f"bad trial range [{start}, {stop})")
    eps = model.outage_probability(cfg, q).eps
    gains, us = [], []
    chunks = range(start // CHUNK, (stop - 1) // CHUNK + 1) if stop > start else range(0)
    for chunk in chunks:
        gain, u = _chunk_draws(cfg, seed, chunk)
        lo = max(start - chunk * CHUNK, 0)
        hi = min(stop - chunk * CHUNK, CHUNK)
        gains.append(gain[lo:hi])
        us.append(u[lo:hi])
    gain = np.concatenate(gains) if gains else np.empty(0)
    u = np.concatenate(us) if us else np.empty(0)
    transmit, power = _cipc_arrays(cfg, q, gain)
    return TrialBatch(
        start=start,
        gain=gain,
        transmit=transmit,
        power=power,
        decode_failed=transmit & (u < eps),
    )


def _count(cfg, q, seed, start, stop):
    n_transmit = n_outage = 0
    # walk chunk-aligned pieces so memory stays bounded
    pos = start
    while pos < stop:
        end = min(stop, (pos // CHUNK + 1) * CHUNK)
        batch = draw_trials(cfg, q, seed, pos, end)
        n_transmit += int(batch.transmit.sum())
        n_outage += int(batch.outage.sum())
        pos = end
    return n_transmit, n_outage


def _std_err(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def estimate(mc: McConfig, shards: int = 1, workers: Optional[int] = None) -> McEstimate:
    """Empirical transmit and outage rates with binomial standard errors.

    The trial range is split into ``shards`` contiguous pieces; the result
    is exactly the same for every shard count.
    """
    if shards < 1:
        raise ValueError("shards must be >= 1")
    bounds = np.linspace(0, mc.trials, shards + 1).astype(np.int64)
    pieces = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def run(piece):
        return _count(mc.cfg, mc.q, mc.seed, *piece)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(run, pieces))
    else:
        counts = [run(p) for p in pieces]
    n_transmit = sum(c[0] for c in counts)
    n_outage = sum(c[1] for c in counts)
    pt_hat = n_transmit / mc.trials
    out_hat = n_outage / mc.trials
    return McEstimate(
        p_transmit_hat=pt_hat,
        outage_hat=out_hat,
        std_err_pt=_std_err(pt_hat, mc.trials),
        std_err_outage=_std_err(out_hat, mc.trials),
        trials=mc.trials,
        seed=mc.seed,
    )


def validation_grid(cfg: SystemConfig, points: int = 20, min_outage: float = 1e-5) -> np.ndarray:
    """Log-spaced receive powers in (q_rate, p_max (N_t-1)) with outage >= ``min_outage``.

    Points where the closed-form outage is below ``min_outage`` are skipped;
    a few million trials cannot resolve them without importance sampling.
    """
    hi = cfg.knee if cfg.n_t > 1 else 100.0 * cfg.p_max
    candidates = np.geomspace(cfg.q_rate, hi, 4002)[1:-1]
    keep = [q for q in candidates if model.outage_probability(cfg, q).outage >= min_outage]
    if len(keep) < points:
        raise DomainError(f"only {len(keep)} candidate points reach outage >= {min_outage}")
    idx = np.round(np.linspace(0, len(keep) - 1, points)).astype(int)
    return np.array([keep[i] for i in idx])
