"""Monte Carlo network simulation of the edge user's SINR.

Each trial draws a fresh BS deployment, picks the cooperating set, samples
link states, fading and interferer beam orientations, and records the
signal power T and interference I. Trials are processed in fixed-size
chunks, each with its own random stream spawned from the seed, so results
depend only on (scenario, n_trials, seed).
"""

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import LinkState, los_probability, path_loss, sample_fading, sample_interferer_gain
from .errors import DomainError, InsufficientDeployment
from .geometry import sample_deployment, select_cooperators

CHUNK_TRIALS = 256


@dataclass(frozen=True)
class SinrSample:
    t_watts: float
    i_watts: float
    n0_watts: float

    @property
    def sinr(self):
        return self.t_watts / (self.i_watts + self.n0_watts)


@dataclass
class NetworkRealization:
    """A single sampled network with the per-BS quantities behind one SINR draw."""

    deployment: object
    coop: np.ndarray
    los: np.ndarray
    fading: np.ndarray
    tx_gain: np.ndarray  # G_M on cooperating links, random lobe gain otherwise


@dataclass(frozen=True)
class MetricResult:
    value: float
    stderr: float
    n_trials: int
    method: str
    metric: str
    runtime_s: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.stderr < 0:
            raise DomainError("stderr must be non-negative")
        if self.metric == "outage_prob" and not 0 <= self.value <= 1:
            raise DomainError(f"outage probability {self.value} outside [0, 1]")


@dataclass
class SinrBatch:
    t: np.ndarray
    i: np.ndarray
    n0: float
    coop_count: np.ndarray
    all_nlos: np.ndarray

    @property
    def sinr(self):
        return self.t / (self.i + self.n0)

    def __len__(self):
        return len(self.t)


def _streams(rng, n):
    """n independent generators derived from a seed or a parent generator."""
    if isinstance(rng, np.random.Generator):
        return rng.spawn(n)
    seq = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(int(rng))
    return [np.random.default_rng(s) for s in seq.spawn(n)]


# Single realization (object-level, mirrors the batch kernel) --------------------


def sample_realization(config, rng):
    dep = sample_deployment(config.geometry, rng)
    coop, _ = select_cooperators(dep, config.scheme)
    ch = config.channel
    n = len(dep)
    los = rng.random(n) < los_probability(ch, dep.distances) if n else np.zeros(0, bool)
    fading = np.where(
        los,
        sample_fading(ch, LinkState.LOS, rng, n),
        sample_fading(ch, LinkState.NLOS, rng, n),
    )
    gain = sample_interferer_gain(config.pattern, rng, n).astype(float)
    gain[coop] = config.pattern.g_m
    return NetworkRealization(dep, coop, los, fading, gain)


def realization_powers(config, real):
    d = real.deployment.distances
    loss = np.where(
        real.los,
        path_loss(config.channel, d, LinkState.LOS) if len(d) else d,
        path_loss(config.channel, d, LinkState.NLOS) if len(d) else d,
    )
    power = config.p_tx * real.tx_gain * real.fading * loss
    mask = np.zeros(len(d), bool)
    mask[real.coop] = True
    t = math.fsum(power[mask])
    i = math.fsum(power[~mask])
    return SinrSample(t, i, config.noise.n0_watts)


def simulate_realization(config, rng):
    """One SINR draw for the typical edge user."""
    return realization_powers(config, sample_realization(config, rng))


# Vectorized batch kernel ---------------------------------------------------------


def _simulate_chunk(config, n_trials, rng, general_user):
    geo, ch, pat, scheme = config.geometry, config.channel, config.pattern, config.scheme
    d_lo = 0.0 if general_user else geo.d_e
    d_hi = geo.d_infinity
    mean = geo.lambda_b * math.pi * (d_hi**2 - d_lo**2)
    counts = rng.poisson(mean, n_trials)
    total = int(counts.sum())
    trial = np.repeat(np.arange(n_trials), counts)
    r = np.sqrt(d_lo**2 + rng.random(total) * (d_hi**2 - d_lo**2))
    if not general_user:
        r = np.maximum(r, np.nextafter(d_lo, np.inf))
    # rng.random draws are already grouped by trial; sort radii within each trial
    order = np.lexsort((r, trial))
    r = r[order]
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rank = np.arange(total) - start[trial]

    if scheme.kind == "frc":
        coop = r <= scheme.d_co
    else:
        k = scheme.fnc_size
        if np.any(counts < k):
            raise InsufficientDeployment(
                f"{scheme.label()} needs {k} BSs; a trial drew only {int(counts.min())}"
            )
        coop = rank < k
    if general_user:
        # cooperation is triggered only when the nearest BS lies beyond d_e
        nearest = np.full(n_trials, np.inf)
        nonempty = counts > 0
        nearest[nonempty] = r[start[nonempty]]
        edge = nearest > geo.d_e
        coop = np.where(edge[trial], coop, rank == 0)

    los = (r <= ch.d_los) & (rng.random(total) < ch.p_l)
    shape = np.where(los, ch.n_l, ch.n_n)
    fading = rng.gamma(shape, 1.0 / shape)
    loss = np.where(los, ch.c_l * r ** (-ch.alpha_l), ch.c_n * r ** (-ch.alpha_n))
    lobe = np.where(rng.random(total) < pat.p_main, pat.g_m, pat.g_s)
    gain = np.where(coop, pat.g_m, lobe)
    power = config.p_tx * gain * fading * loss

    t = np.bincount(trial[coop], power[coop], minlength=n_trials)
    i = np.bincount(trial[~coop], power[~coop], minlength=n_trials)
    coop_count = np.bincount(trial[coop], minlength=n_trials)
    coop_los = np.bincount(trial[coop & los], minlength=n_trials)
    return t, i, coop_count, coop_los == 0


def simulate_sinr(config, n_trials, rng=0, general_user=None):
    """Signal and interference powers for ``n_trials`` independent networks."""
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    if general_user is None:
        general_user = getattr(config, "user", "edge") == "general"
    n_chunks = -(-n_trials // CHUNK_TRIALS)
    streams = _streams(rng, n_chunks)
    parts = []
    for c, stream in enumerate(streams):
        size = min(CHUNK_TRIALS, n_trials - c * CHUNK_TRIALS)
        parts.append(_simulate_chunk(config, size, stream, general_user))
    t, i, cc, nl = (np.concatenate(p) for p in zip(*parts))
    return SinrBatch(t, i, config.noise.n0_watts, cc, nl)


# Estimators ------------------------------------------------------------------------


def _mean_stderr(x):
    n = len(x)
    mean = math.fsum(x) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def rate_from_batch(batch):
    return _mean_stderr(np.log1p(batch.sinr))


def outage_from_batch(batch, tau):
    """Outage fraction(s) with binomial stderr; ``tau`` may be an array."""
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus <= 0):
        raise DomainError("threshold must be positive")
    sinr = batch.sinr
    n = len(sinr)
    p = np.array([np.count_nonzero(sinr <= x) / n for x in taus])
    se = np.sqrt(p * (1 - p) / n)
    return p, se


def estimate_rate(config, n_trials=10_000, rng=0):
    """Average rate in nats/s/Hz."""
    t0 = time.perf_counter()
    batch = simulate_sinr(config, n_trials, rng)
    mean, se = rate_from_batch(batch)
    return MetricResult(mean, se, n_trials, "simulation", "avg_rate_nats", time.perf_counter() - t0,
                        rng if isinstance(rng, int) else None)


def estimate_outage(config, tau, n_trials=10_000, rng=0):
    """Outage probability at threshold tau (linear). An array of thresholds is
    evaluated on one shared set of trials and returns a list of results."""
    t0 = time.perf_counter()
    batch = simulate_sinr(config, n_trials, rng)
    p, se = outage_from_batch(batch, tau)
    dt = time.perf_counter() - t0
    seed = rng if isinstance(rng, int) else None
    out = [MetricResult(float(a), float(b), n_trials, "simulation", "outage_prob", dt, seed) for a, b in zip(p, se)]
    return out if np.ndim(tau) else out[0]


def estimate_general_user(config, n_trials=10_000, rng=0, tau=None):
    """Rate (``tau=None``) or outage for a user at a random location.

    The user is served cooperatively only when its nearest BS lies beyond d_e;
    otherwise the nearest BS serves it alone.
    """
    t0 = time.perf_counter()
    batch = simulate_sinr(config, n_trials, rng, general_user=True)
    seed = rng if isinstance(rng, int) else None
    if tau is None:
        mean, se = rate_from_batch(batch)
        return MetricResult(mean, se, n_trials, "simulation", "avg_rate_nats", time.perf_counter() - t0, seed)
    p, se = outage_from_batch(batch, tau)
    dt = time.perf_counter() - t0
    out = [MetricResult(float(a), float(b), n_trials, "simulation", "outage_prob", dt, seed) for a, b in zip(p, se)]
    return out if np.ndim(tau) else out[0]
