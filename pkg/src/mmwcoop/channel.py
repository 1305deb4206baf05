"""Physical-layer model: sectored antennas, LOS-ball blockage, dual-slope
path loss, Nakagami fading and thermal noise.

All power arithmetic is in linear units (watts, linear gains); dB values are
converted at construction time via the ``from_db`` helpers.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0) if np.ndim(db) else 10.0 ** (float(db) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return db_to_linear(dbm) * 1e-3


class LinkState(enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class AntennaPattern:
    """Two-level sectored gain pattern; gains are linear, beamwidth in radians."""

    g_m: float
    g_s: float
    theta_t: float

    def __post_init__(self):
        problems = []
        if not self.g_s > 0:
            problems.append(f"side-lobe gain must be positive (g_s={self.g_s})")
        if not self.g_m > self.g_s:
            problems.append(f"main-lobe gain must exceed side-lobe gain ({self.g_m} <= {self.g_s})")
        if not 0 < self.theta_t < 2 * math.pi:
            problems.append(f"beamwidth must lie in (0, 2*pi), got {self.theta_t}")
        if problems:
            raise DomainError("; ".join(problems))

    @classmethod
    def from_db(cls, g_m_db, g_s_db, theta_t_deg):
        return cls(db_to_linear(g_m_db), db_to_linear(g_s_db), math.radians(theta_t_deg))

    @property
    def p_main(self):
        """Probability that a randomly oriented interferer points its main lobe at the user."""
        return self.theta_t / (2 * math.pi)

    @property
    def p_side(self):
        return 1.0 - self.p_main


@dataclass(frozen=True)
class ChannelParams:
    """Path-loss, blockage and fading constants (linear path gains, metres)."""

    alpha_l: float
    alpha_n: float
    c_l: float
    c_n: float
    n_l: float
    n_n: float
    p_l: float
    d_los: float

    def __post_init__(self):
        problems = validate_channel(self)
        if problems:
            raise DomainError("; ".join(problems))

    @classmethod
    def from_db(cls, alpha_l, alpha_n, c_l_db, c_n_db, n_l, n_n, p_l, d_los):
        return cls(alpha_l, alpha_n, db_to_linear(c_l_db), db_to_linear(c_n_db), n_l, n_n, p_l, d_los)

    def alpha(self, state):
        return self.alpha_l if state is LinkState.LOS else self.alpha_n

    def gain(self, state):
        return self.c_l if state is LinkState.LOS else self.c_n

    def shape(self, state):
        return self.n_l if state is LinkState.LOS else self.n_n


def validate_channel(p):
    """List every violated channel invariant (empty when valid)."""
    problems = []
    if not 2 <= p.alpha_l < p.alpha_n:
        problems.append(f"need 2 <= alpha_l < alpha_n (got {p.alpha_l}, {p.alpha_n})")
    if not p.c_l > p.c_n > 0:
        problems.append(f"need c_l > c_n > 0 (got {p.c_l:.4g}, {p.c_n:.4g})")
    if not p.n_l >= 1 or not p.n_n >= 1:
        problems.append(f"Nakagami shapes must be >= 1 (got {p.n_l}, {p.n_n})")
    if not 0 <= p.p_l <= 1:
        problems.append(f"LOS probability must be in [0, 1] (got {p.p_l})")
    if not p.d_los > 0:
        problems.append(f"LOS-ball radius must be positive (got {p.d_los})")
    return problems


@dataclass(frozen=True)
class NoiseModel:
    bandwidth_hz: float
    noise_figure_db: float

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise DomainError(f"bandwidth must be positive (got {self.bandwidth_hz})")

    @property
    def n0_dbm(self):
        return -174.0 + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db

    @property
    def n0_watts(self):
        return 10.0 ** ((self.n0_dbm - 30.0) / 10.0)


def los_probability(params, d):
    """Probability that a link of length d (m) is LOS."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise DomainError("distance must be non-negative")
    out = np.where(d_arr <= params.d_los, params.p_l, 0.0)
    return float(out) if out.ndim == 0 else out


def path_loss(params, d, state):
    """Linear path gain C * d**(-alpha) for the given link state."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise DomainError("path loss is singular at d <= 0")
    out = params.gain(state) * d_arr ** (-params.alpha(state))
    return float(out) if out.ndim == 0 else out


def sample_fading(params, state, rng, size=None):
    """Unit-mean Gamma(N, 1/N) power gain."""
    n = params.shape(state)
    return rng.gamma(n, 1.0 / n, size=size)


def sample_interferer_gain(pattern, rng, size=None):
    """Directional gain seen from an interferer with uniformly random orientation."""
    main = rng.random(size) < pattern.p_main
    return np.where(main, pattern.g_m, pattern.g_s)


def _ula_side_lobe(k):
    def neg_gain(x):
        return -(np.sin(k * np.pi * x / 2) ** 2) / np.sin(np.pi * x / 2) ** 2

    lo, hi = 2.0 / k, 4.0 / k
    grid = np.linspace(lo, hi, 2001)[1:-1]
    i = int(np.argmin(neg_gain(grid)))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(neg_gain, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return float(-res.fun)


def ula_approximation(k, normalize=False):
    """Sectored approximation of a half-wavelength uniform linear array of k elements.

    The side-lobe level is the peak of sin^2(k pi x / 2) / sin^2(pi x / 2)
    over 2/k < x < 4/k. With ``normalize=True`` it is divided by k so that
    main and side lobes share the 1/k normalization of the array pattern.
    K = 2 gives a full 2*pi main lobe; this degenerate pattern is returned
    unvalidated with a warning.
    """
    if k < 2 or int(k) != k:
        raise DomainError(f"ULA needs an integer k >= 2 (got {k})")
    k = int(k)
    theta_t = 4.0 * (math.pi / 2 - math.acos(2.0 / k))
    g_s = _ula_side_lobe(k)
    if normalize:
        g_s /= k
    if k == 2:
        warnings.warn("2-element ULA has a full 2*pi main lobe; sectored model is degenerate", RuntimeWarning)
        pattern = object.__new__(AntennaPattern)
        for name, val in (("g_m", float(k)), ("g_s", g_s), ("theta_t", 2 * math.pi)):
            object.__setattr__(pattern, name, val)
        return pattern
    if g_s >= k:
        raise DomainError(
            f"unnormalized side-lobe level {g_s:.4g} exceeds the main-lobe gain {k} for k={k}; "
            "use normalize=True"
        )
    return AntennaPattern(float(k), g_s, theta_t)
