"""BS point process around a cell-edge user and the distance laws used by
the analytic engines.

The user sits at the origin; no BS lies within the exclusion radius
d_e = chi * rho, where rho = sqrt(1 / (pi * lambda_b)) is the average cell
radius. Simulation deployments are truncated at d_infinity.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special, stats

from .errors import DomainError, InsufficientDeployment


@dataclass(frozen=True)
class NetworkGeometry:
    lambda_b: float
    chi: float = 1.0
    d_infinity: float = 2000.0

    def __post_init__(self):
        problems = []
        if not self.lambda_b > 0:
            problems.append(f"BS density must be positive (got {self.lambda_b})")
        if not self.chi > 0:
            problems.append(f"edge factor chi must be positive (got {self.chi})")
        if not problems and not self.d_e < self.d_infinity:
            problems.append(f"exclusion radius {self.d_e:.4g} m must be below d_infinity {self.d_infinity} m")
        if problems:
            raise DomainError("; ".join(problems))

    @classmethod
    def from_rho(cls, rho, chi=1.0, d_infinity=2000.0):
        return cls(1.0 / (math.pi * rho * rho), chi, d_infinity)

    @property
    def rho(self):
        return math.sqrt(1.0 / (math.pi * self.lambda_b))

    @property
    def d_e(self):
        return self.chi * self.rho

    def area_measure(self, r):
        """Mean BS count in the annulus between d_e and r."""
        return self.lambda_b * math.pi * (np.asarray(r, dtype=float) ** 2 - self.d_e**2)

    def radius_from_measure(self, x):
        """Inverse of :meth:`area_measure`."""
        return np.sqrt(self.d_e**2 + np.asarray(x, dtype=float) / (self.lambda_b * math.pi))

    def d_co_for_mean(self, mean_count):
        """Cooperation radius whose annulus holds ``mean_count`` BSs on average."""
        if not mean_count > 0:
            raise DomainError("mean cooperating count must be positive")
        return float(self.radius_from_measure(mean_count))


@dataclass(frozen=True)
class CoopScheme:
    """Which BSs serve the user: ``fnc`` (m nearest), ``frc`` (all within d_co) or ``none``."""

    kind: str
    m: Optional[int] = None
    d_co: Optional[float] = None

    def __post_init__(self):
        if self.kind == "fnc":
            if self.m is None or int(self.m) != self.m or self.m < 1:
                raise DomainError(f"FNC needs an integer m >= 1 (got {self.m})")
        elif self.kind == "frc":
            if self.d_co is None or not self.d_co > 0:
                raise DomainError(f"FRC needs a positive d_co (got {self.d_co})")
        elif self.kind != "none":
            raise DomainError(f"unknown cooperation scheme {self.kind!r}")

    @classmethod
    def fnc(cls, m):
        return cls("fnc", m=int(m))

    @classmethod
    def frc(cls, d_co):
        return cls("frc", d_co=float(d_co))

    @classmethod
    def noncooperative(cls):
        return cls("none")

    @property
    def fnc_size(self):
        """Number of serving BSs for fixed-number schemes (1 when non-cooperative)."""
        return 1 if self.kind == "none" else self.m

    def label(self):
        if self.kind == "fnc":
            return f"FNC(M={self.m})"
        if self.kind == "frc":
            return f"FRC(d_co={self.d_co:g})"
        return "non-coop"


@dataclass
class BsDeployment:
    """BS polar coordinates sorted by distance from the user."""

    distances: np.ndarray
    angles: np.ndarray
    geometry: NetworkGeometry = field(repr=False)

    def __len__(self):
        return len(self.distances)


def sample_deployment(geometry, rng):
    """Draw one HPPP realization in the annulus (d_e, d_infinity]."""
    d_e, d_inf = geometry.d_e, geometry.d_infinity
    mean = geometry.lambda_b * math.pi * (d_inf**2 - d_e**2)
    n = rng.poisson(mean)
    u = rng.random(n)
    r = np.sqrt(d_e**2 + u * (d_inf**2 - d_e**2))
    # u in [0, 1) can hit d_e exactly; nudge onto the open interval
    r = np.maximum(r, np.nextafter(d_e, np.inf))
    theta = rng.uniform(-math.pi, math.pi, n)
    order = np.argsort(r, kind="stable")
    return BsDeployment(r[order], theta[order], geometry)


def frc_mean_count(geometry, d_co):
    if not d_co > geometry.d_e:
        raise DomainError(f"cooperation radius {d_co} must exceed d_e = {geometry.d_e:.4g}")
    return float(geometry.area_measure(d_co))


def frc_count_pmf(geometry, d_co, n):
    """Probability that exactly n BSs lie in the cooperation annulus."""
    mu = frc_mean_count(geometry, d_co)
    return float(stats.poisson.pmf(n, mu))


def pdf_dm1(geometry, m, r):
    """Density of the distance to the (m+1)-th nearest BS, per metre."""
    if m < 1:
        raise DomainError("m must be >= 1")
    r = np.asarray(r, dtype=float)
    x = np.where(r > geometry.d_e, geometry.area_measure(np.maximum(r, geometry.d_e)), 0.0)
    logpdf = math.log(2 * geometry.lambda_b * math.pi) + np.log(np.where(r > 0, r, 1.0))
    with np.errstate(divide="ignore"):
        logpdf = logpdf + m * np.log(x) - x - special.gammaln(m + 1)
    out = np.where(r > geometry.d_e, np.exp(logpdf), 0.0)
    return float(out) if out.ndim == 0 else out


def cdf_dm1(geometry, m, r):
    """CDF of the (m+1)-th nearest BS distance."""
    r = np.asarray(r, dtype=float)
    x = np.where(r > geometry.d_e, geometry.area_measure(np.maximum(r, geometry.d_e)), 0.0)
    out = special.gammainc(m + 1, x)
    return float(out) if out.ndim == 0 else out


def conditional_coop_distance_pdf(geometry, r, x):
    """Density of one cooperator's distance given the (m+1)-th nearest sits at r."""
    if not r > geometry.d_e:
        raise DomainError(f"conditioning radius {r} must exceed d_e = {geometry.d_e:.4g}")
    x = np.asarray(x, dtype=float)
    out = np.where((x > geometry.d_e) & (x <= r), 2 * x / (r * r - geometry.d_e**2), 0.0)
    return float(out) if out.ndim == 0 else out


def select_cooperators(deployment, scheme):
    """Split deployment indices into (cooperating, interfering) index arrays."""
    n = len(deployment)
    idx = np.arange(n)
    if scheme.kind == "frc":
        k = int(np.searchsorted(deployment.distances, scheme.d_co, side="right"))
    else:
        k = scheme.fnc_size
        if n < k:
            raise InsufficientDeployment(f"{scheme.label()} needs {k} BSs but the deployment has {n}")
    return idx[:k], idx[k:]
