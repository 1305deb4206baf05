"""Fast outage approximation that ignores interference.

The cooperative signal power is split by the LOS/NLOS make-up of the
serving set and each piece is replaced by a Gamma variable with the same
mean and variance. Outage then needs only incomplete-gamma CDFs (FNC) plus
one convolution integral (FRC, where LOS and NLOS contributions add).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from . import specfun
from .analytic import distance_nodes, radial_moment
from .errors import DomainError

#: outer quadrature orders over the (m+1)-th neighbour distance
LAGUERRE_ORDER = 64
LEGENDRE_ORDER = 64

# relative variance below which a Gamma fit is replaced by a point mass
_DEGENERATE_CV2 = 1e-12


@dataclass(frozen=True)
class GammaApprox:
    """Moment-matched Gamma(kappa, rho_scale), or a point mass when the variance vanishes."""

    kappa: float
    rho_scale: float
    branch: str
    mixing: float
    mean: float
    variance: float

    @classmethod
    def from_moments(cls, mean, variance, branch, mixing):
        if not mean > 0:
            raise DomainError(f"{branch}: matched mean must be positive (got {mean})")
        if variance < 0:
            if variance < -1e-9 * mean * mean:
                raise DomainError(f"{branch}: negative variance {variance:.3g}")
            variance = 0.0
        if variance <= _DEGENERATE_CV2 * mean * mean:
            return cls(math.inf, 0.0, branch, mixing, mean, variance)
        kappa = mean * mean / variance
        return cls(kappa, mean / kappa, branch, mixing, mean, variance)

    @property
    def degenerate(self):
        return math.isinf(self.kappa)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.degenerate:
            out = np.where(t >= self.mean, 1.0, 0.0)
        else:
            out = special.gammainc(self.kappa, np.maximum(t, 0.0) / self.rho_scale)
        return float(out) if out.ndim == 0 else out

    def pdf(self, t):
        if self.degenerate:
            raise DomainError("point-mass approximant has no density")
        return stats.gamma.pdf(t, self.kappa, scale=self.rho_scale)

    def ppf(self, q):
        if self.degenerate:
            return self.mean
        return float(stats.gamma.ppf(q, self.kappa, scale=self.rho_scale))


# FNC --------------------------------------------------------------------------


def los_fraction(geometry, channel, r):
    """Probability that one of the m nearest BSs is LOS given the (m+1)-th sits at r."""
    d_e = geometry.d_e
    r = np.asarray(r, dtype=float)
    inner = np.clip(np.minimum(r, channel.d_los) ** 2 - d_e**2, 0.0, None)
    out = channel.p_l * inner / (r * r - d_e**2)
    return float(out) if out.ndim == 0 else out


def _fnc_nodes(geometry, channel, m):
    return distance_nodes(
        geometry.lambda_b, geometry.d_e, channel.d_los, m, LAGUERRE_ORDER, LEGENDRE_ORDER
    )


def p_nl(geometry, channel, m):
    """Probability that all m serving BSs are NLOS."""
    if m < 1:
        raise DomainError("m must be >= 1")
    r, w = _fnc_nodes(geometry, channel, m)
    q = los_fraction(geometry, channel, r)
    return float(min(1.0, max(0.0, math.fsum(w * (1.0 - q) ** m))))


def s_l_pmf(geometry, channel, m, r, count):
    """P{count LOS cooperators | at least one, (m+1)-th neighbour at r}."""
    if not 1 <= count <= m:
        raise DomainError(f"count must lie in 1..{m}")
    if not r > geometry.d_e:
        raise DomainError("r must exceed d_e")
    q = los_fraction(geometry, channel, r)
    at_least_one = -math.expm1(m * math.log1p(-q)) if q < 1 else 1.0
    if at_least_one == 0:
        raise DomainError(f"no LOS cooperator is possible at r={r}")
    return float(stats.binom.pmf(count, m, q) / at_least_one)


def _los_link_moments(geometry, channel, a_ml, r):
    """E[a h x^-alpha_L] and E[(a h x^-alpha_L)^2] for one LOS cooperator given r."""
    d_e = geometry.d_e
    r1 = np.minimum(r, channel.d_los)
    area = r1 * r1 - d_e**2
    m1 = np.array([radial_moment(channel.alpha_l, d_e, x) for x in r1]) / area
    m2 = np.array([radial_moment(channel.alpha_l, d_e, x, k=2) for x in r1]) / area
    return a_ml * m1, a_ml**2 * (channel.n_l + 1) / channel.n_l * m2


def fnc_los_moments(geometry, channel, pattern, p_tx, m):
    """Mean and variance of the LOS-only signal power given at least one LOS cooperator."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if not channel.alpha_l >= 2:
        raise DomainError("alpha_l must be >= 2")
    r, w = _fnc_nodes(geometry, channel, m)
    q = los_fraction(geometry, channel, r)
    keep = q > 0
    if not np.any(keep):
        raise DomainError("LOS cooperators are impossible for this geometry")
    r, w, q = r[keep], w[keep], q[keep]
    e1, e2 = _los_link_moments(geometry, channel, p_tx * pattern.g_m * channel.c_l, r)
    prob = math.fsum(w * -np.expm1(m * np.log1p(-q)))
    # E[S 1{S>=1}] = m q and E[S(S-1) 1{S>=1}] = m(m-1) q^2 for S ~ Bin(m, q)
    mean = math.fsum(w * m * q * e1) / prob
    second = math.fsum(w * (m * q * e2 + m * (m - 1) * q * q * e1 * e1)) / prob
    return mean, second - mean * mean


def _nlos_link_moments(geometry, channel, a_mn, r):
    """Moments of one NLOS cooperator's power given r and that the link is NLOS."""
    d_e, p_l, alpha = geometry.d_e, channel.p_l, channel.alpha_n
    r1 = np.maximum(d_e, np.minimum(r, channel.d_los))
    z = (1 - p_l) * (r1 * r1 - d_e**2) + (r * r - r1 * r1)
    m1 = np.array([(1 - p_l) * radial_moment(alpha, d_e, a) + radial_moment(alpha, a, b) for a, b in zip(r1, r)])
    m2 = np.array(
        [(1 - p_l) * radial_moment(alpha, d_e, a, k=2) + radial_moment(alpha, a, b, k=2) for a, b in zip(r1, r)]
    )
    return a_mn * m1 / z, a_mn**2 * (channel.n_n + 1) / channel.n_n * m2 / z


def fnc_nlos_moments(geometry, channel, pattern, p_tx, m):
    """Mean and variance of the signal power given every cooperator is NLOS."""
    if m < 1:
        raise DomainError("m must be >= 1")
    r, w = _fnc_nodes(geometry, channel, m)
    pw = w * (1.0 - los_fraction(geometry, channel, r)) ** m
    prob = math.fsum(pw)
    if prob <= 0:
        raise DomainError("an all-NLOS serving set is impossible for this configuration")
    e1, e2 = _nlos_link_moments(geometry, channel, p_tx * pattern.g_m * channel.c_n, r)
    mean = math.fsum(pw * m * e1) / prob
    second = math.fsum(pw * (m * e2 + m * (m - 1) * e1 * e1)) / prob
    return mean, second - mean * mean


def fnc_approximants(geometry, channel, pattern, p_tx, m):
    """(p_nl, LOS approximant or None, NLOS approximant or None)."""
    pnl = p_nl(geometry, channel, m)
    los = nlos = None
    if pnl < 1:
        mean, var = fnc_los_moments(geometry, channel, pattern, p_tx, m)
        los = GammaApprox.from_moments(mean, var, "FNC-L", 1 - pnl)
    if pnl > 0:
        mean, var = fnc_nlos_moments(geometry, channel, pattern, p_tx, m)
        nlos = GammaApprox.from_moments(mean, var, "FNC-N", pnl)
    return pnl, los, nlos


def outage_fnc_approx(geometry, channel, pattern, p_tx, noise, m, tau):
    """Interference-free outage approximation for the m nearest BSs; tau may be an array."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("threshold must be positive")
    pnl, los, nlos = fnc_approximants(geometry, channel, pattern, p_tx, m)
    t = tau * noise.n0_watts
    out = np.zeros_like(t)
    if los is not None:
        out = out + (1 - pnl) * los.cdf(t)
    if nlos is not None:
        out = out + pnl * nlos.cdf(t)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# FRC --------------------------------------------------------------------------


def _frc_regions(geometry, channel, d_co, nu):
    """(intensity weight, lo, hi) pieces of the nu-state PPP inside the cooperation annulus."""
    d_e = geometry.d_e
    r1 = max(d_e, min(d_co, channel.d_los))
    if nu == "L":
        return [(channel.p_l, d_e, r1)]
    return [(1 - channel.p_l, d_e, r1), (1.0, r1, d_co)]


def frc_empty_probability(geometry, channel, d_co, nu):
    """Probability that no nu-state BS lies in the cooperation annulus."""
    lam_pi = math.pi * geometry.lambda_b
    mu = lam_pi * sum(wt * (hi * hi - lo * lo) for wt, lo, hi in _frc_regions(geometry, channel, d_co, nu))
    return math.exp(-mu)


def frc_moments(geometry, channel, pattern, p_tx, d_co, nu):
    """Mean and variance of the nu-state signal power given at least one nu-state cooperator."""
    if nu not in ("L", "N"):
        raise DomainError("nu must be 'L' or 'N'")
    if not d_co > geometry.d_e:
        raise DomainError("d_co must exceed d_e")
    alpha = channel.alpha_l if nu == "L" else channel.alpha_n
    shape = channel.n_l if nu == "L" else channel.n_n
    a = p_tx * pattern.g_m * (channel.c_l if nu == "L" else channel.c_n)
    lam_pi = math.pi * geometry.lambda_b
    regions = _frc_regions(geometry, channel, d_co, nu)
    # Campbell: E[sum f] = lambda pi int 2x f, Var[sum f] = lambda pi int 2x E[f^2]
    m1 = lam_pi * a * sum(wt * radial_moment(alpha, lo, hi) for wt, lo, hi in regions)
    v = lam_pi * a * a * (shape + 1) / shape * sum(wt * radial_moment(alpha, lo, hi, k=2) for wt, lo, hi in regions)
    p0 = frc_empty_probability(geometry, channel, d_co, nu)
    nonempty = -math.expm1(math.log(p0)) if p0 > 0 else 1.0
    if nonempty <= 0:
        raise DomainError(f"no {nu}-state cooperator is possible")
    mean = m1 / nonempty
    second = (v + m1 * m1) / nonempty
    return mean, second - mean * mean


def frc_approximants(geometry, channel, pattern, p_tx, d_co):
    """((p0_L, LOS approximant or None), (p0_N, NLOS approximant or None))."""
    out = []
    for nu in ("L", "N"):
        p0 = frc_empty_probability(geometry, channel, d_co, nu)
        approx = None
        if p0 < 1:
            mean, var = frc_moments(geometry, channel, pattern, p_tx, d_co, nu)
            approx = GammaApprox.from_moments(mean, var, f"FRC-{nu}", p0)
        out.append((p0, approx))
    return tuple(out)


def sum_cdf(first, second, t, atol=1e-12):
    """P{X + Y <= t} for independent Gamma approximants X (``first``) and Y."""
    if t <= 0:
        return 0.0
    if first.degenerate:
        return second.cdf(t - first.mean)
    if second.degenerate:
        return first.cdf(t - second.mean)
    kappa, theta = first.kappa, first.rho_scale
    # head [0, x1]: x = x1 * u^(1/kappa) absorbs the x^(kappa-1) endpoint behaviour
    x1 = min(t, first.ppf(1e-3))
    log_pref = kappa * math.log(x1 / theta) - math.lgamma(kappa + 1)

    def head(u):
        x = x1 * u ** (1.0 / kappa)
        return np.exp(log_pref - x / theta) * second.cdf(t - x)

    total, _ = specfun.adaptive_gauss_legendre(head, [0.0, 1.0], order=32, atol=atol, rtol=1e-10)
    if x1 < t:
        cuts = [x1] + [c for c in (first.ppf(q) for q in (0.1, 0.5, 0.9, 0.999, 1 - 1e-9)) if x1 < c < t] + [t]

        def body(x):
            return first.pdf(x) * second.cdf(t - x)

        val, _ = specfun.adaptive_gauss_legendre(body, cuts, order=32, atol=atol, rtol=1e-10)
        total += val
    return float(min(1.0, max(0.0, total)))


def outage_frc_approx(geometry, channel, pattern, p_tx, noise, d_co, tau):
    """Interference-free outage approximation for region cooperation; tau may be an array."""
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus <= 0):
        raise DomainError("threshold must be positive")
    (p0l, los), (p0n, nlos) = frc_approximants(geometry, channel, pattern, p_tx, d_co)
    out = []
    for t in taus * noise.n0_watts:
        val = p0l * p0n
        if los is not None:
            val += (1 - p0l) * p0n * los.cdf(t)
        if nlos is not None:
            val += p0l * (1 - p0n) * nlos.cdf(t)
        if los is not None and nlos is not None:
            val += (1 - p0l) * (1 - p0n) * sum_cdf(los, nlos, t)
        out.append(min(1.0, max(0.0, val)))
    return out[0] if np.ndim(tau) == 0 else np.array(out)
