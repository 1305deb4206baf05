"""Exact analytic engine: Laplace transforms of signal and interference
power, average rate integrals and Gil-Pelaez outage probabilities.

Notation used in names:
  mu  in {"M", "S"}  : main-lobe / side-lobe directional gain of a BS
  nu  in {"L", "N"}  : LOS / NLOS link state
  a(mu, nu) = p_tx * G_mu * C_nu

The radial building blocks (all integrals of 2t dt, vectorized over z):

  lambda_fn(z, x, y) = int_y^x 2t E[exp(-z a h t^-alpha)] dt
  theta_fn(z, lo, hi) = int_lo^hi 2t (1 - E[exp(-z a h t^-alpha)]) dt
  xi_fn(z, x)        = int_x^inf 2t (1 - E[exp(-z a h t^-alpha_N)]) dt   (NLOS tail)

Transforms take real or complex z (scalar or array); outage evaluation
uses purely imaginary arguments.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import specfun
from .errors import DomainError, MmwCoopError
from .specfun import GilPelaezControls

MUS = ("M", "S")
NUS = ("L", "N")


@dataclass(frozen=True)
class LtContext:
    """Immutable bundle of everything the transforms need."""

    channel: object
    pattern: object
    p_tx: float
    lambda_b: float
    d_e: float

    def __post_init__(self):
        if not self.p_tx >= 0:
            raise DomainError(f"transmit power must be non-negative (got {self.p_tx})")
        if not self.lambda_b > 0 or not self.d_e > 0:
            raise DomainError("density and exclusion radius must be positive")

    @classmethod
    def from_geometry(cls, geometry, channel, pattern, p_tx):
        return cls(channel, pattern, p_tx, geometry.lambda_b, geometry.d_e)

    def a(self, mu, nu):
        g = self.pattern.g_m if mu == "M" else self.pattern.g_s
        c = self.channel.c_l if nu == "L" else self.channel.c_n
        return self.p_tx * g * c

    def p_mu(self, mu):
        return self.pattern.p_main if mu == "M" else self.pattern.p_side

    def p_nu(self, nu):
        return self.channel.p_l if nu == "L" else 1.0 - self.channel.p_l

    def alpha(self, nu):
        return self.channel.alpha_l if nu == "L" else self.channel.alpha_n

    def shape(self, nu):
        return self.channel.n_l if nu == "L" else self.channel.n_n

    @property
    def d_los(self):
        return self.channel.d_los


@dataclass(frozen=True)
class RateIntegralControls:
    """Quadrature settings for the rate and exact-outage engines.

    The outer integral over the (m+1)-th neighbour distance is taken in the
    variable x = lambda_b * pi * (r^2 - d_e^2). With ``split_at_los`` the
    x-axis is cut where r crosses the LOS-ball radius (the integrand has a
    kink there): Gauss-Legendre below, shifted Gauss-Laguerre above.
    """

    laguerre_order: int = 32
    legendre_order: int = 24
    split_at_los: bool = True
    outage_laguerre_order: int = 12
    outage_legendre_order: int = 12
    z_rel_floor: float = 1e-10  # lower z cutoff as a fraction of 1/E[T]
    z_noise_cap: float = 50.0  # upper z cutoff in units of 1/N0
    z_panel_width: float = 2.0  # initial panel width in ln z
    z_atol: float = 1e-10
    z_rtol: float = 1e-9
    gil_pelaez: GilPelaezControls = field(
        default_factory=lambda: GilPelaezControls(tail_tol=1e-6, atol=1e-7, max_panels=50_000)
    )


def _as_complex(z):
    return np.asarray(z, dtype=complex)


def fading_lt(n, s):
    """E[exp(-s h)] for h ~ Gamma(n, 1/n)."""
    return (1.0 + s / n) ** (-n)


def _reraise(exc, where):
    raise type(exc)(f"{exc} [in {where}]") from exc


# Radial building blocks -------------------------------------------------------


def _lambda_antiderivative(alpha, n, s, t):
    """G(t) with dG/dt = 2t (1 + s t^-alpha)^-n, normalized so G(t) ~ t^2 as s -> 0."""
    b = n + 2.0 / alpha
    ratio_log = alpha * np.log(t) - np.log(s)  # log(t^alpha / s)
    w = -np.exp(ratio_log)
    f = specfun.hyp2f1(n, b, b + 1.0, w)
    return 2.0 / (alpha * n + 2.0) * t * t * np.exp(n * ratio_log) * f


def lambda_fn(ctx, mu, nu, z, x, y):
    """int_y^x 2t E[exp(-z a_{mu,nu} h t^-alpha_nu)] dt, closed form via 2F1."""
    if not x >= y > 0:
        raise DomainError(f"lambda_fn needs x >= y > 0 (got x={x}, y={y})")
    z = _as_complex(z)
    shape = z.shape
    zf = np.atleast_1d(z).ravel()
    out = np.full(zf.shape, x * x - y * y, dtype=complex)
    if x == y:
        return out.reshape(shape)
    nz = zf != 0
    if np.any(nz):
        alpha, n = ctx.alpha(nu), ctx.shape(nu)
        s = zf[nz] * ctx.a(mu, nu) / n
        try:
            g = _lambda_antiderivative(alpha, n, np.concatenate([s, s]), np.repeat([x, y], len(s)))
        except MmwCoopError as exc:
            _reraise(exc, f"lambda_fn(mu={mu}, nu={nu}, x={x}, y={y})")
        out[nz] = g[: len(s)] - g[len(s):]
    return out.reshape(shape)


_SERIES_W = 1e-2  # below this |w| the closed forms lose digits to 1 - L cancellation
_SERIES_TERMS = 14


def _complement_series(n, s, moment):
    """sum_k (-1)^(k+1) (n)_k / k! * s^k * moment(k), the expansion of
    int 2t (1 - (1 + s t^-alpha)^-n) dt for small s t^-alpha."""
    total = np.zeros_like(s)
    coef = 1.0
    for k in range(1, _SERIES_TERMS + 1):
        coef *= -(n + k - 1) / k
        total = total - coef * s**k * moment(k)
    return total


def theta_fn(ctx, mu, nu, z, lo, hi=None):
    """int_lo^hi 2t (1 - E[exp(-z a h t^-alpha)]) dt; ``hi`` defaults to the LOS-ball radius."""
    hi = ctx.d_los if hi is None else hi
    out = (hi * hi - lo * lo) - lambda_fn(ctx, mu, nu, z, hi, lo)
    if hi <= lo:
        return out
    alpha, n = ctx.alpha(nu), ctx.shape(nu)
    s = _as_complex(z) * ctx.a(mu, nu) / n
    small = np.abs(s) * lo ** (-alpha) < _SERIES_W
    if np.any(small):
        out = np.array(out, dtype=complex)
        out[small] = _complement_series(n, np.asarray(s)[small], lambda k: radial_moment(alpha, lo, hi, k))
    return out


def beta_fn(ctx, mu, x, z):
    """Boundary term of the NLOS tail integral: x^2 (L_h(z a x^-alpha_N) - 1)."""
    z = _as_complex(z)
    n = ctx.channel.n_n
    w = z * ctx.a(mu, "N") * x ** (-ctx.channel.alpha_n) / n
    out = np.array((1.0 + w) ** (-n) - 1.0, dtype=complex)
    small = np.abs(w) < _SERIES_W
    if np.any(small):
        out[small] = -_complement_series(n, w[small], lambda k: 1.0)
    return x * x * out


def xi_fn(ctx, mu, z, x):
    """int_x^inf 2t (1 - E[exp(-z a_{mu,N} h t^-alpha_N)]) dt."""
    if not x > 0:
        raise DomainError("xi_fn needs x > 0")
    alpha, n = ctx.channel.alpha_n, ctx.channel.n_n
    z = _as_complex(z)
    a = ctx.a(mu, "N")
    arg = -z * a / (n * x**alpha)
    try:
        f = specfun.hyp2f1(1.0 - 2.0 / alpha, 1.0 + n, 2.0 - 2.0 / alpha, arg)
    except MmwCoopError as exc:
        _reraise(exc, f"xi_fn(mu={mu}, x={x})")
    out = beta_fn(ctx, mu, x, z) + a * alpha * z * x ** (2.0 - alpha) / (alpha - 2.0) * f
    s = z * a / n
    small = np.abs(s) * x ** (-alpha) < _SERIES_W
    if np.any(small):
        out = np.array(out, dtype=complex)
        out[small] = _complement_series(n, s[small], lambda k: 2.0 * x ** (2.0 - k * alpha) / (k * alpha - 2.0))
    return out


# Means (used for integration windows and the rate integrand's z -> 0 limit) ----


def radial_moment(alpha, lo, hi, k=1):
    """int_lo^hi 2x * x^(-k alpha) dx."""
    if hi <= lo:
        return 0.0
    e = 2.0 - k * alpha
    if abs(e) < 1e-12:
        return 2.0 * math.log(hi / lo)
    return 2.0 * (hi**e - lo**e) / e


def _los_split(ctx, outer):
    """Radius where the LOS region ends inside (d_e, outer]."""
    return max(ctx.d_e, min(outer, ctx.d_los))


def mean_signal_fnc(ctx, m, r):
    """E[T | (m+1)-th neighbour at r]."""
    r1 = _los_split(ctx, r)
    per_bs = sum(ctx.p_nu(nu) * ctx.a("M", nu) * radial_moment(ctx.alpha(nu), ctx.d_e, r1) for nu in NUS)
    per_bs += ctx.a("M", "N") * radial_moment(ctx.channel.alpha_n, r1, r)
    return m * per_bs / (r * r - ctx.d_e**2)


def mean_signal_frc(ctx, d_co):
    r1 = _los_split(ctx, d_co)
    total = sum(ctx.p_nu(nu) * ctx.a("M", nu) * radial_moment(ctx.alpha(nu), ctx.d_e, r1) for nu in NUS)
    total += ctx.a("M", "N") * radial_moment(ctx.channel.alpha_n, r1, d_co)
    return math.pi * ctx.lambda_b * total


def _mean_gain_a(ctx, nu):
    return sum(ctx.p_mu(mu) * ctx.a(mu, nu) for mu in MUS)


def mean_interference_outside(ctx, r):
    """E[I] from BSs beyond radius r."""
    hi = max(r, ctx.d_los)
    total = sum(ctx.p_nu(nu) * _mean_gain_a(ctx, nu) * radial_moment(ctx.alpha(nu), r, hi) for nu in NUS)
    alpha_n = ctx.channel.alpha_n
    total += _mean_gain_a(ctx, "N") * 2.0 * hi ** (2.0 - alpha_n) / (alpha_n - 2.0)
    return math.pi * ctx.lambda_b * total


def mean_interference_fnc(ctx, r):
    if r <= ctx.d_los:
        at_r = sum(ctx.p_nu(nu) * _mean_gain_a(ctx, nu) * r ** (-ctx.alpha(nu)) for nu in NUS)
    else:
        at_r = _mean_gain_a(ctx, "N") * r ** (-ctx.channel.alpha_n)
    return at_r + mean_interference_outside(ctx, r)


# Laplace transforms -------------------------------------------------------------


def _check_radius(ctx, r, name="r"):
    if not r > ctx.d_e:
        raise DomainError(f"{name}={r} must exceed the exclusion radius d_e={ctx.d_e:.6g}")


def signal_complement_fnc(ctx, r, z):
    """1 - L_{T_k|r}(z) for a single cooperating BS."""
    _check_radius(ctx, r)
    r1 = _los_split(ctx, r)
    total = 0.0
    if r1 > ctx.d_e:
        for nu in NUS:
            if ctx.p_nu(nu) > 0:
                total = total + ctx.p_nu(nu) * theta_fn(ctx, "M", nu, z, ctx.d_e, r1)
    if r > r1:
        total = total + theta_fn(ctx, "M", "N", z, r1, r)
    return total / (r * r - ctx.d_e**2)


def lt_signal_fnc(ctx, m, r, z):
    """L_{T|r}(z): transform of the summed power of the m nearest BSs."""
    eps = signal_complement_fnc(ctx, r, z)
    return (1.0 - eps) ** m


def _one_minus_lt_signal_fnc(ctx, m, r, z):
    eps = signal_complement_fnc(ctx, r, z)
    return -np.expm1(m * np.log1p(-eps))


def lt_interference_at_r(ctx, r, z):
    """Transform of the power from the (m+1)-th BS, which sits exactly at r."""
    z = _as_complex(z)
    out = 0.0
    for mu in MUS:
        if r <= ctx.d_los:
            for nu in NUS:
                s = z * ctx.a(mu, nu) * r ** (-ctx.alpha(nu))
                out = out + ctx.p_mu(mu) * ctx.p_nu(nu) * fading_lt(ctx.shape(nu), s)
        else:
            s = z * ctx.a(mu, "N") * r ** (-ctx.channel.alpha_n)
            out = out + ctx.p_mu(mu) * fading_lt(ctx.channel.n_n, s)
    return out


def interference_exponent_outside(ctx, r, z):
    """-log L(z) of the interference from BSs beyond radius r."""
    z = _as_complex(z)
    hi = max(r, ctx.d_los)
    total = 0.0
    for mu in MUS:
        inner = xi_fn(ctx, mu, z, hi)
        if hi > r:
            for nu in NUS:
                if ctx.p_nu(nu) > 0:
                    inner = inner + ctx.p_nu(nu) * theta_fn(ctx, mu, nu, z, r, hi)
        total = total + ctx.p_mu(mu) * inner
    return math.pi * ctx.lambda_b * total


def lt_interference_outside(ctx, r, z):
    return np.exp(-interference_exponent_outside(ctx, r, z))


def lt_interference_fnc(ctx, r, z):
    """L_{I|r}(z): BS at r plus every BS beyond it."""
    _check_radius(ctx, r)
    return lt_interference_at_r(ctx, r, z) * lt_interference_outside(ctx, r, z)


def signal_exponent_frc(ctx, d_co, z):
    """-log L_T(z) for all BSs in the cooperation annulus."""
    _check_radius(ctx, d_co, "d_co")
    r1 = _los_split(ctx, d_co)
    total = 0.0
    if r1 > ctx.d_e:
        for nu in NUS:
            if ctx.p_nu(nu) > 0:
                total = total + ctx.p_nu(nu) * theta_fn(ctx, "M", nu, z, ctx.d_e, r1)
    if d_co > r1:
        total = total + theta_fn(ctx, "M", "N", z, r1, d_co)
    return math.pi * ctx.lambda_b * total


def lt_signal_frc(ctx, d_co, z):
    return np.exp(-signal_exponent_frc(ctx, d_co, z))


def lt_interference_frc(ctx, d_co, z):
    _check_radius(ctx, d_co, "d_co")
    return lt_interference_outside(ctx, d_co, z)


# Rate ----------------------------------------------------------------------------


def _rate_given(one_minus_lt_t, lt_i, mean_t, n0, ctrl):
    """int_0^inf (1 - L_T(z)) L_I(z) exp(-N0 z) dz / z in the variable u = ln z."""
    if mean_t <= 0:
        return 0.0
    z_lo = ctrl.z_rel_floor / mean_t
    z_hi = ctrl.z_noise_cap / n0
    if z_hi <= z_lo:
        # signal is negligible against noise everywhere: first-order expansion
        return mean_t * z_hi
    u_lo, u_hi = math.log(z_lo), math.log(z_hi)
    n_pan = max(2, int(math.ceil((u_hi - u_lo) / ctrl.z_panel_width)))
    edges = np.linspace(u_lo, u_hi, n_pan + 1)

    def integrand(u):
        z = np.exp(u)
        return np.real(one_minus_lt_t(z) * lt_i(z)) * np.exp(-n0 * z)

    val, _ = specfun.adaptive_gauss_legendre(integrand, edges, atol=ctrl.z_atol, rtol=ctrl.z_rtol)
    # below z_lo the integrand is E[T] to first order
    return float(val + mean_t * z_lo)


def rate_given_r(ctx, m, r, n0, ctrl=None):
    """Conditional average rate (nats/s/Hz) given the (m+1)-th neighbour at r."""
    ctrl = ctrl or RateIntegralControls()
    return _rate_given(
        lambda z: _one_minus_lt_signal_fnc(ctx, m, r, z),
        lambda z: lt_interference_fnc(ctx, r, z),
        mean_signal_fnc(ctx, m, r),
        n0,
        ctrl,
    )


def distance_nodes(lambda_b, d_e, d_split, m, order_tail, order_inner, split=True):
    """Radii and weights for E[g(D_{m+1})] over the (m+1)-th neighbour law.

    With ``split`` the rule is cut at radius ``d_split`` (where g has a kink).
    """
    lam_pi = math.pi * lambda_b
    log_fact = math.lgamma(m + 1)
    x_d = lam_pi * (d_split**2 - d_e**2)
    xs, ws = [], []
    # a split far beyond the bulk of the Gamma(m+1) law only wastes Legendre nodes
    if split and 0 < x_d and special.gammaincc(m + 1, x_d) > 1e-15:
        lx, lw = specfun.gauss_legendre(order_inner).mapped(0.0, x_d)
        xs.append(lx)
        ws.append(lw * np.exp(m * np.log(lx) - lx - log_fact))
        rule = specfun.gauss_laguerre(order_tail)
        x = x_d + rule.nodes
        xs.append(x)
        ws.append(rule.weights * np.exp(m * np.log(x) - x_d - log_fact))
    else:
        rule = specfun.gauss_laguerre(order_tail)
        xs.append(rule.nodes)
        ws.append(rule.weights * np.exp(m * np.log(rule.nodes) - log_fact))
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    r = np.sqrt(d_e**2 + x / lam_pi)
    return r, w


def _fsum_weighted(w, vals):
    return math.fsum(float(a) * float(b) for a, b in zip(w, vals))


def avg_rate_fnc(ctx, m, noise, ctrl=None):
    """Average rate (nats/s/Hz) of the edge user served by its m nearest BSs."""
    ctrl = ctrl or RateIntegralControls()
    if m < 1:
        raise DomainError("m must be >= 1")
    if ctx.p_tx == 0:
        return 0.0
    r_nodes, w = distance_nodes(ctx.lambda_b, ctx.d_e, ctx.d_los, m, ctrl.laguerre_order, ctrl.legendre_order, ctrl.split_at_los)
    vals = [rate_given_r(ctx, m, float(r), noise.n0_watts, ctrl) for r in r_nodes]
    return _fsum_weighted(w, vals)


def avg_rate_frc(ctx, d_co, noise, ctrl=None):
    """Average rate (nats/s/Hz) with every BS inside radius d_co cooperating."""
    ctrl = ctrl or RateIntegralControls()
    if d_co <= ctx.d_e or ctx.p_tx == 0:
        return 0.0
    return _rate_given(
        lambda z: -np.expm1(-signal_exponent_frc(ctx, d_co, z)),
        lambda z: lt_interference_frc(ctx, d_co, z),
        mean_signal_frc(ctx, d_co),
        noise.n0_watts,
        ctrl,
    )


# Exact outage ------------------------------------------------------------------


def _gp_controls(base, scale):
    return GilPelaezControls(
        scale=scale,
        tail_tol=base.tail_tol,
        atol=base.atol,
        order=base.order,
        max_doublings=base.max_doublings,
        max_panels=base.max_panels,
        periods_per_panel=base.periods_per_panel,
    )


def outage_given_r(ctx, m, r, n0, tau, ctrl=None):
    """P{SINR <= tau | (m+1)-th neighbour at r}."""
    ctrl = ctrl or RateIntegralControls()
    if not tau > 0:
        raise DomainError("threshold must be positive")

    def char_fn(w):
        return lt_signal_fnc(ctx, m, r, 1j * w) * lt_interference_fnc(ctx, r, -1j * w * tau)

    t = tau * n0
    scale = mean_signal_fnc(ctx, m, r) + tau * mean_interference_fnc(ctx, r) + t
    try:
        return specfun.gil_pelaez_cdf(char_fn, t, _gp_controls(ctrl.gil_pelaez, scale))
    except MmwCoopError as exc:
        _reraise(exc, f"outage_fnc_exact at r={r:.6g} m")


def outage_fnc_exact(ctx, m, noise, tau, ctrl=None):
    """Outage probability with the m nearest BSs cooperating (Gil-Pelaez inversion)."""
    ctrl = ctrl or RateIntegralControls()
    if ctx.p_tx == 0:
        return 1.0
    r_nodes, w = distance_nodes(
        ctx.lambda_b, ctx.d_e, ctx.d_los, m, ctrl.outage_laguerre_order, ctrl.outage_legendre_order, ctrl.split_at_los
    )
    vals = [outage_given_r(ctx, m, float(r), noise.n0_watts, tau, ctrl) for r in r_nodes]
    return float(min(1.0, max(0.0, _fsum_weighted(w, vals))))


def outage_frc_exact(ctx, d_co, noise, tau, ctrl=None):
    """Outage probability with every BS inside d_co cooperating."""
    ctrl = ctrl or RateIntegralControls()
    if not tau > 0:
        raise DomainError("threshold must be positive")
    _check_radius(ctx, d_co, "d_co")

    def char_fn(w):
        return lt_signal_frc(ctx, d_co, 1j * w) * lt_interference_frc(ctx, d_co, -1j * w * tau)

    t = tau * noise.n0_watts
    scale = mean_signal_frc(ctx, d_co) + tau * mean_interference_outside(ctx, d_co) + t
    try:
        return specfun.gil_pelaez_cdf(char_fn, t, _gp_controls(ctrl.gil_pelaez, scale))
    except MmwCoopError as exc:
        _reraise(exc, f"outage_frc_exact at d_co={d_co:.6g} m")
