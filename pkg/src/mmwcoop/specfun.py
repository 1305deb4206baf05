"""
Numerical kernel: Gauss hypergeometric function, regularized incomplete
gamma, Gauss quadrature rules, adaptive Gauss-Legendre integration and
Gil-Pelaez inversion of characteristic functions.

The hypergeometric function takes real parameters and a real or complex
argument (scalar or array). The principal branch is used throughout with
the cut on [1, inf). Evaluation regions:

    |z| <= 0.8                 Maclaurin series
    |z/(z-1)| <= 0.8           Pfaff transformation
    |z| >= 1.25                1/z transformation (log form when b-a is an integer)
    elsewhere                  Taylor continuation of the hypergeometric ODE
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError, TruncationWarning

MAX_TERMS = 10_000

_EPS = np.finfo(float).eps
_SERIES_RADIUS = 0.8
_GAUSS_MAX_ORDER = 256


def _is_nonpos_int(x):
    return x <= 0 and float(x).is_integer()


def _is_int(x):
    return float(x).is_integer()


# Hypergeometric function ----------------------------------------------------


def _maclaurin(a, b, c, z):
    """Direct power series; caller guarantees |z| < 1 (or termination)."""
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(MAX_TERMS):
        coef = (a + n) * (b + n) / ((c + n) * (n + 1))
        if coef == 0.0:
            return total
        term = term * (coef * z)
        total = total + term
        if np.all(np.abs(term) <= _EPS * np.abs(total)):
            return total
    raise NumericalError(
        f"2F1 series did not converge in {MAX_TERMS} terms "
        f"(a={a}, b={b}, c={c}, max|z|={np.max(np.abs(z)):.3g})"
    )


def _polynomial(a, b, c, z):
    """Terminating case: a is a non-positive integer."""
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(int(-a)):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1)) * z)
        total = total + term
    return total


def _log_neg(z, side):
    """log(-z) on the principal branch; ``side`` resolves points on the cut."""
    out = np.log(-z)
    on_cut = (z.imag == 0) & (z.real > 1)
    if np.any(on_cut):
        out = np.where(on_cut, np.log(z.real) - 1j * np.pi * side, out)
    return out


def _inverse_nondegenerate(a, b, c, z, side):
    w = 1.0 / z
    log_mz = _log_neg(z, side)
    g1 = special.gamma(c) * special.gamma(b - a) * special.rgamma(b) * special.rgamma(c - a)
    g2 = special.gamma(c) * special.gamma(a - b) * special.rgamma(a) * special.rgamma(c - b)
    out = np.zeros_like(z)
    if g1 != 0.0:
        out = out + g1 * np.exp(-a * log_mz) * _maclaurin(a, a - c + 1, a - b + 1, w)
    if g2 != 0.0:
        out = out + g2 * np.exp(-b * log_mz) * _maclaurin(b, b - c + 1, b - a + 1, w)
    return out


def _psi_over_gamma(x):
    """psi(x)/Gamma(x), continued through the poles of Gamma."""
    if _is_nonpos_int(x):
        j = int(-x)
        return (-1.0) ** (j + 1) * math.factorial(j)
    return special.psi(x) * special.rgamma(x)


def _inverse_degenerate(a, m, c, z, side):
    """1/z expansion for b = a + m with m a non-negative integer."""
    w = 1.0 / z
    log_mz = _log_neg(z, side)
    finite = np.zeros_like(z)
    wk = np.ones_like(z)
    for k in range(m):
        coef = special.poch(a, k) * math.factorial(m - k - 1) / math.factorial(k)
        finite = finite + coef * special.rgamma(c - a - k) * wk
        wk = wk * w
    series = np.zeros_like(z)
    wk = w**m
    ak = 1.0 / math.factorial(m)  # (a+m)_k (-1)^k / (k! (k+m)!)
    for k in range(MAX_TERMS):
        x = c - a - k - m
        rg = special.rgamma(x)
        digammas = special.psi(1 + m + k) + special.psi(1 + k) - special.psi(a + m + k)
        term = wk * ak * (rg * (log_mz + digammas) - _psi_over_gamma(x))
        series = series + term
        if k > 2 and np.all(np.abs(term) <= _EPS * np.abs(series)):
            break
        ak *= -(a + m + k) / ((k + 1) * (k + 1 + m))
        wk = wk * w
    else:
        raise NumericalError(f"2F1 log-case expansion did not converge (a={a}, m={m}, c={c})")
    pref = special.gamma(c) * np.exp(-a * log_mz)
    return pref * (finite * special.rgamma(a + m) + series * special.rgamma(a))


def _inverse(a, b, c, z, side):
    if b < a:
        a, b = b, a
    diff = b - a
    if abs(diff - round(diff)) < 1e-13:
        return _inverse_degenerate(a, int(round(diff)), c, z, side)
    return _inverse_nondegenerate(a, b, c, z, side)


def _taylor_step(a, b, c, z0, f0, f1, h):
    """Advance (f, f') from z0 to z0 + h using the ODE's Taylor recurrence."""
    p0 = z0 * (1 - z0)
    p1 = 1 - 2 * z0
    q0 = c - (a + b + 1) * z0
    q1 = -(a + b + 1)
    r0 = -a * b
    cm, cn = f0, f1  # c_n, c_{n+1}
    val = f0 + f1 * h
    der = f1
    hn = h  # h^(n+1)
    for n in range(MAX_TERMS):
        cnext = -((p1 * n + q0) * (n + 1) * cn + (-n * (n - 1) + q1 * n + r0) * cm) / (
            p0 * (n + 2) * (n + 1)
        )
        der += (n + 2) * cnext * hn
        hn *= h
        term = cnext * hn
        val += term
        if n > 4 and abs(term) <= _EPS * abs(val) and abs(cnext * hn) <= _EPS * abs(der * h):
            return val, der
        cm, cn = cn, cnext
    raise NumericalError("2F1 ODE continuation did not converge")


def _continuation(a, b, c, z):
    """Integrate the hypergeometric ODE along a ray from |z0| = 0.5 to z."""
    z0 = 0.5 * z / abs(z)
    f0 = complex(_maclaurin(a, b, c, np.array([z0]))[0])
    f1 = complex(a * b / c * _maclaurin(a + 1, b + 1, c + 1, np.array([z0]))[0])
    for _ in range(MAX_TERMS):
        remaining = z - z0
        if remaining == 0:
            return f0
        hmax = 0.5 * min(abs(z0), abs(1 - z0))
        h = remaining if abs(remaining) <= hmax else remaining / abs(remaining) * hmax
        f0, f1 = _taylor_step(a, b, c, z0, f0, f1, h)
        z0 = z0 + h
    raise NumericalError("2F1 ODE continuation took too many steps")


def hyp2f1(a, b, c, z, cut="raise"):
    """Gauss hypergeometric function 2F1(a, b; c; z).

    Parameters
    ----------
    a, b, c : float
        Real parameters. ``c`` must not be a non-positive integer unless the
        series terminates first.
    z : complex or array_like
        Argument(s). Points on the cut (1, inf) raise :class:`DomainError`
        unless ``cut`` is ``"above"`` or ``"below"``, which select the limit
        from that side.

    Returns
    -------
    complex or ndarray of complex
    """
    a, b, c = float(a), float(b), float(c)
    if cut not in ("raise", "above", "below"):
        raise ValueError(f"unknown cut convention {cut!r}")
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if not np.all(np.isfinite(zz)):
        raise DomainError("2F1 argument must be finite")

    if _is_nonpos_int(b) and not (_is_nonpos_int(a) and a > b):
        a, b = b, a
    terminating = _is_nonpos_int(a)
    if _is_nonpos_int(c) and not (terminating and a > c):
        raise DomainError(f"2F1 has a pole at c={c}")
    if terminating:
        out = _polynomial(a, b, c, zz)
        return complex(out[0]) if scalar else out

    on_cut = (zz.imag == 0) & (zz.real >= 1)
    if np.any(on_cut):
        if np.any(zz[on_cut].real == 1):
            if c - a - b <= 0:
                raise DomainError("2F1 diverges at z=1 when c-a-b <= 0")
        if cut == "raise" and np.any(zz[on_cut].real > 1):
            raise DomainError("2F1 argument on the branch cut (1, inf)")
    side = 1.0 if cut != "below" else -1.0

    out = np.empty_like(zz)
    absz = np.abs(zz)
    done = np.zeros(zz.shape, dtype=bool)

    unit = zz == 1
    if np.any(unit):
        out[unit] = special.gamma(c) * special.gamma(c - a - b) * special.rgamma(c - a) * special.rgamma(c - b)
        done |= unit

    m0 = ~done & (absz <= _SERIES_RADIUS)
    if np.any(m0):
        out[m0] = _maclaurin(a, b, c, zz[m0])
        done |= m0

    with np.errstate(divide="ignore", invalid="ignore"):
        u = zz / (zz - 1)
    m1 = ~done & (np.abs(u) <= _SERIES_RADIUS)
    if np.any(m1):
        out[m1] = (1 - zz[m1]) ** (-a) * _maclaurin(a, c - b, c, u[m1])
        done |= m1

    m2 = ~done & (absz >= 1.0 / _SERIES_RADIUS)
    if np.any(m2):
        out[m2] = _inverse(a, b, c, zz[m2], side)
        done |= m2

    for idx in np.flatnonzero(~done):
        out.flat[idx] = _continuation(a, b, c, complex(zz.flat[idx]))

    return complex(out[0]) if scalar else out


# Incomplete gamma -------------------------------------------------------------


def reg_lower_gamma(k, x):
    """Regularized lower incomplete gamma P(k, x) = gamma(k, x) / Gamma(k)."""
    k_arr = np.asarray(k, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(k_arr)) or np.any(k_arr <= 0):
        raise DomainError("reg_lower_gamma needs shape k > 0")
    if np.any(np.isnan(x_arr)) or np.any(x_arr < 0):
        raise DomainError("reg_lower_gamma needs x >= 0")
    out = special.gammainc(k_arr, x_arr)
    return float(out) if np.ndim(out) == 0 else out


# Quadrature rules -------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a Gauss rule.

    ``gauss-laguerre`` integrates against exp(-x) on (0, inf);
    ``gauss-legendre`` integrates on [-1, 1].
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("gauss-laguerre", "gauss-legendre"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be strictly positive")

    def __len__(self):
        return len(self.nodes)

    def mapped(self, lo, hi):
        """Legendre nodes and weights mapped onto [lo, hi]."""
        if self.kind != "gauss-legendre":
            raise ValueError("only Legendre rules can be mapped to an interval")
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights


def _check_order(n):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise DomainError(f"quadrature order must be an integer, got {n!r}")
    if not 1 <= n <= _GAUSS_MAX_ORDER:
        raise DomainError(f"quadrature order must be in [1, {_GAUSS_MAX_ORDER}], got {n}")


_RULE_CACHE = {}


def gauss_laguerre(n):
    """n-point Gauss-Laguerre rule for the weight exp(-x).

    For large ``n`` the outermost weights drop below the smallest positive
    double; those nodes are omitted since they cannot contribute.
    """
    _check_order(n)
    key = ("gauss-laguerre", int(n))
    if key not in _RULE_CACHE:
        x, w = np.polynomial.laguerre.laggauss(int(n))
        keep = w > 0
        _RULE_CACHE[key] = QuadratureRule(x[keep], w[keep], "gauss-laguerre")
    return _RULE_CACHE[key]


def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [-1, 1]."""
    _check_order(n)
    key = ("gauss-legendre", int(n))
    if key not in _RULE_CACHE:
        x, w = np.polynomial.legendre.leggauss(int(n))
        _RULE_CACHE[key] = QuadratureRule(x, w, "gauss-legendre")
    return _RULE_CACHE[key]


def _panel_sums(f, lo, hi, rule):
    """Gauss-Legendre estimate on each panel [lo_i, hi_i]; one vectorized call to f."""
    half = 0.5 * (hi - lo)
    x = lo[:, None] + half[:, None] * (rule.nodes[None, :] + 1.0)
    vals = np.asarray(f(x.ravel())).reshape(x.shape)
    return half * (vals @ rule.weights)


def adaptive_gauss_legendre(f, edges, *, order=32, atol=1e-12, rtol=1e-10, max_panels=20_000):
    """Integrate ``f`` over consecutive panels with bisection refinement.

    ``f`` must accept a 1-D array of abscissae and return values of the same
    shape (real or complex). ``edges`` is an increasing sequence of panel
    boundaries. Each panel's error is estimated by comparing its rule with
    the rule applied to its two halves; panels are halved until the total
    estimated error is below ``max(atol, rtol * |integral|)``.

    Returns
    -------
    value, error_estimate
    """
    rule = gauss_legendre(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    whole = _panel_sums(f, lo, hi, rule)
    left = _panel_sums(f, lo, mid, rule)
    right = _panel_sums(f, mid, hi, rule)
    done_val = 0.0
    done_err = 0.0
    while True:
        est = left + right
        err = np.abs(whole - est)
        total = done_val + np.sum(est)
        tol = max(atol, rtol * abs(total))
        total_err = done_err + np.sum(err)
        if total_err <= tol:
            return total, total_err
        # panels carrying more than their share of the tolerance are split
        share = tol / (len(lo) + 1)
        split = err > share
        keep = ~split
        done_val += np.sum(est[keep])
        done_err += np.sum(err[keep])
        n_new = 2 * int(np.count_nonzero(split))
        if n_new == 0:
            return total, total_err
        if n_new > max_panels:
            raise NumericalError(
                f"adaptive quadrature needs more than {max_panels} panels "
                f"(error {total_err:.3g} > tol {tol:.3g})"
            )
        lo_s, mid_s, hi_s = lo[split], mid[split], hi[split]
        lo = np.concatenate([lo_s, mid_s])
        hi = np.concatenate([mid_s, hi_s])
        whole = np.concatenate([left[split], right[split]])
        mid = 0.5 * (lo + hi)
        left = _panel_sums(f, lo, mid, rule)
        right = _panel_sums(f, mid, hi, rule)


# Gil-Pelaez inversion ---------------------------------------------------------


@dataclass(frozen=True)
class GilPelaezControls:
    """Integration controls for :func:`gil_pelaez_cdf`.

    scale : largest characteristic magnitude of X (same units as t). The
        first frequency panel is [0, 1/scale] and later panels double in
        width, so features of phi at frequencies below 1/scale are only
        resolved by adaptive refinement. Defaults to |t|, or 1 when t = 0.
    tail_tol : truncation point is the first doubling where the tail bound
        |phi(w)| * min(1, 1 / (w |t|)) falls below tail_tol.
    """

    scale: Optional[float] = None
    tail_tol: float = 1e-10
    atol: float = 1e-9
    order: int = 32
    max_doublings: int = 80
    max_panels: int = 20_000
    periods_per_panel: float = 4.0


def _fourier_tail(c, omega, t):
    """(1/pi) Im{ c * int_omega^inf exp(j w t) dw / w } for constant c."""
    if t == 0:
        if c.imag == 0:
            return 0.0
        raise NumericalError("Gil-Pelaez tail diverges: constant complex CF at t = 0")
    si, ci = special.sici(omega * abs(t))
    integral = complex(-ci, math.copysign(1.0, t) * (0.5 * math.pi - si))
    return (c * integral).imag / math.pi


def gil_pelaez_cdf(char_fn: Callable, t: float, ctrl: Optional[GilPelaezControls] = None, convention="laplace"):
    """CDF of X at t from its characteristic function.

    With ``convention="laplace"`` (the default) ``char_fn(w)`` must return
    the Laplace transform evaluated at jw, E[exp(-j w X)], and

        F(t) = 1/2 + (1/pi) int_0^inf Im{exp(j w t) char_fn(w)} / w dw.

    ``convention="fourier"`` accepts the usual E[exp(+j w X)] instead.
    ``char_fn`` is called with 1-D arrays of w > 0.

    Raises NumericalError when the oscillatory integral cannot be resolved
    within ``ctrl.max_panels``; warns with TruncationWarning when the
    characteristic function has not decayed at the largest frequency tried.
    """
    ctrl = ctrl or GilPelaezControls()
    if convention == "laplace":
        phi = char_fn
    elif convention == "fourier":
        def phi(w):
            return np.conj(char_fn(w))
    else:
        raise ValueError(f"unknown convention {convention!r}")
    t = float(t)
    scale = ctrl.scale if ctrl.scale else (abs(t) if t != 0 else 1.0)
    w1 = 1.0 / scale

    # truncation point: double until the CF has decayed, or has settled to a
    # constant (an atom at zero) whose tail is known in closed form
    omega = w1
    prev = None
    steady = 0
    const_tail = None
    decayed = False
    for _ in range(ctrl.max_doublings):
        val = complex(np.asarray(phi(np.array([omega])))[0])
        tail = abs(val) * min(1.0, 1.0 / (omega * abs(t))) if t != 0 else abs(val)
        if tail < ctrl.tail_tol:
            decayed = True
            break
        if prev is not None and abs(val - prev) <= 1e-13 * max(abs(val), 1e-300):
            steady += 1
            if steady >= 4:
                const_tail = val
                break
        else:
            steady = 0
        prev = val
        omega *= 2.0
    if not decayed and const_tail is None:
        warnings.warn(
            TruncationWarning(
                f"characteristic function not decayed at w={omega:.3g} (|phi|={abs(val):.3g})",
                tail_estimate=abs(val),
            ),
            stacklevel=2,
        )
    omega_max = omega

    edges = [0.0, w1]
    while edges[-1] < omega_max:
        edges.append(min(edges[-1] * 2.0, omega_max))
    if t != 0:
        period = 2.0 * math.pi / abs(t)
        fine = [edges[0]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            n_sub = max(1, int(math.ceil((hi - lo) / (ctrl.periods_per_panel * period))))
            if len(fine) + n_sub > ctrl.max_panels:
                raise NumericalError(
                    f"Gil-Pelaez integral needs more than {ctrl.max_panels} panels up to w={omega_max:.3g}"
                )
            fine.extend(np.linspace(lo, hi, n_sub + 1)[1:])
        edges = fine

    def integrand(w):
        return (np.exp(1j * w * t) * phi(w)).imag / w

    value, _ = adaptive_gauss_legendre(
        integrand, edges, order=ctrl.order, atol=ctrl.atol * math.pi, rtol=0.0, max_panels=ctrl.max_panels
    )
    cdf = 0.5 + value / math.pi
    if const_tail is not None:
        cdf += _fourier_tail(const_tail, omega_max, t)
    return float(min(1.0, max(0.0, cdf)))
