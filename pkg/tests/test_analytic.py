import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mmwcoop import analytic
from mmwcoop.analytic import LtContext, RateIntegralControls
from mmwcoop.config import default_scenario
from mmwcoop.errors import DomainError
from mmwcoop.geometry import CoopScheme, NetworkGeometry, pdf_dm1
from mmwcoop.montecarlo import estimate_outage, estimate_rate


def _ctx(rho=90.0, **channel):
    sc = default_scenario(geometry=NetworkGeometry.from_rho(rho))
    if channel:
        from dataclasses import replace

        sc = replace(sc, channel=replace(sc.channel, **channel))
    return sc, LtContext.from_geometry(sc.geometry, sc.channel, sc.pattern, sc.p_tx)


def _cquad(f, lo, hi, **kw):
    """Complex integral by real quadrature of each part."""
    opts = dict(limit=400, epsabs=0.0, epsrel=1e-12)
    opts.update(kw)
    re, _ = integrate.quad(lambda t: f(t).real, lo, hi, **opts)
    im, _ = integrate.quad(lambda t: f(t).imag, lo, hi, **opts)
    return complex(re, im)


def _mpquad(f, lo, hi=mpmath.inf):
    """Extended-precision oracle for the defining integrals."""
    with mpmath.workdps(30):
        return complex(mpmath.quad(f, [lo, hi]))


def _mp_lt(ctx, mu, nu, z, t):
    n = ctx.shape(nu)
    return (1 + mpmath.mpc(z) * ctx.a(mu, nu) * t ** (-ctx.alpha(nu)) / n) ** (-n)


def _rel(got, want):
    return abs(complex(got) - want) / max(abs(want), 1e-300)


def _random_points(n, seed):
    """(mu, nu, z, x, y) with z spread over real, imaginary and general right-half-plane values."""
    rng = np.random.default_rng(seed)
    pts = []
    for i in range(n):
        mu = ("M", "S")[i % 2]
        nu = ("L", "N")[(i // 2) % 2]
        mag = 10 ** rng.uniform(5, 14)
        kind = i % 3
        phase = (0.0, math.pi / 2, rng.uniform(-math.pi / 2, math.pi / 2))[kind] * (1 if rng.random() < 0.5 else -1)
        z = mag * complex(math.cos(phase), math.sin(phase))
        y = rng.uniform(40, 600)
        x = y + rng.uniform(1, 1500)
        pts.append((mu, nu, z, x, y))
    return pts


def _lt(ctx, mu, nu, z, t):
    n = ctx.shape(nu)
    return (1 + z * ctx.a(mu, nu) * t ** (-ctx.alpha(nu)) / n) ** (-n)


ORACLE_POINTS = _random_points(100, 2024)


@pytest.fixture(scope="module")
def ctx():
    return _ctx(90.0, n_l=4.0)[1]


def test_lambda_matches_quadrature(ctx):
    worst = 0.0
    for mu, nu, z, x, y in ORACLE_POINTS:
        want = _mpquad(lambda t: 2 * t * _mp_lt(ctx, mu, nu, z, t), y, x)
        worst = max(worst, _rel(analytic.lambda_fn(ctx, mu, nu, z, x, y), want))
    assert worst < 1e-7


def test_lambda_antiderivative_derivative(ctx):
    # the closed-form antiderivative differentiates back to 2t (1 + s t^-alpha)^-n
    worst = 0.0
    for mu, nu, z, x, _ in ORACLE_POINTS:
        alpha, n = ctx.alpha(nu), ctx.shape(nu)
        s = np.array([z * ctx.a(mu, nu) / n])
        h = 1e-5 * x
        g = [analytic._lambda_antiderivative(alpha, n, s, np.array([x + d]))[0] for d in (-h, h)]
        slope = (g[1] - g[0]) / (2 * h)
        want = 2 * x * (1 + s[0] * x ** (-alpha)) ** (-n)
        worst = max(worst, _rel(slope, want))
    assert worst < 1e-6  # central-difference truncation dominates


def test_delta_difference_matches_quadrature(ctx):
    # the antiderivative's increment is the defining integral of Lambda's integrand
    worst = 0.0
    for mu, nu, z, x, y in ORACLE_POINTS:
        alpha, n = ctx.alpha(nu), ctx.shape(nu)
        s = np.array([z * ctx.a(mu, nu) / n])
        g = analytic._lambda_antiderivative(alpha, n, s, np.array([y, x]))
        want = _mpquad(lambda t: 2 * t * _mp_lt(ctx, mu, nu, z, t), y, x)
        worst = max(worst, _rel(g[1] - g[0], want))
    assert worst < 1e-7


def test_theta_matches_quadrature(ctx):
    worst = 0.0
    for mu, nu, z, x, y in ORACLE_POINTS:
        want = _mpquad(lambda t: 2 * t * (1 - _mp_lt(ctx, mu, nu, z, t)), y, x)
        worst = max(worst, _rel(analytic.theta_fn(ctx, mu, nu, z, y, x), want))
    assert worst < 1e-7


def test_xi_matches_quadrature(ctx):
    worst = 0.0
    for mu, _, z, x, _ in ORACLE_POINTS:
        want = _mpquad(lambda t: 2 * t * (1 - _mp_lt(ctx, mu, "N", z, t)), x)
        worst = max(worst, _rel(analytic.xi_fn(ctx, mu, z, x), want))
    assert worst < 1e-7


def test_beta_matches_boundary_integral(ctx):
    # beta(x) = -int_x^inf d/dt [t^2 (L(z a t^-alpha) - 1)] dt
    alpha, n = ctx.channel.alpha_n, ctx.channel.n_n
    worst = 0.0
    for mu, _, z, x, _ in ORACLE_POINTS:
        a = ctx.a(mu, "N")

        def deriv(t):
            s = mpmath.mpc(z) * a * t ** (-alpha)
            lt = (1 + s / n) ** (-n)
            dlt_ds = -((1 + s / n) ** (-n - 1))
            return 2 * t * (lt - 1) + t * t * dlt_ds * (-alpha * s / t)

        want = -_mpquad(deriv, x)
        worst = max(worst, _rel(analytic.beta_fn(ctx, mu, x, z), want))
    assert worst < 1e-7


def test_transforms_equal_one_at_zero(ctx):
    r = 150.0
    assert analytic.lambda_fn(ctx, "M", "L", 0.0, 300.0, 100.0) == pytest.approx(300.0**2 - 100.0**2)
    assert analytic.theta_fn(ctx, "M", "L", 0.0, 100.0, 300.0) == 0
    assert analytic.xi_fn(ctx, "S", 0.0, 300.0) == 0
    assert analytic.lt_signal_fnc(ctx, 3, r, 0.0) == 1
    assert analytic.lt_interference_fnc(ctx, r, 0.0) == 1
    assert analytic.lt_signal_frc(ctx, 200.0, 0.0) == 1
    assert analytic.lt_interference_frc(ctx, 200.0, 0.0) == 1


@settings(max_examples=50, deadline=None)
@given(w=st.floats(1e3, 1e14), r=st.floats(91.0, 900.0), m=st.integers(1, 6))
def test_characteristic_functions_bounded(w, r, m):
    _, c = _ctx(90.0)
    for val in (
        analytic.lt_signal_fnc(c, m, r, 1j * w),
        analytic.lt_interference_fnc(c, r, -1j * w),
        analytic.lt_signal_frc(c, r, 1j * w),
        analytic.lt_interference_frc(c, r, -1j * w),
    ):
        assert abs(val) <= 1 + 1e-12


def test_signal_lt_matches_distance_average(ctx):
    # a single cooperator's distance has density 2x/(r^2 - d_e^2) on (d_e, r]
    r, z = 260.0, 3e9 + 2e9j
    d_e = ctx.d_e

    def per_bs(x):
        if x <= ctx.d_los:
            lt = sum(ctx.p_nu(nu) * _lt(ctx, "M", nu, z, x) for nu in ("L", "N"))
        else:
            lt = _lt(ctx, "M", "N", z, x)
        return lt * 2 * x / (r * r - d_e**2)

    want = _cquad(per_bs, d_e, r, points=[ctx.d_los]) ** 3
    assert _rel(analytic.lt_signal_fnc(ctx, 3, r, z), want) < 1e-9


def test_interference_lt_matches_pgfl(ctx):
    # PGFL of the interferers beyond r, integrated directly
    r, z = 140.0, 5e10j

    def density(t):
        total = 0.0
        for mu in ("M", "S"):
            if t <= ctx.d_los:
                lt = sum(ctx.p_nu(nu) * _lt(ctx, mu, nu, z, t) for nu in ("L", "N"))
            else:
                lt = _lt(ctx, mu, "N", z, t)
            total += ctx.p_mu(mu) * (1 - lt)
        return 2 * math.pi * ctx.lambda_b * t * total

    near = _mpquad(density, r, ctx.d_los)
    far = _mpquad(density, ctx.d_los)
    want = np.exp(-(near + far))
    assert _rel(analytic.lt_interference_outside(ctx, r, z), want) < 1e-9


def test_means_match_transform_slope(ctx):
    h = 1e-3
    for r in (120.0, 400.0):
        for name, lt, mean in (
            ("signal", lambda z: analytic.lt_signal_fnc(ctx, 3, r, z), analytic.mean_signal_fnc(ctx, 3, r)),
            ("interference", lambda z: analytic.lt_interference_fnc(ctx, r, z), analytic.mean_interference_fnc(ctx, r)),
        ):
            scale = 1.0 / mean
            slope = -(lt(h * scale) - lt(-h * scale)).real / (2 * h * scale)
            assert slope == pytest.approx(mean, rel=1e-5), name
    d_co = 250.0
    scale = 1.0 / analytic.mean_signal_frc(ctx, d_co)
    slope = -(analytic.lt_signal_frc(ctx, d_co, h * scale) - analytic.lt_signal_frc(ctx, d_co, -h * scale)).real
    assert slope / (2 * h * scale) == pytest.approx(analytic.mean_signal_frc(ctx, d_co), rel=1e-5)


def test_radius_checks(ctx):
    with pytest.raises(DomainError):
        analytic.lt_signal_fnc(ctx, 2, ctx.d_e, 1.0)
    with pytest.raises(DomainError):
        analytic.lambda_fn(ctx, "M", "L", 1.0, 10.0, 20.0)


def test_distance_nodes_integrate_the_law():
    geo = NetworkGeometry.from_rho(90.0)
    for m in (1, 3, 5):
        for split in (True, False):
            r, w = analytic.distance_nodes(geo.lambda_b, geo.d_e, 205.0, m, 32, 24, split)
            assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
            mean_x = math.fsum(w * geo.area_measure(r))
            assert mean_x == pytest.approx(m + 1, rel=1e-12)
    # the split rule handles the kink at the LOS-ball radius
    r, w = analytic.distance_nodes(geo.lambda_b, geo.d_e, 205.0, 2, 32, 24, True)
    want, _ = integrate.quad(lambda x: pdf_dm1(geo, 2, x), geo.d_e, 205.0)
    assert math.fsum(w[r <= 205.0]) == pytest.approx(want, abs=1e-12)


# Rate ------------------------------------------------------------------------------


def test_rate_zero_power():
    sc, c = _ctx(90.0)
    from dataclasses import replace

    c0 = replace(c, p_tx=0.0)
    assert analytic.avg_rate_fnc(c0, 3, sc.noise) == 0.0


def test_rate_doubled_orders_agree():
    sc, c = _ctx(90.0)
    base = analytic.avg_rate_fnc(c, 3, sc.noise)
    fine = analytic.avg_rate_fnc(c, 3, sc.noise, RateIntegralControls(laguerre_order=64, legendre_order=48))
    assert fine == pytest.approx(base, abs=1e-4)


def test_rate_increases_with_cooperation():
    sc, c = _ctx(70.0)
    rates = [analytic.avg_rate_fnc(c, m, sc.noise) for m in (1, 2, 4)]
    assert rates[0] < rates[1] < rates[2]


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["fnc", "frc"])
def test_rate_matches_simulation(kind):
    from dataclasses import replace

    sc, c = _ctx(110.0)
    if kind == "fnc":
        sc = replace(sc, scheme=CoopScheme.fnc(2))
        want = analytic.avg_rate_fnc(c, 2, sc.noise)
    else:
        d_co = sc.geometry.d_co_for_mean(2.0)
        sc = replace(sc, scheme=CoopScheme.frc(d_co))
        want = analytic.avg_rate_frc(c, d_co, sc.noise)
    sim = estimate_rate(sc, 10_000, rng=5)
    assert abs(sim.value - want) <= 3 * sim.stderr


# Outage -------------------------------------------------------------------------


def test_outage_given_r_doubled_controls():
    sc, c = _ctx(90.0, p_l=0.2)
    n0 = sc.noise.n0_watts
    for tau in (0.3, 10.0):
        base = analytic.outage_given_r(c, 3, 220.0, n0, tau)
        tight = RateIntegralControls(
            gil_pelaez=analytic.GilPelaezControls(tail_tol=1e-9, atol=1e-10, order=64, max_panels=100_000)
        )
        assert analytic.outage_given_r(c, 3, 220.0, n0, tau, tight) == pytest.approx(base, abs=1e-5)


def test_frc_outage_monotone_and_bounded():
    sc, c = _ctx(90.0, p_l=0.2)
    d_co = sc.geometry.d_co_for_mean(3.0)
    vals = [analytic.outage_frc_exact(c, d_co, sc.noise, 10 ** (t / 10)) for t in (-10, 0, 10, 20)]
    assert all(0 <= v <= 1 for v in vals)
    assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))


def test_frc_outage_low_threshold_floor():
    sc, c = _ctx(90.0, p_l=0.2)
    d_co = sc.geometry.d_co_for_mean(3.0)
    # only the empty-region atom remains once tau is far below any single-link SNR
    assert analytic.outage_frc_exact(c, d_co, sc.noise, 1e-6) == pytest.approx(math.exp(-3), abs=1e-3)


@pytest.mark.slow
def test_rate_outage_consistency():
    # E[ln(1 + SINR)] = int_0^inf P{SINR > e^u - 1} du
    sc, c = _ctx(130.0)
    d_co = sc.geometry.d_co_for_mean(1.5)
    rate = analytic.avg_rate_frc(c, d_co, sc.noise)
    u_hi = 8.0
    x, w = analytic.specfun.gauss_legendre(24).mapped(0.0, u_hi)
    ccdf = [1 - analytic.outage_frc_exact(c, d_co, sc.noise, math.expm1(u)) for u in x]
    assert math.fsum(w * np.array(ccdf)) == pytest.approx(rate, abs=2e-3)


@pytest.mark.slow
def test_fnc_outage_matches_simulation_smoke():
    from dataclasses import replace

    sc, c = _ctx(90.0, p_l=0.2)
    sc = replace(sc, scheme=CoopScheme.fnc(2))
    taus = [0.3, 10.0]
    ctrl = RateIntegralControls(outage_laguerre_order=8, outage_legendre_order=8)
    want = [analytic.outage_fnc_exact(c, 2, sc.noise, t, ctrl) for t in taus]
    sims = estimate_outage(sc, np.array(taus), 10_000, rng=9)
    for w_, s in zip(want, sims):
        assert abs(s.value - w_) <= 0.01 + 3 * s.stderr
