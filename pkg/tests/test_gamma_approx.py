import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from mmwcoop import gamma_approx as ga
from mmwcoop.config import default_scenario
from mmwcoop.errors import DomainError
from mmwcoop.geometry import CoopScheme, NetworkGeometry
from mmwcoop.montecarlo import estimate_outage


def _scenario(rho=90.0, **channel):
    sc = default_scenario(geometry=NetworkGeometry.from_rho(rho))
    return replace(sc, channel=replace(sc.channel, **channel))


def _signal_split(sc, n_trials, seed, select, r_max):
    """Oracle sampler: per-trial LOS and NLOS cooperative powers, interference ignored.

    BSs are drawn only out to ``r_max``, which must cover every cooperator;
    ``select(r, rank)`` marks the cooperating BSs.
    """
    geo, ch, pat = sc.geometry, sc.channel, sc.pattern
    rng = np.random.default_rng(seed)
    mean = geo.lambda_b * math.pi * (r_max**2 - geo.d_e**2)
    a = sc.p_tx * pat.g_m
    los_parts, nlos_parts = [], []
    for size in [100_000] * (n_trials // 100_000) + [n_trials % 100_000]:
        counts = rng.poisson(mean, size)
        trial = np.repeat(np.arange(size), counts)
        r = np.sqrt(geo.d_e**2 + rng.random(len(trial)) * (r_max**2 - geo.d_e**2))
        order = np.lexsort((r, trial))
        r = r[order]
        rank = np.arange(len(r)) - np.repeat(np.cumsum(counts) - counts, counts)
        c = select(r, rank)
        r, trial = r[c], trial[c]
        los = (r <= ch.d_los) & (rng.random(len(r)) < ch.p_l)
        h = np.where(los, rng.gamma(ch.n_l, 1 / ch.n_l, len(r)), rng.gamma(ch.n_n, 1 / ch.n_n, len(r)))
        p = np.where(los, a * ch.c_l * r ** -ch.alpha_l, a * ch.c_n * r ** -ch.alpha_n) * h
        los_parts.append(np.bincount(trial[los], p[los], minlength=size))
        nlos_parts.append(np.bincount(trial[~los], p[~los], minlength=size))
    return np.concatenate(los_parts), np.concatenate(nlos_parts)


@pytest.fixture(scope="module")
def fnc_split():
    sc = _scenario(rho=70.0, n_l=4.0, p_l=0.2)
    # 400 m holds >= 3 BSs except with probability ~1e-11
    return sc, _signal_split(sc, 600_000, 11, lambda r, rank: rank < 3, 400.0)


@pytest.fixture(scope="module")
def frc_split():
    sc = _scenario(rho=70.0, n_l=4.0, p_l=0.2)
    d_co = sc.geometry.d_co_for_mean(3.0)
    return sc, d_co, _signal_split(sc, 600_000, 12, lambda r, rank: r <= d_co, d_co)


def test_fnc_all_nlos_probability(fnc_split):
    sc, (lp, _) = fnc_split
    mc = np.mean(lp == 0)
    pnl = ga.p_nl(sc.geometry, sc.channel, 3)
    assert abs(mc - pnl) < 4 * math.sqrt(pnl * (1 - pnl) / len(lp))


def test_fnc_moments_match_conditioned_simulation(fnc_split):
    sc, (lp, npow) = fnc_split
    args = (sc.geometry, sc.channel, sc.pattern, sc.p_tx, 3)
    l_mean, l_var = ga.fnc_los_moments(*args)
    n_mean, n_var = ga.fnc_nlos_moments(*args)
    los = lp[lp > 0]
    nl = npow[lp == 0]
    assert np.mean(los) == pytest.approx(l_mean, rel=0.02)
    assert np.mean(nl) == pytest.approx(n_mean, rel=0.02)
    assert np.var(los) == pytest.approx(l_var, rel=0.02)
    assert np.var(nl) == pytest.approx(n_var, rel=0.02)


def test_frc_moments_match_conditioned_simulation(frc_split):
    sc, d_co, (lp, npow) = frc_split
    geo, ch = sc.geometry, sc.channel
    for nu, power in (("L", lp), ("N", npow)):
        p0 = ga.frc_empty_probability(geo, ch, d_co, nu)
        assert abs(np.mean(power == 0) - p0) < 4 * math.sqrt(p0 * (1 - p0) / len(power))
        mean, var = ga.frc_moments(geo, ch, sc.pattern, sc.p_tx, d_co, nu)
        sel = power[power > 0]
        assert np.mean(sel) == pytest.approx(mean, rel=0.02)
        assert np.var(sel) == pytest.approx(var, rel=0.02)
    # LOS and NLOS counts of a PPP are independent
    both = np.mean((lp > 0) & (npow > 0))
    assert both == pytest.approx(np.mean(lp > 0) * np.mean(npow > 0), abs=0.01)


def test_s_l_pmf_sums_to_one():
    sc = _scenario(p_l=0.3)
    r = 1.5 * sc.geometry.d_e
    assert math.fsum(ga.s_l_pmf(sc.geometry, sc.channel, 4, r, k) for k in range(1, 5)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        ga.s_l_pmf(sc.geometry, sc.channel, 4, r, 0)


def test_point_mass_fallback():
    g = ga.GammaApprox.from_moments(2.0, 0.0, "x", 1.0)
    assert g.degenerate and g.ppf(0.3) == 2.0
    assert g.cdf(1.999) == 0.0 and g.cdf(2.0) == 1.0
    with pytest.raises(DomainError):
        g.pdf(1.0)
    with pytest.raises(DomainError):
        ga.GammaApprox.from_moments(1.0, -0.5, "x", 1.0)
    with pytest.raises(DomainError):
        ga.GammaApprox.from_moments(0.0, 1.0, "x", 1.0)


def test_gamma_moment_matching():
    g = ga.GammaApprox.from_moments(3.0, 4.5, "x", 1.0)
    assert g.kappa == pytest.approx(2.0) and g.rho_scale == pytest.approx(1.5)
    assert g.cdf(3.0) == pytest.approx(stats.gamma.cdf(3.0, 2.0, scale=1.5))


@settings(max_examples=30, deadline=None)
@given(k1=st.floats(0.3, 20), k2=st.floats(0.3, 20), q=st.floats(0.01, 0.99))
def test_sum_cdf_same_scale_is_gamma(k1, k2, q):
    # equal scales: the sum is exactly Gamma(k1 + k2)
    a = ga.GammaApprox.from_moments(k1, k1, "a", 1.0)
    b = ga.GammaApprox.from_moments(k2, k2, "b", 1.0)
    t = special.gammaincinv(k1 + k2, q)
    assert ga.sum_cdf(a, b, t) == pytest.approx(q, abs=1e-8)


def test_sum_cdf_mixed_scales_against_quad():
    a = ga.GammaApprox.from_moments(1e-9, 2e-19, "a", 1.0)  # kappa 5, tiny scale as in real powers
    b = ga.GammaApprox.from_moments(3e-10, 9e-20 / 0.7, "b", 1.0)
    t = 1.2e-9
    want, _ = integrate.quad(lambda x: a.pdf(x) * b.cdf(t - x), 0, t, epsabs=1e-13, limit=200)
    assert ga.sum_cdf(a, b, t) == pytest.approx(want, abs=1e-9)


def test_sum_cdf_with_degenerate_term():
    a = ga.GammaApprox.from_moments(1.0, 0.0, "a", 1.0)
    b = ga.GammaApprox.from_moments(2.0, 2.0, "b", 1.0)
    assert ga.sum_cdf(a, b, 3.0) == pytest.approx(b.cdf(2.0))
    assert ga.sum_cdf(a, b, -1.0) == 0.0


def test_frc_floor_and_limits():
    sc = _scenario(p_l=0.2, n_l=4.0)
    d_co = sc.geometry.d_co_for_mean(3.0)
    args = (sc.geometry, sc.channel, sc.pattern, sc.p_tx, sc.noise, d_co)
    assert ga.outage_frc_approx(*args, 1e-12) == pytest.approx(math.exp(-3), rel=1e-9)
    assert ga.outage_frc_approx(*args, 1e12) == pytest.approx(1.0)
    vals = ga.outage_frc_approx(*args, 10 ** (np.arange(-30, 31, 5) / 10))
    assert np.all(np.diff(vals) >= -1e-12)


def test_fnc_limits_and_monotone():
    sc = _scenario(p_l=0.2, n_l=4.0)
    args = (sc.geometry, sc.channel, sc.pattern, sc.p_tx, sc.noise, 3)
    assert ga.outage_fnc_approx(*args, 1e-12) == pytest.approx(0.0, abs=1e-12)
    assert ga.outage_fnc_approx(*args, 1e12) == pytest.approx(1.0)
    vals = ga.outage_fnc_approx(*args, 10 ** (np.arange(-30, 31, 5) / 10))
    assert np.all(np.diff(vals) >= -1e-12)
    with pytest.raises(DomainError):
        ga.outage_fnc_approx(*args, 0.0)


@pytest.mark.parametrize("kind", ["fnc", "frc"])
def test_approximation_tracks_simulation(kind):
    sc = _scenario(p_l=0.2, n_l=4.0)
    taus = 10 ** (np.array([-10.0, -2.0, 6.0, 15.0]) / 10)
    if kind == "fnc":
        sim_sc = replace(sc, scheme=CoopScheme.fnc(3))
        approx = ga.outage_fnc_approx(sc.geometry, sc.channel, sc.pattern, sc.p_tx, sc.noise, 3, taus)
    else:
        d_co = sc.geometry.d_co_for_mean(3.0)
        sim_sc = replace(sc, scheme=CoopScheme.frc(d_co))
        approx = ga.outage_frc_approx(sc.geometry, sc.channel, sc.pattern, sc.p_tx, sc.noise, d_co, taus)
    sim = [r.value for r in estimate_outage(sim_sc, taus, 6000, 3)]
    assert np.max(np.abs(np.asarray(sim) - approx)) <= 0.05
