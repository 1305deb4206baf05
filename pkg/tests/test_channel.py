import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwcoop.channel import (
    AntennaPattern,
    ChannelParams,
    LinkState,
    NoiseModel,
    db_to_linear,
    dbm_to_watts,
    linear_to_db,
    los_probability,
    path_loss,
    sample_fading,
    sample_interferer_gain,
    ula_approximation,
)
from mmwcoop.errors import DomainError


@pytest.fixture
def channel():
    return ChannelParams.from_db(2.0, 2.92, -61.4, -72.0, 3, 1, 0.2, 200.0)


def test_unit_conversions():
    assert db_to_linear(15) == pytest.approx(31.6227766017)
    assert linear_to_db(db_to_linear(-3.3)) == pytest.approx(-3.3)
    assert dbm_to_watts(20) == pytest.approx(0.1)


def test_noise_power():
    noise = NoiseModel(1e9, 5.0)
    assert noise.n0_dbm == pytest.approx(-79.0)
    assert noise.n0_watts == pytest.approx(10 ** ((-174 + 90 + 5 - 30) / 10))


def test_los_probability(channel):
    assert los_probability(channel, 0.0) == 0.2
    assert los_probability(channel, 150.0) == 0.2
    assert los_probability(channel, np.nextafter(200.0, 1e9)) == 0.0
    with pytest.raises(DomainError):
        los_probability(channel, -1.0)


def test_path_loss_examples(channel):
    assert path_loss(channel, 1.0, LinkState.LOS) == pytest.approx(channel.c_l)
    assert path_loss(channel, 100.0, LinkState.LOS) == pytest.approx(7.2444e-11, rel=1e-4)
    assert path_loss(channel, 100.0, LinkState.NLOS) < path_loss(channel, 100.0, LinkState.LOS)
    with pytest.raises(DomainError):
        path_loss(channel, 0.0, LinkState.LOS)


@given(d=st.floats(1.0, 1e4), factor=st.floats(1.001, 10))
def test_path_loss_decreasing_and_ordered(d, factor):
    p = ChannelParams.from_db(2.0, 2.92, -61.4, -72.0, 3, 1, 0.2, 200.0)
    for state in LinkState:
        assert path_loss(p, d * factor, state) < path_loss(p, d, state)
    assert path_loss(p, d, LinkState.LOS) >= path_loss(p, d, LinkState.NLOS)


def test_channel_validation_lists_all_problems():
    with pytest.raises(DomainError) as exc:
        ChannelParams(3.0, 2.5, 1e-8, 1e-6, 0.5, 1, 1.5, 200.0)
    msg = str(exc.value)
    assert "alpha" in msg and "c_l" in msg and "Nakagami" in msg and "LOS probability" in msg


def test_fading_moments():
    rng = np.random.default_rng(11)
    p = ChannelParams.from_db(2.0, 2.92, -61.4, -72.0, 3, 1, 0.2, 200.0)
    exp_draws = sample_fading(p, LinkState.NLOS, rng, 10**6)
    assert exp_draws.mean() == pytest.approx(1.0, rel=5e-3)
    los_draws = sample_fading(p, LinkState.LOS, rng, 10**6)
    assert los_draws.var() == pytest.approx(1 / 3, rel=2e-2)
    z = 1.0
    assert np.exp(-z * los_draws).mean() == pytest.approx((1 + z / 3) ** -3, abs=1e-3)


def test_interferer_gain_frequency():
    pattern = AntennaPattern.from_db(15, -3, 15)
    assert pattern.p_main == pytest.approx(15 / 360)
    rng = np.random.default_rng(5)
    n = 10**6
    gains = sample_interferer_gain(pattern, rng, n)
    frac = np.mean(gains == pattern.g_m)
    p = pattern.p_main
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / n)
    assert set(np.unique(gains)) == {pattern.g_m, pattern.g_s}


def test_nearly_full_main_lobe():
    pattern = AntennaPattern(10.0, 1.0, 2 * math.pi * (1 - 1e-12))
    gains = sample_interferer_gain(pattern, np.random.default_rng(0), 10_000)
    assert np.all(gains == 10.0)


def test_antenna_validation():
    with pytest.raises(DomainError):
        AntennaPattern(1.0, 2.0, 0.3)
    with pytest.raises(DomainError):
        AntennaPattern(2.0, 1.0, 7.0)


def test_ula_two_elements_is_flagged():
    with pytest.warns(RuntimeWarning):
        pat = ula_approximation(2)
    assert pat.g_m == 2 and pat.theta_t == pytest.approx(2 * math.pi)


def test_ula_sixteen_elements():
    pat = ula_approximation(16)
    assert pat.g_m == 16
    assert pat.theta_t == pytest.approx(4 * (math.pi / 2 - math.acos(0.125)), rel=1e-12)
    assert pat.theta_t == pytest.approx(0.5014, abs=1e-4)
    # grid-search oracle over 1e5 points of the side-lobe window
    x = np.linspace(2 / 16, 4 / 16, 100_001)[1:-1]
    grid_max = np.max(np.sin(16 * np.pi * x / 2) ** 2 / np.sin(np.pi * x / 2) ** 2)
    assert pat.g_s == pytest.approx(grid_max, rel=1e-8)
    assert pat.g_s >= grid_max


def test_ula_large_k_needs_normalization():
    with pytest.raises(DomainError, match="normalize"):
        ula_approximation(32)
    pat = ula_approximation(32, normalize=True)
    assert pat.g_s < pat.g_m
