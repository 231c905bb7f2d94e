import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sempower import link
from sempower.errors import BracketError

from . import oracles

PL_100M = 10 ** -9.8


def test_path_loss():
    assert link.path_loss_linear(link.ChannelParams(distance_m=1.0)) == pytest.approx(1e-3, rel=1e-15)
    assert link.path_loss_linear(link.ChannelParams()) == pytest.approx(PL_100M, rel=1e-14)
    near = link.path_loss_linear(link.ChannelParams(distance_m=50.0))
    far = link.path_loss_linear(link.ChannelParams(distance_m=100.0))
    assert near / far == pytest.approx(2**3.4, rel=1e-13)


def test_channel_params_validation():
    with pytest.raises(ValueError):
        link.ChannelParams(distance_m=0.0)
    with pytest.raises(ValueError):
        link.ChannelParams(fading="nakagami")
    with pytest.raises(ValueError):
        link.ChannelParams(fading=(1.0, -1.0))
    assert link.ChannelParams().noise_w == pytest.approx(1e-14, rel=1e-14)


def test_dbm_round_trip():
    assert link.dbm_to_watts(30.0) == 1.0
    assert link.watts_to_dbm(1e-3) == pytest.approx(0.0, abs=1e-12)
    assert link.watts_to_dbm(0.0) == -math.inf


def test_snr_examples():
    real = link.fixed_realization(link.ChannelParams(), [1.0, 1.0])
    assert link.snr(0.0, real, 0) == 0.0
    assert link.snr(1.0, real, 0) == pytest.approx(10**4.2, rel=1e-13)
    assert link.snr(2.0, real, 1) == pytest.approx(2 * link.snr(1.0, real, 1), rel=1e-15)
    with pytest.raises(ValueError):
        link.snr(-1.0, real, 0)


def test_rayleigh_draws_have_unit_mean():
    params = link.ChannelParams(distance_m=1.0, pl0_db=0.0)
    real = link.draw_realization(params, 10**6, np.random.default_rng(5))
    assert np.mean(real.gain_sq) == pytest.approx(1.0, rel=0.01)


def test_fixed_fading_ignores_rng():
    params = link.ChannelParams(fading=(1.0, 0.25))
    a = link.draw_realization(params, 2, np.random.default_rng(1))
    b = link.draw_realization(params, 2, np.random.default_rng(2))
    assert a == b
    with pytest.raises(ValueError):
        link.draw_realization(params, 3, np.random.default_rng(1))


@given(st.floats(-8.0, 8.0))
def test_qfunc_matches_mpmath(x):
    assert link.qfunc(x) == pytest.approx(float(oracles.q(x)), rel=1e-13, abs=1e-300)


@given(st.floats(1e-300, 1 - 1e-15))
def test_qfunc_inv_matches_mpmath(p):
    assert link.qfunc_inv(p) == pytest.approx(float(oracles.q_inv(p)), rel=1e-12, abs=1e-13)


def test_qfunc_inv_domain_and_derivative():
    for p in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            link.qfunc_inv(p)
    assert link.qfunc_inv_derivative(0.5) == pytest.approx(-math.sqrt(2 * math.pi), rel=1e-15)
    for p in (1e-6, 0.01, 0.3, 0.7):
        h = 1e-6 * min(p, 1 - p)
        fd = (link.qfunc_inv(p + h) - link.qfunc_inv(p - h)) / (2 * h)
        assert link.qfunc_inv_derivative(p) == pytest.approx(fd, rel=1e-6)


def test_ber_examples():
    assert link.ber_bpsk(0.0) == 0.5
    assert link.ber_bpsk(0.8212) == pytest.approx(0.0999982481967777, rel=1e-13)
    assert link.ber_bpsk(1e4) < 1e-300 or link.ber_bpsk(1e4) == 0.0
    with pytest.raises(ValueError):
        link.ber_bpsk(-1.0)


def test_snr_from_ber_examples():
    assert link.snr_from_ber(0.5) == 0.0
    assert link.snr_from_ber(0.1) == pytest.approx(0.8211872075749082, rel=1e-14)
    for psi in (0.0, 0.6, -1.0):
        with pytest.raises(ValueError):
            link.snr_from_ber(psi)


def test_ber_round_trip():
    for psi in np.geomspace(1e-8, 0.5, 300):
        assert link.ber_bpsk(link.snr_from_ber(psi)) == pytest.approx(psi, rel=1e-10)


def test_ber_and_bler_strictly_decreasing():
    grid = np.geomspace(1e-4, 30.0, 1000)
    ber = [link.ber_bpsk(s) for s in grid]
    assert np.all(np.diff(ber) < 1e-14)
    grid = np.linspace(0.3, 1.3, 1000)
    bler = [link.bler_fbl(s, 800, 1000) for s in grid]
    assert np.all(np.diff(bler) < 1e-14)
    assert all(b1 > b2 for b1, b2 in zip(bler, bler[1:]) if 1e-300 < b1 < 1 - 1e-12)


def test_bler_examples():
    s_half = 2**0.8 - 1
    assert link.bler_fbl(s_half, 800, 1000) == pytest.approx(0.5, abs=1e-13)
    assert link.bler_fbl(0.0, 800, 1000) == 1.0
    assert link.bler_fbl(1e6, 800, 1000) == 0.0
    # frozen from the 40-digit mpmath evaluation
    assert link.bler_fbl(1.0, 800, 1000) == pytest.approx(2.074064654821508914e-7, rel=1e-11)
    with pytest.raises(ValueError):
        link.bler_fbl(1.0, 1001, 1000)
    with pytest.raises(ValueError):
        link.bler_fbl(-1.0, 800, 1000)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-5, 100.0), st.sampled_from([(80, 100), (400, 500), (950, 1000), (1000, 2000)]))
def test_bler_matches_mpmath(snr, kn):
    k, n = kn
    assert link.bler_fbl(snr, k, n) == pytest.approx(float(oracles.bler(snr, k, n)), rel=1e-9, abs=1e-300)


def test_snr_from_bler_examples():
    assert link.snr_from_bler(0.5, 800, 1000) == pytest.approx(2**0.8 - 1, rel=1e-12)
    for t in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            link.snr_from_bler(t, 800, 1000)


def test_snr_from_bler_round_trip_and_oracle():
    for k, n in ((200, 250), (1600, 2000), (50, 100)):
        for t in np.geomspace(1e-6, 0.49, 25):
            s = link.snr_from_bler(float(t), k, n)
            assert link.bler_fbl(s, k, n) == pytest.approx(t, rel=1e-9)
        for t in (1e-6, 0.01, 0.3, 0.9):
            assert link.snr_from_bler(t, k, n) == pytest.approx(float(oracles.snr_for_bler(t, k, n)), rel=1e-9)


def test_snr_from_bler_long_block_limit():
    # The gap shrinks like Q^-1(t)/sqrt(N); at N = 1e7 it is below 1e-3 only
    # for |Q^-1(t)| < ~1.6, so deep targets are checked at a longer block.
    n = 10**7
    for t in (0.1, 0.2, 0.45):
        assert link.snr_from_bler(t, 8 * n // 10, n) == pytest.approx(2**0.8 - 1, rel=1e-3)
    n = 10**9
    assert link.snr_from_bler(0.01, 8 * n // 10, n) == pytest.approx(2**0.8 - 1, rel=1e-3)


def test_bler_derivatives_against_finite_differences():
    for s in (0.5, 0.75, 0.8, 1.2):
        assert link.dbler_dsnr(s, 800, 1000) == pytest.approx(float(oracles.dbler(s, 800, 1000)), rel=1e-9)
    for t in (1e-4, 0.1, 0.5, 0.9):
        h = 1e-6 * min(t, 1 - t)
        fd = (link.snr_from_bler(t + h, 200, 250) - link.snr_from_bler(t - h, 200, 250)) / (2 * h)
        assert link.dsnr_dbler(t, 200, 250) == pytest.approx(fd, rel=1e-5)
    assert link.dsnr_dbler(1.0, 200, 250) == -math.inf
    assert link.dsnr_dber(0.0) == -math.inf


def test_glambertw_examples():
    assert link.glambertw(-1.0, 2.0, 0.0, (-1.5, 0.5)) == pytest.approx(-1.0, abs=1e-12)
    assert link.glambertw(-1.0, 2.0, 0.0, (1.5, 2.5)) == pytest.approx(2.0, abs=1e-12)
    alpha, rate = 0.1, 0.8
    a = -4 * math.exp(-2 * rate) * alpha**2
    x = link.glambertw(2 * alpha, -2 * alpha, a, (0.0, 2 * alpha))
    assert abs((x - 2 * alpha) * (x + 2 * alpha) * math.exp(x) - a) <= 1e-12


def test_glambertw_needs_sign_change():
    with pytest.raises(BracketError):
        link.glambertw(0.0, 1.0, 5.0, (0.2, 0.8))
    with pytest.raises(ValueError):
        link.glambertw(0.0, 1.0, 0.0, (0.8, 0.2))


@settings(max_examples=100, deadline=None)
@given(
    st.floats(1e-6, 0.49),
    st.sampled_from([0.5, 0.8, 0.95]),
    st.integers(100, 2000),
    st.floats(1e-12, 1e-6),
)
def test_closed_form_equals_direct_inversion(target, rate, n, gain):
    k = max(1, round(rate * n))
    closed = link.power_coded_closed_form(target, k, n, gain, 1e-14)
    direct = 1e-14 / gain * link.snr_from_bler(target, k, n)
    assert closed == pytest.approx(direct, rel=1e-6)


def test_closed_form_upper_half_and_limits():
    # extension beyond 0.5, see the ledger
    for t in (0.6, 0.9, 0.999):
        assert link.power_coded_closed_form(t, 800, 1000, 1.0, 1.0) == pytest.approx(
            link.snr_from_bler(t, 800, 1000), rel=1e-6
        )
    assert link.power_coded_closed_form(0.5, 800, 1000, 1.0, 1.0) == pytest.approx(2**0.8 - 1, rel=1e-14)
    near = link.power_coded_closed_form(0.5 - 1e-9, 800, 1000, 1.0, 1.0)
    assert near == pytest.approx(2**0.8 - 1, rel=1e-6)
    base = link.power_coded_closed_form(0.01, 800, 1000, 1e-10, 1e-14)
    assert link.power_coded_closed_form(0.01, 800, 1000, 4e-10, 1e-14) == pytest.approx(base / 4, rel=1e-14)
    with pytest.raises(ValueError):
        link.power_coded_closed_form(0.0, 800, 1000, 1.0, 1.0)
