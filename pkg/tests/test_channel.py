import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from evmlink.link import (
    ChannelResponse,
    DelayProfile,
    InvalidArgumentError,
    MobilityProfile,
    carrier_count,
    clarke_correlation,
    correlate_users,
    evolve,
    flat_rayleigh,
    tdl_response,
)
from evmlink.utils import io

def test_flat_rayleigh_has_unit_power(rng):
    h = flat_rayleigh(100, 1000, rng)
    assert np.mean(np.abs(h.gains) ** 2) == pytest.approx(1.0, rel=0.03)

def test_flat_rayleigh_shape_and_flatness(rng):
    h = flat_rayleigh(32, 3, rng, n_carriers=4)
    assert h.gains.shape == (1, 4, 32, 3)
    assert h.block_gains(0).shape == (4, 32, 3)
    np.testing.assert_allclose(h.gains[0, 0], h.gains[0, 3])

def test_flat_rayleigh_power_is_exponential(rng):
    power = np.abs(flat_rayleigh(100, 100, rng).gains.ravel()) ** 2
    assert stats.kstest(power, stats.expon.cdf).pvalue > 0.01

def test_single_tap_response_matches_flat_draw():
    single = tdl_response(DelayProfile.single_tap(), 2e6, 2e6 / 120, 8, 2, np.random.default_rng(3))
    flat = flat_rayleigh(8, 2, np.random.default_rng(3), n_carriers=120)
    np.testing.assert_allclose(single.gains, flat.gains)
    np.testing.assert_allclose(single.gains[0, 0], single.gains[0, -1])

def test_carrier_count():
    assert carrier_count(120e6, 2e6 / 120) == 7200
    assert carrier_count(2e6, 2e6 / 120) == 120
    with pytest.raises(InvalidArgumentError):
        carrier_count(1.5e6, 1e6)
    with pytest.raises(InvalidArgumentError):
        carrier_count(0.0, 1e6)

def test_tdl_response_has_unit_average_power(rng):
    profile = DelayProfile.exponential()
    h = tdl_response(profile, 2e6, 2e6 / 120, 100, 100, rng)
    assert h.n_carriers == 120
    assert np.mean(np.abs(h.gains) ** 2) == pytest.approx(1.0, rel=0.03)

def test_exponential_profile_hits_the_delay_spread():
    profile = DelayProfile.exponential(n_taps=8, rms_delay_spread=100e-9, tap_spacing=15e-9)
    assert profile.n_taps == 8
    assert profile.rms_delay_spread == pytest.approx(100e-9, rel=1e-9)
    assert sum(profile.tap_powers) == pytest.approx(1.0, abs=1e-12)
    assert profile.tap_delays[:4] == pytest.approx([0.0, 15e-9, 45e-9, 90e-9])
    assert np.all(np.diff(profile.tap_powers) < 0)

def test_exponential_profile_rejects_unreachable_spread():
    with pytest.raises(InvalidArgumentError):
        DelayProfile.exponential(n_taps=2, rms_delay_spread=1e-6, tap_spacing=15e-9)

def test_delay_profile_validation():
    with pytest.raises(InvalidArgumentError):
        DelayProfile(tap_delays=[0.0, 1e-9], tap_powers=[1.0])
    with pytest.raises(InvalidArgumentError):
        DelayProfile(tap_delays=[1e-9, 0.0], tap_powers=[0.5, 0.5])
    with pytest.raises(InvalidArgumentError):
        DelayProfile(tap_delays=[0.0, 1e-9], tap_powers=[0.5, 0.6])

def test_default_profile_decorrelates_near_three_and_a_half_megahertz():
    profile = DelayProfile.exponential()
    delta_f = np.arange(0.0, 20e6, 10e3)
    magnitude = np.abs(profile.frequency_correlation(delta_f))
    crossing = delta_f[np.argmax(magnitude < 0.5)]
    assert 3.1e6 <= crossing <= 3.7e6
    assert abs(profile.frequency_correlation(2e6)[0]) > 0.6
    assert magnitude[0] == pytest.approx(1.0)

def test_empirical_frequency_correlation_matches_profile():
    profile = DelayProfile.exponential()
    h = tdl_response(profile, 4e6, 1e6, 200, 50, np.random.default_rng(11))
    gains = h.block_gains(0)
    estimates = []
    for a, b in [(0, 2), (1, 3)]:
        x, y = gains[a].ravel(), gains[b].ravel()
        estimates.append(np.mean(y * np.conj(x)) / math.sqrt(np.mean(np.abs(x) ** 2) * np.mean(np.abs(y) ** 2)))
    expected = profile.frequency_correlation(2e6)[0]
    for estimate in estimates:
        assert abs(estimate - expected) < 0.05

def test_clarke_correlation_at_walking_speed():
    assert clarke_correlation(8.89, 0.03656) == pytest.approx(0.1995, abs=1e-3)
    assert MobilityProfile().correlation == pytest.approx(0.1995, abs=1e-3)
    assert clarke_correlation(0.0, 0.03656) == 1.0

def test_mobility_profile_validation():
    with pytest.raises(InvalidArgumentError):
        MobilityProfile(doppler_hz=-1.0)
    with pytest.raises(InvalidArgumentError):
        MobilityProfile(block_period_s=0.0)
    with pytest.raises(InvalidArgumentError):
        MobilityProfile(doppler_hz=20.0, block_period_s=0.03656)

def test_zero_doppler_keeps_the_channel(rng):
    h = evolve(flat_rayleigh(8, 2, rng), MobilityProfile(doppler_hz=0.0), 5, rng)
    assert h.n_blocks == 5
    for t in range(1, 5):
        np.testing.assert_array_equal(h.taps[t], h.taps[0])

def test_evolution_matches_clarke_lag_one_correlation(rng):
    profile = MobilityProfile()
    h = evolve(flat_rayleigh(200, 1, rng), profile, 1000, rng)
    traces = h.taps[:, 0, :, 0]
    lag_one = np.mean(traces[1:] * np.conj(traces[:-1])) / np.mean(np.abs(traces) ** 2)
    assert abs(lag_one - profile.correlation) < 0.02

def test_evolution_preserves_power(rng):
    h = evolve(tdl_response(DelayProfile.exponential(), 2e6, 2e6 / 120, 100, 50, rng), MobilityProfile(), 40, rng)
    late = np.abs(h.block_gains(39)) ** 2
    assert np.mean(late) == pytest.approx(1.0, rel=0.05)

def test_evolution_moves_only_the_selected_users(rng):
    h = evolve(flat_rayleigh(8, 3, rng), MobilityProfile(), 6, rng, users=[2])
    for t in range(1, 6):
        np.testing.assert_array_equal(h.taps[t, ..., :2], h.taps[0, ..., :2])
    assert not np.allclose(h.taps[5, ..., 2], h.taps[0, ..., 2])
    with pytest.raises(InvalidArgumentError):
        evolve(flat_rayleigh(8, 3, rng), MobilityProfile(), 2, rng, users=[3])

def test_correlate_users_sets_the_correlation(rng):
    c = 0.95
    h = correlate_users(flat_rayleigh(4000, 2, rng), c, rng)
    x, y = h.taps[0, 0, :, 0], h.taps[0, 0, :, 1]
    estimate = np.mean(x * np.conj(y)) / math.sqrt(np.mean(np.abs(x) ** 2) * np.mean(np.abs(y) ** 2))
    assert abs(estimate - c) < 0.03
    assert np.mean(np.abs(h.taps) ** 2) == pytest.approx(1.0, rel=0.05)

def test_correlate_users_is_a_no_op_at_zero(rng):
    h = flat_rayleigh(4, 2, rng)
    assert correlate_users(h, 0.0, rng) is h
    with pytest.raises(InvalidArgumentError):
        correlate_users(h, 1.5, rng)

def test_channel_response_validation(rng):
    with pytest.raises(InvalidArgumentError):
        ChannelResponse(carrier_spacing=1e3, n_carriers=2)
    with pytest.raises(InvalidArgumentError):
        ChannelResponse(carrier_spacing=1e3, n_carriers=2, explicit_gains=np.full((1, 2, 2, 2), np.nan + 0j))
    h = flat_rayleigh(4, 2, rng)
    with pytest.raises(InvalidArgumentError):
        h.block_gains(1)

def test_channel_csv_round_trip(tmp_path, rng):
    h = evolve(tdl_response(DelayProfile.exponential(), 1e6, 1e6 / 8, 3, 2, rng), MobilityProfile(), 2, rng)
    path = io.export_csv(h, tmp_path / "channel.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == io.CHANNEL_COLUMNS
    assert len(frame) == 2 * 8 * 3 * 2

    loaded = io.import_csv(path, h.carrier_spacing, h.block_period)
    assert not loaded.has_taps
    np.testing.assert_allclose(loaded.gains, h.gains, rtol=1e-12, atol=1e-15)

def test_channel_npy_round_trip(tmp_path, rng):
    h = tdl_response(DelayProfile.exponential(), 1e6, 1e6 / 8, 3, 2, rng)
    loaded = io.import_npy(io.export_npy(h, tmp_path / "channel.npy"), h.carrier_spacing, h.block_period)
    np.testing.assert_array_equal(loaded.gains, h.gains)

def test_channel_import_rejects_incomplete_tables(rng):
    frame = io.channel_to_frame(flat_rayleigh(2, 2, rng, n_carriers=2)).iloc[:-1]
    with pytest.raises(InvalidArgumentError):
        io.channel_from_frame(frame, 1e3, 0.03656)
