import numpy as np
import pytest

from evmlink.link import (
    DelayProfile,
    IllConditionedChannelError,
    InvalidArgumentError,
    MobilityProfile,
    complex_gaussian,
    effective_channel,
    evolve,
    flat_rayleigh,
    tdl_response,
    zero_forcing,
    zero_forcing_matrix,
)

def test_identity_channel_gives_identity_weights():
    weights, normalization = zero_forcing_matrix(np.eye(3))
    np.testing.assert_allclose(weights, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(normalization, 1.0)

def test_single_user_weights_are_matched_filter(rng):
    h = complex_gaussian(rng, (1, 8))
    weights, _ = zero_forcing_matrix(h)
    expected = np.conj(h.T) / np.linalg.norm(h)
    np.testing.assert_allclose(weights, expected, atol=1e-12)

def test_zero_forcing_nulls_other_users(rng):
    h = complex_gaussian(rng, (500, 3, 32))
    weights, _ = zero_forcing_matrix(h)
    effective = h @ weights
    off_diagonal = np.abs(effective * (1 - np.eye(3)))
    diagonal = np.abs(np.diagonal(effective, axis1=-2, axis2=-1))
    assert np.all(off_diagonal.max(axis=(1, 2)) <= 1e-10 * diagonal.min(axis=1))
    np.testing.assert_allclose(np.linalg.norm(weights, axis=-2), 1.0, atol=1e-12)

def test_zero_forcing_is_scale_invariant(rng):
    h = complex_gaussian(rng, (3, 16))
    weights, _ = zero_forcing_matrix(h)
    scaled, _ = zero_forcing_matrix(7.5 * h)
    np.testing.assert_allclose(scaled, weights, atol=1e-12)

def test_zero_forcing_needs_enough_antennas(rng):
    with pytest.raises(InvalidArgumentError):
        zero_forcing_matrix(complex_gaussian(rng, (4, 3)))

def test_rank_deficient_channel_is_rejected(rng):
    row = complex_gaussian(rng, (1, 8))
    with pytest.raises(IllConditionedChannelError):
        zero_forcing_matrix(np.vstack([row, row, complex_gaussian(rng, (1, 8))]))

def test_leakage_on_a_frequency_selective_channel(rng):
    h = tdl_response(DelayProfile.exponential(), 2e6, 2e6 / 120, 32, 3, rng)
    w = zero_forcing(h, block=0)
    assert w.weights.shape == (120, 32, 3)
    effective = effective_channel(h, w, csi_block=0, apply_block=0)
    assert effective.gains.shape == (120, 3, 3)
    assert np.all(effective.leakage_power_db() <= -100.0)

def test_flat_channel_leakage_is_negligible(rng):
    for _ in range(20):
        h = flat_rayleigh(32, 3, rng)
        w = zero_forcing(h)
        assert np.all(effective_channel(h, w, 0, 0).leakage_power_db() <= -100.0)

def test_effective_channel_argument_checks(rng):
    h = evolve(flat_rayleigh(8, 2, rng), MobilityProfile(), 3, rng)
    w = zero_forcing(h, block=1)
    with pytest.raises(InvalidArgumentError):
        effective_channel(h, w, csi_block=0, apply_block=2)
    with pytest.raises(InvalidArgumentError):
        effective_channel(h, w, csi_block=1, apply_block=3)
    with pytest.raises(InvalidArgumentError):
        effective_channel(flat_rayleigh(8, 2, rng), w, csi_block=1, apply_block=0)
    with pytest.raises(InvalidArgumentError):
        zero_forcing(h, block=3)

def test_static_channel_keeps_its_nulls(rng):
    h = evolve(flat_rayleigh(16, 3, rng), MobilityProfile(doppler_hz=0.0), 4, rng)
    w = zero_forcing(h, block=0)
    for block in range(4):
        np.testing.assert_array_equal(effective_channel(h, w, 0, block).gains, effective_channel(h, w, 0, 0).gains)

def _mean_leakage_by_lag(doppler_hz, rng, realizations=200, lags=4):
    leakage = np.zeros((realizations, lags))
    for r in range(realizations):
        h = evolve(flat_rayleigh(32, 3, rng), MobilityProfile(doppler_hz=doppler_hz), lags, rng)
        w = zero_forcing(h, block=0)
        for lag in range(lags):
            effective = effective_channel(h, w, 0, lag)
            wanted = np.sum(np.abs(effective.wanted) ** 2)
            leakage[r, lag] = np.sum(np.abs(effective.leakage) ** 2) / wanted
    return leakage

def test_leakage_grows_with_csi_age_at_low_doppler(rng):
    leakage = _mean_leakage_by_lag(1.0, rng)
    assert np.all(np.diff(leakage.mean(axis=0)) > 0)

def test_leakage_grows_with_csi_age_at_walking_speed(rng):
    leakage = _mean_leakage_by_lag(8.89, rng)
    mean = leakage.mean(axis=0)
    stderr = leakage.std(axis=0, ddof=1) / np.sqrt(leakage.shape[0])
    assert mean[1] > mean[0]
    for lag in range(2, leakage.shape[1]):
        assert mean[lag] >= mean[lag - 1] - 3 * (stderr[lag] + stderr[lag - 1])
