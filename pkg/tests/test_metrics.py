import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st
from scipy import stats

from evmlink.link import (
    DegenerateInputError,
    EvmAveraging,
    EvmMode,
    EvmNormalization,
    GradientModel,
    InvalidArgumentError,
    MixSpec,
    SinrRecord,
    TABLE_I_GRADIENTS,
    UnboundedPredictionError,
    ber,
    build_constellation,
    carrier_variances,
    complex_gaussian,
    evm_from_sinr,
    mix,
    random_grid,
    reference_power,
    rms_evm,
    signalled_ratio_db,
    sinr_predict,
    sinr_signalled,
    theoretical_ber,
)

def _alternating(variance, carriers, frames):
    # +s, -s across an even number of frames, unbiased variance exactly ``variance``
    s = math.sqrt(variance * (frames - 1) / frames)
    return np.tile([[s, -s]], (carriers, frames // 2)).astype(complex)

def test_ber_is_zero_without_noise(qam64, rng):
    grid = random_grid(qam64, 50, 4, rng)
    assert ber(grid.data, grid.bits, qam64) == 0.0

def test_ber_of_unrelated_payload_is_one_half(qam64, rng):
    grid = random_grid(qam64, 1200, 20, rng)
    other = random_grid(qam64, 1200, 20, rng)
    assert abs(ber(grid.data, other.bits, qam64) - 0.5) < 0.01

def test_qpsk_ber_matches_awgn_theory(qpsk, rng):
    grid = random_grid(qpsk, 1200, 200, rng)
    snr_db = 10.0
    noise = complex_gaussian(rng, grid.data.shape, 10 ** (-snr_db / 10))
    measured = ber(grid.data + noise, grid.bits, qpsk)
    expected = stats.norm.sf(math.sqrt(10 ** (snr_db / 10)))
    n_bits = grid.bits.size
    assert abs(measured - expected) < 4 * math.sqrt(expected / n_bits)
    assert theoretical_ber(4, snr_db) == pytest.approx(expected, rel=1e-12)

def test_ber_is_unchanged_by_a_quarter_turn(qam64, rng):
    grid = random_grid(qam64, 40, 4, rng)
    noisy = grid.data + complex_gaussian(rng, grid.data.shape, 0.05)
    # decisions move with the rotation, so the reference must too
    rotated_bits = np.asarray(
        [qam64.bit_matrix[np.argmin(np.abs(qam64.points - 1j * s))] for s in grid.data.ravel()]
    ).ravel()
    assert ber(noisy, grid.bits, qam64) == ber(1j * noisy, rotated_bits, qam64)

def test_ber_rejects_length_mismatch(qam64, rng):
    grid = random_grid(qam64, 10, 2, rng)
    with pytest.raises(InvalidArgumentError):
        ber(grid.data, grid.bits[:-6], qam64)

def test_evm_is_zero_for_exact_symbols(qam64, rng):
    grid = random_grid(qam64, 20, 4, rng)
    assert rms_evm(grid.data, qam64, EvmMode.DATA_AIDED, grid).rms_percent == 0.0
    assert rms_evm(grid.data, qam64).rms_percent == 0.0

@pytest.mark.parametrize("snr_db", [0.0, 5.0, 10.0, 15.0, 20.0])
def test_data_aided_evm_follows_awgn(qam64, rng, snr_db):
    grid = random_grid(qam64, 1200, 20, rng)
    noise = complex_gaussian(rng, grid.data.shape, 10 ** (-snr_db / 10))
    estimate = rms_evm(grid.data + noise, qam64, EvmMode.DATA_AIDED, grid)
    assert estimate.rms_percent == pytest.approx(100.0 * 10 ** (-snr_db / 20), rel=0.02)
    assert estimate.n_carriers == 1200 and estimate.n_frames == 20

@pytest.mark.parametrize("snr_db", [-5.0, 5.0, 15.0])
def test_decision_directed_never_exceeds_data_aided(qam64, rng, snr_db):
    grid = random_grid(qam64, 200, 10, rng)
    received = grid.data + complex_gaussian(rng, grid.data.shape, 10 ** (-snr_db / 10))
    dd = rms_evm(received, qam64, EvmMode.DECISION_DIRECTED).rms_percent
    da = rms_evm(received, qam64, EvmMode.DATA_AIDED, grid).rms_percent
    assert dd <= da + 1e-12

def test_modes_agree_at_high_snr(qam64, rng):
    grid = random_grid(qam64, 200, 10, rng)
    received = grid.data + complex_gaussian(rng, grid.data.shape, 1e-4)
    dd = rms_evm(received, qam64, EvmMode.DECISION_DIRECTED).rms_percent
    da = rms_evm(received, qam64, EvmMode.DATA_AIDED, grid).rms_percent
    assert dd == pytest.approx(da, rel=1e-12)

def test_per_carrier_averaging_is_not_above_pooled(qam64, rng):
    grid = random_grid(qam64, 100, 4, rng)
    received = grid.data + complex_gaussian(rng, grid.data.shape, 0.1)
    pooled = rms_evm(received, qam64, EvmMode.DATA_AIDED, grid, EvmAveraging.POOLED)
    per_carrier = rms_evm(received, qam64, EvmMode.DATA_AIDED, grid, EvmAveraging.PER_CARRIER)
    assert per_carrier.rms_percent <= pooled.rms_percent + 1e-12
    assert per_carrier.averaging == EvmAveraging.PER_CARRIER

def test_evm_falls_with_sinr_in_both_modes(qam64):
    sinr_grid = np.arange(-5.0, 21.0, 1.0)
    data_aided = np.zeros(len(sinr_grid))
    decision = np.zeros(len(sinr_grid))
    for seed in range(50):
        rng = np.random.default_rng(seed)
        for i, sinr in enumerate(sinr_grid):
            wanted = random_grid(qam64, 120, 20, rng)
            other = random_grid(qam64, 120, 20, rng)
            result = mix(wanted, [other], MixSpec(sinr_target=sinr, snr=20.0), rng)
            data_aided[i] += rms_evm(result.received, qam64, EvmMode.DATA_AIDED, wanted).rms_percent
            decision[i] += rms_evm(result.received, qam64).rms_percent
    assert np.all(np.diff(data_aided) < 0)
    assert np.all(np.diff(decision) < 0)
    assert np.all(decision <= data_aided)

def test_reference_power_conventions(qam64):
    qam16 = build_constellation(16)
    assert reference_power(qam16) == pytest.approx(1.0)
    assert reference_power(qam16, EvmNormalization.PEAK_POWER) == pytest.approx(1.8)
    assert reference_power(qam16, EvmNormalization.BIT_ENERGY) == pytest.approx(1.5)
    assert reference_power(qam64, EvmNormalization.PEAK_POWER) == pytest.approx(98 / 42)
    assert reference_power(qam64, EvmNormalization.BIT_ENERGY) == pytest.approx(1.0)

def test_bit_energy_evm_scales_with_bits_per_symbol(rng):
    qam16 = build_constellation(16)
    grid = random_grid(qam16, 60, 10, rng)
    received = grid.data + complex_gaussian(rng, grid.data.shape, 0.01)
    average = rms_evm(received, qam16, EvmMode.DATA_AIDED, grid)
    per_bit = rms_evm(
        received, qam16, EvmMode.DATA_AIDED, grid, normalization=EvmNormalization.BIT_ENERGY,
    )
    assert per_bit.rms_percent == pytest.approx(average.rms_percent * math.sqrt(4 / 6), rel=1e-12)
    assert per_bit.normalization == EvmNormalization.BIT_ENERGY

def test_evm_input_checks(qam64, rng):
    grid = random_grid(qam64, 4, 2, rng)
    with pytest.raises(InvalidArgumentError):
        rms_evm(grid.data, qam64, EvmMode.DATA_AIDED)
    with pytest.raises(DegenerateInputError):
        rms_evm(grid.data, qam64, EvmMode.DATA_AIDED, np.zeros_like(grid.data))
    with pytest.raises(DegenerateInputError):
        rms_evm(np.zeros((0, 3)), qam64)
    with pytest.raises(InvalidArgumentError):
        rms_evm(np.zeros((2, 2, 2)), qam64)

@pytest.mark.parametrize(
    "wanted, interferers, noise_var, expected",
    [
        (1.0, [1.0, 1.0], 1.0, -4.771212547),
        (1.0, [0.01], 0.0, 20.0),
        (0.5, [0.05, 0.05], 0.0, 6.989700043),
    ],
)
def test_sinr_signalled_examples(wanted, interferers, noise_var, expected):
    result = sinr_signalled(
        _alternating(wanted, 6, 4),
        [_alternating(v, 6, 4) for v in interferers],
        noise_var,
    )
    assert result == pytest.approx(expected, abs=1e-6)

def test_sinr_signalled_needs_an_impairment():
    with pytest.raises(DegenerateInputError):
        sinr_signalled(_alternating(1.0, 3, 2), [], 0.0)
    with pytest.raises(DegenerateInputError):
        signalled_ratio_db(1.0, [0.0], 0.0)

def test_sinr_signalled_of_silent_wanted_is_minus_infinity():
    assert signalled_ratio_db(0.0, [1.0], 0.0) == -math.inf

@hyp_settings(max_examples=30, deadline=None)
@given(scale=st.floats(min_value=1e-3, max_value=1e3))
def test_sinr_signalled_is_scale_invariant(scale):
    rng = np.random.default_rng(7)
    wanted = complex_gaussian(rng, (8, 6))
    interferer = complex_gaussian(rng, (8, 6), 0.2)
    base = sinr_signalled(wanted, [interferer], 0.05)
    scaled = sinr_signalled(scale * wanted, [scale * interferer], 0.05 * scale ** 2)
    assert scaled == pytest.approx(base, abs=1e-9)

def test_carrier_variances_need_two_frames():
    with pytest.raises(InvalidArgumentError):
        carrier_variances(np.ones((4, 1)))
    np.testing.assert_allclose(carrier_variances(_alternating(2.0, 3, 4)), 2.0)

def test_sinr_predict_reference_points():
    model = GradientModel(a_value=100.0)
    assert sinr_predict(100.0, model) == pytest.approx(0.0)
    assert sinr_predict(10.0, model) == pytest.approx(20.0)

def test_sinr_predict_rejects_zero_and_negative_evm():
    model = GradientModel(a_value=107.0)
    with pytest.raises(UnboundedPredictionError) as excinfo:
        sinr_predict(0.0, model)
    assert excinfo.value.sinr_db == math.inf
    with pytest.raises(InvalidArgumentError):
        sinr_predict(-1.0, model)

@hyp_settings(max_examples=50, deadline=None)
@given(
    a_value=st.floats(min_value=10.0, max_value=200.0),
    sinr_db=st.floats(min_value=-10.0, max_value=40.0),
)
def test_prediction_inverts_the_log_linear_law(a_value, sinr_db):
    model = GradientModel(a_value=a_value)
    assert sinr_predict(float(evm_from_sinr(sinr_db, model)), model) == pytest.approx(sinr_db, abs=1e-9)

def test_gradient_model_validation():
    with pytest.raises(InvalidArgumentError):
        GradientModel(a_value=0.0)
    with pytest.raises(InvalidArgumentError):
        GradientModel(a_value=100.0, qam_order=6)
    with pytest.raises(InvalidArgumentError):
        GradientModel(a_value=100.0, n_interferers=4)
    model = GradientModel(a_value=100.0, evm_mode="data-aided", averaging="per-carrier")
    assert model.evm_mode == EvmMode.DATA_AIDED
    assert model.averaging == EvmAveraging.PER_CARRIER
    default = GradientModel(a_value=100.0)
    assert default.evm_mode == EvmMode.DATA_AIDED
    assert default.normalization == EvmNormalization.BIT_ENERGY

def test_gradient_model_from_published_values():
    assert GradientModel.from_table(64).a_value == 107.0
    assert GradientModel.from_table(8, n_interferers=2).a_value == TABLE_I_GRADIENTS[8][1]
    with pytest.raises(InvalidArgumentError):
        GradientModel.from_table(4)
    with pytest.raises(InvalidArgumentError):
        GradientModel.from_table(64, n_interferers=0)

def test_sinr_record_error_is_predicted_minus_signalled():
    record = SinrRecord(
        user=1,
        time_block=2,
        sub_band_index=3,
        center_freq_hz=2.4e9,
        sinr_signalled_db=12.5,
        sinr_predicted_db=11.0,
    )
    assert record.prediction_error_db == -1.5
    assert record.unbounded is False

    unbounded = SinrRecord(0, 0, 0, 2.4e9, 10.0, math.inf)
    assert unbounded.unbounded is True

def test_theoretical_ber_decreases_with_snr():
    curve = theoretical_ber(64, np.arange(0.0, 31.0, 5.0))
    assert np.all(np.diff(curve) < 0)
    with pytest.raises(InvalidArgumentError):
        theoretical_ber(6, 10.0)
