"""Zero-forcing multi-user runs: per-sub-band SINR records and bandwidth sweeps."""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from evmlink.link import (
    ChannelResponse,
    DelayProfile,
    GradientModel,
    InvalidArgumentError,
    MmimoConfig,
    MobilityProfile,
    RandomStreams,
    SinrRecord,
    StreamRole,
    StreamScope,
    UnboundedPredictionError,
    build_constellation,
    carrier_count,
    carrier_variances,
    complex_gaussian,
    correlate_users,
    effective_channel,
    error_terms,
    evm_from_errors,
    evolve,
    random_grid,
    reference_power,
    signalled_ratio_db,
    sinr_predict,
    tdl_response,
    zero_forcing,
)
from evmlink.link.config import MMIMO_TOLERANCE_DB, Scenario
from evmlink.services.calibration import SweepResult, summarize_errors
from evmlink.utils.parallel import ordered_map


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class CarrierStatistics:
    """
    Per-carrier quantities for one user in one time block.

    Sub-band records of any width are aggregated from these arrays.
    """
    user: int
    time_block: int
    frames: int
    wanted_var: np.ndarray
    interferer_var: np.ndarray
    err_power: np.ndarray
    leakage_db: float = -math.inf


@dataclass
class MmimoResult:
    scenario: Scenario
    config: MmimoConfig
    records: List[SinrRecord]
    leakage_db: List[List[float]]

    def bounded_errors(self) -> np.ndarray:
        return np.asarray([r.prediction_error_db for r in self.records if not r.unbounded])

    @property
    def within_fraction(self) -> float:
        errors = self.bounded_errors()
        if errors.size == 0:
            return 0.0
        return float(np.mean(np.abs(errors) <= MMIMO_TOLERANCE_DB))


def sub_band_layout(config: MmimoConfig, sub_band_hz: float) -> Tuple[int, int]:
    """
    Carriers per sub-band and number of sub-bands at the configured spacing.
    """
    per_band = carrier_count(sub_band_hz, config.carrier_spacing_hz)
    total = carrier_count(config.band_hz, config.carrier_spacing_hz)
    if total % per_band:
        raise InvalidArgumentError(
            "Sub-band does not divide the band",
            details={"band_hz": config.band_hz, "sub_band_hz": sub_band_hz}
        )
    return per_band, total // per_band


def build_channel(
    config: MmimoConfig,
    streams: RandomStreams,
    key: Tuple[int, ...],
    n_blocks: int
) -> ChannelResponse:
    """Frequency-selective multi-user channel, user correlation and Doppler applied."""
    if config.flat_channel:
        profile = DelayProfile.single_tap()
    else:
        profile = DelayProfile.exponential(n_taps=config.n_taps, rms_delay_spread=config.rms_delay_spread_s)
    channel = tdl_response(
        profile,
        config.band_hz,
        config.carrier_spacing_hz,
        config.n_tx,
        config.n_users,
        streams.generator(*key, StreamRole.CHANNEL),
        block_period_s=config.block_period_s,
    )
    channel = correlate_users(channel, config.user_correlation, streams.generator(*key, StreamRole.CORRELATION))
    mobility = MobilityProfile(doppler_hz=config.doppler_hz, block_period_s=config.block_period_s)
    return evolve(
        channel, mobility, n_blocks,
        streams.generator(*key, StreamRole.MOBILITY),
        users=config.moving_users,
    )


def block_statistics(
    config: MmimoConfig,
    channel: ChannelResponse,
    block: int,
    model: GradientModel,
    streams: RandomStreams,
    key: Tuple[int, ...]
) -> List[CarrierStatistics]:
    """
    Transmit one block of independent per-user payloads through the
    precoded channel and collect per-carrier statistics for every user.

    The precoder is computed from ``block`` and applied to the channel
    ``csi_delay_blocks`` later. Receivers equalise with their per-carrier
    wanted gain before the EVM is measured.
    """
    if config.n_users > config.n_tx:
        raise InvalidArgumentError(
            "More users than transmit antennas",
            details={"n_users": config.n_users, "n_tx": config.n_tx}
        )
    constellation = build_constellation(config.qam_order)
    apply_block = block + config.csi_delay_blocks
    precoder = zero_forcing(channel, block)
    effective = effective_channel(channel, precoder, block, apply_block)
    gains = effective.gains
    leakage = effective.leakage_power_db()

    payloads = [
        random_grid(constellation, channel.n_carriers, config.frames, streams.generator(*key, u, StreamRole.WANTED))
        for u in range(config.n_users)
    ]

    stats = []
    for u in range(config.n_users):
        wanted = gains[:, u, u][:, None] * payloads[u].data
        others = [gains[:, u, v][:, None] * payloads[v].data for v in range(config.n_users) if v != u]
        noise = complex_gaussian(
            streams.generator(*key, u, StreamRole.NOISE),
            wanted.shape,
            config.noise_variance,
        )
        received = wanted + noise
        for component in others:
            received = received + component

        equalised = received / gains[:, u, u][:, None]
        errors = error_terms(equalised, constellation, model.evm_mode, reference=payloads[u])

        interferer_var = np.zeros(channel.n_carriers)
        for component in others:
            interferer_var = interferer_var + carrier_variances(component)
        stats.append(CarrierStatistics(
            user=u,
            time_block=block,
            frames=config.frames,
            wanted_var=carrier_variances(wanted),
            interferer_var=interferer_var,
            err_power=errors,
            leakage_db=float(leakage[u]),
        ))
    return stats


def aggregate_records(
    stats: CarrierStatistics,
    config: MmimoConfig,
    sub_band_hz: float,
    model: GradientModel,
    constellation_power: float = 1.0
) -> List[SinrRecord]:
    """One SinrRecord per sub-band of the given width."""
    per_band, n_sub = sub_band_layout(config, sub_band_hz)
    records = []
    for j in range(n_sub):
        cells = slice(j * per_band, (j + 1) * per_band)
        signalled = signalled_ratio_db(
            float(np.mean(stats.wanted_var[cells])),
            [float(np.mean(stats.interferer_var[cells]))],
            config.noise_variance,
        )
        evm = evm_from_errors(stats.err_power[cells], stats.frames, constellation_power, model.averaging)
        try:
            predicted = sinr_predict(evm, model)
        except UnboundedPredictionError:
            predicted = math.inf
        records.append(SinrRecord(
            user=stats.user,
            time_block=stats.time_block,
            sub_band_index=j,
            center_freq_hz=config.center_frequency_hz - config.band_hz / 2 + (j + 0.5) * sub_band_hz,
            sinr_signalled_db=signalled,
            sinr_predicted_db=predicted,
        ))
    return records


def _scope(scenario: Scenario) -> StreamScope:
    return StreamScope.MMIMO_MOVING if scenario == Scenario.MOVING else StreamScope.MMIMO_STATIONARY


def mmimo_run(
    scenario: Scenario,
    config: MmimoConfig,
    model: GradientModel,
    streams: RandomStreams
) -> MmimoResult:
    """
    SINR records per (sub-band, block, user) for a precoded multi-user link.

    Args:
        scenario: stationary or moving receivers
        config: array, band plan, mobility and payload settings
        model: gradient model used for the EVM-based prediction
        streams: random stream factory

    Returns:
        MmimoResult
    """
    scenario = Scenario(scenario)
    if config.blocks < 1:
        raise InvalidArgumentError("At least one block is required", details={"blocks": config.blocks})
    sub_band_layout(config, config.sub_band_hz)
    scope = _scope(scenario)
    logger.info(
        f"mMIMO {scenario.value}: {config.n_tx}x{config.n_users}, {config.n_carriers} carriers, "
        f"{config.blocks} blocks, CSI lag {config.csi_delay_blocks}"
    )

    channel = build_channel(config, streams, (scope,), config.blocks + config.csi_delay_blocks)
    power = reference_power(build_constellation(config.qam_order), model.normalization)

    def unit(block: int) -> List[CarrierStatistics]:
        return block_statistics(config, channel, block, model, streams, (scope, block))

    per_block = ordered_map(unit, range(config.blocks), config.workers)
    records, leakage = [], []
    for stats in per_block:
        leakage.append([s.leakage_db for s in stats])
        for s in stats:
            records.extend(aggregate_records(s, config, config.sub_band_hz, model, power))

    unbounded = sum(r.unbounded for r in records)
    if unbounded:
        logger.warning(f"{unbounded} record(s) with zero EVM excluded from statistics")
    logger.info(f"mMIMO {scenario.value}: {len(records)} records")
    return MmimoResult(scenario=scenario, config=config, records=records, leakage_db=leakage)


def bandwidth_sweep(
    sub_band_list_hz: Sequence[float],
    config: MmimoConfig,
    model: GradientModel,
    streams: RandomStreams,
    realizations: int,
    scenario: Scenario = Scenario.STATIONARY
) -> SweepResult:
    """
    Prediction-error statistics against sub-band width at fixed carrier spacing.

    Each realization draws an independent channel and simulates one block;
    the same per-carrier statistics are aggregated at every width.
    """
    if realizations < 1:
        raise InvalidArgumentError("At least one realization is required", details={"realizations": realizations})
    widths = [float(w) for w in sub_band_list_hz]
    layouts = [sub_band_layout(config, w) for w in widths]
    power = reference_power(build_constellation(config.qam_order), model.normalization)
    scope = _scope(Scenario(scenario))
    logger.info(f"Bandwidth sweep over {len(widths)} widths, {realizations} realizations")

    def unit(r: int) -> List[CarrierStatistics]:
        key = (StreamScope.SWEEP, scope, r)
        channel = build_channel(config, streams, key, 1 + config.csi_delay_blocks)
        return block_statistics(config, channel, 0, model, streams, key)

    per_realization = ordered_map(unit, range(realizations), config.workers)
    points = []
    for width, (per_band, _) in zip(widths, layouts):
        errors = [
            rec.prediction_error_db
            for stats in per_realization
            for s in stats
            for rec in aggregate_records(s, config, width, model, power)
            if not rec.unbounded
        ]
        points.append(summarize_errors(width, errors, carriers=per_band, tolerance_db=MMIMO_TOLERANCE_DB))
        logger.debug(f"Sub-band {width / 1e6:g} MHz: std {points[-1].std_error_db:.3f} dB")
    return SweepResult(parameter="sub_band_hz", points=points)

