"""Flat-channel calibration studies: gradient fits, iteration count and repeatability."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from evmlink.link import (
    DelayProfile,
    DegenerateInputError,
    EvmAveraging,
    EvmMode,
    EvmNormalization,
    GradientModel,
    InvalidArgumentError,
    MixSpec,
    RandomStreams,
    RepeatabilityConfig,
    StreamRole,
    StreamScope,
    UnboundedPredictionError,
    ber,
    build_constellation,
    carrier_variances,
    mix,
    modulate,
    random_bits,
    random_grid,
    rms_evm,
    signalled_ratio_db,
    sinr_predict,
    sinr_signalled,
    tdl_response,
)
from evmlink.link.config import PREDICTION_TOLERANCE_DB
from evmlink.utils.parallel import ordered_map


logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    """Fitted gradient for one (QAM order, interferer count) pair."""
    qam_order: int
    n_interferers: int
    model: Optional[GradientModel]
    residual_rms_db: Optional[float]
    sinr_grid_db: List[float]
    evm_curve_percent: List[float]
    ber_curve: List[float] = field(default_factory=list)
    modelable: bool = True

    @property
    def a_value(self) -> Optional[float]:
        return self.model.a_value if self.model else None


@dataclass
class SweepPoint:
    """Prediction-error statistics at one parameter value."""
    value: float
    mean_error_db: float
    std_error_db: float
    max_abs_error_db: float
    within_fraction: float
    n_records: int
    carriers: int = 0
    samples: Optional[List[float]] = None


@dataclass
class SweepResult:
    parameter: str
    points: List[SweepPoint]

    def point(self, value: float) -> SweepPoint:
        for p in self.points:
            if math.isclose(p.value, value):
                return p
        raise KeyError(value)


@dataclass
class RepeatabilityResult:
    """Block-to-block spread of the signalled variance through a fixed channel."""
    blocks: int
    frames: int
    carriers: int
    wanted_variance: List[float]
    interferer_variance: List[float]
    sinr_signalled_db: List[float]
    relative_spread: float
    implied_spread_db: float
    empirical_spread_db: float


def summarize_errors(
    value: float,
    errors: Sequence[float],
    carriers: int = 0,
    tolerance_db: float = PREDICTION_TOLERANCE_DB,
    keep_samples: bool = False
) -> SweepPoint:
    errors = np.asarray(errors, dtype=float)
    errors = errors[np.isfinite(errors)]
    if errors.size == 0:
        raise DegenerateInputError("No finite prediction errors to summarise", details={"value": value})
    return SweepPoint(
        value=float(value),
        mean_error_db=float(np.mean(errors)),
        std_error_db=float(np.std(errors, ddof=1)) if errors.size > 1 else 0.0,
        max_abs_error_db=float(np.max(np.abs(errors))),
        within_fraction=float(np.mean(np.abs(errors) <= tolerance_db)),
        n_records=int(errors.size),
        carriers=carriers,
        samples=errors.tolist() if keep_samples else None,
    )


def fit_log_linear(sinr_grid_db: Sequence[float], evm_percent: Sequence[float]) -> Tuple[float, float]:
    """
    Least-squares intercept of log10(EVM) = log10(A) - SINR_dB / 20.

    Returns:
        (A, residual RMS in dB of the predicted SINR over the grid)
    """
    sinr = np.asarray(sinr_grid_db, dtype=float)
    evm = np.asarray(evm_percent, dtype=float)
    if sinr.size < 2 or sinr.shape != evm.shape:
        raise InvalidArgumentError(
            "Gradient fit needs at least two matching grid points",
            details={"grid": int(sinr.size), "curve": int(evm.size)}
        )
    if np.any(evm <= 0):
        raise DegenerateInputError("EVM curve contains non-positive values")

    log_a = float(np.mean(np.log10(evm) + sinr / 20.0))
    a_value = 10.0 ** log_a
    residual = 20.0 * np.log10(a_value / evm) - sinr
    return a_value, float(np.sqrt(np.mean(residual ** 2)))


def _mix_at(
    streams: RandomStreams,
    key: Tuple[int, ...],
    qam_order: int,
    n_interferers: int,
    sinr_db: float,
    snr_db: float,
    carriers: int,
    frames: int
):
    constellation = build_constellation(qam_order)
    wanted = random_grid(constellation, carriers, frames, streams.generator(*key, StreamRole.WANTED))
    interferers = [
        random_grid(constellation, carriers, frames, streams.generator(*key, StreamRole.INTERFERER, j))
        for j in range(n_interferers)
    ]
    spec = MixSpec(sinr_target=sinr_db, snr=snr_db, n_interferers=n_interferers)
    result = mix(wanted, interferers, spec, streams.generator(*key, StreamRole.NOISE))
    return constellation, wanted, result


def fit_gradient(
    qam_order: int,
    n_interferers: int,
    sinr_grid_db: Sequence[float],
    frames: int,
    carriers: int,
    seeds: int,
    streams: RandomStreams,
    snr_db: Optional[float] = None,
    evm_mode: EvmMode = EvmMode.DATA_AIDED,
    averaging: EvmAveraging = EvmAveraging.POOLED,
    normalization: EvmNormalization = EvmNormalization.BIT_ENERGY,
    workers: int = 1
) -> FitResult:
    """
    Fit the gradient A for one QAM order on the flat channel.

    Every grid point is simulated ``seeds`` times; EVM and BER are averaged
    over seeds before the intercept-only fit. 4-QAM is simulated but not
    fitted, its EVM curve is nearly constant.

    Args:
        qam_order: constellation order
        n_interferers: co-channel interferers, 0 to 3
        sinr_grid_db: operating points, at least two
        frames: OFDM frames per grid point, at least two
        carriers: carriers per frame
        seeds: independent repetitions per grid point
        streams: random stream factory
        snr_db: receiver SNR, defaults to the top of the grid
        evm_mode: EVM reference convention
        averaging: EVM averaging over carriers
        normalization: EVM reference power
        workers: parallel work units

    Returns:
        FitResult
    """
    grid = [float(s) for s in sinr_grid_db]
    if len(grid) < 2:
        raise InvalidArgumentError("Gradient fit needs at least two grid points", details={"grid": grid})
    if frames < 2:
        raise InvalidArgumentError("Gradient fit needs at least two frames", details={"frames": frames})
    if seeds < 1:
        raise InvalidArgumentError("At least one seed is required", details={"seeds": seeds})
    snr = max(grid) if snr_db is None else float(snr_db)

    logger.info(
        f"Fitting gradient for {qam_order}-QAM, {n_interferers} interferer(s), "
        f"{len(grid)} points x {seeds} seeds "
        f"({EvmMode(evm_mode).value}, {EvmNormalization(normalization).value})"
    )

    def unit(job: Tuple[int, int]) -> Tuple[float, float]:
        i, seed = job
        key = (StreamScope.FIT, qam_order, n_interferers, i, seed)
        constellation, wanted, result = _mix_at(
            streams, key, qam_order, n_interferers, grid[i], snr, carriers, frames
        )
        evm = rms_evm(
            result.received, constellation, evm_mode,
            reference=wanted, averaging=averaging, normalization=normalization,
        )
        return evm.rms_percent, ber(result.received, wanted.bits, constellation)

    jobs = [(i, s) for i in range(len(grid)) for s in range(seeds)]
    outcomes = np.asarray(ordered_map(unit, jobs, workers)).reshape(len(grid), seeds, 2)
    evm_curve = outcomes[:, :, 0].mean(axis=1).tolist()
    ber_curve = outcomes[:, :, 1].mean(axis=1).tolist()

    if qam_order == 4:
        logger.info("4-QAM EVM is not modelled by the log-linear law; returning curve only")
        return FitResult(
            qam_order=qam_order,
            n_interferers=n_interferers,
            model=None,
            residual_rms_db=None,
            sinr_grid_db=grid,
            evm_curve_percent=evm_curve,
            ber_curve=ber_curve,
            modelable=False,
        )

    a_value, residual = fit_log_linear(grid, evm_curve)
    logger.info(f"{qam_order}-QAM/{n_interferers}: A={a_value:.2f}, residual {residual:.3f} dB")
    return FitResult(
        qam_order=qam_order,
        n_interferers=n_interferers,
        model=GradientModel(
            a_value=a_value,
            qam_order=qam_order,
            n_interferers=n_interferers,
            evm_mode=evm_mode,
            averaging=averaging,
            normalization=normalization,
        ),
        residual_rms_db=residual,
        sinr_grid_db=grid,
        evm_curve_percent=evm_curve,
        ber_curve=ber_curve,
    )


def qam_compare(
    orders: Sequence[int],
    interferer_counts: Sequence[int],
    sinr_grid_db: Sequence[float],
    frames: int,
    carriers: int,
    seeds: int,
    streams: RandomStreams,
    snr_db: Optional[float] = None,
    evm_mode: EvmMode = EvmMode.DATA_AIDED,
    averaging: EvmAveraging = EvmAveraging.POOLED,
    normalization: EvmNormalization = EvmNormalization.BIT_ENERGY,
    workers: int = 1
) -> List[FitResult]:
    """Gradient fits for every (order, interferer count) pair, order-major."""
    return [
        fit_gradient(
            order, count, sinr_grid_db, frames, carriers, seeds, streams,
            snr_db=snr_db, evm_mode=evm_mode, averaging=averaging,
            normalization=normalization, workers=workers,
        )
        for order in orders
        for count in interferer_counts
    ]


def iteration_study(
    frames_list: Sequence[int],
    sinr_grid_db: Sequence[float],
    model: GradientModel,
    trials: int,
    streams: RandomStreams,
    carriers: int = 1200,
    snr_db: Optional[float] = None,
    n_interferers: Optional[int] = None,
    workers: int = 1,
    keep_samples: bool = False
) -> SweepResult:
    """
    Prediction error against the number of frames averaged per estimate.

    Each trial mixes a fresh payload at every grid SINR, predicts SINR from
    EVM in the model's convention and compares it with the signalled SINR of
    the same components.
    """
    if not frames_list:
        raise InvalidArgumentError("frames_list must not be empty")
    if trials < 1:
        raise InvalidArgumentError("At least one trial is required", details={"trials": trials})
    grid = [float(s) for s in sinr_grid_db]
    snr = max(grid) if snr_db is None else float(snr_db)
    interferers = model.n_interferers if n_interferers is None else n_interferers

    points = []
    for frames in frames_list:
        if frames < 2:
            raise InvalidArgumentError("Signalled SINR needs at least two frames", details={"frames": frames})
        logger.info(f"Iteration study: {frames} frames, {trials} trials over {len(grid)} SINR points")

        def unit(job: Tuple[int, int]) -> float:
            i, trial = job
            key = (StreamScope.ITERATION, frames, i, trial)
            constellation, wanted, result = _mix_at(
                streams, key, model.qam_order, interferers, grid[i], snr, carriers, frames
            )
            evm = rms_evm(
                result.received, constellation, model.evm_mode,
                reference=wanted, averaging=model.averaging, normalization=model.normalization,
            )
            signalled = sinr_signalled(result.wanted, result.interferers, result.noise_variance)
            try:
                return sinr_predict(evm, model) - signalled
            except UnboundedPredictionError:
                logger.warning(f"Zero EVM at {grid[i]} dB, trial {trial}; record skipped")
                return math.nan

        jobs = [(i, t) for i in range(len(grid)) for t in range(trials)]
        errors = ordered_map(unit, jobs, workers)
        points.append(summarize_errors(frames, errors, carriers=carriers, keep_samples=keep_samples))

    return SweepResult(parameter="frames", points=points)


def signalling_repeatability(config: RepeatabilityConfig, streams: RandomStreams) -> RepeatabilityResult:
    """
    Spread of the signalled wanted variance over repeated payload blocks.

    The wanted signal and one interferer each pass a fixed frequency-selective
    channel; only the payloads change from block to block.
    """
    if config.blocks < 2:
        raise InvalidArgumentError("Repeatability needs at least two blocks", details={"blocks": config.blocks})
    if config.frames < 2:
        raise InvalidArgumentError("Repeatability needs at least two frames", details={"frames": config.frames})

    constellation = build_constellation(config.qam_order)
    profile = DelayProfile.exponential(n_taps=config.n_taps, rms_delay_spread=config.rms_delay_spread_s)
    band = config.carriers * config.carrier_spacing_hz
    scope = StreamScope.REPEATABILITY
    channel = tdl_response(profile, band, config.carrier_spacing_hz, 1, 2, streams.generator(scope, StreamRole.CHANNEL))
    gains = channel.block_gains(0)[:, 0, :]
    h_wanted, h_interferer = gains[:, 0:1], gains[:, 1:2]

    n_bits = config.carriers * config.frames * constellation.bits_per_symbol
    wanted_var, interferer_var, sinr = [], [], []
    for block in range(config.blocks):
        payload_key = 0 if config.deterministic_payload else block
        bits = random_bits(n_bits, streams.generator(scope, payload_key, StreamRole.WANTED))
        wanted = h_wanted * modulate(bits, constellation, config.carriers, config.frames).data
        other = random_grid(
            constellation, config.carriers, config.frames,
            streams.generator(scope, block, StreamRole.INTERFERER),
        )
        interferer = h_interferer * other.data

        w = float(np.mean(carrier_variances(wanted)))
        i = float(np.mean(carrier_variances(interferer)))
        wanted_var.append(w)
        interferer_var.append(i)
        sinr.append(signalled_ratio_db(w, [i], config.noise_variance))

    values = np.asarray(wanted_var)
    delta = float(np.std(values, ddof=1) / np.mean(values))
    implied = 10.0 * math.log10((1.0 + delta) / (1.0 - delta)) if delta < 1 else math.inf
    empirical = float(np.std(sinr, ddof=1))
    logger.info(
        f"Repeatability over {config.blocks} blocks: spread {100 * delta:.2f}%, "
        f"implied {implied:.3f} dB, empirical {empirical:.3f} dB"
    )
    return RepeatabilityResult(
        blocks=config.blocks,
        frames=config.frames,
        carriers=config.carriers,
        wanted_variance=wanted_var,
        interferer_variance=interferer_var,
        sinr_signalled_db=sinr,
        relative_spread=delta,
        implied_spread_db=implied,
        empirical_spread_db=empirical,
    )
