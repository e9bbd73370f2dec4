"""BER, RMS EVM, signalled SINR and the EVM-based SINR predictor."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .config import (
    EVM_REFERENCE_BITS,
    MAX_INTERFERERS,
    SUPPORTED_QAM_ORDERS,
    EvmAveraging,
    EvmMode,
    EvmNormalization,
)
from .exceptions import DegenerateInputError, InvalidArgumentError, UnboundedPredictionError
from .waveform import Constellation, SymbolGrid, demodulate_hard, hard_decision


logger = logging.getLogger(__name__)


# Published gradients per QAM order, for 1, 2 and 3 interferers
TABLE_I_GRADIENTS: Dict[int, Tuple[float, float, float]] = {
    8: (65.0, 77.0, 77.0),
    16: (73.0, 78.0, 78.0),
    32: (88.0, 90.0, 92.0),
    64: (107.0, 107.0, 107.0),
    128: (115.0, 115.0, 115.0),
    256: (129.0, 129.0, 129.0),
    512: (140.0, 140.0, 140.0),
}


@dataclass
class GradientModel:
    """Log-linear law EVM(%) = A / sqrt(SINR) and the EVM convention it was fitted with."""
    a_value: float
    qam_order: int = 64
    n_interferers: int = 1
    evm_mode: EvmMode = EvmMode.DATA_AIDED
    averaging: EvmAveraging = EvmAveraging.POOLED
    normalization: EvmNormalization = EvmNormalization.BIT_ENERGY

    def __post_init__(self):
        if not (math.isfinite(self.a_value) and self.a_value > 0):
            raise InvalidArgumentError("Gradient A must be positive", details={"a_value": self.a_value})
        if self.qam_order not in SUPPORTED_QAM_ORDERS:
            raise InvalidArgumentError(f"Unsupported QAM order {self.qam_order}")
        if not 0 <= self.n_interferers <= MAX_INTERFERERS:
            raise InvalidArgumentError(
                "Interferer count out of range",
                details={"n_interferers": self.n_interferers}
            )
        self.evm_mode = EvmMode(self.evm_mode)
        self.averaging = EvmAveraging(self.averaging)
        self.normalization = EvmNormalization(self.normalization)

    @classmethod
    def from_table(cls, qam_order: int, n_interferers: int = 1) -> "GradientModel":
        if qam_order not in TABLE_I_GRADIENTS:
            raise InvalidArgumentError(
                f"No published gradient for {qam_order}-QAM",
                details={"available": sorted(TABLE_I_GRADIENTS)}
            )
        if not 1 <= n_interferers <= MAX_INTERFERERS:
            raise InvalidArgumentError(
                "Published gradients cover 1 to 3 interferers",
                details={"n_interferers": n_interferers}
            )
        return cls(
            a_value=TABLE_I_GRADIENTS[qam_order][n_interferers - 1],
            qam_order=qam_order,
            n_interferers=n_interferers,
        )


@dataclass
class EvmEstimate:
    rms_percent: float
    mode: EvmMode
    n_carriers: int
    n_frames: int
    averaging: EvmAveraging = EvmAveraging.POOLED
    normalization: EvmNormalization = EvmNormalization.AVERAGE_POWER


@dataclass
class SinrRecord:
    """One signalled/predicted SINR pair for a (user, block, sub-band) cell."""
    user: int
    time_block: int
    sub_band_index: int
    center_freq_hz: float
    sinr_signalled_db: float
    sinr_predicted_db: float
    prediction_error_db: float = field(init=False)
    unbounded: bool = False

    def __post_init__(self):
        self.prediction_error_db = self.sinr_predicted_db - self.sinr_signalled_db
        if math.isinf(self.sinr_predicted_db):
            self.unbounded = True


def _as_matrix(received: np.ndarray) -> np.ndarray:
    received = np.asarray(received, dtype=complex)
    if received.ndim == 1:
        received = received[:, None]
    if received.ndim != 2:
        raise InvalidArgumentError("Expected a carriers x frames matrix", details={"shape": received.shape})
    return received


def ber(
    received: np.ndarray,
    reference_bits: Sequence[int],
    constellation: Constellation
) -> float:
    """Bit error ratio after hard-decision demodulation."""
    decided = demodulate_hard(received, constellation)
    reference = np.asarray(reference_bits, dtype=np.uint8).ravel()
    if decided.size != reference.size:
        raise InvalidArgumentError(
            "Reference bits do not match the received symbols",
            details={"received_bits": int(decided.size), "reference_bits": int(reference.size)}
        )
    if reference.size == 0:
        raise DegenerateInputError("No symbols to evaluate")
    return float(np.count_nonzero(decided != reference)) / reference.size


def error_terms(
    received: np.ndarray,
    constellation: Constellation,
    mode: EvmMode = EvmMode.DECISION_DIRECTED,
    reference: Optional[Union[np.ndarray, SymbolGrid]] = None
) -> np.ndarray:
    """
    Error power per carrier, summed over frames.

    Data-aided mode measures against ``reference`` (the transmitted
    symbols); decision-directed mode against the nearest constellation
    point of each received symbol.
    """
    received = _as_matrix(received)
    if received.size == 0:
        raise DegenerateInputError("No symbols to evaluate")

    if EvmMode(mode) == EvmMode.DATA_AIDED:
        if reference is None:
            raise InvalidArgumentError("Data-aided EVM needs the transmitted symbols")
        if isinstance(reference, SymbolGrid):
            reference = reference.data
        ref = _as_matrix(reference)
        if ref.shape != received.shape:
            raise InvalidArgumentError(
                "Reference shape differs from the received matrix",
                details={"received": received.shape, "reference": ref.shape}
            )
        if not np.any(np.abs(ref) > 0):
            raise DegenerateInputError("Reference symbols carry no power")
    else:
        ref = constellation.points[hard_decision(received, constellation)]

    return np.sum(np.abs(received - ref) ** 2, axis=1)


def reference_power(
    constellation: Constellation,
    normalization: EvmNormalization = EvmNormalization.AVERAGE_POWER
) -> float:
    """
    Power the EVM error is expressed against.

    Bit-energy referencing scales the average symbol power to a fixed
    ``EVM_REFERENCE_BITS`` per symbol, so the same error per bit reads as the
    same EVM whatever the order and A grows as sqrt(bits per symbol).
    """
    normalization = EvmNormalization(normalization)
    if normalization == EvmNormalization.PEAK_POWER:
        return constellation.peak_power
    if normalization == EvmNormalization.BIT_ENERGY:
        return constellation.average_power * EVM_REFERENCE_BITS / constellation.bits_per_symbol
    return constellation.average_power


def evm_from_errors(
    errors: np.ndarray,
    n_frames: int,
    constellation_power: float,
    averaging: EvmAveraging = EvmAveraging.POOLED
) -> float:
    """RMS EVM in percent from per-carrier error sums."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0 or n_frames < 1:
        raise DegenerateInputError("No symbols to evaluate")
    if EvmAveraging(averaging) == EvmAveraging.PER_CARRIER:
        return float(100.0 * np.mean(np.sqrt(errors / n_frames / constellation_power)))
    return float(100.0 * math.sqrt(errors.sum() / (errors.size * n_frames * constellation_power)))


def rms_evm(
    received: np.ndarray,
    constellation: Constellation,
    mode: EvmMode = EvmMode.DECISION_DIRECTED,
    reference: Optional[Union[np.ndarray, SymbolGrid]] = None,
    averaging: EvmAveraging = EvmAveraging.POOLED,
    normalization: EvmNormalization = EvmNormalization.AVERAGE_POWER
) -> EvmEstimate:
    """
    RMS error vector magnitude in percent.

    Error power is divided by a fixed property of the constellation rather
    than by the measured reference power, so a decision-directed estimate
    never exceeds the data-aided one.

    Args:
        received: carriers x frames equalised symbols
        constellation: point set the payload was drawn from
        mode: data-aided or decision-directed reference
        reference: transmitted symbols, required for data-aided mode
        averaging: pooled over the whole grid, or per carrier then averaged
        normalization: average power, peak power or bit-energy reference

    Returns:
        EvmEstimate
    """
    matrix = _as_matrix(received)
    errors = error_terms(matrix, constellation, mode, reference)
    power = reference_power(constellation, normalization)
    percent = evm_from_errors(errors, matrix.shape[1], power, averaging)
    return EvmEstimate(
        rms_percent=percent,
        mode=EvmMode(mode),
        n_carriers=matrix.shape[0],
        n_frames=matrix.shape[1],
        averaging=EvmAveraging(averaging),
        normalization=EvmNormalization(normalization),
    )


def carrier_variances(component: np.ndarray) -> np.ndarray:
    """Unbiased variance of each carrier's samples across frames."""
    component = _as_matrix(component)
    if component.shape[1] < 2:
        raise InvalidArgumentError(
            "Variance across frames needs at least two frames",
            details={"frames": component.shape[1]}
        )
    return np.var(component, axis=1, ddof=1)


def signalled_ratio_db(
    wanted_variance: float,
    interferer_variances: Sequence[float],
    noise_var: float
) -> float:
    """10 log10 of mean wanted variance over summed interferer variances plus noise."""
    denominator = float(np.sum(interferer_variances)) + noise_var
    if denominator <= 0:
        raise DegenerateInputError(
            "No interference or noise to form a ratio",
            details={"noise_var": noise_var}
        )
    if wanted_variance <= 0:
        return -math.inf
    return 10.0 * math.log10(wanted_variance / denominator)


def sinr_signalled(
    wanted: np.ndarray,
    interferers: Sequence[np.ndarray],
    noise_var: float
) -> float:
    """
    Signalled SINR in dB from separately observed components.

    Each component's variance is taken per carrier across frames and then
    averaged over carriers before the ratio is formed.
    """
    if noise_var < 0:
        raise InvalidArgumentError("Noise variance must be non-negative", details={"noise_var": noise_var})
    wanted = _as_matrix(wanted)
    wanted_mean = float(np.mean(carrier_variances(wanted)))
    interferer_means = []
    for component in interferers:
        component = _as_matrix(component)
        if component.shape[0] != wanted.shape[0]:
            raise InvalidArgumentError(
                "Interferer carrier count differs from the wanted component",
                details={"wanted": wanted.shape[0], "interferer": component.shape[0]}
            )
        interferer_means.append(float(np.mean(carrier_variances(component))))
    return signalled_ratio_db(wanted_mean, interferer_means, noise_var)


def sinr_predict(evm: Union[EvmEstimate, float], model: GradientModel) -> float:
    """Predicted SINR in dB, 20 log10(A / EVM)."""
    percent = evm.rms_percent if isinstance(evm, EvmEstimate) else float(evm)
    if percent < 0 or math.isnan(percent):
        raise InvalidArgumentError("EVM must be non-negative", details={"rms_percent": percent})
    if percent == 0:
        raise UnboundedPredictionError("Zero EVM predicts an unbounded SINR")
    return 20.0 * math.log10(model.a_value / percent)


def evm_from_sinr(sinr_db, model: Union[GradientModel, float]):
    """Expected EVM in percent at a given SINR, A / sqrt(SINR linear)."""
    a_value = model.a_value if isinstance(model, GradientModel) else float(model)
    return a_value * np.power(10.0, -np.asarray(sinr_db, dtype=float) / 20.0)


def q_function(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def theoretical_ber(qam_order: int, snr_db):
    """
    Gray-coded QAM bit error rate over AWGN.

    Nearest-neighbour approximation for square orders, exact for QPSK;
    non-square orders use the same expression as an estimate.
    """
    if qam_order not in SUPPORTED_QAM_ORDERS:
        raise InvalidArgumentError(f"Unsupported QAM order {qam_order}")
    gamma = np.power(10.0, np.asarray(snr_db, dtype=float) / 10.0)
    bits = math.log2(qam_order)
    factor = (4.0 / bits) * (1.0 - 1.0 / math.sqrt(qam_order))
    return factor * q_function(np.sqrt(3.0 * gamma / (qam_order - 1)))
