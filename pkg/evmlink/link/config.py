"""Configuration and reference constants for the link-level simulation."""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import List, Optional, Tuple


# Waveform
SUPPORTED_QAM_ORDERS: Tuple[int, ...] = (4, 8, 16, 32, 64, 128, 256, 512)
SQUARE_QAM_ORDERS: Tuple[int, ...] = (4, 16, 64, 256)
MAX_INTERFERERS = 3
DEFAULT_CARRIERS = 1200
DEFAULT_FRAMES = 20
DEFAULT_SINR_GRID_DB: Tuple[float, ...] = tuple(float(s) for s in range(-5, 21))
DECISION_CHUNK = 4096  # symbols per nearest-point distance block
EVM_REFERENCE_BITS = 6  # bit-energy EVM is scaled to a 64-QAM symbol

# Array and band plan
DEFAULT_N_TX = 32
DEFAULT_N_USERS = 3
DEFAULT_BAND_HZ = 120e6
DEFAULT_SUB_BAND_HZ = 2e6
DEFAULT_CARRIERS_PER_SUB_BAND = 120
DEFAULT_CENTER_FREQUENCY_HZ = 2.4e9
DEFAULT_SUB_BAND_LIST_HZ: Tuple[float, ...] = (1e6, 2e6, 5e6, 10e6, 20e6, 40e6, 60e6, 120e6)

# Propagation
DEFAULT_DOPPLER_HZ = 8.89
DEFAULT_BLOCK_PERIOD_S = 0.03656
DEFAULT_RMS_DELAY_SPREAD_S = 100e-9
DEFAULT_N_TAPS = 8
DEFAULT_TAP_SPACING_S = 15e-9
DEFAULT_CO_LOCATED_CORRELATION = 0.95

# Precoding
CONDITION_NUMBER_LIMIT = 1e8

# Studies
PREDICTION_TOLERANCE_DB = 0.5
MMIMO_TOLERANCE_DB = 2.0
DEFAULT_ITERATION_TRIALS = 20
DEFAULT_SWEEP_REALIZATIONS = 200
DEFAULT_SWEEP_N_TX = 12  # transmit antennas when a sweep run does not set n_tx
DEFAULT_REPEAT_BLOCKS = 500


class EvmMode(str, Enum):
    """Reference symbols used for the EVM error vector."""
    DATA_AIDED = "data-aided"
    DECISION_DIRECTED = "decision-directed"


class EvmAveraging(str, Enum):
    """How error power is combined over carriers and frames."""
    POOLED = "pooled"
    PER_CARRIER = "per-carrier"


class EvmNormalization(str, Enum):
    """Reference power the error power is divided by."""
    AVERAGE_POWER = "average-power"
    PEAK_POWER = "peak-power"
    BIT_ENERGY = "bit-energy"


class Scenario(str, Enum):
    """Receiver placement scenarios for the multi-user runs."""
    STATIONARY = "stationary"
    MOVING = "moving"


class StreamScope(IntEnum):
    """First spawn-key index: which driver owns a random stream."""
    FIT = 1
    ITERATION = 2
    MMIMO_STATIONARY = 3
    MMIMO_MOVING = 4
    REPEATABILITY = 5
    SWEEP = 6
    TEST = 9


class StreamRole(IntEnum):
    """Last spawn-key index: what a random stream is used for."""
    WANTED = 0
    INTERFERER = 1
    NOISE = 2
    CHANNEL = 3
    MOBILITY = 4
    CORRELATION = 5


@dataclass
class FitConfig:
    """Configuration for gradient calibration on the flat channel."""
    sinr_grid_db: List[float] = field(default_factory=lambda: list(DEFAULT_SINR_GRID_DB))
    carriers: int = DEFAULT_CARRIERS
    frames: int = DEFAULT_FRAMES
    seeds: int = 4
    snr_db: Optional[float] = None  # None: top of the SINR grid
    evm_mode: EvmMode = EvmMode.DATA_AIDED
    averaging: EvmAveraging = EvmAveraging.POOLED
    normalization: EvmNormalization = EvmNormalization.BIT_ENERGY

    @property
    def resolved_snr_db(self) -> float:
        return self.snr_db if self.snr_db is not None else max(self.sinr_grid_db)


@dataclass
class MmimoConfig:
    """Configuration for zero-forcing multi-user runs over synthetic channels."""
    n_tx: int = DEFAULT_N_TX
    n_users: int = DEFAULT_N_USERS
    band_hz: float = DEFAULT_BAND_HZ
    sub_band_hz: float = DEFAULT_SUB_BAND_HZ
    carriers_per_sub_band: int = DEFAULT_CARRIERS_PER_SUB_BAND
    frames: int = DEFAULT_FRAMES
    blocks: int = 20
    qam_order: int = 64
    snr_db: float = 0.0
    doppler_hz: float = 0.0
    block_period_s: float = DEFAULT_BLOCK_PERIOD_S
    user_correlation: float = 0.0
    csi_delay_blocks: int = 0
    moving_users: List[int] = field(default_factory=list)
    rms_delay_spread_s: float = DEFAULT_RMS_DELAY_SPREAD_S
    n_taps: int = DEFAULT_N_TAPS
    flat_channel: bool = False
    center_frequency_hz: float = DEFAULT_CENTER_FREQUENCY_HZ
    workers: int = 1

    @property
    def carrier_spacing_hz(self) -> float:
        return self.sub_band_hz / self.carriers_per_sub_band

    @property
    def n_carriers(self) -> int:
        return int(round(self.band_hz / self.carrier_spacing_hz))

    @property
    def noise_variance(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    @classmethod
    def for_scenario(cls, scenario: Scenario, **overrides) -> "MmimoConfig":
        """Reference defaults for a scenario; explicit overrides win."""
        if scenario == Scenario.MOVING:
            defaults = dict(
                doppler_hz=DEFAULT_DOPPLER_HZ,
                csi_delay_blocks=1,
                user_correlation=0.0,
                moving_users=[overrides.get("n_users", DEFAULT_N_USERS) - 1],
            )
        else:
            defaults = dict(
                doppler_hz=0.0,
                csi_delay_blocks=0,
                user_correlation=DEFAULT_CO_LOCATED_CORRELATION,
                moving_users=[],
            )
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)


@dataclass
class RepeatabilityConfig:
    """Configuration for the signalling-variance repeatability check."""
    blocks: int = DEFAULT_REPEAT_BLOCKS
    frames: int = DEFAULT_FRAMES
    carriers: int = DEFAULT_CARRIERS_PER_SUB_BAND
    carrier_spacing_hz: float = DEFAULT_SUB_BAND_HZ / DEFAULT_CARRIERS_PER_SUB_BAND
    qam_order: int = 64
    noise_variance: float = 0.0
    deterministic_payload: bool = False
    rms_delay_spread_s: float = DEFAULT_RMS_DELAY_SPREAD_S
    n_taps: int = DEFAULT_N_TAPS
