"""Run configuration schema."""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from evmlink.link.config import (
    DEFAULT_BAND_HZ,
    DEFAULT_BLOCK_PERIOD_S,
    DEFAULT_CARRIERS,
    DEFAULT_CARRIERS_PER_SUB_BAND,
    DEFAULT_CENTER_FREQUENCY_HZ,
    DEFAULT_FRAMES,
    DEFAULT_ITERATION_TRIALS,
    DEFAULT_N_TAPS,
    DEFAULT_N_TX,
    DEFAULT_N_USERS,
    DEFAULT_REPEAT_BLOCKS,
    DEFAULT_RMS_DELAY_SPREAD_S,
    DEFAULT_SINR_GRID_DB,
    DEFAULT_SUB_BAND_HZ,
    DEFAULT_SUB_BAND_LIST_HZ,
    DEFAULT_SWEEP_N_TX,
    DEFAULT_SWEEP_REALIZATIONS,
    MAX_INTERFERERS,
    SUPPORTED_QAM_ORDERS,
    EvmAveraging,
    EvmMode,
    EvmNormalization,
    FitConfig,
    MmimoConfig,
    RepeatabilityConfig,
    Scenario,
)
from evmlink.link.channel import MobilityProfile, carrier_count
from evmlink.link.exceptions import InvalidArgumentError


class Study(str, Enum):
    """Studies the command line can run."""
    FIT_A = "fit-a"
    QAM_COMPARE = "qam-compare"
    ITERATION_STUDY = "iteration-study"
    MMIMO = "mmimo"
    REPEATABILITY = "repeatability"
    BANDWIDTH_SWEEP = "bandwidth-sweep"


# Defaults that differ from the field defaults for one study only
STUDY_DEFAULTS: Dict[Study, Dict[str, Any]] = {
    Study.ITERATION_STUDY: {"evm_averaging": EvmAveraging.PER_CARRIER},
    Study.BANDWIDTH_SWEEP: {"n_tx": DEFAULT_SWEEP_N_TX},
}

# Studies that mix payloads at the SINR grid whatever gradient_a says
_MIXING_STUDIES = {Study.FIT_A, Study.QAM_COMPARE, Study.ITERATION_STUDY}


class FieldConflict(ValueError):
    """A cross-field check failure, attributed to one field."""

    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


def _check_order(order: int) -> int:
    if order not in SUPPORTED_QAM_ORDERS:
        raise ValueError(f"unsupported QAM order {order}, expected one of {list(SUPPORTED_QAM_ORDERS)}")
    return order


class RunConfig(BaseModel):
    """Fully resolved parameters of one study run."""

    study: Study = Field(..., description="Study to run")
    seed: int = Field(default=42, ge=0, le=2 ** 64 - 1, description="Master seed")
    workers: int = Field(default=1, ge=1, le=256, description="Parallel work units")

    # Flat-channel calibration
    qam_order: int = Field(default=64, description="QAM order")
    n_interferers: int = Field(default=1, ge=0, le=MAX_INTERFERERS, description="Co-channel interferers")
    carriers: int = Field(default=DEFAULT_CARRIERS, ge=1, description="Carriers per frame")
    frames: int = Field(default=DEFAULT_FRAMES, ge=2, description="OFDM frames per estimate")
    sinr_grid_db: List[float] = Field(
        default_factory=lambda: list(DEFAULT_SINR_GRID_DB),
        min_length=2,
        description="SINR operating points in dB"
    )
    snr_db: Optional[float] = Field(None, description="Receiver SNR in dB; defaults to the top of the grid")
    seeds: int = Field(default=4, ge=1, le=1000, description="Repetitions per grid point")
    evm_mode: EvmMode = Field(default=EvmMode.DATA_AIDED, description="EVM reference convention")
    evm_averaging: EvmAveraging = Field(
        default=EvmAveraging.POOLED,
        description="EVM averaging over carriers; per-carrier for the iteration study"
    )
    evm_normalization: EvmNormalization = Field(
        default=EvmNormalization.BIT_ENERGY,
        description="Reference power EVM is expressed against"
    )
    qam_orders: List[int] = Field(default_factory=lambda: list(SUPPORTED_QAM_ORDERS), min_length=1)
    interferer_counts: List[int] = Field(default_factory=lambda: [1, 2, 3], min_length=1)
    frames_list: List[int] = Field(default_factory=lambda: [2, 5, 10, 20, 50], min_length=1)
    trials: int = Field(default=DEFAULT_ITERATION_TRIALS, ge=1, description="Trials per grid point")
    gradient_a: Optional[float] = Field(None, gt=0, description="Fixed gradient A; fitted in-run when unset")

    # Multi-user link
    scenario: Scenario = Field(default=Scenario.STATIONARY)
    n_tx: int = Field(default=DEFAULT_N_TX, ge=1, le=1024, description="Transmit antennas; 12 for the sweep")
    n_users: int = Field(default=DEFAULT_N_USERS, ge=1)
    band_hz: float = Field(default=DEFAULT_BAND_HZ, gt=0)
    carriers_per_sub_band: int = Field(default=DEFAULT_CARRIERS_PER_SUB_BAND, ge=2)
    sub_band_hz: float = Field(default=DEFAULT_SUB_BAND_HZ, gt=0)
    sub_band_list_hz: List[float] = Field(default_factory=lambda: list(DEFAULT_SUB_BAND_LIST_HZ), min_length=1)
    blocks: int = Field(default=20, ge=1)
    realizations: int = Field(default=DEFAULT_SWEEP_REALIZATIONS, ge=2)
    link_snr_db: float = Field(default=0.0, description="Per-user transmit SNR in dB")
    block_period_s: float = Field(default=DEFAULT_BLOCK_PERIOD_S, gt=0)
    doppler_hz: Optional[float] = Field(None, ge=0, description="Scenario default when unset")
    user_correlation: Optional[float] = Field(None, ge=0, le=1, description="Scenario default when unset")
    csi_delay_blocks: Optional[int] = Field(None, ge=0, description="Scenario default when unset")
    rms_delay_spread_s: float = Field(default=DEFAULT_RMS_DELAY_SPREAD_S, ge=0)
    n_taps: int = Field(default=DEFAULT_N_TAPS, ge=1, le=64)
    flat_channel: bool = False
    center_frequency_hz: float = Field(default=DEFAULT_CENTER_FREQUENCY_HZ, gt=0)

    # Repeatability
    repeat_blocks: int = Field(default=DEFAULT_REPEAT_BLOCKS, ge=2)
    repeat_carriers: int = Field(default=DEFAULT_CARRIERS_PER_SUB_BAND, ge=1)

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    @field_validator("qam_order")
    @classmethod
    def validate_qam_order(cls, v: int) -> int:
        return _check_order(v)

    @field_validator("qam_orders")
    @classmethod
    def validate_qam_orders(cls, v: List[int]) -> List[int]:
        return [_check_order(order) for order in v]

    @field_validator("interferer_counts")
    @classmethod
    def validate_interferer_counts(cls, v: List[int]) -> List[int]:
        for count in v:
            if not 0 <= count <= MAX_INTERFERERS:
                raise ValueError(f"interferer count {count} outside 0..{MAX_INTERFERERS}")
        return v

    @field_validator("frames_list")
    @classmethod
    def validate_frames_list(cls, v: List[int]) -> List[int]:
        if any(f < 2 for f in v):
            raise ValueError("every frame count must be at least 2")
        return v

    @model_validator(mode="before")
    @classmethod
    def apply_study_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        try:
            study = Study(data.get("study"))
        except ValueError:
            return data
        return {**STUDY_DEFAULTS.get(study, {}), **data}

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        """Cross-field checks; these also cover values left at their defaults."""
        if self.n_users > self.n_tx:
            raise FieldConflict("n_users", f"{self.n_users} users exceed {self.n_tx} transmit antennas")

        study = Study(self.study)
        multi_user = study in (Study.MMIMO, Study.BANDWIDTH_SWEEP)
        if study in _MIXING_STUDIES or (multi_user and self.gradient_a is None):
            if study == Study.QAM_COMPARE:
                for count in self.interferer_counts:
                    self._check_grid(count, "interferer_counts")
            else:
                self._check_grid(self.n_interferers, "n_interferers")

        if multi_user:
            spacing = self.sub_band_hz / self.carriers_per_sub_band
            self._check_divides(self.sub_band_hz, spacing, "sub_band_hz")
            if study == Study.BANDWIDTH_SWEEP:
                for width in self.sub_band_list_hz:
                    self._check_divides(width, spacing, "sub_band_list_hz")
            doppler = self.mmimo_config().doppler_hz
            try:
                MobilityProfile(doppler_hz=doppler, block_period_s=self.block_period_s)
            except InvalidArgumentError as e:
                raise FieldConflict("doppler_hz", e.message)
        return self

    def _check_grid(self, interferers: int, key: str) -> None:
        grid = self.sinr_grid_db
        if interferers == 0:
            snr = self.fit_config().resolved_snr_db
            if any(abs(s - snr) > 1e-9 for s in grid):
                raise FieldConflict(key, f"without interferers every grid SINR must equal the SNR ({snr} dB)")
        elif self.snr_db is not None and max(grid) > self.snr_db:
            raise FieldConflict("snr_db", f"SNR {self.snr_db} dB is below the top of the SINR grid ({max(grid)} dB)")

    def _check_divides(self, width: float, spacing: float, key: str) -> None:
        try:
            per_band = carrier_count(width, spacing)
            total = carrier_count(self.band_hz, spacing)
        except InvalidArgumentError as e:
            raise FieldConflict(key, e.message)
        if total % per_band:
            raise FieldConflict(key, f"sub-band {width:g} Hz does not divide the {self.band_hz:g} Hz band")

    def fit_config(self) -> FitConfig:
        return FitConfig(
            sinr_grid_db=list(self.sinr_grid_db),
            carriers=self.carriers,
            frames=self.frames,
            seeds=self.seeds,
            snr_db=self.snr_db,
            evm_mode=self.evm_mode,
            averaging=self.evm_averaging,
            normalization=self.evm_normalization,
        )

    def mmimo_config(self) -> MmimoConfig:
        return MmimoConfig.for_scenario(
            self.scenario,
            n_tx=self.n_tx,
            n_users=self.n_users,
            band_hz=self.band_hz,
            sub_band_hz=self.sub_band_hz,
            carriers_per_sub_band=self.carriers_per_sub_band,
            frames=self.frames,
            blocks=self.blocks,
            qam_order=self.qam_order,
            snr_db=self.link_snr_db,
            doppler_hz=self.doppler_hz,
            block_period_s=self.block_period_s,
            user_correlation=self.user_correlation,
            csi_delay_blocks=self.csi_delay_blocks,
            rms_delay_spread_s=self.rms_delay_spread_s,
            n_taps=self.n_taps,
            flat_channel=self.flat_channel,
            center_frequency_hz=self.center_frequency_hz,
            workers=self.workers,
        )

    def repeatability_config(self) -> RepeatabilityConfig:
        return RepeatabilityConfig(
            blocks=self.repeat_blocks,
            frames=self.frames,
            carriers=self.repeat_carriers,
            carrier_spacing_hz=self.sub_band_hz / self.carriers_per_sub_band,
            qam_order=self.qam_order,
            rms_delay_spread_s=self.rms_delay_spread_s,
            n_taps=self.n_taps,
        )


