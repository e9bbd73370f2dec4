"""Link-level simulation package: waveform, channel, precoding and metrics."""

from .config import (
    FitConfig,
    MmimoConfig,
    RepeatabilityConfig,
    EvmMode,
    EvmAveraging,
    EvmNormalization,
    Scenario,
    StreamScope,
    StreamRole,
)
from .exceptions import (
    LinkSimError,
    InvalidArgumentError,
    InfeasibleSpecError,
    IllConditionedChannelError,
    DegenerateInputError,
    UnboundedPredictionError,
    ConfigError,
    StudyError,
    OutputError,
)
from .streams import RandomStreams
from .waveform import (
    Constellation,
    SymbolGrid,
    MixSpec,
    MixResult,
    build_constellation,
    modulate,
    random_bits,
    random_grid,
    hard_decision,
    demodulate_hard,
    mix,
    complex_gaussian,
)
from .channel import (
    ChannelResponse,
    DelayProfile,
    MobilityProfile,
    clarke_correlation,
    carrier_count,
    flat_rayleigh,
    tdl_response,
    correlate_users,
    evolve,
)
from .precoding import (
    PrecoderMatrix,
    EffectiveChannel,
    zero_forcing_matrix,
    zero_forcing,
    effective_channel,
)
from .metrics import (
    GradientModel,
    EvmEstimate,
    SinrRecord,
    TABLE_I_GRADIENTS,
    ber,
    error_terms,
    reference_power,
    evm_from_errors,
    rms_evm,
    carrier_variances,
    signalled_ratio_db,
    sinr_signalled,
    sinr_predict,
    evm_from_sinr,
    theoretical_ber,
)


__all__ = [
    # Config
    "FitConfig",
    "MmimoConfig",
    "RepeatabilityConfig",
    "EvmMode",
    "EvmAveraging",
    "EvmNormalization",
    "Scenario",
    "StreamScope",
    "StreamRole",
    # Exceptions
    "LinkSimError",
    "InvalidArgumentError",
    "InfeasibleSpecError",
    "IllConditionedChannelError",
    "DegenerateInputError",
    "UnboundedPredictionError",
    "ConfigError",
    "StudyError",
    "OutputError",
    # Random streams
    "RandomStreams",
    # Waveform
    "Constellation",
    "SymbolGrid",
    "MixSpec",
    "MixResult",
    "build_constellation",
    "modulate",
    "random_bits",
    "random_grid",
    "hard_decision",
    "demodulate_hard",
    "mix",
    "complex_gaussian",
    # Channel
    "ChannelResponse",
    "DelayProfile",
    "MobilityProfile",
    "clarke_correlation",
    "carrier_count",
    "flat_rayleigh",
    "tdl_response",
    "correlate_users",
    "evolve",
    # Precoding
    "PrecoderMatrix",
    "EffectiveChannel",
    "zero_forcing_matrix",
    "zero_forcing",
    "effective_channel",
    # Metrics
    "GradientModel",
    "EvmEstimate",
    "SinrRecord",
    "TABLE_I_GRADIENTS",
    "ber",
    "error_terms",
    "reference_power",
    "evm_from_errors",
    "rms_evm",
    "carrier_variances",
    "signalled_ratio_db",
    "sinr_signalled",
    "sinr_predict",
    "evm_from_sinr",
    "theoretical_ber",
]
