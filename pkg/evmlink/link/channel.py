"""
Synthetic stochastic channels.

Responses are kept in the tap domain and turned into per-carrier gains on
demand, so wide bands over many time blocks never need to be held as one
carrier tensor.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize, special

from .config import (
    DEFAULT_BLOCK_PERIOD_S,
    DEFAULT_CARRIERS_PER_SUB_BAND,
    DEFAULT_DOPPLER_HZ,
    DEFAULT_N_TAPS,
    DEFAULT_RMS_DELAY_SPREAD_S,
    DEFAULT_SUB_BAND_HZ,
    DEFAULT_TAP_SPACING_S,
)
from .exceptions import InvalidArgumentError
from .waveform import complex_gaussian


logger = logging.getLogger(__name__)


def clarke_correlation(doppler_hz: float, period_s: float) -> float:
    """Lag-one autocorrelation of a Clarke fading process, J0(2 pi fd T)."""
    return float(special.j0(2.0 * math.pi * doppler_hz * period_s))


@dataclass
class DelayProfile:
    """Tap delays (s, strictly increasing) and linear tap powers summing to 1."""
    tap_delays: List[float]
    tap_powers: List[float]

    def __post_init__(self):
        delays = np.asarray(self.tap_delays, dtype=float)
        powers = np.asarray(self.tap_powers, dtype=float)
        if delays.ndim != 1 or delays.size == 0 or delays.shape != powers.shape:
            raise InvalidArgumentError(
                "Delay profile needs one power per tap",
                details={"delays": delays.size, "powers": powers.size}
            )
        if delays[0] < 0 or np.any(np.diff(delays) <= 0):
            raise InvalidArgumentError("Tap delays must be non-negative and strictly increasing")
        if np.any(powers < 0) or abs(powers.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(
                "Tap powers must be non-negative and sum to 1",
                details={"sum": float(powers.sum())}
            )
        self.tap_delays = delays.tolist()
        self.tap_powers = powers.tolist()

    @property
    def n_taps(self) -> int:
        return len(self.tap_delays)

    @property
    def mean_delay(self) -> float:
        return float(np.dot(self.tap_powers, self.tap_delays))

    @property
    def rms_delay_spread(self) -> float:
        delays = np.asarray(self.tap_delays)
        second = float(np.dot(self.tap_powers, delays ** 2))
        return math.sqrt(max(second - self.mean_delay ** 2, 0.0))

    def frequency_correlation(self, delta_f_hz) -> np.ndarray:
        """Expected correlation between carriers spaced ``delta_f_hz`` apart."""
        delta_f = np.atleast_1d(np.asarray(delta_f_hz, dtype=float))
        phase = np.exp(-2j * np.pi * np.outer(delta_f, self.tap_delays))
        return phase @ np.asarray(self.tap_powers)

    @classmethod
    def single_tap(cls) -> "DelayProfile":
        return cls(tap_delays=[0.0], tap_powers=[1.0])

    @classmethod
    def exponential(
        cls,
        n_taps: int = DEFAULT_N_TAPS,
        rms_delay_spread: float = DEFAULT_RMS_DELAY_SPREAD_S,
        tap_spacing: float = DEFAULT_TAP_SPACING_S
    ) -> "DelayProfile":
        """
        Exponentially decaying profile with an exact RMS delay spread.

        Taps sit at triangular multiples of ``tap_spacing`` (0, 1, 3, 6, ...),
        so no common delay period repeats the response across the band. The
        decay constant is solved numerically for the requested spread.
        """
        if n_taps < 1 or tap_spacing <= 0 or rms_delay_spread < 0:
            raise InvalidArgumentError(
                "Invalid exponential profile parameters",
                details={"n_taps": n_taps, "tap_spacing": tap_spacing, "rms": rms_delay_spread}
            )
        if n_taps == 1:
            return cls.single_tap()

        delays = tap_spacing * np.array([i * (i + 1) / 2 for i in range(n_taps)])

        def spread(decay: float) -> float:
            weights = np.exp(-delays / decay)
            weights /= weights.sum()
            mean = np.dot(weights, delays)
            return math.sqrt(max(np.dot(weights, delays ** 2) - mean ** 2, 0.0))

        lower, upper = tap_spacing * 1e-3, tap_spacing * 1e6
        if not spread(lower) < rms_delay_spread < spread(upper):
            raise InvalidArgumentError(
                "RMS delay spread not reachable with this tap layout",
                details={
                    "rms_delay_spread": rms_delay_spread,
                    "max_reachable": spread(upper),
                }
            )

        decay = optimize.brentq(lambda d: spread(d) - rms_delay_spread, lower, upper, xtol=1e-18)
        powers = np.exp(-delays / decay)
        powers /= powers.sum()
        logger.debug(f"Exponential profile: {n_taps} taps, decay {decay:.3e} s")
        return cls(tap_delays=delays.tolist(), tap_powers=powers.tolist())


@dataclass
class MobilityProfile:
    """Receiver Doppler and channel sampling period."""
    doppler_hz: float = DEFAULT_DOPPLER_HZ
    block_period_s: float = DEFAULT_BLOCK_PERIOD_S

    def __post_init__(self):
        if self.doppler_hz < 0:
            raise InvalidArgumentError("Doppler must be non-negative", details={"doppler_hz": self.doppler_hz})
        if self.block_period_s <= 0:
            raise InvalidArgumentError("Block period must be positive", details={"block_period_s": self.block_period_s})
        if self.doppler_hz > 0 and 1.0 / self.block_period_s <= 2.0 * self.doppler_hz:
            raise InvalidArgumentError(
                "Block rate must exceed twice the Doppler frequency",
                details={"sampling_hz": 1.0 / self.block_period_s, "doppler_hz": self.doppler_hz}
            )

    @property
    def correlation(self) -> float:
        return clarke_correlation(self.doppler_hz, self.block_period_s)


@dataclass(eq=False)
class ChannelResponse:
    """
    Channel gains indexed [time_block][carrier][tx_antenna][rx_user].

    In tap form ``taps`` has shape (blocks, n_taps, n_tx, n_rx) and carrier k
    sits at k * carrier_spacing from the band edge. Imported data may instead
    supply ``explicit_gains`` with shape (blocks, carriers, n_tx, n_rx).
    """
    carrier_spacing: float
    n_carriers: int
    block_period: float = DEFAULT_BLOCK_PERIOD_S
    taps: Optional[np.ndarray] = None
    tap_delays: List[float] = field(default_factory=lambda: [0.0])
    tap_powers: List[float] = field(default_factory=lambda: [1.0])
    explicit_gains: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.taps is None) == (self.explicit_gains is None):
            raise InvalidArgumentError("Provide exactly one of taps or explicit gains")
        source = self.taps if self.taps is not None else self.explicit_gains
        if source.ndim != 4:
            raise InvalidArgumentError("Channel tensor must have four axes", details={"shape": source.shape})
        if not np.all(np.isfinite(source)):
            raise InvalidArgumentError("Channel contains non-finite entries")
        if self.taps is not None and self.taps.shape[1] != len(self.tap_delays):
            raise InvalidArgumentError(
                "Tap axis does not match the delay list",
                details={"taps": self.taps.shape[1], "delays": len(self.tap_delays)}
            )
        if self.explicit_gains is not None and self.explicit_gains.shape[1] != self.n_carriers:
            raise InvalidArgumentError(
                "Carrier axis does not match n_carriers",
                details={"gains": self.explicit_gains.shape[1], "n_carriers": self.n_carriers}
            )

    @property
    def has_taps(self) -> bool:
        return self.taps is not None

    @property
    def _source(self) -> np.ndarray:
        return self.taps if self.taps is not None else self.explicit_gains

    @property
    def n_blocks(self) -> int:
        return self._source.shape[0]

    @property
    def n_tx(self) -> int:
        return self._source.shape[2]

    @property
    def n_rx(self) -> int:
        return self._source.shape[3]

    @property
    def carrier_frequencies(self) -> np.ndarray:
        return np.arange(self.n_carriers) * self.carrier_spacing

    @cached_property
    def _phase(self) -> np.ndarray:
        return np.exp(-2j * np.pi * np.outer(self.carrier_frequencies, self.tap_delays))

    def block_gains(self, block: int) -> np.ndarray:
        """Per-carrier gains of one time block, shape (carriers, n_tx, n_rx)."""
        if not 0 <= block < self.n_blocks:
            raise InvalidArgumentError(
                f"Time block {block} out of range",
                details={"block": block, "n_blocks": self.n_blocks}
            )
        if self.explicit_gains is not None:
            return self.explicit_gains[block]
        return np.einsum("kl,lab->kab", self._phase, self.taps[block])

    @property
    def gains(self) -> np.ndarray:
        """Full gain tensor; materialises every block."""
        if self.explicit_gains is not None:
            return self.explicit_gains
        return np.stack([self.block_gains(t) for t in range(self.n_blocks)])


def flat_rayleigh(
    n_tx: int,
    n_rx: int,
    rng: np.random.Generator,
    n_carriers: int = 1,
    carrier_spacing_hz: float = DEFAULT_SUB_BAND_HZ / DEFAULT_CARRIERS_PER_SUB_BAND
) -> ChannelResponse:
    """One block of i.i.d. unit-variance Rayleigh gains, flat over the carriers."""
    if n_tx < 1 or n_rx < 1:
        raise InvalidArgumentError("Antenna counts must be positive", details={"n_tx": n_tx, "n_rx": n_rx})
    return ChannelResponse(
        carrier_spacing=carrier_spacing_hz,
        n_carriers=n_carriers,
        taps=complex_gaussian(rng, (1, 1, n_tx, n_rx)),
    )


def carrier_count(band_hz: float, carrier_spacing_hz: float) -> int:
    """Number of carriers in a band; the ratio must be a whole number."""
    if band_hz <= 0 or carrier_spacing_hz <= 0:
        raise InvalidArgumentError(
            "Band and carrier spacing must be positive",
            details={"band_hz": band_hz, "carrier_spacing_hz": carrier_spacing_hz}
        )
    ratio = band_hz / carrier_spacing_hz
    count = int(round(ratio))
    if count < 1 or abs(ratio - count) > 1e-9 * max(ratio, 1.0):
        raise InvalidArgumentError(
            "Band is not a whole number of carriers",
            details={"band_hz": band_hz, "carrier_spacing_hz": carrier_spacing_hz, "ratio": ratio}
        )
    return count


def tdl_response(
    profile: DelayProfile,
    band_hz: float,
    carrier_spacing_hz: float,
    n_tx: int,
    n_rx: int,
    rng: np.random.Generator,
    block_period_s: float = DEFAULT_BLOCK_PERIOD_S
) -> ChannelResponse:
    """
    Frequency-selective response H(f) = sum_l a_l exp(-j 2 pi f tau_l).

    Tap coefficients are independent per antenna pair with variance equal to
    the tap power, so every carrier has unit average power.
    """
    n_carriers = carrier_count(band_hz, carrier_spacing_hz)
    if n_tx < 1 or n_rx < 1:
        raise InvalidArgumentError("Antenna counts must be positive", details={"n_tx": n_tx, "n_rx": n_rx})

    scale = np.sqrt(np.asarray(profile.tap_powers))[None, :, None, None]
    taps = complex_gaussian(rng, (1, profile.n_taps, n_tx, n_rx)) * scale
    return ChannelResponse(
        carrier_spacing=carrier_spacing_hz,
        n_carriers=n_carriers,
        block_period=block_period_s,
        taps=taps,
        tap_delays=list(profile.tap_delays),
        tap_powers=list(profile.tap_powers),
    )


def correlate_users(
    response: ChannelResponse,
    correlation: float,
    rng: np.random.Generator
) -> ChannelResponse:
    """
    Mix a component common to every receiver into each user's channel.

    Each user becomes sqrt(c) * common + sqrt(1 - c) * own, which keeps unit
    average power and gives a user-to-user correlation of c.
    """
    if not 0.0 <= correlation <= 1.0:
        raise InvalidArgumentError("Correlation must lie in [0, 1]", details={"correlation": correlation})
    if not response.has_taps:
        raise InvalidArgumentError("User correlation needs a tap-form response")
    if correlation == 0.0:
        return response

    t, n_taps, n_tx, _ = response.taps.shape
    scale = np.sqrt(np.asarray(response.tap_powers))[None, :, None, None]
    common = complex_gaussian(rng, (t, n_taps, n_tx, 1)) * scale
    taps = math.sqrt(correlation) * common + math.sqrt(1.0 - correlation) * response.taps
    return ChannelResponse(
        carrier_spacing=response.carrier_spacing,
        n_carriers=response.n_carriers,
        block_period=response.block_period,
        taps=taps,
        tap_delays=list(response.tap_delays),
        tap_powers=list(response.tap_powers),
    )


def evolve(
    initial: ChannelResponse,
    profile: MobilityProfile,
    n_blocks: int,
    rng: np.random.Generator,
    users: Optional[Sequence[int]] = None
) -> ChannelResponse:
    """
    Gauss-Markov evolution of the tap coefficients over ``n_blocks`` blocks.

    Block 0 is the first block of ``initial``. Each later block is
    rho * previous + sqrt(1 - rho^2) * innovation with rho the Clarke
    lag-one correlation; the innovation has the tap's own power so the
    marginal distribution is unchanged. When ``users`` is given only those
    receivers evolve and the rest keep their block 0 channel.
    """
    if n_blocks < 1:
        raise InvalidArgumentError("n_blocks must be at least 1", details={"n_blocks": n_blocks})
    if not initial.has_taps:
        raise InvalidArgumentError("Time evolution needs a tap-form response")

    start = initial.taps[0]
    n_taps, n_tx, n_rx = start.shape
    moving = np.zeros(n_rx, dtype=bool)
    if users is None:
        moving[:] = True
    else:
        for user in users:
            if not 0 <= user < n_rx:
                raise InvalidArgumentError(f"User {user} out of range", details={"n_rx": n_rx})
            moving[user] = True

    rho = profile.correlation
    innovation_scale = math.sqrt(max(1.0 - rho ** 2, 0.0))
    power_scale = np.sqrt(np.asarray(initial.tap_powers))[:, None, None]

    taps = np.empty((n_blocks, n_taps, n_tx, n_rx), dtype=complex)
    taps[0] = start
    for t in range(1, n_blocks):
        innovation = complex_gaussian(rng, start.shape) * power_scale
        step = rho * taps[t - 1] + innovation_scale * innovation
        taps[t] = np.where(moving[None, None, :], step, taps[t - 1])

    logger.debug(f"Evolved {n_blocks} blocks with rho={rho:.4f}, moving users {np.flatnonzero(moving).tolist()}")
    return ChannelResponse(
        carrier_spacing=initial.carrier_spacing,
        n_carriers=initial.n_carriers,
        block_period=profile.block_period_s,
        taps=taps,
        tap_delays=list(initial.tap_delays),
        tap_powers=list(initial.tap_powers),
    )
