"""Zero-forcing precoding and precoded per-user channels."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelResponse
from .config import CONDITION_NUMBER_LIMIT
from .exceptions import IllConditionedChannelError, InvalidArgumentError


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PrecoderMatrix:
    """
    Per-carrier zero-forcing weights with unit-norm columns.

    ``weights`` has shape (carriers, n_tx, n_users); ``normalization`` holds
    the factor each raw column was multiplied by.
    """
    weights: np.ndarray
    normalization: np.ndarray
    csi_block: int = 0
    channel: Optional[ChannelResponse] = None

    @property
    def n_carriers(self) -> int:
        return self.weights.shape[0]

    @property
    def n_users(self) -> int:
        return self.weights.shape[-1]


@dataclass(eq=False)
class EffectiveChannel:
    """
    Precoded channel ``gains[k, u, v]``: stream v as seen by receiver u.

    The diagonal is each user's wanted gain, everything else is leakage.
    """
    gains: np.ndarray
    csi_block: int
    apply_block: int

    @property
    def wanted(self) -> np.ndarray:
        """Wanted gain per carrier and user, shape (carriers, users)."""
        return np.diagonal(self.gains, axis1=-2, axis2=-1)

    @property
    def leakage(self) -> np.ndarray:
        """Gains with the wanted diagonal zeroed."""
        n = self.gains.shape[-1]
        return self.gains * (1 - np.eye(n))[None, :, :]

    def leakage_power_db(self) -> np.ndarray:
        """Per-user leakage power relative to wanted power, in dB."""
        wanted = np.sum(np.abs(self.wanted) ** 2, axis=0)
        leaked = np.sum(np.abs(self.leakage) ** 2, axis=(0, 2))
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(leaked / wanted)


def zero_forcing_matrix(h: np.ndarray, condition_limit: float = CONDITION_NUMBER_LIMIT):
    """
    Zero-forcing weights for channel matrices of shape (..., users, antennas).

    Returns:
        (weights, normalization): weights of shape (..., antennas, users)
        with unit-norm columns, and the per-column scale applied.
    """
    h = np.asarray(h, dtype=complex)
    n_users, n_tx = h.shape[-2], h.shape[-1]
    if n_users > n_tx:
        raise InvalidArgumentError(
            "Zero forcing needs at least as many antennas as users",
            details={"n_users": n_users, "n_tx": n_tx}
        )

    condition = np.linalg.cond(h)
    worst = float(np.max(condition))
    if not np.isfinite(worst) or worst > condition_limit:
        raise IllConditionedChannelError(
            "Channel matrix is too ill-conditioned for zero forcing",
            details={"condition_number": worst, "limit": condition_limit}
        )

    gram = h @ np.conj(np.swapaxes(h, -1, -2))
    try:
        raw = np.conj(np.swapaxes(np.linalg.solve(gram, h), -1, -2))
    except np.linalg.LinAlgError as e:
        raise IllConditionedChannelError(f"Gram matrix is singular: {e}")

    norms = np.linalg.norm(raw, axis=-2)
    normalization = 1.0 / norms
    return raw * normalization[..., None, :], normalization


def zero_forcing(h: ChannelResponse, block: int = 0) -> PrecoderMatrix:
    """Per-carrier ZF precoder from the channel at one time block."""
    gains = h.block_gains(block)
    weights, normalization = zero_forcing_matrix(np.swapaxes(gains, -1, -2))
    logger.debug(f"Zero forcing on block {block}: {gains.shape[0]} carriers, {gains.shape[2]} users")
    return PrecoderMatrix(weights=weights, normalization=normalization, csi_block=block, channel=h)


def effective_channel(
    h: ChannelResponse,
    w: PrecoderMatrix,
    csi_block: int,
    apply_block: int
) -> EffectiveChannel:
    """
    Precoded gains when weights computed at ``csi_block`` meet the channel
    at ``apply_block``.
    """
    if w.channel is not None and w.channel is not h:
        raise InvalidArgumentError("Precoder was computed from a different channel")
    if csi_block != w.csi_block:
        raise InvalidArgumentError(
            "Precoder was computed from another CSI block",
            details={"precoder_block": w.csi_block, "csi_block": csi_block}
        )
    if not 0 <= csi_block < h.n_blocks:
        raise InvalidArgumentError(
            f"CSI block {csi_block} out of range",
            details={"csi_block": csi_block, "n_blocks": h.n_blocks}
        )

    gains = h.block_gains(apply_block)
    if gains.shape[0] != w.n_carriers or gains.shape[2] != w.n_users:
        raise InvalidArgumentError(
            "Precoder dimensions do not match the channel",
            details={"channel": gains.shape, "weights": w.weights.shape}
        )

    effective = np.swapaxes(gains, -1, -2) @ w.weights
    return EffectiveChannel(gains=effective, csi_block=csi_block, apply_block=apply_block)
