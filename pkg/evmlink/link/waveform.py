"""QAM constellations, frequency-domain OFDM grids and interference mixing."""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

from .config import DECISION_CHUNK, MAX_INTERFERERS, SQUARE_QAM_ORDERS, SUPPORTED_QAM_ORDERS
from .exceptions import InfeasibleSpecError, InvalidArgumentError


logger = logging.getLogger(__name__)


def _gray(n: int) -> int:
    return n ^ (n >> 1)


def complex_gaussian(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    variance: float = 1.0
) -> np.ndarray:
    """Circular complex Gaussian samples with the given total variance."""
    scale = math.sqrt(variance / 2.0)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * scale


@dataclass(eq=False)
class Constellation:
    """
    Unit average power QAM point set.

    ``points[i]`` carries the label ``labels[i]``, which is ``i`` written in
    ``bits_per_symbol`` bits, most significant bit first.
    """
    order: int
    points: np.ndarray
    labels: List[str]

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    @property
    def average_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def min_distance(self) -> float:
        diffs = np.abs(self.points[:, None] - self.points[None, :])
        return float(diffs[diffs > 0].min())

    @property
    def bit_matrix(self) -> np.ndarray:
        """Label bits per point, shape (order, bits_per_symbol)."""
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((np.arange(self.order)[:, None] >> shifts) & 1).astype(np.uint8)

    @property
    def peak_power(self) -> float:
        return float(np.max(np.abs(self.points) ** 2))


def _square_grid(order: int) -> Tuple[np.ndarray, np.ndarray]:
    side = int(round(math.sqrt(order)))
    axis_bits = int(math.log2(side))
    labels = np.empty(order, dtype=np.int64)
    coords = np.empty(order, dtype=complex)
    n = 0
    for i in range(side):
        for q in range(side):
            labels[n] = (_gray(i) << axis_bits) | _gray(q)
            coords[n] = complex(2 * i - (side - 1), 2 * q - (side - 1))
            n += 1
    return labels, coords


def _cross_grid(order: int) -> Tuple[np.ndarray, np.ndarray]:
    # Rectangular 2^(k+1) x 2^k Gray grid; for k >= 2 the outer I columns are
    # folded onto the rows that complete the cross.
    k = (int(math.log2(order)) - 1) // 2
    n_i, n_q = 2 ** (k + 1), 2 ** k
    labels = np.empty(order, dtype=np.int64)
    coords = np.empty(order, dtype=complex)
    edge = 3 * 2 ** (k - 1) - 1
    n = 0
    for i in range(n_i):
        for q in range(n_q):
            re = 2 * i - (n_i - 1)
            im = 2 * q - (n_q - 1)
            if k >= 2 and abs(re) > edge:
                step = (abs(re) - edge) // 2
                re, im = (
                    int(math.copysign(n_q - abs(im), re)),
                    int(math.copysign(n_q - 1 + 2 * step, im)),
                )
            labels[n] = (_gray(i) << k) | _gray(q)
            coords[n] = complex(re, im)
            n += 1
    return labels, coords


@lru_cache(maxsize=None)
def build_constellation(order: int) -> Constellation:
    """
    Build a Gray-labelled QAM constellation scaled to unit average power.

    Square orders use independent Gray codes on I and Q (I bits first).
    Order 8 is the 4x2 rectangle; 32, 128 and 512 are cross constellations
    obtained by folding the outer columns of the 2^(k+1) x 2^k rectangle onto
    the missing rows, so their labels keep the rectangle's Gray codes.
    """
    if order not in SUPPORTED_QAM_ORDERS:
        raise InvalidArgumentError(
            f"Unsupported QAM order {order}",
            details={"order": order, "supported": list(SUPPORTED_QAM_ORDERS)}
        )

    if order in SQUARE_QAM_ORDERS:
        labels, coords = _square_grid(order)
    else:
        labels, coords = _cross_grid(order)

    points = np.empty(order, dtype=complex)
    points[labels] = coords
    points /= math.sqrt(np.mean(np.abs(points) ** 2))

    bits = int(math.log2(order))
    constellation = Constellation(
        order=order,
        points=points,
        labels=[format(i, f"0{bits}b") for i in range(order)],
    )
    logger.debug(f"Built {order}-QAM constellation")
    return constellation


@dataclass(eq=False)
class SymbolGrid:
    """Carriers x frames matrix of transmitted symbols and its payload bits."""
    data: np.ndarray
    bits: np.ndarray
    constellation: Constellation

    @property
    def carriers(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def modulate(
    bits: Sequence[int],
    constellation: Constellation,
    carriers: int,
    frames: int
) -> SymbolGrid:
    """Map payload bits onto a carriers x frames grid, carrier-major."""
    if carriers < 1 or frames < 1:
        raise InvalidArgumentError(
            "Grid needs at least one carrier and one frame",
            details={"carriers": carriers, "frames": frames}
        )

    payload = np.asarray(bits, dtype=np.uint8).ravel()
    b = constellation.bits_per_symbol
    expected = carriers * frames * b
    if payload.size != expected:
        raise InvalidArgumentError(
            "Bit count does not match the grid",
            details={"expected": expected, "received": int(payload.size)}
        )
    if payload.size and payload.max() > 1:
        raise InvalidArgumentError("Payload must contain only 0 and 1")

    weights = 1 << np.arange(b - 1, -1, -1, dtype=np.int64)
    indices = payload.reshape(-1, b).astype(np.int64) @ weights
    data = constellation.points[indices].reshape(carriers, frames)
    return SymbolGrid(data=data, bits=payload, constellation=constellation)


def random_grid(
    constellation: Constellation,
    carriers: int,
    frames: int,
    rng: np.random.Generator
) -> SymbolGrid:
    n = carriers * frames * constellation.bits_per_symbol
    return modulate(random_bits(n, rng), constellation, carriers, frames)


def hard_decision(received: np.ndarray, constellation: Constellation) -> np.ndarray:
    """
    Index of the nearest constellation point for every received symbol.

    Ties resolve to the smallest point index.
    """
    received = np.asarray(received, dtype=complex)
    flat = received.ravel()
    indices = np.empty(flat.size, dtype=np.int64)
    p_re = constellation.points.real[None, :]
    p_im = constellation.points.imag[None, :]

    for start in range(0, flat.size, DECISION_CHUNK):
        chunk = flat[start:start + DECISION_CHUNK, None]
        distance = (chunk.real - p_re) ** 2 + (chunk.imag - p_im) ** 2
        indices[start:start + DECISION_CHUNK] = np.argmin(distance, axis=1)

    return indices.reshape(received.shape)


def demodulate_hard(received: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Hard-decision bits, in the same carrier-major order as ``modulate``."""
    indices = hard_decision(received, constellation)
    return constellation.bit_matrix[indices.ravel()].ravel()


@dataclass
class MixSpec:
    """Target operating point for a wanted grid under interference and noise."""
    sinr_target: float
    snr: float
    n_interferers: int = 1

    def __post_init__(self):
        if not 0 <= self.n_interferers <= MAX_INTERFERERS:
            raise InvalidArgumentError(
                f"Interferer count must be between 0 and {MAX_INTERFERERS}",
                details={"n_interferers": self.n_interferers}
            )
        if not (math.isfinite(self.sinr_target) and math.isfinite(self.snr)):
            raise InvalidArgumentError(
                "SINR and SNR must be finite",
                details={"sinr_target": self.sinr_target, "snr": self.snr}
            )

    @property
    def noise_variance(self) -> float:
        return 10.0 ** (-self.snr / 10.0)

    @property
    def impairment_power(self) -> float:
        return 10.0 ** (-self.sinr_target / 10.0)


@dataclass(eq=False)
class MixResult:
    """Received matrix together with the separately observable components."""
    received: np.ndarray
    wanted: np.ndarray
    interferers: List[np.ndarray]
    noise: np.ndarray
    interferer_scale: float
    noise_variance: float
    wanted_power: float
    interferer_powers: List[float] = field(default_factory=list)
    noise_power: float = 0.0

    @property
    def interference(self) -> np.ndarray:
        if not self.interferers:
            return np.zeros_like(self.wanted)
        return np.sum(self.interferers, axis=0)

    @property
    def realized_sinr_db(self) -> float:
        impairment = sum(self.interferer_powers) + self.noise_power
        return 10.0 * math.log10(self.wanted_power / impairment)


def mix(
    wanted: SymbolGrid,
    interferers: Sequence[SymbolGrid],
    spec: MixSpec,
    rng: np.random.Generator
) -> MixResult:
    """
    Add co-channel interferers and receiver noise at a controlled SINR.

    Noise variance follows ``spec.snr`` against unit signal power; the
    interferers share one scale factor chosen so that interference plus
    noise equals the SINR target in expectation, split equally between them.
    """
    if len(interferers) != spec.n_interferers:
        raise InvalidArgumentError(
            "Interferer grids do not match the mix specification",
            details={"expected": spec.n_interferers, "received": len(interferers)}
        )
    for grid in interferers:
        if grid.data.shape != wanted.data.shape:
            raise InvalidArgumentError(
                "Interferer grid shape differs from the wanted grid",
                details={"wanted": wanted.data.shape, "interferer": grid.data.shape}
            )

    noise_variance = spec.noise_variance
    interference_power = spec.impairment_power - noise_variance

    if spec.n_interferers == 0:
        if not math.isclose(spec.sinr_target, spec.snr, abs_tol=1e-9):
            raise InfeasibleSpecError(
                "Without interferers the SINR must equal the SNR",
                details={"sinr_target": spec.sinr_target, "snr": spec.snr}
            )
        scale = 0.0
    else:
        if interference_power < 0 and not math.isclose(spec.sinr_target, spec.snr, abs_tol=1e-9):
            raise InfeasibleSpecError(
                "SINR target above the SNR cannot be reached",
                details={"sinr_target": spec.sinr_target, "snr": spec.snr}
            )
        scale = math.sqrt(max(interference_power, 0.0) / spec.n_interferers)

    components = [scale * grid.data for grid in interferers]
    noise = complex_gaussian(rng, wanted.data.shape, noise_variance)
    received = wanted.data + noise
    for component in components:
        received = received + component

    return MixResult(
        received=received,
        wanted=wanted.data,
        interferers=components,
        noise=noise,
        interferer_scale=scale,
        noise_variance=noise_variance,
        wanted_power=float(np.mean(np.abs(wanted.data) ** 2)),
        interferer_powers=[float(np.mean(np.abs(c) ** 2)) for c in components],
        noise_power=float(np.mean(np.abs(noise) ** 2)),
    )
