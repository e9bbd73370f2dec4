"""CSV/JSON artefact writing and channel table import/export."""

import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from evmlink.link.channel import ChannelResponse
from evmlink.link.exceptions import InvalidArgumentError


logger = logging.getLogger(__name__)

CHANNEL_COLUMNS = ["time_block", "carrier", "tx", "rx", "re", "im"]


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_json(model: BaseModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def write_outputs(
    out_dir: Union[str, Path],
    tables: Dict[str, pd.DataFrame],
    documents: Dict[str, BaseModel]
) -> Dict[str, Path]:
    """
    Write every artefact of a finished study.

    Callers build all tables first; nothing reaches the directory until the
    computation that produced them has returned.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, document in documents.items():
        written[name] = write_json(document, out_dir / name)
    for name, frame in tables.items():
        written[name] = write_csv(frame, out_dir / name)
    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written


def channel_to_frame(response: ChannelResponse) -> pd.DataFrame:
    """Flatten a channel into one row per (time_block, carrier, tx, rx)."""
    gains = response.gains
    t, k, a, b = np.indices(gains.shape)
    return pd.DataFrame({
        "time_block": t.ravel(),
        "carrier": k.ravel(),
        "tx": a.ravel(),
        "rx": b.ravel(),
        "re": gains.real.ravel(),
        "im": gains.imag.ravel(),
    })


def channel_from_frame(
    frame: pd.DataFrame,
    carrier_spacing_hz: float,
    block_period_s: float
) -> ChannelResponse:
    """Rebuild an explicit-gain channel from a long-format table."""
    missing = [c for c in CHANNEL_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidArgumentError("Channel table is missing columns", details={"missing": missing})

    index_columns = CHANNEL_COLUMNS[:4]
    shape = tuple(int(frame[c].max()) + 1 for c in index_columns)
    if len(frame) != int(np.prod(shape)):
        raise InvalidArgumentError(
            "Channel table does not cover a full tensor",
            details={"rows": len(frame), "shape": shape}
        )
    gains = np.full(shape, np.nan + 0j)
    idx = tuple(frame[c].to_numpy(dtype=int) for c in index_columns)
    gains[idx] = frame["re"].to_numpy(dtype=float) + 1j * frame["im"].to_numpy(dtype=float)
    return ChannelResponse(
        carrier_spacing=carrier_spacing_hz,
        n_carriers=shape[1],
        block_period=block_period_s,
        explicit_gains=gains,
    )


def export_csv(response: ChannelResponse, path: Union[str, Path]) -> Path:
    return write_csv(channel_to_frame(response), path)


def import_csv(path: Union[str, Path], carrier_spacing_hz: float, block_period_s: float) -> ChannelResponse:
    frame = pd.read_csv(path)
    logger.info(f"Imported channel table {path} ({len(frame)} rows)")
    return channel_from_frame(frame, carrier_spacing_hz, block_period_s)


def export_npy(response: ChannelResponse, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, response.gains)
    return path


def import_npy(path: Union[str, Path], carrier_spacing_hz: float, block_period_s: float) -> ChannelResponse:
    gains = np.load(path)
    if not np.iscomplexobj(gains) or gains.ndim != 4:
        raise InvalidArgumentError("Expected a complex four-axis gain tensor", details={"shape": gains.shape})
    return ChannelResponse(
        carrier_spacing=carrier_spacing_hz,
        n_carriers=gains.shape[1],
        block_period=block_period_s,
        explicit_gains=gains,
    )
