"""
Checkpoint files.

Layout::

    b"AMTL" | u32 format_version | u32 header_bytes | header (UTF-8 JSON)
    | parameters as little-endian float64, in header order

The header holds the model config, the vocabulary characters, the parameter
names and shapes in ``named_parameters`` order, and the resolved run config.
Everything is written deterministically, so identical models give identical
bytes.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from amtl.config import ModelConfig
from amtl.errors import CheckpointCorruptError, CheckpointVersionError
from amtl.models import FORMAT_VERSION
from amtl.network import AMTLModel, ModelState
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

MAGIC = b"AMTL"
PREFIX = struct.Struct("<4sII")
PARAM_DTYPE = np.dtype("<f8")


def _header(state: ModelState, config_lines: Sequence[str]) -> bytes:
    header = {
        "model": state.config.model_dump(mode="json"),
        "vocab": state.vocab.chars,
        "params": [[name, list(a.shape)] for name, a in state.params.items()],
        "run_config": list(config_lines),
    }
    return json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")


def save(state: ModelState | AMTLModel, path: str | Path, config_lines: Sequence[str] = ()) -> int:
    """
    Write a checkpoint.

    Args:
        state: Model or a state taken from one
        path: Destination file
        config_lines: Resolved run config to embed

    Returns:
        Bytes written
    """
    if isinstance(state, AMTLModel):
        state = state.state()
    header = _header(state, config_lines)
    chunks = [PREFIX.pack(MAGIC, state.format_version, len(header)), header]
    chunks += [np.ascontiguousarray(a, dtype=PARAM_DTYPE).tobytes() for a in state.params.values()]
    payload = b"".join(chunks)
    Path(path).write_bytes(payload)
    logger.info("saved checkpoint", extra={"path": str(path), "bytes": len(payload)})
    return len(payload)


def _split(raw: bytes, path: str | Path) -> Tuple[Dict[str, Any], memoryview]:
    if len(raw) < PREFIX.size:
        raise CheckpointCorruptError(f"{path}: file too short for a checkpoint")
    magic, version, header_len = PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointCorruptError(f"{path}: not an AMTL checkpoint")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version}, this build reads {FORMAT_VERSION}"
        )
    end = PREFIX.size + header_len
    if len(raw) < end:
        raise CheckpointCorruptError(f"{path}: truncated header")
    try:
        header = json.loads(raw[PREFIX.size : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointCorruptError(f"{path}: unreadable header") from e
    return header, memoryview(raw)[end:]


def read_header(path: str | Path) -> Dict[str, Any]:
    """Header of a checkpoint without materialising its parameters."""
    header, _ = _split(Path(path).read_bytes(), path)
    return header


def load(path: str | Path) -> ModelState:
    """
    Read a checkpoint.

    Raises:
        CheckpointVersionError: If the file was written by another format version
        CheckpointCorruptError: If the file is truncated, padded or malformed
    """
    header, body = _split(Path(path).read_bytes(), path)
    try:
        config = ModelConfig(**header["model"])
        vocab = Vocab(chars=header["vocab"])
        layout = [(name, tuple(shape)) for name, shape in header["params"]]
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise CheckpointCorruptError(f"{path}: malformed header ({type(e).__name__})") from e

    expected = sum(int(np.prod(shape)) for _, shape in layout) * PARAM_DTYPE.itemsize
    if len(body) != expected:
        raise CheckpointCorruptError(
            f"{path}: parameter block is {len(body)} bytes, expected {expected}"
        )
    params, offset = {}, 0
    for name, shape in layout:
        count = int(np.prod(shape))
        flat = np.frombuffer(body, dtype=PARAM_DTYPE, count=count, offset=offset)
        params[name] = flat.astype(np.float64).reshape(shape)
        offset += count * PARAM_DTYPE.itemsize
    return ModelState(config=config, vocab=vocab, params=params)


def load_model(path: str | Path) -> AMTLModel:
    """Rebuild a model in eval mode from a checkpoint."""
    return AMTLModel.from_state(load(path))
