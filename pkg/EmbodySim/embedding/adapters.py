"""One-layer modality adapters plus the SELECT bilinear head, and their blob format."""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from ..errors import EncodingError
from .concepts import DIM
from .encoders import MODALITIES, Modality

logger = logging.getLogger("EmbodySim.embedding")

BLOB_MAGIC = b"ADPT"
BLOB_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


@dataclass
class AdapterParams:
    """Per-modality affine maps (W, b) and the SELECT head weight.

    Values are held as float32 so that saving and loading is bit-exact.
    """

    weights: Dict[str, np.ndarray] = field(default_factory=dict)
    biases: Dict[str, np.ndarray] = field(default_factory=dict)
    select: np.ndarray = None
    dim: int = DIM

    @classmethod
    def identity(cls, dim: int = DIM, select_scale: float = 4.0) -> "AdapterParams":
        eye = np.eye(dim, dtype=np.float32)
        return cls(
            weights={m.value: eye.copy() for m in MODALITIES},
            biases={m.value: np.zeros(dim, dtype=np.float32) for m in MODALITIES},
            select=(select_scale * eye).astype(np.float32),
            dim=dim,
        )

    def copy(self) -> "AdapterParams":
        return AdapterParams(
            weights={k: v.copy() for k, v in self.weights.items()},
            biases={k: v.copy() for k, v in self.biases.items()},
            select=self.select.copy(),
            dim=self.dim,
        )

    def set_adapter(self, modality, weight: np.ndarray, bias: np.ndarray):
        key = Modality(modality).value
        self.weights[key] = np.asarray(weight, dtype=np.float32)
        self.biases[key] = np.asarray(bias, dtype=np.float32)

    def is_finite(self) -> bool:
        arrays = [*self.weights.values(), *self.biases.values(), self.select]
        return all(np.all(np.isfinite(a)) for a in arrays)

    def equals(self, other: "AdapterParams") -> bool:
        """Bit-exact equality of every block."""
        if self.dim != other.dim or set(self.weights) != set(other.weights):
            return False
        blocks = zip(self._blocks(), other._blocks())
        return all(a.tobytes() == b.tobytes() for a, b in blocks)

    def _blocks(self):
        for m in MODALITIES:
            yield self.weights[m.value]
            yield self.biases[m.value]
        yield self.select


def adapt(params: AdapterParams, modality, feature: np.ndarray) -> np.ndarray:
    """Apply the modality's affine map: W f + b."""
    key = Modality(modality).value
    weight = params.weights[key].astype(np.float64)
    bias = params.biases[key].astype(np.float64)
    return weight @ np.asarray(feature, dtype=np.float64) + bias


def params_to_bytes(params: AdapterParams) -> bytes:
    """Serialize as a 16-byte header followed by little-endian float32 blocks.

    Header: magic "ADPT", uint16 version, uint16 block count, uint32 dim,
    uint32 reserved. Blocks: (W, b) for each modality in declaration order,
    then the SELECT weight; matrices row-major.
    """
    blocks = list(params._blocks())
    header = _HEADER.pack(BLOB_MAGIC, BLOB_VERSION, len(blocks), params.dim, 0)
    body = b"".join(np.ascontiguousarray(b, dtype="<f4").tobytes() for b in blocks)
    return header + body


def params_from_bytes(data: bytes) -> AdapterParams:
    if len(data) < _HEADER.size:
        raise EncodingError("adapter blob shorter than its header")
    magic, version, n_blocks, dim, _ = _HEADER.unpack_from(data)
    if magic != BLOB_MAGIC or version != BLOB_VERSION:
        raise EncodingError(f"not an adapter blob (magic={magic!r}, version={version})")
    expected_blocks = 2 * len(MODALITIES) + 1
    if n_blocks != expected_blocks:
        raise EncodingError(f"expected {expected_blocks} blocks, found {n_blocks}")
    expected_size = _HEADER.size + 4 * (len(MODALITIES) * (dim * dim + dim) + dim * dim)
    if len(data) != expected_size:
        raise EncodingError(
            f"adapter blob is {len(data)} bytes, expected {expected_size}"
        )

    offset = _HEADER.size

    def take(shape: Tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        block = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        return block.reshape(shape).astype(np.float32)

    params = AdapterParams(dim=dim)
    for m in MODALITIES:
        params.weights[m.value] = take((dim, dim))
        params.biases[m.value] = take((dim,))
    params.select = take((dim, dim))
    return params


def save_params(params: AdapterParams, path: Union[str, Path]):
    Path(path).write_bytes(params_to_bytes(params))
    logger.info(f"Saved adapter params to {path}")


def load_params(path: Union[str, Path]) -> AdapterParams:
    params = params_from_bytes(Path(path).read_bytes())
    logger.info(f"Loaded adapter params from {path}")
    return params
