"""Binary payload codecs: 16-bit PCM WAV, PGM (P5) and float32 arrays."""

import io
import re
import wave
from typing import Tuple

import numpy as np

from ..errors import EncodingError
from .heatmap import HeatmapImage

WAV_HEADER_BYTES = 44
_PGM_HEADER = re.compile(rb"^P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def clip_to_wav(samples: np.ndarray, sample_rate: int) -> bytes:
    """Mono 16-bit little-endian PCM WAV with the canonical 44-byte header."""
    pcm = np.clip(np.rint(np.asarray(samples) * 32767.0), -32767, 32767).astype("<i2")
    buffer = io.BytesIO()
    with wave.open(buffer, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())
    return buffer.getvalue()


def wav_to_samples(data: bytes) -> Tuple[int, np.ndarray]:
    """Decode a mono 16-bit WAV into (sample_rate, float samples in [-1, 1])."""
    try:
        with wave.open(io.BytesIO(data), "rb") as w:
            if w.getnchannels() != 1 or w.getsampwidth() != 2:
                raise EncodingError("expected mono 16-bit PCM")
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as e:
        raise EncodingError(f"invalid WAV payload: {e}") from e
    return rate, np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32767.0


def heatmap_to_pgm(image: HeatmapImage) -> bytes:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    pixels = np.rint(np.clip(image.values, 0.0, 1.0) * 255.0).astype(np.uint8)
    return header + pixels.tobytes()


def pgm_to_heatmap(data: bytes) -> HeatmapImage:
    match = _PGM_HEADER.match(data)
    if not match:
        raise EncodingError("invalid PGM header")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise EncodingError(f"unsupported PGM maxval {maxval}")
    body = data[match.end() :]
    if len(body) != width * height:
        raise EncodingError("PGM pixel count does not match header")
    values = np.frombuffer(body, dtype=np.uint8).reshape(height, width) / 255.0
    return HeatmapImage(width=width, height=height, values=values)


def array_to_bytes(values: np.ndarray) -> bytes:
    """Little-endian float32 bytes in C order."""
    return np.ascontiguousarray(values, dtype="<f4").tobytes()


def bytes_to_array(data: bytes, shape) -> np.ndarray:
    array = np.frombuffer(data, dtype="<f4")
    try:
        return array.reshape(shape).astype(np.float64)
    except ValueError as e:
        raise EncodingError(f"cannot reshape {array.size} floats to {shape}") from e
