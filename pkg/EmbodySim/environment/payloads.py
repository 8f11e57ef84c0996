"""Recorded observation payloads and their codecs."""

import base64
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..errors import DatasetError, EncodingError
from ..scene.model import ObjectInstance, Scene
from ..sensors.acoustic import ImpactSoundClip
from ..sensors.export import (
    array_to_bytes,
    bytes_to_array,
    clip_to_wav,
    heatmap_to_pgm,
    pgm_to_heatmap,
    wav_to_samples,
)
from ..sensors.geometry import PointCloud
from ..sensors.heatmap import HeatmapImage
from ..sensors.tactile import TactileReading, marker_grid


@dataclass(frozen=True)
class PayloadRecord:
    """One observation as stored: scalar meta plus binary blobs.

    Equality is bit-exact over every blob.
    """

    kind: str
    object_id: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict)
    blobs: Dict[str, bytes] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "object_id": self.object_id,
            "meta": self.meta,
            "blobs": {
                name: base64.b64encode(data).decode("ascii")
                for name, data in sorted(self.blobs.items())
            },
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "PayloadRecord":
        try:
            blobs = {
                name: base64.b64decode(text.encode("ascii"), validate=True)
                for name, text in raw.get("blobs", {}).items()
            }
            return cls(
                kind=raw["kind"],
                object_id=raw.get("object_id"),
                meta=dict(raw.get("meta", {})),
                blobs=blobs,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"malformed payload record: {e}") from e

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def blob(self, name: str) -> bytes:
        try:
            return self.blobs[name]
        except KeyError:
            raise EncodingError(f"{self.kind} payload has no {name!r} blob") from None


def scene_payload(scene: Scene, features: np.ndarray) -> PayloadRecord:
    rows, dim = features.shape
    return PayloadRecord(
        kind="SCENE",
        meta={"scene_id": scene.id, "rows": int(rows), "dim": int(dim)},
        blobs={"features": array_to_bytes(features)},
    )


def ambient_payload(obj: ObjectInstance) -> PayloadRecord:
    tag = obj.ambient_sound
    return PayloadRecord(
        kind="AMBIENT_SOUND",
        object_id=obj.id,
        meta={"ontology_id": tag.ontology_id, "description": tag.description},
    )


def object_payload(
    obj: ObjectInstance, feature: np.ndarray, cloud: Optional[PointCloud] = None
):
    """OBJECT span: an object's feature, plus its point cloud when it was scanned."""
    blobs = {"features": array_to_bytes(feature)}
    meta: Dict[str, Any] = {"dim": int(feature.shape[0])}
    if cloud is not None:
        blobs["points"] = array_to_bytes(cloud.points)
        meta["n_points"] = cloud.n
    return PayloadRecord(kind="OBJECT", object_id=obj.id, meta=meta, blobs=blobs)


def impact_payload(obj: ObjectInstance, clip: ImpactSoundClip) -> PayloadRecord:
    return PayloadRecord(
        kind="IMPACT_SOUND",
        object_id=obj.id,
        meta={
            "sample_rate": clip.sample_rate,
            "strike_point": clip.strike_point,
            "force": clip.force,
        },
        blobs={"wav": clip_to_wav(clip.samples, clip.sample_rate)},
    )


def tactile_payload(
    obj: ObjectInstance, reading: TactileReading, heatmap: HeatmapImage
) -> PayloadRecord:
    return PayloadRecord(
        kind="TACTILE",
        object_id=obj.id,
        meta={
            "contact_point": reading.contact_point,
            "force": reading.force,
            "grid": int(reading.marker_init.shape[0]),
        },
        blobs={
            "heatmap": heatmap_to_pgm(heatmap),
            "markers": array_to_bytes(reading.marker_final),
        },
    )


def temperature_payload(obj: ObjectInstance, celsius: float) -> PayloadRecord:
    return PayloadRecord(
        kind="TEMPERATURE", object_id=obj.id, meta={"celsius": float(celsius)}
    )


def decode_scene_features(record: PayloadRecord) -> np.ndarray:
    shape = (record.meta["rows"], record.meta["dim"])
    return bytes_to_array(record.blob("features"), shape)


def decode_feature(record: PayloadRecord) -> np.ndarray:
    return bytes_to_array(record.blob("features"), (record.meta["dim"],))


def decode_points(record: PayloadRecord) -> PointCloud:
    shape = (record.meta["n_points"], 3)
    return PointCloud(points=bytes_to_array(record.blob("points"), shape))


def decode_clip(record: PayloadRecord) -> ImpactSoundClip:
    rate, samples = wav_to_samples(record.blob("wav"))
    return ImpactSoundClip(
        sample_rate=rate,
        samples=samples,
        strike_point=int(record.meta["strike_point"]),
        force=float(record.meta["force"]),
    )


def decode_tactile(record: PayloadRecord) -> TactileReading:
    grid = int(record.meta["grid"])
    return TactileReading(
        marker_init=marker_grid(grid),
        marker_final=bytes_to_array(record.blob("markers"), (grid, grid, 2)),
        contact_point=int(record.meta["contact_point"]),
        force=float(record.meta["force"]),
    )


def decode_heatmap(record: PayloadRecord) -> HeatmapImage:
    return pgm_to_heatmap(record.blob("heatmap"))


def decode_celsius(record: PayloadRecord) -> float:
    return float(record.meta["celsius"])
