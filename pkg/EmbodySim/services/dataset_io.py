"""One-record-per-line dataset files.

The first line is a header naming the format version, the catalog hash and
the generator seed. Every following line is one self-contained record: the
scene an episode ran in and the episode itself, payloads inlined as base64.
Incremental samples go to a sibling ``<name>.samples.jsonl`` file.
"""

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from ..environment.episode import Episode
from ..errors import DatasetError
from ..scene.catalog import Catalog, catalog_hash, load_catalog
from ..scene.model import Scene, scene_from_dict, scene_to_dict
from ..taskgen.samples import Sample

logger = logging.getLogger("EmbodySim.dataset")

FORMAT = "embodysim-dataset"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


@dataclass(frozen=True)
class DatasetHeader:
    catalog_hash: str
    seed: int
    version: int = FORMAT_VERSION
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": FORMAT,
            "version": self.version,
            "catalog_hash": self.catalog_hash,
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "DatasetHeader":
        if raw.get("format") != FORMAT:
            raise DatasetError(f"not a dataset header: format={raw.get('format')!r}")
        if raw.get("version") != FORMAT_VERSION:
            raise DatasetError(f"unsupported dataset version {raw.get('version')}")
        return cls(
            catalog_hash=raw["catalog_hash"],
            seed=int(raw["seed"]),
            version=int(raw["version"]),
            meta=dict(raw.get("meta", {})),
        )


@dataclass
class DatasetRecord:
    scene: Scene
    episode: Episode

    def to_dict(self) -> Dict[str, Any]:
        return {"scene": scene_to_dict(self.scene), "episode": self.episode.to_dict()}

    @classmethod
    def from_dict(
        cls, raw: Dict[str, Any], catalog: Optional[Catalog] = None
    ) -> "DatasetRecord":
        try:
            return cls(
                scene=scene_from_dict(raw["scene"], catalog),
                episode=Episode.from_dict(raw["episode"]),
            )
        except DatasetError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"malformed dataset record: {e}") from e


def encode_line(data: Dict[str, Any]) -> str:
    """Canonical JSON line: sorted keys, no spaces."""
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def samples_path(path: PathLike) -> Path:
    path = Path(path)
    stem = path.name[: -len(".jsonl")] if path.name.endswith(".jsonl") else path.name
    return path.with_name(f"{stem}.samples.jsonl")


class DatasetWriter:
    """Writes the dataset and its samples file; every write takes one lock.

    Use as a context manager.
    """

    def __init__(self, path: PathLike, header: DatasetHeader):
        self.path = Path(path)
        self.header = header
        self._lock = threading.Lock()
        self._records = None
        self._samples = None
        self.count = 0
        self.sample_count = 0

    def __enter__(self) -> "DatasetWriter":
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._records = open(self.path, "w", encoding="utf-8", newline="\n")
            self._samples = open(
                samples_path(self.path), "w", encoding="utf-8", newline="\n"
            )
        except OSError as e:
            self.close()
            raise DatasetError(f"cannot write dataset {self.path}: {e}") from e
        self._records.write(encode_line(self.header.to_dict()))
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def close(self):
        for handle in (self._records, self._samples):
            if handle is not None:
                handle.close()
        self._records = self._samples = None

    def write(self, record: DatasetRecord, samples: Optional[List[Sample]] = None):
        episode_id = record.episode.episode_id
        with self._lock:
            self._records.write(encode_line(record.to_dict()))
            self.count += 1
            for index, sample in enumerate(samples or []):
                row = {"episode_id": episode_id, "index": index, **sample.to_dict()}
                self._samples.write(encode_line(row))
                self.sample_count += 1


def _lines(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    with handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield number, json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{number}: invalid JSON: {e}") from e


def read_header(path: PathLike, catalog: Optional[Catalog] = None) -> DatasetHeader:
    """The dataset header, checked against the catalog in use.

    Raises:
        DatasetError: Missing header, wrong version or catalog hash mismatch
    """
    for _, raw in _lines(path):
        header = DatasetHeader.from_dict(raw)
        break
    else:
        raise DatasetError(f"{path} is empty")
    expected = catalog_hash(catalog or load_catalog())
    if header.catalog_hash != expected:
        raise DatasetError(
            f"catalog hash mismatch: dataset {header.catalog_hash[:12]}, "
            f"current catalog {expected[:12]}"
        )
    return header


def read_records(
    path: PathLike, catalog: Optional[Catalog] = None
) -> Iterator[DatasetRecord]:
    """Stream the records after checking the header."""
    catalog = catalog or load_catalog()
    read_header(path, catalog)
    lines = _lines(path)
    next(lines)
    for number, raw in lines:
        try:
            yield DatasetRecord.from_dict(raw, catalog)
        except DatasetError as e:
            raise DatasetError(f"{path}:{number}: {e}") from e


def find_record(
    path: PathLike, episode_id: str, catalog: Optional[Catalog] = None
) -> DatasetRecord:
    for record in read_records(path, catalog):
        if record.episode.episode_id == episode_id:
            return record
    raise DatasetError(f"unknown episode id {episode_id!r} in {path}")


def read_samples(path: PathLike) -> Iterator[Tuple[str, int, Sample]]:
    """(episode id, index, sample) from a samples file."""
    for number, raw in _lines(path):
        try:
            yield raw["episode_id"], int(raw["index"]), Sample.from_dict(raw)
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"{path}:{number}: malformed sample: {e}") from e
