"""Tests for dataset files, generation, replay and validation."""

import copy
import json

import pytest

from EmbodySim.config import DEFAULT_CONFIG, RunConfig
from EmbodySim.environment.runtime import EnvConfig
from EmbodySim.errors import DatasetError, DeterminismError
from EmbodySim.services.dataset_io import (
    DatasetHeader,
    DatasetWriter,
    find_record,
    read_header,
    read_records,
    read_samples,
    samples_path,
)
from EmbodySim.services.generator import generate
from EmbodySim.services.replay import replay_record, transcript, validate_dataset


def small_run(output, workers=2):
    sections = copy.deepcopy(DEFAULT_CONFIG)
    sections["generation"].update(
        {"scenes": 2, "workers": workers, "output": str(output)}
    )
    sections["taskgen"]["tasks_per_scene"] = 4
    return RunConfig(**{name: sections[name] for name in sections})


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("gen") / "dataset.jsonl"
    summary = generate(small_run(path))
    return path, summary


def first_ok(path):
    return next(r for r in read_records(path) if r.episode.ok)


class TestDatasetFiles:
    """Test cases for the dataset file format."""

    def test_samples_path(self, tmp_path):
        """Test the name of the sibling samples file."""
        assert samples_path(tmp_path / "d.jsonl") == tmp_path / "d.samples.jsonl"
        assert samples_path(tmp_path / "d") == tmp_path / "d.samples.jsonl"

    def test_header_and_records(self, dataset):
        """Test that the header comes first and every record is read back."""
        path, summary = dataset
        header = json.loads(path.read_text().splitlines()[0])
        assert header["format"] == "embodysim-dataset"
        assert header["seed"] == DEFAULT_CONFIG["generation"]["seed"]
        records = list(read_records(path))
        assert len(records) == summary.episodes > 0
        assert read_header(path).meta == {"scenes": 2, "tasks_per_scene": 4}

    def test_record_carries_its_scene(self, dataset):
        """Test that each record holds the scene its episode ran in."""
        path, _ = dataset
        for record in read_records(path):
            assert record.episode.scene_id == record.scene.id
            refs = set(record.episode.stream.payload_refs())
            assert refs <= set(record.episode.payloads)

    def test_catalog_hash_mismatch(self, tmp_path):
        """Test that a dataset built on another catalog is refused."""
        path = tmp_path / "other.jsonl"
        with DatasetWriter(path, DatasetHeader(catalog_hash="0" * 64, seed=1)):
            pass
        with pytest.raises(DatasetError, match="catalog hash mismatch"):
            read_header(path)
        with pytest.raises(DatasetError):
            list(read_records(path))

    def test_malformed_lines(self, tmp_path):
        """Test empty files, foreign headers and broken JSON."""
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        with pytest.raises(DatasetError, match="empty"):
            read_header(empty)
        foreign = tmp_path / "foreign.jsonl"
        foreign.write_text('{"format": "csv"}\n')
        with pytest.raises(DatasetError, match="not a dataset header"):
            read_header(foreign)
        broken = tmp_path / "broken.jsonl"
        broken.write_text("{oops\n")
        with pytest.raises(DatasetError, match="invalid JSON"):
            read_header(broken)
        with pytest.raises(DatasetError):
            read_header(tmp_path / "missing.jsonl")

    def test_unknown_episode(self, dataset):
        """Test that looking up an unknown id fails."""
        path, _ = dataset
        with pytest.raises(DatasetError, match="unknown episode id"):
            find_record(path, "nope")


class TestGeneration:
    """Test cases for dataset generation."""

    def test_reruns_are_byte_identical(self, dataset, tmp_path):
        """Test that the worker count does not change the output."""
        path, _ = dataset
        again = tmp_path / "again.jsonl"
        generate(small_run(again, workers=1))
        assert again.read_bytes() == path.read_bytes()
        assert samples_path(again).read_bytes() == samples_path(path).read_bytes()

    def test_summary(self, dataset):
        """Test the counts reported after generation."""
        path, summary = dataset
        assert summary.scenes == 2
        assert summary.path == path
        assert summary.size_bytes == path.stat().st_size
        assert summary.samples == len(list(read_samples(samples_path(path))))
        assert "2 scenes" in summary.line()

    def test_empty_generation(self, tmp_path):
        """Test that zero scenes is an error."""
        run = small_run(tmp_path / "none.jsonl")
        run.generation["scenes"] = 0
        with pytest.raises(DatasetError, match="empty generation"):
            generate(run)

    def test_episode_ids_in_order(self, dataset):
        """Test that records are written in scene and task order."""
        path, _ = dataset
        ids = [r.episode.episode_id for r in read_records(path)]
        assert ids == sorted(ids)
        assert ids[0].startswith("s00000-")


class TestReplayAndValidation:
    """Test cases for replaying and validating datasets."""

    def test_replay_reproduces(self, dataset):
        """Test that a recorded episode replays without differences."""
        path, _ = dataset
        record = first_ok(path)
        run = small_run(path)
        text = replay_record(
            path,
            record.episode.episode_id,
            EnvConfig.from_dicts(run.environment, run.sensors),
        )
        assert text == transcript(record.episode)
        assert text.startswith(f"# {record.episode.episode_id} (ok)")

    def test_tampered_payload_fails_replay(self, dataset, tmp_path):
        """Test that a changed observation is a determinism error."""
        path, _ = dataset
        lines = path.read_text().splitlines()
        target = None
        for index, line in enumerate(lines[1:], start=1):
            raw = json.loads(line)
            if raw["episode"]["status"] == "ok" and raw["episode"]["payloads"]:
                target = index
                break
        assert target is not None
        raw = json.loads(lines[target])
        ref = sorted(raw["episode"]["payloads"])[0]
        payload = raw["episode"]["payloads"][ref]
        payload["meta"]["tampered"] = True
        lines[target] = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        tampered = tmp_path / "tampered.jsonl"
        tampered.write_text("\n".join(lines) + "\n")
        with pytest.raises(DeterminismError):
            replay_record(tampered, raw["episode"]["episode_id"])

    def test_generated_dataset_is_valid(self, dataset):
        """Test that a fresh dataset passes validation."""
        path, summary = dataset
        audit = validate_dataset(path)
        assert audit.episodes == summary.episodes
        assert audit.problems == []
        assert audit.ok

    def test_missing_sample_is_reported(self, dataset, tmp_path):
        """Test that a dropped sample line shows up as a count problem."""
        path, _ = dataset
        copy_path = tmp_path / "copy.jsonl"
        copy_path.write_bytes(path.read_bytes())
        lines = samples_path(path).read_text().splitlines()
        samples_path(copy_path).write_text("\n".join(lines[:-1]) + "\n")
        audit = validate_dataset(copy_path)
        assert not audit.ok
        assert any("samples, expected" in p for p in audit.problems)

    def test_missing_samples_file(self, dataset, tmp_path):
        """Test that a dataset without its samples file is refused."""
        path, _ = dataset
        lone = tmp_path / "lone.jsonl"
        lone.write_bytes(path.read_bytes())
        with pytest.raises(DatasetError, match="samples file"):
            validate_dataset(lone)
