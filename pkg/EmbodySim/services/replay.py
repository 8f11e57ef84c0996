"""Replaying recorded episodes and validating whole dataset files."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from ..environment.episode import Episode, replay_actions
from ..environment.runtime import EnvConfig
from ..errors import DatasetError, DeterminismError
from ..evaluation.classifiers import AttributeClassifiers, default_classifiers
from ..protocol.tokens import TokenKind
from ..protocol.validator import validate_stream
from ..scene.catalog import Catalog, load_catalog
from ..taskgen.realize import audit_episode
from ..taskgen.samples import boundaries
from ..taskgen.templates import TemplateBank, load_templates
from .dataset_io import find_record, read_records, read_samples, samples_path

logger = logging.getLogger("EmbodySim.replay")


def transcript(episode: Episode) -> str:
    """The interleaved stream, one line per action with its spans."""
    lines = [f"# {episode.episode_id} ({episode.status}) scene {episode.scene_id}"]
    current: List[str] = []
    tokens = list(episode.stream)
    for index, token in enumerate(tokens):
        if index == episode.answer_start and episode.answer:
            if current:
                lines.append(" ".join(current))
            current = ["ANSWER:"]
        elif token.kind is TokenKind.ACTION and current:
            lines.append(" ".join(current))
            current = []
        current.append(token.render())
    if current:
        lines.append(" ".join(current))
    return "\n".join(lines)


def replay_record(
    dataset: Union[str, Path],
    episode_id: str,
    config: Optional[EnvConfig] = None,
    catalog: Optional[Catalog] = None,
) -> str:
    """Re-execute a recorded episode and return its transcript.

    Raises:
        DatasetError: Unknown episode id or unreadable dataset
        DeterminismError: The replay does not reproduce the recorded observations
    """
    record = find_record(dataset, episode_id, catalog)
    diff = replay_actions(record.scene, record.episode, config)
    if diff:
        raise DeterminismError(f"{episode_id}: " + "; ".join(diff))
    return transcript(record.episode)


@dataclass
class DatasetAudit:
    episodes: int = 0
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def check_episode(
    episode: Episode, classifiers: AttributeClassifiers, bank: TemplateBank
) -> List[str]:
    """Stream legality, resolvable refs and grounded sensor words of one episode."""
    problems = []
    violation = validate_stream(list(episode.stream))
    if violation is not None:
        problems.append(f"{episode.episode_id}: {violation}")
    for ref in episode.stream.payload_refs():
        if ref not in episode.payloads:
            problems.append(f"{episode.episode_id}: {ref} missing from payload table")
    problems.extend(audit_episode(episode, classifiers, bank))
    return problems


def validate_dataset(
    path: Union[str, Path],
    catalog: Optional[Catalog] = None,
    classifiers: Optional[AttributeClassifiers] = None,
    bank: Optional[TemplateBank] = None,
    replay: bool = False,
) -> DatasetAudit:
    """Check every record of a dataset and its sample counts.

    With ``replay`` every episode is also re-executed and diffed.

    Raises:
        DatasetError: Unreadable file or catalog hash mismatch
    """
    catalog = catalog or load_catalog()
    classifiers = classifiers or default_classifiers()
    bank = bank or load_templates()
    audit = DatasetAudit()
    expected = Counter()
    for record in read_records(path, catalog):
        episode = record.episode
        audit.episodes += 1
        audit.problems.extend(check_episode(episode, classifiers, bank))
        if episode.ok:
            expected[episode.episode_id] = len(boundaries(episode))
        if replay:
            diffs = replay_actions(record.scene, episode)
            audit.problems.extend(f"{episode.episode_id}: {d}" for d in diffs)

    sample_file = samples_path(path)
    if sample_file.exists():
        found = Counter(episode_id for episode_id, _, _ in read_samples(sample_file))
        for episode_id in sorted(set(expected) | set(found)):
            if found[episode_id] != expected[episode_id]:
                audit.problems.append(
                    f"{episode_id}: {found[episode_id]} samples, "
                    f"expected {expected[episode_id]}"
                )
    elif expected:
        raise DatasetError(f"samples file {sample_file} not found")
    logger.info(
        f"Validated {audit.episodes} episodes in {path}: "
        f"{len(audit.problems)} problems"
    )
    return audit
