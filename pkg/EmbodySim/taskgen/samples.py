"""Incremental training samples cut at action boundaries."""

from dataclasses import dataclass
from typing import Any, Dict, List

from ..environment.episode import Episode
from ..protocol.parser import parse, serialize
from ..protocol.tokens import TokenStream


@dataclass(frozen=True)
class Sample:
    """Everything before an action boundary, and what follows up to the next one."""

    input_stream: TokenStream
    target_stream: TokenStream

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input": serialize(self.input_stream),
            "target": serialize(self.target_stream),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "Sample":
        return cls(input_stream=parse(raw["input"]), target_stream=parse(raw["target"]))


def boundaries(episode: Episode) -> List[int]:
    """Index of every action token, then the start of the answer."""
    return episode.action_indices() + [episode.answer_start]


def incremental_samples(episode: Episode) -> List[Sample]:
    """One sample per action plus one for the answer.

    Sample i has input ``stream[:b_i]`` and target ``stream[b_i:b_{i+1}]``;
    a target starting at an action carries the action, its words and the
    observation spans it produced. The last target is the answer.
    """
    stream = episode.stream
    cuts = boundaries(episode)
    samples = []
    for i, start in enumerate(cuts):
        end = cuts[i + 1] if i + 1 < len(cuts) else len(stream)
        samples.append(
            Sample(input_stream=stream[:start], target_stream=stream[start:end])
        )
    return samples
