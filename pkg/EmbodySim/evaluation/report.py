"""Evaluation reports: per-episode records and the aggregates derived from them."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..utils.formatting import format_table

logger = logging.getLogger("EmbodySim.evaluation")

CAPTION_METRICS = ("BLEU1", "BLEU4", "METEOR-lite")


@dataclass
class EvalReport:
    """One benchmark run of one policy.

    Aggregates are never stored; they are recomputed from ``records`` so the
    JSON form always re-aggregates to the printed table.
    """

    benchmark: str
    task_kind: str
    policy: str
    seeds: List[int] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        if not self.records:
            return 0.0
        return float(np.mean([r["outcome"] for r in self.records]))

    @property
    def metrics(self) -> Dict[str, float]:
        """Mean caption metrics, present only when the records carry them."""
        return {
            name: float(np.mean([r[name] for r in self.records]))
            for name in CAPTION_METRICS
            if self.records and all(name in r for r in self.records)
        }

    @property
    def action_stats(self) -> Dict[str, float]:
        counts = [r.get("actions", 0) for r in self.records]
        if not counts:
            return {"mean": 0.0, "min": 0, "max": 0}
        return {
            "mean": float(np.mean(counts)),
            "min": int(min(counts)),
            "max": int(max(counts)),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "benchmark": self.benchmark,
            "task_kind": self.task_kind,
            "policy": self.policy,
            "seeds": list(self.seeds),
            "accuracy": self.accuracy,
            "metrics": self.metrics,
            "actions": self.action_stats,
            "records": self.records,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "EvalReport":
        return cls(
            benchmark=raw["benchmark"],
            task_kind=raw["task_kind"],
            policy=raw["policy"],
            seeds=list(raw.get("seeds", [])),
            records=list(raw.get("records", [])),
        )


def report_table(reports: Sequence[EvalReport]) -> str:
    """One row per report: accuracy (success rate), caption metrics, mean actions."""
    metric_names = [m for m in CAPTION_METRICS if any(m in r.metrics for r in reports)]
    headers = ["benchmark", "policy", "episodes", "accuracy", *metric_names, "actions"]
    rows = []
    for report in reports:
        metrics = report.metrics
        rows.append(
            [
                report.benchmark,
                report.policy,
                len(report.records),
                report.accuracy,
                *[metrics.get(m, "-") for m in metric_names],
                report.action_stats["mean"],
            ]
        )
    return format_table(headers, rows)


def write_reports(
    reports: Sequence[EvalReport],
    directory: Union[str, Path],
    stem: Optional[str] = None,
) -> Path:
    """Write ``<stem>.json`` (all reports) and ``<stem>.txt`` (the table).

    Returns:
        Path of the JSON file
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or (reports[0].benchmark if reports else "report")
    json_path = directory / f"{stem}.json"
    json_path.write_text(
        json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    )
    (directory / f"{stem}.txt").write_text(report_table(reports) + "\n")
    logger.info(f"Wrote {len(reports)} reports to {json_path}")
    return json_path


def read_reports(path: Union[str, Path]) -> List[EvalReport]:
    with open(path, "r") as f:
        return [EvalReport.from_dict(raw) for raw in json.load(f)]
