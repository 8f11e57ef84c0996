"""Dataset generation: scenes, tasks, ground-truth episodes and incremental samples."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from ..config import RunConfig
from ..environment.runtime import EnvConfig, Environment
from ..errors import (
    DatasetError,
    PlacementError,
    TaskGenerationError,
    TwinInjectionError,
)
from ..evaluation.classifiers import AttributeClassifiers, default_classifiers
from ..scene.catalog import Catalog, catalog_hash, load_catalog
from ..scene.model import Scene, SceneConfig
from ..scene.sampler import sample_scene
from ..scene.twins import twin_injection
from ..taskgen.proposer import propose_tasks
from ..taskgen.realize import realize
from ..taskgen.samples import Sample, incremental_samples
from ..taskgen.spec import TASK_KINDS
from ..taskgen.templates import TemplateBank, load_templates
from ..taskgen.tools import ToolTable, load_tools
from ..utils.formatting import format_bytes
from ..utils.seeding import derive_seed, split_seed
from ..utils.time_utils import format_duration
from .dataset_io import DatasetHeader, DatasetRecord, DatasetWriter

logger = logging.getLogger("EmbodySim.generator")

SCENE_ATTEMPTS = 5


@dataclass
class GenerationSummary:
    scenes: int = 0
    episodes: int = 0
    invalid: int = 0
    samples: int = 0
    skipped_tasks: int = 0
    path: Optional[Path] = None
    size_bytes: int = 0
    elapsed: float = 0.0

    def line(self) -> str:
        return (
            f"{self.scenes} scenes, {self.episodes} episodes "
            f"({self.invalid} invalid), {self.samples} samples -> {self.path} "
            f"({format_bytes(self.size_bytes)}, {format_duration(self.elapsed)})"
        )


class Generator:
    """Builds every record of one scene; scenes are independent of each other.

    Scene ``i`` is seeded with ``split_seed(root, i)``, so the output does
    not depend on how scenes are spread across worker threads.
    """

    def __init__(
        self,
        run: RunConfig,
        catalog: Optional[Catalog] = None,
        bank: Optional[TemplateBank] = None,
        tools: Optional[ToolTable] = None,
        classifiers: Optional[AttributeClassifiers] = None,
    ):
        self.run = run
        self.catalog = catalog or load_catalog()
        self.bank = bank or load_templates()
        self.tools = tools or load_tools()
        self.classifiers = classifiers or default_classifiers()
        self.classifiers.acoustic  # fit once, before worker threads share it
        self.scene_config = SceneConfig.from_dict(run.scene)
        self.env_config = EnvConfig.from_dicts(run.environment, run.sensors)
        self.root_seed = int(run.generation["seed"])
        self.tasks_per_scene = int(run.taskgen.get("tasks_per_scene", 10))
        self.kinds: Sequence[str] = tuple(run.taskgen.get("kinds", TASK_KINDS))
        self.k_twins = int(run.taskgen.get("k_twins", 3))
        self.twin_varied: Sequence[str] = tuple(
            run.taskgen.get("twin_varied", ("material", "temp_label", "hardness"))
        )

    def scene(self, index: int) -> Scene:
        """Sampled scene with one twin group when the inserted objects allow it."""
        seed = split_seed(self.root_seed, index)
        for attempt in range(SCENE_ATTEMPTS):
            scene_seed = seed if attempt == 0 else derive_seed(seed, "retry", attempt)
            try:
                scene = sample_scene(self.catalog, self.scene_config, scene_seed)
            except PlacementError as e:
                logger.warning(f"Scene {index} attempt {attempt} failed: {e}")
                continue
            if self.k_twins >= 2 and self.twin_varied:
                varied = self.twin_varied[index % len(self.twin_varied)]
                try:
                    scene = twin_injection(
                        scene,
                        self.k_twins,
                        varied,
                        scene_seed,
                        self.catalog,
                        self.scene_config,
                    )
                except TwinInjectionError as e:
                    logger.debug(f"Scene {index} keeps no twins: {e}")
            return scene
        raise PlacementError(
            f"scene {index}: no placement after {SCENE_ATTEMPTS} attempts"
        )

    def build(self, index: int) -> Tuple[List[Tuple[DatasetRecord, List[Sample]]], int]:
        """Records of scene ``index`` in task order, and the number of skipped tasks."""
        scene = self.scene(index)
        seed = split_seed(self.root_seed, index)
        tasks = propose_tasks(
            scene, self.kinds, self.tasks_per_scene, seed, self.bank, self.tools
        )
        out = []
        skipped = 0
        for j, task in enumerate(tasks):
            episode_id = f"s{index:05d}-t{j:02d}"
            env = Environment(scene, self.env_config)
            try:
                episode = realize(task, env, episode_id, self.classifiers, self.bank)
            except TaskGenerationError as e:
                logger.warning(f"Skipping {episode_id}: {e}")
                skipped += 1
                continue
            samples = incremental_samples(episode) if episode.ok else []
            out.append((DatasetRecord(scene=scene, episode=episode), samples))
        return out, skipped


def generate(
    run: RunConfig,
    output: Optional[Path] = None,
    generator: Optional[Generator] = None,
) -> GenerationSummary:
    """Write a dataset and its samples file for ``generation.scenes`` scenes.

    Scenes are built on ``generation.workers`` threads; records are written
    in scene and task order, so reruns are byte-identical.

    Raises:
        DatasetError: Zero scenes requested or the output is not writable
    """
    scenes = int(run.generation.get("scenes", 0))
    if scenes < 1:
        raise DatasetError("empty generation")
    output = Path(output or run.generation["output"])
    generator = generator or Generator(run)
    workers = max(1, int(run.generation.get("workers", 1)))
    header = DatasetHeader(
        catalog_hash=catalog_hash(generator.catalog),
        seed=generator.root_seed,
        meta={"scenes": scenes, "tasks_per_scene": generator.tasks_per_scene},
    )
    started = time.monotonic()
    summary = GenerationSummary(scenes=scenes, path=output)
    logger.info(f"Generating {scenes} scenes on {workers} workers into {output}")

    with DatasetWriter(output, header) as writer:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="gen") as pool:
            for records, skipped in pool.map(generator.build, range(scenes)):
                summary.skipped_tasks += skipped
                for record, samples in records:
                    writer.write(record, samples)
                    summary.invalid += int(not record.episode.ok)
        summary.episodes = writer.count
        summary.samples = writer.sample_count
    summary.size_bytes = output.stat().st_size
    summary.elapsed = time.monotonic() - started
    logger.info(f"Generation done: {summary.line()}")
    return summary
