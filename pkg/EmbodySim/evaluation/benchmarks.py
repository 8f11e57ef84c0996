"""Benchmarks and the evaluation driver.

Every benchmark builds one case per seed (a scene, a task and the expected
outcome), runs a policy on it through a fresh Environment and scores the
result. Scenes are sampled or constructed from seeds that never feed the
training helpers, so evaluation scenes are disjoint from training scenes.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..embedding.adapters import AdapterParams, adapt
from ..embedding.alignment import aligned_params
from ..embedding.encoders import (
    Modality,
    encode,
    encode_text,
    encode_visual,
    scene_features,
)
from ..embedding.select_head import select_object
from ..embedding.training import SelectExample, train_select
from ..environment.payloads import decode_clip
from ..environment.runtime import EnvConfig, Environment, canonical_site
from ..errors import EvaluationError, PlacementError, TwinInjectionError
from ..scene.catalog import Catalog, load_catalog
from ..scene.model import Box, ObjectInstance, Scene, SceneConfig
from ..scene.sampler import place_box, sample_scene
from ..scene.twins import twin_injection
from ..sensors.acoustic import N_STRIKE_SITES, hit
from ..sensors.export import clip_to_wav, wav_to_samples
from ..sensors.thermal import sample_temperature
from ..taskgen.proposer import (
    Draft,
    approach,
    captioning_drafts,
    retrieval_drafts,
    task_decomposition_drafts,
    tool_use_drafts,
    word_task,
)
from ..taskgen.realize import answer_references, realize
from ..taskgen.spec import TaskSpec
from ..taskgen.templates import TemplateBank, load_templates
from ..taskgen.tools import Recipe, Role, ToolTable, decomposition_success, load_tools
from ..utils.seeding import MASK64, derive_seed, rng_for
from .classifiers import AttributeClassifiers, default_classifiers
from .metrics import bleu, meteor_lite
from .policies import (
    DEFAULT_CANDIDATES,
    PolicyKind,
    PolicyResult,
    PolicySpec,
    compose_answer,
    decompose_without_interaction,
    policy_interactive_trained,
    policy_no_interaction,
    policy_oracle_interaction,
)
from .report import EvalReport

logger = logging.getLogger("EmbodySim.evaluation")

MAX_ATTEMPTS = 20
Item = Tuple[str, str, str]  # (category, material, temp_label)


@dataclass
class Case:
    """One evaluation episode."""

    episode_id: str
    seed: int
    scene: Scene
    task: TaskSpec
    target: Optional[int] = None
    references: Tuple[str, ...] = ()
    expected_answer: str = ""
    recipe: Optional[Recipe] = None


def constructed_scene(
    name: str,
    items: Sequence[Item],
    seed: int,
    catalog: Catalog,
    config: SceneConfig = SceneConfig(),
    n_added: Optional[int] = None,
) -> Scene:
    """A scene holding exactly ``items``, in order, placed on the floor.

    The last ``n_added`` items (all of them by default, at most 10) count as
    inserted objects.
    """
    rng = rng_for("constructed", name, seed)
    placed: List[Box] = []
    objects = []
    n_added = min(len(items), 10) if n_added is None else n_added
    for i, (category, material, temp_label) in enumerate(items):
        spec = catalog.category(category)
        half = tuple(float(rng.uniform(lo, hi)) for lo, hi in spec.half_extent_ranges)
        bbox = place_box(
            half, config.room, placed, rng, config.max_retries, config.max_overlap
        )
        if bbox is None:
            raise PlacementError(
                f"could not place {category} in constructed scene {name}"
            )
        placed.append(bbox)
        object_seed = derive_seed(name, seed, "object", i)
        objects.append(
            ObjectInstance(
                id=i,
                category=category,
                bbox=bbox,
                material=catalog.material(material),
                temp_label=temp_label,
                temp_celsius=sample_temperature(
                    temp_label, object_seed, catalog
                ).celsius,
                seed=object_seed,
                portable=spec.portable,
                added=i >= len(items) - n_added,
            )
        )
    return Scene(
        id=f"{name}-{seed & MASK64:016x}",
        room_extents=config.room,
        objects=tuple(objects),
        n_base=len(items) - n_added,
        n_added=n_added,
    )


def role_items(role: Role, catalog: Catalog) -> Tuple[List[Item], List[Item]]:
    """Portable (category, material, temp) items that do and do not fill a role."""
    good, bad = [], []
    for name in role.categories:
        if name not in catalog.category_names():
            continue
        spec = catalog.category(name)
        if not spec.portable:
            continue
        for material in spec.materials:
            for temp_label in spec.temp_labels:
                hardness = catalog.material(material).hardness
                ok = role.requires.satisfied(material, hardness, temp_label)
                (good if ok else bad).append((name, material, temp_label))
    return good, bad


def distractor_items(
    rng: np.random.Generator, catalog: Catalog, avoid: Iterable[str], count: int
) -> List[Item]:
    avoid = set(avoid)
    pool = [c for c in catalog.categories if c.name not in avoid]
    items = []
    for _ in range(count):
        spec = pool[int(rng.integers(len(pool)))]
        material = spec.materials[int(rng.integers(len(spec.materials)))]
        temp_label = spec.temp_labels[int(rng.integers(len(spec.temp_labels)))]
        items.append((spec.name, material, temp_label))
    return items


class Benchmark:
    """Base class for seeded benchmarks.

    ``case`` builds an episode from a seed and ``run`` plays it; ``score``
    grades the result.
    """

    name = "benchmark"
    task_kind = "retrieval"
    policies: Tuple[PolicyKind, ...] = tuple(PolicyKind)

    def __init__(
        self,
        catalog: Optional[Catalog] = None,
        bank: Optional[TemplateBank] = None,
        tools: Optional[ToolTable] = None,
        classifiers: Optional[AttributeClassifiers] = None,
        env_config: Optional[EnvConfig] = None,
        candidates: int = DEFAULT_CANDIDATES,
    ):
        self.catalog = catalog or load_catalog()
        self.bank = bank or load_templates()
        self.tools = tools or load_tools()
        self.classifiers = classifiers or default_classifiers()
        self.env_config = env_config or EnvConfig()
        self.candidates = candidates

    def case(self, seed: int) -> Case:
        raise NotImplementedError

    def _task(self, draft: Draft, seed: int) -> TaskSpec:
        templates = self.bank.variant(draft.kind, draft.variant)
        rng = rng_for(self.name, seed, "prompt")
        prompt_index = int(rng.integers(len(templates.prompts)))
        return word_task(draft, self.bank, prompt_index, 0)

    def run(self, case: Case, policy: PolicySpec) -> PolicyResult:
        env = Environment(case.scene, self.env_config)
        task = case.task
        if policy.kind is PolicyKind.NO_INTERACTION:
            if task.kind == "task_decomposition":
                return decompose_without_interaction(task, env, self.tools)
            chosen = policy_no_interaction(task, env.features)
            answer = compose_answer(
                task, case.scene.object(chosen), {}, self.catalog, self.bank
            )
            return PolicyResult(chosen=chosen, answer=answer)
        if policy.kind is PolicyKind.ORACLE_INTERACTION:
            return policy_oracle_interaction(
                task, env, policy.modalities, policy.params, limit=self.candidates
            )
        return policy_interactive_trained(
            task,
            env,
            policy.params,
            policy.modalities,
            classifiers=self.classifiers,
            bank=self.bank,
            tools=self.tools,
            limit=self.candidates,
            episode_id=case.episode_id,
        )

    def score(self, case: Case, result: PolicyResult) -> Dict[str, Any]:
        return {
            "episode_id": case.episode_id,
            "seed": case.seed,
            "target": case.target,
            "chosen": result.chosen,
            "outcome": float(
                result.chosen is not None and result.chosen == case.target
            ),
            "actions": result.actions,
        }


class TwinRetrievalBenchmark(Benchmark):
    """Retrieve one of ``k`` visual twins that differ in material or hardness.

    The twins' category appears nowhere else in the scene, so the request
    names exactly one object.
    """

    name = "twin_retrieval"
    task_kind = "retrieval"

    def __init__(
        self,
        k: int = 4,
        varied: Sequence[str] = ("material", "hardness"),
        scene_config: SceneConfig = SceneConfig(),
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.k = k
        self.varied = tuple(varied)
        self.scene_config = scene_config

    def case(self, seed: int) -> Case:
        varied = self.varied[seed % len(self.varied)]
        for attempt in range(MAX_ATTEMPTS):
            scene_seed = derive_seed(self.name, seed, attempt)
            try:
                scene = sample_scene(self.catalog, self.scene_config, scene_seed)
                scene = twin_injection(
                    scene, self.k, varied, scene_seed, self.catalog, self.scene_config
                )
            except (PlacementError, TwinInjectionError):
                continue
            group = scene.twin_groups[-1]
            category = scene.object(group.ids[0]).category
            if any(
                o.category == category and o.id not in group.ids
                for o in scene.objects
            ):
                continue
            rng = rng_for(self.name, seed, "target")
            target = group.ids[int(rng.integers(len(group.ids)))]
            draft = next(
                d for d in retrieval_drafts(scene, self.bank, self.tools)
                if d.target_objects == (target,)
            )
            return Case(
                f"{self.name}-{seed}", seed, scene, self._task(draft, seed), target
            )
        raise EvaluationError(f"no twin scene found for seed {seed}")


class ToolUseBenchmark(Benchmark):
    """Pick the one candidate tool whose hidden property suits the situation."""

    name = "tool_use"
    task_kind = "tool_use"
    policies = (PolicyKind.NO_INTERACTION, PolicyKind.INTERACTIVE_TRAINED)

    def __init__(self, unsuitable: int = 2, distractors: int = 3, **kwargs):
        super().__init__(**kwargs)
        self.unsuitable = unsuitable
        self.distractors = distractors

    def case(self, seed: int) -> Case:
        situations = self.tools.situations
        for attempt in range(MAX_ATTEMPTS):
            situation = situations[(seed + attempt) % len(situations)]
            role = Role(situation.id, situation.categories, situation.requires)
            good, bad = role_items(role, self.catalog)
            if not good or not bad:
                continue
            rng = rng_for(self.name, seed, attempt)
            items = distractor_items(
                rng, self.catalog, situation.categories, self.distractors
            )
            items += [bad[int(rng.integers(len(bad)))] for _ in range(self.unsuitable)]
            items.insert(
                self.distractors + int(rng.integers(self.unsuitable + 1)),
                good[int(rng.integers(len(good)))],
            )
            try:
                scene = constructed_scene(
                    self.name, items, derive_seed(seed, attempt), self.catalog
                )
            except PlacementError:
                continue
            drafts = [
                d for d in tool_use_drafts(scene, self.bank, self.tools)
                if d.meta["situation"] == situation.id
            ]
            if not drafts:
                continue
            task = self._task(drafts[0], seed)
            return Case(f"{self.name}-{seed}", seed, scene, task, task.answer_object)
        raise EvaluationError(f"no tool-use scene found for seed {seed}")


class CaptioningBenchmark(Benchmark):
    """Describe how an object sounds and feels; scored against every paraphrase."""

    name = "captioning"
    task_kind = "captioning"
    policies = (PolicyKind.NO_INTERACTION, PolicyKind.INTERACTIVE_TRAINED)

    def __init__(self, scene_config: SceneConfig = SceneConfig(), **kwargs):
        super().__init__(**kwargs)
        self.scene_config = scene_config

    def case(self, seed: int) -> Case:
        for attempt in range(MAX_ATTEMPTS):
            scene_seed = derive_seed(self.name, seed, attempt)
            try:
                scene = sample_scene(self.catalog, self.scene_config, scene_seed)
            except PlacementError:
                continue
            counts: Dict[str, int] = {}
            for obj in scene.objects:
                counts[obj.category] = counts.get(obj.category, 0) + 1
            drafts = [
                d for d in captioning_drafts(scene, self.bank, self.tools)
                if d.variant != "glance"
                and counts[scene.object(d.answer_object).category] == 1
            ]
            if not drafts:
                continue
            draft = drafts[int(rng_for(self.name, seed, "draft").integers(len(drafts)))]
            task = self._task(draft, seed)
            episode = realize(
                task,
                Environment(scene, self.env_config),
                f"{self.name}-{seed}",
                self.classifiers,
                self.bank,
            )
            values = dict(task.static_slots)
            values.update(
                {slot: entry["value"] for slot, entry in episode.slots.items()}
            )
            return Case(
                f"{self.name}-{seed}",
                seed,
                scene,
                task,
                task.answer_object,
                references=tuple(answer_references(task, values, self.bank)),
                expected_answer=episode.answer,
            )
        raise EvaluationError(f"no captioning scene found for seed {seed}")

    def score(self, case: Case, result: PolicyResult) -> Dict[str, Any]:
        record = super().score(case, result)
        answer = result.answer or "not found"
        record["outcome"] = float(answer == case.expected_answer)
        record["answer"] = answer
        record["BLEU1"] = bleu(answer, case.references, 1)
        record["BLEU4"] = bleu(answer, case.references, 4)
        record["METEOR-lite"] = meteor_lite(answer, case.references)
        return record


class DecompositionBenchmark(Benchmark):
    """Gather a valid combination of items for a recipe among look-alike decoys.

    Each role gets one decoy of an allowed category that fails the role's
    requirement (a steel bowl for a microwave meal, say), placed before the
    valid item, and one valid item.
    """

    name = "task_decomposition"
    task_kind = "task_decomposition"
    policies = (PolicyKind.NO_INTERACTION, PolicyKind.INTERACTIVE_TRAINED)

    def __init__(self, distractors: int = 2, **kwargs):
        super().__init__(**kwargs)
        self.distractors = distractors

    def recipe_items(
        self, recipe: Recipe, rng: np.random.Generator
    ) -> Optional[List[Item]]:
        items: List[Item] = []
        for role in recipe.roles:
            good, bad = role_items(role, self.catalog)
            if not good:
                return None
            if bad:
                items.append(bad[int(rng.integers(len(bad)))])
            items.append(good[int(rng.integers(len(good)))])
        return items

    def case(self, seed: int) -> Case:
        recipes = self.tools.recipes
        for attempt in range(MAX_ATTEMPTS):
            recipe = recipes[(seed + attempt) % len(recipes)]
            rng = rng_for(self.name, seed, attempt)
            items = self.recipe_items(recipe, rng)
            if items is None:
                continue
            avoid = {c for role in recipe.roles for c in role.categories}
            items = distractor_items(rng, self.catalog, avoid, self.distractors) + items
            try:
                scene = constructed_scene(
                    self.name, items, derive_seed(seed, attempt), self.catalog
                )
            except PlacementError:
                continue
            drafts = [
                d for d in task_decomposition_drafts(scene, self.bank, self.tools)
                if d.meta["recipe"] == recipe.id
            ]
            if not drafts:
                continue
            task = self._task(drafts[0], seed)
            return Case(f"{self.name}-{seed}", seed, scene, task, recipe=recipe)
        raise EvaluationError(f"no decomposition scene found for seed {seed}")

    def score(self, case: Case, result: PolicyResult) -> Dict[str, Any]:
        record = super().score(case, result)
        record["retrieved"] = list(result.retrieved)
        record["outcome"] = float(
            decomposition_success(case.recipe, case.scene, result.retrieved)
        )
        return record


# -- compositional selection ------------------------------------------------


def sound_row(
    obj: ObjectInstance, params: AdapterParams, config: EnvConfig
) -> np.ndarray:
    """Adapted impact-sound embedding of the object's canonical strike, as recorded."""
    site = canonical_site(obj.seed, "HIT", N_STRIKE_SITES)
    clip = hit(obj, site, config.hit_force, config.sample_rate, config.duration)
    recorded = wav_to_samples(clip_to_wav(clip.samples, clip.sample_rate))
    return adapt(params, Modality.IMPACT_SOUND, encode(Modality.IMPACT_SOUND, recorded))


def composite_row(visual: np.ndarray, sound: np.ndarray) -> np.ndarray:
    row = visual / np.linalg.norm(visual) + sound / np.linalg.norm(sound)
    return row / np.linalg.norm(row)


class CompositionalBenchmark(Benchmark):
    """Select a (material, category) pair the SELECT head never saw as a target.

    Object rows combine the visual encoding with the aligned impact-sound
    embedding, so the request "paper cup" must compose the category seen by
    the camera with the material heard on impact.
    """

    name = "compositional"
    task_kind = "retrieval"
    policies = (PolicyKind.NO_INTERACTION, PolicyKind.INTERACTIVE_TRAINED)

    def __init__(
        self,
        held_out: Tuple[str, str] = ("paper", "cup"),
        objects: int = 5,
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.held_out = held_out
        self.objects = objects

    def combos(self) -> List[Tuple[str, str]]:
        """Every portable (material, category) pair except the held-out one."""
        return [
            (m, c.name)
            for c in self.catalog.categories
            if c.portable
            for m in c.materials
            if (m, c.name) != self.held_out
        ]

    def _items(self, target: Tuple[str, str], rng: np.random.Generator) -> List[Item]:
        """The target plus objects sharing its material or its category."""
        material, category = target
        same_category = [
            (category, m)
            for m in self.catalog.category(category).materials
            if m != material
        ]
        same_material = [
            (c.name, material)
            for c in self.catalog.categories
            if c.portable and c.name != category and material in c.materials
        ]
        pool = same_category + same_material
        picks = [pool[int(i)] for i in rng.permutation(len(pool))[: self.objects - 1]]
        items = [(c, m, self.catalog.category(c).temp_labels[0]) for c, m in picks]
        items.insert(int(rng.integers(len(items) + 1)), (category, material, "room"))
        return items

    def rows(self, scene: Scene, params: AdapterParams) -> np.ndarray:
        return np.stack(
            [
                composite_row(encode_visual(o), sound_row(o, params, self.env_config))
                for o in scene.objects
            ]
        )

    def training_set(
        self, scenes: int, seed: int, params: AdapterParams
    ) -> List[SelectExample]:
        combos = self.combos()
        examples = []
        for i in range(scenes):
            rng = rng_for(self.name, "train", seed, i)
            material, category = combos[int(rng.integers(len(combos)))]
            items = [
                item
                for item in self._items((material, category), rng)
                if (item[1], item[0]) != self.held_out
            ]
            try:
                scene = constructed_scene(
                    f"{self.name}-train", items, derive_seed(seed, i), self.catalog
                )
            except PlacementError:
                continue
            target = next(
                o.id for o in scene.objects
                if o.category == category and o.material.name == material
            )
            text = encode_text(f"{material} {category.replace('_', ' ')}")
            examples.append(
                SelectExample(text=text, rows=self.rows(scene, params), target=target)
            )
        return examples

    def train(
        self, scenes: int = 120, seed: int = 0, lr: float = 0.5, epochs: int = 100
    ) -> AdapterParams:
        """SELECT head trained on every pair but the held-out one."""
        start = aligned_params()
        dataset = self.training_set(scenes, seed, start)
        logger.info(f"Training compositional SELECT head on {len(dataset)} examples")
        return train_select(dataset, start, lr=lr, epochs=epochs, seed=seed).params

    def case(self, seed: int) -> Case:
        material, category = self.held_out
        for attempt in range(MAX_ATTEMPTS):
            rng = rng_for(self.name, seed, attempt)
            items = self._items(self.held_out, rng)
            try:
                scene = constructed_scene(
                    self.name, items, derive_seed(seed, attempt), self.catalog
                )
            except PlacementError:
                continue
            target = next(
                o.id for o in scene.objects
                if o.category == category and o.material.name == material
            )
            actions = []
            for obj in scene.objects:
                actions += approach(obj, "HIT")
            task = TaskSpec(
                kind="retrieval",
                prompt=f"retrieve the {material} {category.replace('_', ' ')}",
                target_objects=(target,),
                gt_actions=tuple(actions),
                gt_answer_template="here is the {category}",
                answer_object=target,
                static_slots={"category": category.replace("_", " ")},
            )
            return Case(f"{self.name}-{seed}", seed, scene, task, target)
        raise EvaluationError(f"no compositional scene found for seed {seed}")

    def run(self, case: Case, policy: PolicySpec) -> PolicyResult:
        if policy.kind is PolicyKind.NO_INTERACTION:
            return super().run(case, policy)
        params = policy.params or aligned_params()
        env = Environment(case.scene, self.env_config)
        env.reset(case.task.prompt)
        visual, sounds = [], []
        for call in case.task.gt_actions:
            for obs in env.execute(call):
                if obs.state_token != "IMPACT_SOUND":
                    continue
                clip = decode_clip(obs.payload)
                feature = encode(Modality.IMPACT_SOUND, clip)
                sounds.append(adapt(params, Modality.IMPACT_SOUND, feature))
                visual.append(encode_visual(case.scene.object(obs.object_id)))
        rows = np.stack([composite_row(v, s) for v, s in zip(visual, sounds)])
        chosen = select_object(params, encode_text(case.task.prompt), rows)
        actions = sum(1 for c in env.calls if c.name != "SELECT")
        return PolicyResult(chosen=chosen, actions=actions)


# -- training and driver ------------------------------------------------------


def retrieval_training_set(
    scenes: int, seed: int, scene_config: SceneConfig = SceneConfig()
) -> List[SelectExample]:
    """Category requests for objects whose category is unique in a sampled scene."""
    catalog = load_catalog()
    examples = []
    for i in range(scenes):
        try:
            scene = sample_scene(
                catalog, scene_config, derive_seed("select-train", seed, i)
            )
        except PlacementError:
            continue
        counts: Dict[str, int] = {}
        for obj in scene.objects:
            counts[obj.category] = counts.get(obj.category, 0) + 1
        unique = [o for o in scene.objects if counts[o.category] == 1]
        if not unique:
            continue
        target = unique[int(rng_for("select-train", seed, i).integers(len(unique)))]
        text = encode_text(target.category.replace("_", " "))
        examples.append(
            SelectExample(text=text, rows=scene_features(scene), target=target.id)
        )
    return examples


@lru_cache(maxsize=4)
def trained_params(
    scenes: int = 200, seed: int = 0, lr: float = 0.5, epochs: int = 100
) -> AdapterParams:
    """Aligned adapters with the SELECT head trained on sampled scenes."""
    dataset = retrieval_training_set(scenes, seed)
    result = train_select(dataset, aligned_params(), lr=lr, epochs=epochs, seed=seed)
    return result.params


BENCHMARKS = {
    "twin_retrieval": TwinRetrievalBenchmark,
    "tool_use": ToolUseBenchmark,
    "captioning": CaptioningBenchmark,
    "task_decomposition": DecompositionBenchmark,
    "compositional": CompositionalBenchmark,
}


def evaluate(
    benchmark: Benchmark, policy: PolicySpec, seeds: Iterable[int]
) -> EvalReport:
    """Run a policy on one case per seed and aggregate the outcomes.

    Raises:
        EvaluationError: The benchmark does not support the policy kind
    """
    if policy.kind not in benchmark.policies:
        raise EvaluationError(
            f"benchmark {benchmark.name} does not support policy {policy.kind.value}"
        )
    seeds = list(seeds)
    records = []
    for seed in seeds:
        case = benchmark.case(seed)
        result = benchmark.run(case, policy)
        records.append(benchmark.score(case, result))
    report = EvalReport(
        benchmark=benchmark.name,
        task_kind=benchmark.task_kind,
        policy=policy.name,
        seeds=seeds,
        records=records,
    )
    logger.info(
        f"{benchmark.name} / {policy.name}: accuracy {report.accuracy:.3f} "
        f"over {len(seeds)} seeds"
    )
    return report


def ablation_study(
    benchmark: Benchmark,
    chain: Sequence[Sequence[str]],
    seeds: Iterable[int],
    params: Optional[AdapterParams] = None,
) -> List[EvalReport]:
    """The interactive controller under a growing chain of modality masks."""
    seeds = list(seeds)
    return [
        evaluate(
            benchmark,
            PolicySpec(PolicyKind.INTERACTIVE_TRAINED, tuple(mask), params),
            seeds,
        )
        for mask in chain
    ]


def is_monotone(reports: Sequence[EvalReport]) -> bool:
    return all(a.accuracy <= b.accuracy + 1e-12 for a, b in zip(reports, reports[1:]))
