"""Tests for the baseline policies and the benchmark harness."""

import math

import pytest

from EmbodySim.environment.runtime import Environment
from EmbodySim.errors import EvaluationError
from EmbodySim.evaluation.benchmarks import (
    CaptioningBenchmark,
    CompositionalBenchmark,
    DecompositionBenchmark,
    ToolUseBenchmark,
    TwinRetrievalBenchmark,
    ablation_study,
    constructed_scene,
    evaluate,
    is_monotone,
)
from EmbodySim.evaluation.policies import (
    Constraint,
    PolicyKind,
    PolicySpec,
    parse_query,
    policy_interactive_trained,
    policy_no_interaction,
    policy_oracle_interaction,
    sensing_actions,
)
from EmbodySim.scene.catalog import load_catalog
from EmbodySim.scene.validation import validate_scene
from EmbodySim.taskgen.templates import load_templates

SEEDS = range(24)
ACCEPTANCE_SEEDS = range(500)

NO_INTERACTION = PolicySpec(PolicyKind.NO_INTERACTION)
ORACLE = PolicySpec(PolicyKind.ORACLE_INTERACTION)
INTERACTIVE = PolicySpec(PolicyKind.INTERACTIVE_TRAINED)


@pytest.fixture(scope="module")
def twins():
    return TwinRetrievalBenchmark(k=4)


class TestPolicySpec:
    """Test cases for policy regimes and their names."""

    def test_modalities_are_ordered(self):
        """Test that modalities are kept in canonical order."""
        spec = PolicySpec("interactive_trained", ("temperature", "visual"))
        assert spec.kind is PolicyKind.INTERACTIVE_TRAINED
        assert spec.modalities == ("visual", "temperature")
        assert spec.name == "interactive_trained[visual+temperature]"

    def test_unknown_modality(self):
        """Test that unknown senses are refused."""
        with pytest.raises(EvaluationError):
            PolicySpec(PolicyKind.INTERACTIVE_TRAINED, ("smell",))

    def test_oracle_needs_a_sense(self):
        """Test that the oracle cannot run blind."""
        with pytest.raises(EvaluationError):
            PolicySpec(PolicyKind.ORACLE_INTERACTION, ())


class TestQueryUnderstanding:
    """Test cases for constraint parsing and sensing plans."""

    def test_parse_query(self):
        """Test that material, hardness and temperature words become constraints."""
        constraints = parse_query(
            "bring me the hot rigid steel pot", load_catalog(), load_templates()
        )
        assert Constraint("material", allowed=("steel",)) in constraints
        assert Constraint("hardness_word", allowed=("rigid",)) in constraints
        assert Constraint("temp_label", allowed=("hot",)) in constraints

    def test_unsensed_constraint_is_met(self):
        """Test that an attribute nobody sensed does not rule a candidate out."""
        constraint = Constraint("hardness", low=0.9)
        assert constraint.satisfied({})
        assert not constraint.satisfied({"hardness": 0.6})
        assert constraint.satisfied({"hardness": 0.95})

    @pytest.mark.parametrize(
        "attributes,modalities,actions",
        [
            (["material"], ("impact_sound", "tactile"), ["HIT"]),
            (["material"], ("tactile",), ["TOUCH"]),
            (["hardness"], ("impact_sound",), ["HIT"]),
            (["temp_label"], ("impact_sound",), []),
            (["material", "temp_label"], ("impact_sound", "temperature"), ["HIT", "TOUCH"]),
        ],
    )
    def test_sensing_actions(self, attributes, modalities, actions):
        """Test the contact actions chosen for each sense mask."""
        assert sensing_actions(attributes, modalities) == actions


class TestPolicies:
    """Test cases for individual policies on twin cases."""

    def test_oracle_with_sight_only_is_no_interaction(self, twins):
        """Test that the oracle restricted to sight picks what the camera picks."""
        for seed in range(8):
            case = twins.case(seed)
            env = Environment(case.scene)
            expected = policy_no_interaction(case.task, env.features)
            result = policy_oracle_interaction(case.task, env, ("visual",))
            assert result.chosen == expected
            assert result.actions == 0

    def test_interactive_is_deterministic(self, twins):
        """Test that equal cases give equal episodes."""
        case = twins.case(3)
        a = policy_interactive_trained(case.task, Environment(case.scene))
        b = policy_interactive_trained(case.task, Environment(case.scene))
        assert a.chosen == b.chosen
        assert a.episode.stream == b.episode.stream
        assert a.episode.payloads == b.episode.payloads

    def test_interactive_picks_up_its_choice(self, twins):
        """Test that a retrieval ends with the chosen twin in hand."""
        case = twins.case(5)
        result = policy_interactive_trained(case.task, Environment(case.scene))
        assert result.chosen in case.scene.twin_groups[-1].ids
        last = result.episode.calls[-1]
        assert (last.name, last.object_id) == ("PICK-UP", result.chosen)
        assert result.actions > 0


class TestBenchmarks:
    """Scaled-down ordering checks over seeded cases."""

    def test_twin_cases_are_valid(self, twins):
        """Test that twin cases hold k twins and a unique category."""
        for seed in range(6):
            case = twins.case(seed)
            assert validate_scene(case.scene).ok
            group = case.scene.twin_groups[-1]
            assert len(group.ids) == 4
            assert case.target in group.ids

    def test_interaction_beats_looking(self, twins):
        """Test the accuracy gap between looking and interacting on twins."""
        looking = evaluate(twins, NO_INTERACTION, SEEDS)
        oracle = evaluate(twins, ORACLE, SEEDS)
        interactive = evaluate(twins, INTERACTIVE, SEEDS)
        assert looking.accuracy <= 0.6
        assert interactive.accuracy >= 0.9
        assert interactive.accuracy - looking.accuracy >= 0.2
        assert oracle.accuracy - looking.accuracy >= 0.2

    def test_modality_chain_is_monotone(self, twins):
        """Test that adding senses never lowers accuracy."""
        chain = [
            (),
            ("visual",),
            ("visual", "impact_sound"),
            ("visual", "impact_sound", "tactile", "temperature"),
        ]
        reports = ablation_study(twins, chain, range(12))
        assert is_monotone(reports)
        assert reports[0].accuracy == 0.0
        assert reports[-1].accuracy >= 0.9

    def test_tool_use(self):
        """Test that probing finds the suitable tool among look-alikes."""
        benchmark = ToolUseBenchmark()
        looking = evaluate(benchmark, NO_INTERACTION, range(8))
        interactive = evaluate(benchmark, INTERACTIVE, range(8))
        assert interactive.accuracy == 1.0
        assert interactive.accuracy >= looking.accuracy

    def test_decomposition(self):
        """Test that probing avoids the decoy placed before each valid item."""
        benchmark = DecompositionBenchmark()
        looking = evaluate(benchmark, NO_INTERACTION, range(8))
        interactive = evaluate(benchmark, INTERACTIVE, range(8))
        assert interactive.accuracy == 1.0
        assert looking.accuracy < interactive.accuracy
        assert all(len(r["retrieved"]) >= 2 for r in interactive.records)

    def test_captioning_metrics(self):
        """Test that caption records carry BLEU and METEOR-lite."""
        benchmark = CaptioningBenchmark()
        looking = evaluate(benchmark, NO_INTERACTION, range(4))
        interactive = evaluate(benchmark, INTERACTIVE, range(4))
        assert set(interactive.metrics) == {"BLEU1", "BLEU4", "METEOR-lite"}
        assert interactive.accuracy >= looking.accuracy
        assert interactive.metrics["BLEU4"] >= looking.metrics["BLEU4"]

    def test_unsupported_policy(self):
        """Test that a benchmark refuses policies it does not define."""
        with pytest.raises(EvaluationError):
            evaluate(ToolUseBenchmark(), ORACLE, range(1))

    def test_compositional_generalization(self):
        """Test selection of the held-out material-category pair."""
        benchmark = CompositionalBenchmark()
        params = benchmark.train(scenes=80, epochs=60)
        report = evaluate(
            benchmark, PolicySpec(PolicyKind.INTERACTIVE_TRAINED, params=params), range(30)
        )
        assert report.accuracy >= 0.9


@pytest.mark.slow
class TestAcceptance:
    """Full-size runs of the retrieval, ablation and compositional checks."""

    def test_twin_retrieval_at_scale(self, twins):
        """Test chance-level looking and near-perfect interaction over 500 cases."""
        n = len(ACCEPTANCE_SEEDS)
        looking = evaluate(twins, NO_INTERACTION, ACCEPTANCE_SEEDS)
        oracle = evaluate(twins, ORACLE, ACCEPTANCE_SEEDS)
        interactive = evaluate(twins, INTERACTIVE, ACCEPTANCE_SEEDS)

        # 95% binomial interval around the 1-in-4 guess
        half_width = 1.96 * math.sqrt(0.25 * 0.75 / n)
        assert abs(looking.accuracy - 0.25) <= half_width
        assert oracle.accuracy >= 0.95
        assert interactive.accuracy >= 0.95
        assert oracle.accuracy - looking.accuracy >= 0.2
        assert interactive.accuracy - looking.accuracy >= 0.2

    def test_every_modality_chain_is_monotone(self, twins):
        """Test that each sense added to a chain keeps or raises accuracy."""
        senses = ("impact_sound", "tactile", "temperature")
        seeds = range(100)
        for order in (senses, senses[::-1], senses[1:] + senses[:1]):
            chain = [("visual",) + order[:i] for i in range(len(order) + 1)]
            reports = ablation_study(twins, [()] + chain, seeds)
            assert is_monotone(reports), [r.accuracy for r in reports]

    def test_compositional_generalization_at_scale(self):
        """Test the held-out material-category pair over 200 episodes."""
        benchmark = CompositionalBenchmark()
        params = benchmark.train()
        report = evaluate(
            benchmark,
            PolicySpec(PolicyKind.INTERACTIVE_TRAINED, params=params),
            range(200),
        )
        assert report.accuracy >= 0.9


class TestConstructedScene:
    """Test cases for benchmark scene construction."""

    def test_items_in_order(self):
        """Test that constructed scenes hold the items in order and are valid."""
        catalog = load_catalog()
        items = [
            ("mug", "ceramic", "hot"),
            ("spoon", "steel", "room"),
            ("bowl", "glass", "cold"),
        ]
        scene = constructed_scene("unit", items, 4, catalog)
        assert [(o.category, o.material.name, o.temp_label) for o in scene.objects] == items
        assert scene.n_added == 3 and scene.n_base == 0
        assert validate_scene(scene, catalog).ok
        assert constructed_scene("unit", items, 4, catalog) == scene
