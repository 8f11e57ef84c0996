"""Tests for the environment runtime, episodes and policy sessions."""

from dataclasses import replace

import pytest

from EmbodySim.environment.episode import Episode, finish_episode, replay_actions
from EmbodySim.environment.payloads import PayloadRecord, decode_celsius, decode_tactile
from EmbodySim.environment.runtime import ActionCall, EnvConfig, Environment
from EmbodySim.environment.session import EpisodeSetup, Session, run_episode
from EmbodySim.errors import ActionError, ProtocolError, SceneValidationError
from EmbodySim.protocol.automaton import Rule
from EmbodySim.protocol.parser import parse
from EmbodySim.protocol.validator import validate_stream
from EmbodySim.protocol.wire import Message
from EmbodySim.scene.catalog import load_catalog
from EmbodySim.scene.model import Box, SceneConfig
from EmbodySim.scene.sampler import sample_scene

SEED = 31


@pytest.fixture(scope="module")
def scene():
    return sample_scene(load_catalog(), SceneConfig(), SEED)


def inspect_calls(object_id: int):
    return [
        ActionCall("SELECT", object_id=object_id, words=("that", "thing")),
        ActionCall("NAVIGATE"),
        ActionCall("TOUCH"),
        ActionCall("HIT"),
        ActionCall("LOOK-AROUND"),
    ]


def far_object(env: Environment) -> int:
    for obj in env.scene.objects:
        if obj.bbox.distance_to(env.agent.position) > env.config.reach + 0.1:
            return obj.id
    pytest.fail("every object is within reach of the room center")


class TestReset:
    """Test cases for Environment.reset."""

    def test_stream_starts_with_prompt_and_scene(self, scene):
        """Test that the prompt words precede the scene span."""
        env = Environment(scene)
        env.reset("find the cup")
        rendered = [t.render() for t in env.stream]
        assert rendered[:6] == ["find", "the", "cup", "<SCENE>", "#p0", "</SCENE>"]
        assert rendered.count("<AMBIENT_SOUND>") == len(scene.sounding_objects)
        assert validate_stream(env.stream) is None

    def test_scene_payload_has_one_row_per_object(self, scene):
        """Test the O x 1024 object feature matrix."""
        env = Environment(scene)
        record = env.payloads["p0"]
        assert record.kind == "SCENE"
        assert record.meta["rows"] == len(scene.objects)
        assert record.meta["dim"] == 1024

    def test_reset_restores_the_scene(self, scene):
        """Test that reset drops moved objects and the action history."""
        env = Environment(scene)
        for call in inspect_calls(0):
            env.execute(call)
        env.reset()
        assert env.scene == scene
        assert env.calls == []
        assert env.agent.selected is None

    def test_invalid_scene_refused(self, scene):
        """Test that a scene violating an invariant cannot be loaded."""
        obj = scene.objects[0]
        broken = scene.with_object(replace(obj, bbox=Box((-9.0, -9.0, 0.0), obj.bbox.half)))
        with pytest.raises(SceneValidationError):
            Environment(broken)


class TestExecute:
    """Test cases for Environment.execute."""

    def test_touch_reports_tactile_and_temperature(self, scene):
        """Test that TOUCH frames a TACTILE and a TEMPERATURE span."""
        env = Environment(scene)
        target = scene.objects[2]
        env.execute(ActionCall("SELECT", object_id=target.id))
        env.execute(ActionCall("NAVIGATE"))
        observations = env.execute(ActionCall("TOUCH"))

        assert [o.state_token for o in observations] == ["TACTILE", "TEMPERATURE"]
        assert decode_celsius(observations[1].payload) == target.temp_celsius
        assert decode_tactile(observations[0].payload).force == 1.0
        assert all(o.object_id == target.id for o in observations)

    def test_explicit_site_and_force_recorded(self, scene):
        """Test that explicit arguments are used and kept in the call log."""
        env = Environment(scene)
        env.execute(ActionCall("SELECT", object_id=1))
        env.execute(ActionCall("NAVIGATE"))
        (obs,) = env.execute(ActionCall("HIT", site=7, force=2.5))
        assert obs.payload.meta["strike_point"] == 7
        assert obs.payload.meta["force"] == 2.5
        assert env.calls[-1] == ActionCall("HIT", object_id=1, site=7, force=2.5)

    def test_default_site_is_recorded(self, scene):
        """Test that the canonical site chosen by the environment is logged."""
        env = Environment(scene)
        env.execute(ActionCall("SELECT", object_id=1))
        env.execute(ActionCall("NAVIGATE"))
        (obs,) = env.execute(ActionCall("HIT"))
        assert env.calls[-1].site == obs.payload.meta["strike_point"]

    def test_out_of_reach(self, scene):
        """Test that contact actions need the agent nearby."""
        env = Environment(scene)
        object_id = far_object(env)
        env.execute(ActionCall("SELECT", object_id=object_id))
        with pytest.raises(ActionError, match="out of reach"):
            env.execute(ActionCall("TOUCH"))
        # the refused action leaves no trace
        assert [t.render() for t in env.stream][-1] != "<TOUCH>"
        assert len(env.calls) == 1

    def test_navigate_ends_on_the_face(self, scene):
        """Test that navigation ends on the target's box face."""
        env = Environment(scene)
        object_id = far_object(env)
        env.execute(ActionCall("SELECT", object_id=object_id))
        env.execute(ActionCall("NAVIGATE"))
        distance = scene.object(object_id).bbox.distance_to(env.agent.position)
        assert distance == pytest.approx(0.0, abs=1e-9)
        assert env.agent.step_count > 0

    @pytest.mark.parametrize("gap,steps", [(1.0, 4), (1.1, 5), (0.2, 1)])
    def test_navigate_step_count(self, scene, gap, steps):
        """Test that a straight walk of d meters costs ceil(d / 0.25) steps."""
        cx, cy, _ = scene.room_extents.center
        obj = scene.object(0)
        hx, _, hz = obj.bbox.half
        moved = replace(obj, bbox=Box((cx + gap + hx, cy, hz), obj.bbox.half))
        env = Environment(scene.with_object(moved), validate=False)
        env.execute(ActionCall("SELECT", object_id=0))
        env.execute(ActionCall("NAVIGATE"))
        assert env.agent.step_count == steps
        assert env.agent.position[0] == pytest.approx(cx + gap)
        assert env.agent.position[1] == pytest.approx(cy)

    def test_action_before_select(self, scene):
        """Test that object actions need a selection."""
        env = Environment(scene)
        with pytest.raises(ProtocolError) as excinfo:
            env.execute(ActionCall("HIT"))
        assert excinfo.value.rule is Rule.NO_OBJECT_SELECTED

    def test_put_down_with_empty_hand(self, scene):
        """Test that PUT-DOWN needs a held object."""
        env = Environment(scene)
        with pytest.raises(ProtocolError) as excinfo:
            env.execute(ActionCall("PUT-DOWN"))
        assert excinfo.value.rule is Rule.EMPTY_HAND

    def test_pick_up_moves_with_agent(self, scene):
        """Test that a held object travels with the agent and is put down nearby."""
        env = Environment(scene)
        portable = next(o for o in scene.objects if o.portable)
        destination = next(o for o in scene.objects if o.id != portable.id)
        env.execute(ActionCall("SELECT", object_id=portable.id))
        env.execute(ActionCall("NAVIGATE"))
        env.execute(ActionCall("PICK-UP"))
        env.execute(ActionCall("SELECT", object_id=destination.id))
        env.execute(ActionCall("NAVIGATE"))
        env.execute(ActionCall("PUT-DOWN"))

        moved = env.scene.object(portable.id)
        assert env.agent.held is None
        assert moved.bbox.center[:2] != portable.bbox.center[:2]
        assert env.scene.room_extents.contains_box(moved.bbox)

    def test_fixed_objects_cannot_be_picked_up(self):
        """Test that non-portable objects refuse PICK-UP."""
        for seed in range(50):
            scene = sample_scene(load_catalog(), SceneConfig(), seed)
            fixed = [o for o in scene.objects if not o.portable]
            if fixed:
                break
        else:
            pytest.fail("no scene with a fixed object")
        env = Environment(scene)
        env.execute(ActionCall("SELECT", object_id=fixed[0].id))
        env.execute(ActionCall("NAVIGATE"))
        with pytest.raises(ActionError, match="not portable"):
            env.execute(ActionCall("PICK-UP"))


class TestFeed:
    """Test cases for token-level driving."""

    def test_select_words_follow_the_token(self, scene):
        """Test that words after SELECT stay next to it in the stream."""
        env = Environment(scene)
        name = scene.objects[0].category
        env.feed(parse(f"<SELECT> the {name} <NAVIGATE>"))
        rendered = [t.render() for t in env.stream]
        start = rendered.index("<SELECT>")
        assert rendered[start : start + 4] == ["<SELECT>", "the", name, "<NAVIGATE>"]
        assert env.agent.selected is not None
        assert [c.name for c in env.calls] == ["SELECT", "NAVIGATE"]

    def test_explicit_args(self, scene):
        """Test that per-action args bind the SELECT referent."""
        env = Environment(scene)
        env.feed(parse("<SELECT> it"), [{"object_id": 3}])
        assert env.agent.selected == 3

    def test_state_tokens_refused(self, scene):
        """Test that a policy cannot emit observation spans."""
        env = Environment(scene)
        with pytest.raises(ActionError):
            env.feed(parse("<TACTILE> #x </TACTILE>"))


class TestReplay:
    """Test cases for deterministic re-execution."""

    def _episode(self, scene) -> Episode:
        env = Environment(scene)
        env.reset("inspect it")
        for call in inspect_calls(4):
            env.execute(call)
        return finish_episode(env, "e-1", prompt="inspect it", answer="it is warm")

    def test_replay_reproduces_every_payload(self, scene):
        """Test that replay yields an empty difference list."""
        assert replay_actions(scene, self._episode(scene)) == []

    def test_policy_text_replays(self, scene):
        """Test that free words between actions are part of the transcript."""
        env = Environment(scene)
        env.reset("look")
        env.feed(
            parse("let me look <LOOK-AROUND> then <SELECT> it"),
            [None, {"object_id": 1}],
        )
        env.feed(parse("ok <NAVIGATE>"))
        episode = finish_episode(env, "t-1", prompt="look", answer="done")

        assert episode.texts == [(0, "let me look"), (1, "then"), (2, "ok")]
        assert replay_actions(scene, episode) == []
        assert replay_actions(scene, Episode.from_dict(episode.to_dict())) == []

    def test_recorded_config_is_used(self, scene):
        """Test that replay runs under the config the episode was recorded with."""
        config = EnvConfig(touch_force=3.0, hit_force=2.0)
        env = Environment(scene, config)
        env.reset("inspect it")
        for call in inspect_calls(4):
            env.execute(call)
        episode = Episode.from_dict(finish_episode(env, "e-2").to_dict())

        assert EnvConfig.from_dict(episode.environment) == config
        assert replay_actions(scene, episode) == []
        assert replay_actions(scene, episode, EnvConfig()) != []

    def test_two_runs_are_identical(self, scene):
        """Test that equal calls give equal streams and bit-identical payloads."""
        a, b = self._episode(scene), self._episode(scene)
        assert a.stream == b.stream
        assert a.payloads == b.payloads

    def test_tampered_payload_detected(self, scene):
        """Test that a changed blob shows up in the diff."""
        episode = self._episode(scene)
        ref = next(r for r, p in episode.payloads.items() if p.kind == "IMPACT_SOUND")
        record = episode.payloads[ref]
        episode.payloads[ref] = PayloadRecord(
            kind=record.kind,
            object_id=record.object_id,
            meta=record.meta,
            blobs={"wav": record.blobs["wav"][:-2] + b"\x00\x01"},
        )
        diff = replay_actions(scene, episode)
        assert diff == [f"{ref}: IMPACT_SOUND blobs ['wav'] differ"]

    def test_other_config_changes_observations(self, scene):
        """Test that replaying under another sensor config is detected."""
        episode = self._episode(scene)
        assert replay_actions(scene, episode, EnvConfig(touch_force=3.0)) != []

    def test_answer_words_close_the_stream(self, scene):
        """Test that the answer starts at answer_start."""
        episode = self._episode(scene)
        rendered = episode.stream.render()
        assert rendered[episode.answer_start :] == ["it", "is", "warm"]
        assert len(episode.calls) == 5


class ScriptedPolicy:
    """Sends fixed token chunks, then ends the episode."""

    def __init__(self, chunks, answer="done", object_id=None):
        self.chunks = list(chunks)
        self.answer = answer
        self.object_id = object_id
        self.updates = []

    def act(self, update: Message) -> Message:
        self.updates.append(update)
        if self.chunks:
            tokens, args = self.chunks.pop(0)
            return Message(op="emit_tokens", tokens=tokens, body={"args": args})
        return Message(
            op="episode_end", body={"answer": self.answer, "object_id": self.object_id}
        )


class TestSession:
    """Test cases for Session and run_episode."""

    def test_run_episode(self, scene):
        """Test a complete scripted episode through the in-process loop."""
        policy = ScriptedPolicy(
            [
                (["<SELECT>", "it"], [{"object_id": 2}]),
                (["<NAVIGATE>", "<TOUCH>"], None),
            ],
            answer="it feels firm",
            object_id=2,
        )
        episode = run_episode(Environment(scene), policy, prompt="touch it", episode_id="x")
        assert episode.ok
        assert episode.chosen_object == 2
        assert [c.name for c in episode.calls] == ["SELECT", "NAVIGATE", "TOUCH"]
        last = policy.updates[-1]
        assert last.op == "state_update"
        assert [t for t in last.tokens if t.startswith("<")][:2] == ["<NAVIGATE>", "<TOUCH>"]
        assert set(last.payloads) == {t[1:] for t in last.tokens if t.startswith("#")}

    def test_max_steps_aborts(self, scene):
        """Test that the step budget ends the episode as aborted."""
        setup = EpisodeSetup(env=Environment(scene), episode_id="e")
        session = Session("s", lambda body: setup, max_steps=1)
        session.handle(Message(op="reset"))
        reply = session.handle(
            Message(op="emit_tokens", tokens=["<SELECT>", "x"], body={"args": [{"object_id": 0}]})
        )
        assert reply.op == "episode_end"
        assert reply.body["status"] == "aborted"

    def test_protocol_violation_ends_episode(self, scene):
        """Test that an illegal action is an error reply and an error episode."""
        setup = EpisodeSetup(env=Environment(scene), episode_id="e")
        session = Session("s", lambda body: setup)
        session.handle(Message(op="reset"))
        reply = session.handle(Message(op="emit_tokens", tokens=["<PUT-DOWN>"]))
        assert reply.op == "error"
        assert reply.body["rule"] == "EMPTY_HAND"
        episode = session.episodes[-1]
        assert episode.status == "error"
        assert not session.active
        # the rejected token would have been the next one in the stream
        assert episode.error_at == len(episode.stream)
        assert reply.body["at"] == episode.error_at
        assert Episode.from_dict(episode.to_dict()).error_at == episode.error_at

    def test_emit_before_reset(self, scene):
        """Test that tokens without an episode are refused."""
        session = Session("s", lambda body: None)
        reply = session.handle(Message(op="emit_tokens", tokens=["<SELECT>"]))
        assert reply.op == "error"
        assert reply.body["code"] == "no_episode"

    def test_close_records_aborted_episode(self, scene):
        """Test that losing the transport mid-episode records it as aborted."""
        recorded = []
        setup = EpisodeSetup(env=Environment(scene), episode_id="e")
        session = Session("s", lambda body: setup, on_episode=recorded.append)
        session.handle(Message(op="reset"))
        session.close()
        assert [e.status for e in recorded] == ["aborted"]

    def test_action_error_keeps_episode(self, scene):
        """Test that a refused action is reported without ending the episode."""
        env = Environment(scene)
        object_id = far_object(env)
        session = Session("s", lambda body: EpisodeSetup(env=env, episode_id="e"))
        session.handle(Message(op="reset"))
        reply = session.handle(
            Message(
                op="emit_tokens",
                tokens=["<SELECT>", "x", "<HIT>"],
                body={"args": [{"object_id": object_id}]},
            )
        )
        assert reply.op == "error"
        assert reply.body["code"] == "action"
        assert session.active
