"""Tests for the legality automaton, the stream validator and the text form."""

import itertools
import random

import pytest

from EmbodySim.errors import ParseError, ProtocolError
from EmbodySim.protocol.automaton import (
    INITIAL,
    Phase,
    Rule,
    replay,
    resolve,
    step,
    terminate,
)
from EmbodySim.protocol.parser import parse, serialize
from EmbodySim.protocol.tokens import ACTIONS, STATES, Token, TokenStream, span, words
from EmbodySim.protocol.validator import validate_stream

SCENE = span("SCENE", "scene-0")


def automaton_outcome(tokens):
    """(rule, index, detail) of the first error, or None."""
    try:
        replay(tokens)
    except ProtocolError as e:
        return (e.rule, e.index, e.detail)
    return None


def validator_outcome(tokens):
    violation = validate_stream(tokens)
    if violation is None:
        return None
    return (violation.rule, violation.index, violation.detail)


class TestAutomatonAgreesWithValidator:
    """Exhaustive comparison over short action sequences."""

    def _compare(self, prefix, max_length):
        actions = [Token.action(name) for name in ACTIONS]
        # outcome of every prefix, extended one action at a time
        frontier = {(): (INITIAL if not prefix else replay(prefix), None)}
        compared = 0
        for length in range(1, max_length + 1):
            next_frontier = {}
            for sequence in itertools.product(range(len(actions)), repeat=length):
                state, error = frontier[sequence[:-1]]
                if error is None:
                    try:
                        state = step(state, actions[sequence[-1]])
                    except ProtocolError as e:
                        error = (e.rule, len(prefix) + length - 1, e.detail)
                tokens = list(prefix) + [actions[i] for i in sequence]
                assert validator_outcome(tokens) == error, [t.render() for t in tokens]
                compared += 1
                if length < max_length:
                    next_frontier[sequence] = (state, error)
            frontier = next_frontier
        return compared

    def test_all_sequences_after_scene(self):
        """Test every action sequence up to length six after the scene span."""
        assert self._compare(SCENE, 6) == sum(8**k for k in range(1, 7))

    def test_all_sequences_without_scene(self):
        """Test that actions before the scene span fail identically."""
        assert self._compare([], 3) == sum(8**k for k in range(1, 4))

    def test_step_matches_replay(self):
        """Test that folding step equals replay on a legal stream."""
        tokens = SCENE + [Token.action("SELECT"), Token.action("PICK-UP")]
        state = INITIAL
        for token in tokens:
            state = step(state, token)
        assert state == replay(tokens)
        assert state.phase is Phase.HOLDING


class TestAutomaton:
    """Test cases for individual rules of the automaton."""

    def test_phases(self):
        """Test the phase sequence of a pick-and-place episode."""
        state = INITIAL
        assert state.phase is Phase.AWAIT_SCENE
        state = replay(SCENE)
        assert state.phase is Phase.IDLE
        state = step(state, Token.action("SELECT"))
        assert state.phase is Phase.SELECTED and state.selection_pending
        state = resolve(state, 4)
        assert state.selected_object == 4 and not state.selection_pending
        state = step(state, Token.action("PICK-UP"))
        assert state.held_object == 4
        state = step(state, Token.action("PUT-DOWN"))
        assert state.phase is Phase.SELECTED
        assert terminate(state).phase is Phase.TERMINATED

    def test_no_tokens_after_termination(self):
        """Test that a terminated episode accepts nothing."""
        state = terminate(replay(SCENE))
        with pytest.raises(ProtocolError) as excinfo:
            step(state, Token.text("hello"))
        assert excinfo.value.rule is Rule.EPISODE_TERMINATED

    def test_unclosed_span_reported_at_end(self):
        """Test that an open span is reported at index len(tokens)."""
        tokens = SCENE + [Token.open("TACTILE")]
        assert automaton_outcome(tokens) == (Rule.UNCLOSED, 4, "TACTILE")
        assert validator_outcome(tokens) == (Rule.UNCLOSED, 4, "TACTILE")

    @pytest.mark.parametrize(
        "tail,rule",
        [
            ([Token.ref("x")], Rule.PAYLOAD_OUTSIDE_SPAN),
            ([Token.close("TACTILE")], Rule.UNMATCHED_CLOSE),
            ([Token.open("TACTILE"), Token.close("TACTILE")], Rule.EMPTY_SPAN),
            ([Token.open("TACTILE"), Token.ref("a"), Token.ref("b")], Rule.MULTIPLE_PAYLOADS),
            ([Token.open("TACTILE"), Token.open("OBJECT")], Rule.NESTED_SPAN),
            ([Token.open("TACTILE"), Token.close("OBJECT")], Rule.MISMATCHED_CLOSE),
            ([Token.open("TACTILE"), Token.text("warm")], Rule.TEXT_INSIDE_SPAN),
            ([Token.open("TACTILE"), Token.action("HIT")], Rule.ACTION_INSIDE_SPAN),
            (span("SCENE", "again"), Rule.SCENE_ALREADY_FRAMED),
        ],
    )
    def test_span_rules(self, tail, rule):
        """Test that each span rule is raised by both checkers at the same token."""
        tokens = SCENE + tail
        outcome = automaton_outcome(tokens)
        assert outcome is not None and outcome[0] is rule
        assert validator_outcome(tokens) == outcome

    def test_text_is_always_legal_outside_spans(self):
        """Test that free text never changes the state."""
        state = replay(SCENE)
        assert step(state, Token.text("anything")) == state


def random_stream(rng: random.Random) -> TokenStream:
    vocabulary = ["the", "cup", "is", "hot,", "feels", "soft.", "42", "état", "I'm"]
    tokens = []
    for _ in range(rng.randint(0, 30)):
        roll = rng.random()
        if roll < 0.5:
            tokens.append(Token.text(rng.choice(vocabulary)))
        elif roll < 0.8:
            tokens.append(Token.action(rng.choice(ACTIONS)))
        else:
            state = rng.choice(STATES)
            tokens.extend(span(state, f"p{rng.randint(0, 999)}.{rng.choice('abc')}"))
    return TokenStream.of(tokens)


class TestParser:
    """Test cases for parse and serialize."""

    def test_fuzzed_streams_survive_text_form(self):
        """Test 10,000 random streams through their canonical text form."""
        rng = random.Random(1729)
        for _ in range(10000):
            stream = random_stream(rng)
            text = serialize(stream)
            assert parse(text) == stream
            assert serialize(parse(text)) == text

    def test_markers_split_words(self):
        """Test that a marker glued to a word is still its own token."""
        assert parse("take<PICK-UP>now").render() == ["take", "<PICK-UP>", "now"]

    def test_whitespace_collapses(self):
        """Test that runs of whitespace separate tokens like single spaces."""
        assert serialize(parse("  <SCENE>\t#s \n </SCENE>  go ")) == "<SCENE> #s </SCENE> go"

    @pytest.mark.parametrize(
        "text,offset,rule",
        [
            ("<FLY>", 0, Rule.UNKNOWN_TOKEN),
            ("go <SELECT", 3, Rule.UNKNOWN_TOKEN),
            ("a </SCENE>", 2, Rule.UNMATCHED_CLOSE),
            ("<SCENE> #a #b </SCENE>", 11, Rule.MULTIPLE_PAYLOADS),
            ("<SCENE> </SCENE>", 8, Rule.EMPTY_SPAN),
            ("<SCENE> #a", 10, Rule.UNCLOSED),
            ("é <FLY>", 3, Rule.UNKNOWN_TOKEN),
            ("#a", 0, Rule.PAYLOAD_OUTSIDE_SPAN),
            ("<SCENE> #bad/id </SCENE>", 8, Rule.UNKNOWN_TOKEN),
        ],
    )
    def test_errors_carry_byte_offsets(self, text, offset, rule):
        """Test that parse errors report the offending byte offset and rule."""
        with pytest.raises(ParseError) as excinfo:
            parse(text)
        assert excinfo.value.offset == offset
        assert excinfo.value.rule is rule

    def test_words_helper(self):
        """Test that words() makes one text token per word."""
        assert [t.value for t in words("a hot  cup")] == ["a", "hot", "cup"]
