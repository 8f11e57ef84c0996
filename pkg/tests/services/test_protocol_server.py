"""Tests for the policy server over TCP and stdio."""

import io
import socket
import threading
import time

import pytest

from EmbodySim.protocol.wire import Message, wire_decode, wire_encode
from EmbodySim.scene.catalog import load_catalog
from EmbodySim.services.dataset_io import read_records
from EmbodySim.services.protocol_server import (
    EpisodeLog,
    PolicyServer,
    World,
    bind_tcp,
    serve_stdio,
)
from EmbodySim.services.replay import replay_record


class LineClient:
    """Blocking newline-delimited JSON client."""

    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=30)
        self.stream = self.sock.makefile("rwb")

    def send(self, message: Message) -> Message:
        self.stream.write(wire_encode(message))
        self.stream.flush()
        return wire_decode(self.stream.readline())

    def send_raw(self, line: bytes) -> Message:
        self.stream.write(line)
        self.stream.flush()
        return wire_decode(self.stream.readline())

    def close(self):
        self.stream.close()
        self.sock.close()


@pytest.fixture
def policy_server(tmp_path):
    catalog = load_catalog()
    log = EpisodeLog(tmp_path / "episodes.jsonl", catalog, seed=11)
    return PolicyServer(World(11, catalog=catalog), log)


@pytest.fixture
def tcp_server(policy_server):
    server = bind_tcp(policy_server, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


@pytest.fixture
def client(tcp_server):
    c = LineClient(tcp_server.server_address)
    yield c
    c.close()


def wait_for(predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return predicate()


def touch_episode(client: LineClient, seed: int) -> Message:
    """Reset, select object 0, walk to it, touch it and answer."""
    reset = client.send(Message(op="reset", body={"seed": seed}))
    assert reset.op == "state_update"
    select = client.send(
        Message(
            op="emit_tokens",
            tokens=["<SELECT>", "it"],
            body={"args": [{"object_id": 0}]},
        )
    )
    assert select.op == "state_update"
    assert select.body["selected"] == 0
    touched = client.send(Message(op="emit_tokens", tokens=["<NAVIGATE>", "<TOUCH>"]))
    assert touched.op == "state_update"
    refs = {t[1:] for t in touched.tokens if t.startswith("#")}
    assert refs and set(touched.payloads) == refs
    end = client.send(
        Message(op="episode_end", body={"answer": "it feels firm", "object_id": 0})
    )
    assert end.op == "episode_end"
    assert end.body["episode_id"] == reset.body["episode_id"]
    return end


class TestTCPServer:
    """Integration tests against a live TCP server."""

    def test_hello(self, client):
        """Test the handshake reply."""
        reply = client.send(Message(op="hello"))
        assert reply.op == "hello"
        assert reply.session == "c1"
        assert reply.body["protocol"] == 1
        assert "TOUCH" in reply.body["actions"]

    def test_episode_is_logged_and_replays(self, client, policy_server):
        """Test a full episode, its log record and its replay."""
        client.send(Message(op="hello"))
        end = touch_episode(client, seed=5)
        assert end.body["status"] == "ok"
        assert end.body["actions"] == 3
        episode_id = end.body["episode_id"]
        records = list(read_records(policy_server.log.path))
        assert [r.episode.episode_id for r in records] == [episode_id]
        assert records[0].episode.answer == "it feels firm"
        text = replay_record(policy_server.log.path, episode_id)
        assert "<TOUCH>" in text

    def test_reset_seed_is_reproducible(self, tcp_server):
        """Test that equal reset seeds give equal scenes on separate connections."""
        a = LineClient(tcp_server.server_address)
        b = LineClient(tcp_server.server_address)
        try:
            first = a.send(Message(op="reset", body={"seed": 9}))
            second = b.send(Message(op="reset", body={"seed": 9}))
        finally:
            a.close()
            b.close()
        assert first.body["scene_id"] == second.body["scene_id"]
        assert first.tokens == second.tokens

    def test_concurrent_sessions(self, tcp_server, policy_server):
        """Test that interleaved connections keep separate episodes."""
        a = LineClient(tcp_server.server_address)
        b = LineClient(tcp_server.server_address)
        try:
            ids = {c.send(Message(op="hello")).session for c in (a, b)}
            reset_a = a.send(Message(op="reset", body={"seed": 1}))
            reset_b = b.send(Message(op="reset", body={"seed": 2}))
            end_b = b.send(Message(op="episode_end", body={"answer": "b"}))
            end_a = a.send(Message(op="episode_end", body={"answer": "a"}))
        finally:
            a.close()
            b.close()
        assert len(ids) == 2
        assert end_a.body["episode_id"] == reset_a.body["episode_id"]
        assert end_b.body["episode_id"] == reset_b.body["episode_id"]
        answers = {
            r.episode.episode_id: r.episode.answer
            for r in read_records(policy_server.log.path)
        }
        assert answers == {end_a.body["episode_id"]: "a", end_b.body["episode_id"]: "b"}

    def test_bad_line_keeps_connection(self, client):
        """Test that a malformed line gets an error and the session goes on."""
        reply = client.send_raw(b"not json\n")
        assert reply.op == "error"
        assert reply.body["code"] == "bad_json"
        assert reply.body["echo"] == "not json"
        assert client.send(Message(op="hello")).op == "hello"

    def test_disconnect_aborts_episode(self, tcp_server, policy_server):
        """Test that a dropped connection records the running episode as aborted."""
        c = LineClient(tcp_server.server_address)
        c.send(Message(op="reset", body={"seed": 4}))
        c.close()
        assert wait_for(lambda: policy_server.log.count == 1)
        [record] = read_records(policy_server.log.path)
        assert record.episode.status == "aborted"

    def test_port_in_use(self, tcp_server, policy_server):
        """Test that binding a taken address raises OSError."""
        host, port = tcp_server.server_address
        with pytest.raises(OSError):
            bind_tcp(policy_server, host, port)


class TestStdio:
    """Test cases for serving over byte streams."""

    def test_one_session(self, policy_server):
        """Test replies in order and the abort at end of input."""
        lines = wire_encode(Message(op="hello")) + wire_encode(
            Message(op="reset", body={"seed": 3, "kind": "qa"})
        )
        out = io.BytesIO()
        serve_stdio(policy_server, io.BytesIO(lines), out)
        replies = [wire_decode(line) for line in out.getvalue().splitlines()]
        assert [r.op for r in replies] == ["hello", "state_update"]
        assert policy_server.log.count == 1
        assert policy_server.sessions == {}

    def test_unknown_kind(self, policy_server):
        """Test that a reset with an unknown task kind fails cleanly."""
        out = io.BytesIO()
        serve_stdio(
            policy_server,
            io.BytesIO(wire_encode(Message(op="reset", body={"kind": "juggling"}))),
            out,
        )
        reply = wire_decode(out.getvalue().strip())
        assert reply.op == "error"
        assert reply.body["code"] == "reset_failed"
