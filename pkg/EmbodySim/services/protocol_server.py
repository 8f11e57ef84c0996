"""Serving policies over newline-delimited JSON, on TCP or stdio.

Each connection owns one Session and is handled on its own thread; the
messages of a connection are handled in arrival order. Finished episodes
are appended, together with their scene, to an episode log in the dataset
format so they can be replayed.
"""

import itertools
import logging
import socketserver
import threading
from pathlib import Path
from typing import Any, BinaryIO, Dict, Optional, Tuple, Union

from ..config import RunConfig
from ..environment.episode import Episode
from ..environment.runtime import EnvConfig, Environment
from ..environment.session import EpisodeSetup, Session
from ..errors import PlacementError, TaskGenerationError, TwinInjectionError, WireError
from ..protocol.wire import MAX_LINE_BYTES, error_message, read_message, wire_encode
from ..scene.catalog import Catalog, catalog_hash, load_catalog
from ..scene.model import Scene, SceneConfig
from ..scene.sampler import sample_scene
from ..scene.twins import twin_injection
from ..taskgen.proposer import propose_tasks
from ..taskgen.spec import TASK_KINDS
from ..utils.seeding import derive_seed
from .dataset_io import DatasetHeader, DatasetRecord, encode_line

logger = logging.getLogger("EmbodySim.server")

WORLD_ATTEMPTS = 10


class EpisodeLog:
    """Append-only episode log; a header is written when the file is new."""

    def __init__(self, path: Union[str, Path], catalog: Catalog, seed: int):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.count = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            header = DatasetHeader(catalog_hash=catalog_hash(catalog), seed=seed)
            self.path.write_text(encode_line(header.to_dict()), encoding="utf-8")

    def append(self, scene: Scene, episode: Episode):
        line = encode_line(DatasetRecord(scene=scene, episode=episode).to_dict())
        with self._lock:
            with open(self.path, "a", encoding="utf-8", newline="\n") as f:
                f.write(line)
            self.count += 1
        logger.debug(f"Logged {episode.episode_id} to {self.path}")


class World:
    """Builds the scene, task and environment for every reset.

    A reset body may carry ``seed`` (int) and ``kind`` (task kind, default
    retrieval). Without a seed the server seed and a reset counter are used.
    """

    def __init__(
        self,
        seed: int,
        scene_config: SceneConfig = SceneConfig(),
        env_config: Optional[EnvConfig] = None,
        catalog: Optional[Catalog] = None,
        k_twins: int = 3,
    ):
        self.seed = seed
        self.scene_config = scene_config
        self.env_config = env_config or EnvConfig()
        self.catalog = catalog or load_catalog()
        self.k_twins = k_twins
        self._counter = itertools.count()
        self._lock = threading.Lock()
        self.scenes: Dict[str, Scene] = {}

    def build(self, session_id: str, body: Dict[str, Any]) -> EpisodeSetup:
        kind = body.get("kind", "retrieval")
        if kind not in TASK_KINDS:
            raise TaskGenerationError(f"unknown task kind {kind!r}")
        with self._lock:
            count = next(self._counter)
        root = derive_seed(self.seed, "reset", body.get("seed", count))
        episode_id = f"{session_id}-e{count}"
        for attempt in range(WORLD_ATTEMPTS):
            seed = derive_seed(root, attempt)
            try:
                scene = sample_scene(self.catalog, self.scene_config, seed)
                scene = twin_injection(
                    scene,
                    self.k_twins,
                    "material",
                    seed,
                    self.catalog,
                    self.scene_config,
                )
                task = propose_tasks(scene, (kind,), 1, seed)[0]
            except (PlacementError, TwinInjectionError, TaskGenerationError) as e:
                logger.debug(f"Reset attempt {attempt} for {episode_id}: {e}")
                continue
            with self._lock:
                self.scenes[episode_id] = scene
            return EpisodeSetup(
                env=Environment(scene, self.env_config),
                prompt=task.prompt,
                episode_id=episode_id,
                task=task.to_dict(),
            )
        raise TaskGenerationError(f"no {kind} task after {WORLD_ATTEMPTS} scenes")

    def scene_of(self, episode_id: str) -> Scene:
        with self._lock:
            return self.scenes.pop(episode_id)


class PolicyServer:
    """Sessions, the shared world and the episode log of one server run."""

    def __init__(
        self,
        world: World,
        log: Optional[EpisodeLog] = None,
        max_steps: int = 64,
        max_line_bytes: int = MAX_LINE_BYTES,
    ):
        self.world = world
        self.log = log
        self.max_steps = max_steps
        self.max_line_bytes = max_line_bytes
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self.sessions: Dict[str, Session] = {}

    def open_session(self) -> Session:
        with self._lock:
            session_id = f"c{next(self._ids)}"
        session = Session(
            session_id,
            lambda body: self.world.build(session_id, body),
            max_steps=self.max_steps,
            on_episode=self._record,
        )
        with self._lock:
            self.sessions[session_id] = session
        logger.info(f"Opened session {session_id}")
        return session

    def close_session(self, session: Session):
        session.close()
        with self._lock:
            self.sessions.pop(session.session_id, None)
        logger.info(f"Closed session {session.session_id}")

    def close_all(self):
        """Record every running episode as aborted."""
        with self._lock:
            sessions = list(self.sessions.values())
        for session in sessions:
            self.close_session(session)

    def _record(self, episode: Episode):
        scene = self.world.scene_of(episode.episode_id)
        if self.log is not None:
            self.log.append(scene, episode)

    def serve_stream(self, session: Session, reader: BinaryIO, writer: BinaryIO):
        """Answer every message on ``reader`` until end of stream."""
        while True:
            try:
                message = read_message(reader, self.max_line_bytes)
            except WireError as e:
                logger.info(f"Session {session.session_id}: {e.code}: {e.message}")
                reply = error_message(e, session.session_id)
            else:
                if message is None:
                    return
                message.session = session.session_id
                reply = session.handle(message)
            writer.write(wire_encode(reply, self.max_line_bytes))
            writer.flush()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        policy_server: PolicyServer = self.server.policy_server
        session = policy_server.open_session()
        host, port = self.client_address[:2]
        logger.info(f"Connection from {host}:{port}")
        try:
            policy_server.serve_stream(session, self.rfile, self.wfile)
        except (ConnectionError, OSError) as e:
            logger.info(f"Session {session.session_id} transport lost: {e}")
        except Exception as e:
            logger.error(f"Session {session.session_id} failed: {e}", exc_info=True)
        finally:
            policy_server.close_session(session)


class TCPPolicyServer(socketserver.ThreadingTCPServer):
    """One handler thread per connection."""

    daemon_threads = True
    allow_reuse_address = False

    def __init__(self, address: Tuple[str, int], policy_server: PolicyServer):
        self.policy_server = policy_server
        super().__init__(address, _Handler)

    def server_close(self):
        super().server_close()
        self.policy_server.close_all()


def build_server(run: RunConfig) -> PolicyServer:
    """World, episode log and session settings from the run config."""
    catalog = load_catalog()
    seed = int(run.server["seed"])
    world = World(
        seed,
        SceneConfig.from_dict(run.scene),
        EnvConfig.from_dicts(run.environment, run.sensors),
        catalog,
        k_twins=int(run.evaluation.get("k_twins", 3)),
    )
    log_path = run.server.get("episode_log")
    log = EpisodeLog(log_path, catalog, seed) if log_path else None
    return PolicyServer(
        world,
        log,
        max_steps=int(run.environment.get("max_steps", 64)),
        max_line_bytes=int(run.protocol.get("max_line_bytes", MAX_LINE_BYTES)),
    )


def bind_tcp(policy_server: PolicyServer, host: str, port: int) -> TCPPolicyServer:
    """Bind the TCP server; OSError propagates when the address is taken."""
    server = TCPPolicyServer((host, port), policy_server)
    logger.info(f"Listening on {server.server_address[0]}:{server.server_address[1]}")
    return server


def serve_stdio(policy_server: PolicyServer, reader: BinaryIO, writer: BinaryIO):
    """Serve a single session over a pair of byte streams."""
    session = policy_server.open_session()
    try:
        policy_server.serve_stream(session, reader, writer)
    finally:
        policy_server.close_session(session)
