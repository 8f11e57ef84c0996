"""Command-line entry point: gen, serve, eval, replay and validate."""

import argparse
import logging
import os
import signal
import sys
import threading
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from EmbodySim import __version__
from EmbodySim.config import RunConfig, config
from EmbodySim.errors import DatasetError, DeterminismError, EmbodySimError
from EmbodySim.utils.logging import setup_logging

logger = logging.getLogger("EmbodySim")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ENVIRONMENT = 2
EXIT_DETERMINISM = 3

DEFAULT_ABLATION = (
    ("visual",),
    ("visual", "impact_sound"),
    ("visual", "impact_sound", "tactile"),
    ("visual", "impact_sound", "tactile", "temperature"),
)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="EmbodySim", description=__doc__)
    parser.add_argument(
        "--version", action="version", version=f"EmbodySim {__version__}"
    )
    parser.add_argument(
        "-d", "--debug", action="store_true", help="write ./logs/EmbodySim.log"
    )
    parser.add_argument(
        "--config", help="configuration file (overrides EMBODYSIM_CONFIG)"
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )

    gen = commands.add_parser("gen", help="generate a dataset")
    gen.add_argument("--scenes", type=int)
    gen.add_argument("--tasks-per-scene", type=int)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--workers", type=int)
    gen.add_argument("--output")

    serve = commands.add_parser("serve", help="serve policies over TCP or stdio")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--seed", type=int)
    serve.add_argument("--episode-log")
    serve.add_argument(
        "--stdio", action="store_true", help="one session on stdin/stdout"
    )

    evaluate = commands.add_parser("eval", help="run benchmarks")
    evaluate.add_argument("--benchmark", default="twin_retrieval")
    evaluate.add_argument(
        "--policy",
        action="append",
        choices=["no_interaction", "oracle_interaction", "interactive_trained"],
        help="repeatable; every policy the benchmark supports by default",
    )
    evaluate.add_argument("--episodes", type=int)
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--k", type=int, dest="k_twins")
    evaluate.add_argument("--train-scenes", type=int)
    evaluate.add_argument("--ablation", action="store_true", help="modality-mask chain")
    evaluate.add_argument("--output")

    replay = commands.add_parser("replay", help="re-execute one recorded episode")
    replay.add_argument("dataset")
    replay.add_argument("episode_id")

    validate = commands.add_parser("validate", help="check a dataset file")
    validate.add_argument("dataset")
    validate.add_argument(
        "--replay", action="store_true", help="also replay every episode"
    )
    return parser


def _overrides(args: argparse.Namespace, section: str, names: Sequence[str]) -> Dict:
    return {f"{section}.{name}": getattr(args, name, None) for name in names}


def cmd_gen(run: RunConfig) -> int:
    from EmbodySim.services.generator import generate

    summary = generate(run)
    print(summary.line())
    return EXIT_OK


def cmd_serve(run: RunConfig, stdio: bool = False) -> int:
    from EmbodySim.services.protocol_server import bind_tcp, build_server, serve_stdio

    policy_server = build_server(run)
    if stdio:
        try:
            serve_stdio(policy_server, sys.stdin.buffer, sys.stdout.buffer)
        finally:
            policy_server.close_all()
        return EXIT_OK

    host = run.server["host"]
    port = int(run.server["port"])
    try:
        server = bind_tcp(policy_server, host, port)
    except OSError as e:
        print(f"cannot bind {host}:{port}: {e}", file=sys.stderr)
        return EXIT_ENVIRONMENT

    def stop(signum, frame):
        logger.info(f"Signal {signum}: shutting down")
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, stop)
    signal.signal(signal.SIGINT, stop)
    print(f"serving on {host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
    if policy_server.log is not None:
        print(f"{policy_server.log.count} episodes logged to {policy_server.log.path}")
    return EXIT_OK


def cmd_eval(
    run: RunConfig,
    benchmark_name: str,
    policies: Optional[List[str]],
    ablation: bool,
) -> int:
    from EmbodySim.embedding.alignment import aligned_params
    from EmbodySim.evaluation.benchmarks import (
        BENCHMARKS,
        CompositionalBenchmark,
        TwinRetrievalBenchmark,
        ablation_study,
        evaluate,
        is_monotone,
        trained_params,
    )
    from EmbodySim.evaluation.policies import PolicyKind, PolicySpec
    from EmbodySim.evaluation.report import report_table, write_reports

    if benchmark_name not in BENCHMARKS:
        print(
            f"unknown benchmark {benchmark_name!r}; one of {sorted(BENCHMARKS)}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    settings = run.evaluation
    seed = int(settings["seed"])
    seeds = [seed + i for i in range(int(settings["episodes"]))]
    kwargs = {"candidates": int(settings.get("candidates", 6))}
    if benchmark_name == "twin_retrieval":
        kwargs["k"] = int(settings["k_twins"])
    benchmark = BENCHMARKS[benchmark_name](**kwargs)

    if isinstance(benchmark, CompositionalBenchmark):
        trained = benchmark.train(seed=seed)
    else:
        trained = trained_params(int(settings.get("train_scenes", 200)), seed)

    if ablation:
        chain = settings.get("modality_masks") or [list(m) for m in DEFAULT_ABLATION]
        if not isinstance(benchmark, TwinRetrievalBenchmark):
            print("--ablation needs the twin_retrieval benchmark", file=sys.stderr)
            return EXIT_USAGE
        reports = ablation_study(benchmark, chain, seeds, trained)
        print(report_table(reports))
        print(f"monotone: {is_monotone(reports)}")
        write_reports(reports, settings["output"], f"{benchmark.name}-ablation")
        return EXIT_OK

    params = {
        PolicyKind.NO_INTERACTION: None,
        PolicyKind.ORACLE_INTERACTION: aligned_params(),
        PolicyKind.INTERACTIVE_TRAINED: trained,
    }
    kinds = [PolicyKind(p) for p in policies] if policies else list(benchmark.policies)
    reports = [
        evaluate(benchmark, PolicySpec(kind, params=params[kind]), seeds)
        for kind in kinds
    ]
    print(report_table(reports))
    write_reports(reports, settings["output"], benchmark.name)
    return EXIT_OK


def cmd_replay(dataset: str, episode_id: str) -> int:
    from EmbodySim.services.replay import replay_record

    print(replay_record(dataset, episode_id))
    return EXIT_OK


def cmd_validate(dataset: str, replay: bool) -> int:
    from EmbodySim.services.replay import validate_dataset

    audit = validate_dataset(dataset, replay=replay)
    for problem in audit.problems:
        print(problem)
    print(f"{audit.episodes} episodes, {len(audit.problems)} problems")
    return EXIT_OK if audit.ok else EXIT_DETERMINISM


def run_command(args: argparse.Namespace) -> int:
    overrides: Dict = {}
    if args.command == "gen":
        overrides.update(
            _overrides(args, "generation", ("scenes", "seed", "workers", "output"))
        )
        overrides["taskgen.tasks_per_scene"] = args.tasks_per_scene
    elif args.command == "serve":
        overrides.update(
            _overrides(args, "server", ("host", "port", "seed", "episode_log"))
        )
    elif args.command == "eval":
        overrides.update(
            _overrides(
                args,
                "evaluation",
                ("episodes", "seed", "k_twins", "train_scenes", "output"),
            )
        )
    run = RunConfig.from_config(config, overrides)

    if args.command == "gen":
        return cmd_gen(run)
    if args.command == "serve":
        return cmd_serve(run, args.stdio)
    if args.command == "eval":
        return cmd_eval(run, args.benchmark, args.policy, args.ablation)
    if args.command == "replay":
        return cmd_replay(args.dataset, args.episode_id)
    return cmd_validate(args.dataset, args.replay)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run EmbodySim.

    Exit codes: 0 ok, 1 usage or config, 2 environment, 3 determinism.
    """
    args = build_parser().parse_args(argv)
    if args.config:
        os.environ["EMBODYSIM_CONFIG"] = str(Path(args.config))
    log_file = setup_logging(True if args.debug else None)
    if log_file:
        logger.info(f"Logging initialized. Log file: {log_file}")

    try:
        code = run_command(args)
    except DeterminismError as e:
        print(f"nondeterminism: {e}", file=sys.stderr)
        code = EXIT_DETERMINISM
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_USAGE
    except EmbodySimError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_USAGE
    except OSError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_ENVIRONMENT
    if argv is None:
        sys.exit(code)
    return code


__all__ = ["main", "build_parser", "cmd_gen", "cmd_serve", "cmd_eval", "cmd_replay"]
