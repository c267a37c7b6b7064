"""
edgechain command-line entry point.

Generates identities, runs benchmarks and scripted scenarios, and inspects or
validates exported ledgers. Exit codes: 0 success, 1 run or assertion
failure, 2 usage error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.app.core.auth.identity import build_identity_bundle
from src.app.core.config.loader import config_loader
from src.app.core.config.settings import configure_logging, settings
from src.app.core.errors import EdgeChainError
from src.app.ledger.chain import import_ledger, validate_ledger_file
from src.app.ledger.hashing import hash_header
from src.app.ledger.state import replay
from src.app.models.pydantic.bench import BenchmarkConfig
from src.app.models.pydantic.fleet import PAYLOAD_SIZES_KIB, CommunicationMode
from src.app.models.pydantic.network import ClockMode, NodeAddress, NodeKind
from src.app.models.pydantic.scenario import ScenarioConfig
from src.app.services.bench_service import (
    FaultBenchFailed,
    IoError,
    emit_tables,
    run_fault_bench,
    run_notify_bench,
    run_throughput_bench,
)
from src.app.services.scenario_service import run_scenario, run_scenario_adaptive_guidance

logger = logging.getLogger(__name__)


def _payload_list(text: str) -> List[int]:
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    for size in sizes:
        if size not in PAYLOAD_SIZES_KIB:
            raise argparse.ArgumentTypeError(f"payload size {size} not in {PAYLOAD_SIZES_KIB}")
    if not sizes:
        raise argparse.ArgumentTypeError("at least one payload size is required")
    return sizes


def _node_address(text: str) -> NodeAddress:
    try:
        return NodeAddress.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML configuration file")
    common.add_argument("--mode", choices=[m.value for m in CommunicationMode])
    common.add_argument("--payload-kib", type=_payload_list, help="comma list, e.g. 16,32,64,100")
    common.add_argument("--requests", type=int, help="requests per sending vehicle")
    common.add_argument("--vehicles", type=int, help="number of sending vehicles")
    common.add_argument("--seed", type=int)
    common.add_argument("--clock", choices=[c.value for c in ClockMode])
    common.add_argument("--out", default=settings.OUT_DIR, help="output directory (default %(default)s)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="edgechain",
        description="Permissioned-ledger simulator for cooperative vehicle situation awareness",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    gen = commands.add_parser("gen-identities", help="write a deterministic identity bundle")
    gen.add_argument("--vehicles", type=int, default=3)
    gen.add_argument("--peers", type=int, default=3)
    gen.add_argument("--orderers", type=int, default=3)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=settings.OUT_DIR)

    commands.add_parser("run-bench", parents=[common], help="throughput table per mode and payload size")
    commands.add_parser("run-notify-bench", parents=[common], help="cross-zone notification latency table")
    commands.add_parser("run-fault-bench", parents=[common], help="crash an orderer and a peer mid-run")
    guidance = commands.add_parser(
        "run-adaptive-guidance", parents=[common], help="accident report, notification and reroute"
    )
    guidance.add_argument("--variant", choices=["default", "off-route", "blue-peer-crashed"], default="default")

    inspect = commands.add_parser("inspect", help="inspect a ledger file or a peer after a scenario")
    inspect.add_argument("what", choices=["chain", "state", "node"])
    inspect.add_argument("--ledger", help="ledger-peer-<i>.bin file (chain, state)")
    inspect.add_argument("--node", type=_node_address, help="peer address such as peer-1 (node)")
    inspect.add_argument("--config", help="scenario file to run before inspecting a node")
    inspect.add_argument("--seed", type=int)

    validate = commands.add_parser("validate-chain", help="report the first bad block of a ledger file")
    validate.add_argument("--ledger", required=True)
    return parser


def bench_config(args: argparse.Namespace) -> BenchmarkConfig:
    """Defaults < config file < flags."""
    overrides: Dict[str, Any] = {
        "payload_sizes": args.payload_kib,
        "requests_per_vehicle": args.requests,
        "vehicles": args.vehicles,
        "seed": args.seed,
        "clock": args.clock,
        "modes": [args.mode] if args.mode else None,
    }
    return config_loader.load_model(BenchmarkConfig, args.config, overrides)


def _print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_gen_identities(args: argparse.Namespace) -> int:
    bundle = build_identity_bundle(args.seed, peers=args.peers, orderers=args.orderers, vehicles=args.vehicles)
    target = Path(args.out) / "identities.json"
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(bundle.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {target}: {e}")
    print(f"Wrote {target}")
    return 0


def cmd_run_bench(args: argparse.Namespace) -> int:
    rows = run_throughput_bench(bench_config(args))
    paths = emit_tables(rows, args.out, "benchmark")
    print(f"Wrote {paths['csv']}")
    return 0


def cmd_run_notify_bench(args: argparse.Namespace) -> int:
    rows = run_notify_bench(bench_config(args), events_path=Path(args.out) / "notify-events.jsonl")
    paths = emit_tables(rows, args.out, "notify-benchmark")
    print(f"Wrote {paths['csv']}")
    return 0


def cmd_run_fault_bench(args: argparse.Namespace) -> int:
    config = bench_config(args)
    mode = CommunicationMode(args.mode) if args.mode else CommunicationMode.MULTIPLE
    target = Path(args.out) / "fault-report.json"
    try:
        report = run_fault_bench(config, mode=mode, out_dir=args.out)
    except FaultBenchFailed as e:
        if e.report is not None:
            target.write_text(e.report.model_dump_json(indent=2), encoding="utf-8")
        raise
    target.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    _print_json(report.model_dump(mode="json"))
    return 1 if report.stalled else 0


def cmd_run_adaptive_guidance(args: argparse.Namespace) -> int:
    config = None
    if args.config:
        config = config_loader.load_model(ScenarioConfig, args.config, {"seed": args.seed, "clock": args.clock})
    events = run_scenario_adaptive_guidance(args.variant, seed=args.seed or 0, config=config, out_dir=args.out)
    reroutes = [e for e in events if e.step == "reroute"]
    print(f"Scenario passed: {len(events)} events, {len(reroutes)} reroutes")
    return 0


def _require_ledger(args: argparse.Namespace) -> str:
    if not args.ledger:
        raise EdgeChainError(f"inspect {args.what} needs --ledger")
    return args.ledger


def cmd_inspect(args: argparse.Namespace) -> int:
    if args.what == "chain":
        chain = import_ledger(_require_ledger(args))
        _print_json(
            [
                {
                    "number": block.header.number,
                    "hash": hash_header(block.header).hex(),
                    "previous_hash": bytes(block.header.previous_hash).hex(),
                    "transactions": len(block.transactions),
                    "validity": [flag.value for flag in block.validity],
                }
                for block in chain
            ]
        )
    elif args.what == "state":
        world = replay(import_ledger(_require_ledger(args)))
        _print_json(
            {
                "state_hash": world.state_hash().hex(),
                "keys": {key: list(entry.version) for key, entry in world.items()},
            }
        )
    else:
        if args.node is None or args.node.kind != NodeKind.PEER:
            raise EdgeChainError("inspect node needs --node peer-<i>")
        overrides = {"seed": args.seed}
        config = config_loader.load_model(ScenarioConfig, args.config, overrides)
        deployment = run_scenario(config)
        if args.node.index >= len(deployment.peers):
            raise EdgeChainError(f"{args.node} is not part of the scenario")
        node = deployment.peers[args.node.index]
        _print_json(
            {
                "node": str(node.address),
                "zone": node.zone,
                "height": node.height,
                "state_hash": node.state_hash().hex(),
                "connected_vehicles": sorted(p.hex() for p in node.connected),
            }
        )
    return 0


def cmd_validate_chain(args: argparse.Namespace) -> int:
    bad = validate_ledger_file(args.ledger)
    if bad is None:
        print(f"{args.ledger}: chain valid")
        return 0
    print(f"{args.ledger}: first bad block at index {bad}")
    return 1


COMMANDS = {
    "gen-identities": cmd_gen_identities,
    "run-bench": cmd_run_bench,
    "run-notify-bench": cmd_run_notify_bench,
    "run-fault-bench": cmd_run_fault_bench,
    "run-adaptive-guidance": cmd_run_adaptive_guidance,
    "inspect": cmd_inspect,
    "validate-chain": cmd_validate_chain,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging()
    try:
        return COMMANDS[args.command](args)
    except EdgeChainError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
