"""Operator command line.

Subcommands: init, node run, agent run, manifest build, supply-chain
register, satellite create, status, audit, sim run. Exit codes: 0 success,
1 domain error, 2 usage error. --json switches query output to canonical
JSON for scripting.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from pathlib import Path

from .agent import DeviceAgent, SealedKey, build_manifest
from .audit import audit_stored_chain, derive_device_status
from .canonical import canonical_json
from .errors import ConfigurationError, LedgerError, TransportError
from .events import EventKind, make_event, parse_body
from .keys import SigningKey
from .ledger import Ledger
from .measurement import Manifest
from .membership import Member, Membership
from .node.client import HttpTransport, NodeClient
from .node.config import load_config
from .node.service import NodeService, WallClock
from .sim.harness import run_scenario, scenario_from_wire

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _print(data, as_json: bool, render=None) -> None:
    if as_json or render is None:
        sys.stdout.write(canonical_json(data).decode("utf-8") + "\n")
    else:
        sys.stdout.write(render(data) + "\n")


def _load_key(path: str) -> SigningKey:
    try:
        return SigningKey.from_hex(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"cannot load key {path}: {e}") from e


def _client(args) -> NodeClient:
    key = _load_key(args.key)
    return NodeClient(HttpTransport(args.node), key)


def _offline_world(config_path: str):
    config = load_config(Path(config_path))
    ledger = Ledger(
        config.membership, config.validators(), config.data_dir, config.main_chain_id
    )
    ledger.restore_satellites()
    return config, ledger


# ---------------------------------------------------------------------------
# subcommand implementations


def cmd_init(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    members = []
    entries = []
    for i in range(args.nodes):
        key = SigningKey.generate()
        (out / f"node-{i}.key").write_text(key.to_hex())
        member = Member.create(key.public_bytes, f"node-{i}", ("operator", "integrator"))
        members.append(member)
        entries.append((f"node-{i}", member.member_id))
    for i in range(args.devices):
        key = SigningKey.generate()
        (out / f"agent-dev-{i}.key").write_text(key.to_hex())
        members.append(Member.create(key.public_bytes, f"agent-dev-{i}", ("device-agent",)))
    extra_roles = {"manufacturer": ("manufacturer",), "auditor": ("auditor",)}
    for name, roles in extra_roles.items():
        key = SigningKey.generate()
        (out / f"{name}.key").write_text(key.to_hex())
        members.append(Member.create(key.public_bytes, name, roles))

    membership = Membership(members)
    (out / "membership.json").write_bytes(
        canonical_json({"members": membership.to_wire()}) + b"\n"
    )
    validators = [m for _, m in entries]
    base_port = args.base_port
    agent_ids = {
        f"dev-{i}": next(m.member_id for m in members if m.display_name == f"agent-dev-{i}")
        for i in range(args.devices)
    }
    for i, (name, member_id) in enumerate(entries):
        node_dir = out / name
        node_dir.mkdir(exist_ok=True)
        config = {
            "block_interval_ms": args.block_interval,
            "data_dir": "data",
            "devices": [
                {"agent_member_id": aid, "device_id": d, "display_name": d}
                for d, aid in sorted(agent_ids.items())
            ],
            "key_file": f"../node-{i}.key",
            "listen_host": "127.0.0.1",
            "listen_port": base_port + i,
            "member_id": member_id,
            "membership_file": "../membership.json",
            "peers": [
                {"member_id": m, "url": f"http://127.0.0.1:{base_port + j}"}
                for j, (_, m) in enumerate(entries)
                if m != member_id
            ],
            "validators": validators,
        }
        (node_dir / "config.json").write_bytes(canonical_json(config) + b"\n")
    _print(
        {"dir": str(out), "nodes": args.nodes, "devices": args.devices},
        args.json,
        lambda d: f"initialized {d['nodes']} node configs and {d['devices']} device keys under {d['dir']}",
    )
    return 0


def cmd_node_run(args) -> int:
    from .node.httpd import NodeRunner

    config = load_config(Path(args.config))
    if config.key_file is None:
        raise ConfigurationError("config has no key_file")
    key = _load_key(str(config.key_file))
    service = NodeService(config, key)
    runner = NodeRunner(service)
    runner.start()
    sys.stderr.write(
        f"node {config.member_id[:12]} listening on "
        f"{config.listen_host}:{config.listen_port} (ctrl-c to stop)\n"
    )
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        runner.stop()
    return 0


def cmd_agent_run(args) -> int:
    key = _load_key(args.key)
    manifest = Manifest.from_wire(json.loads(Path(args.manifest).read_text()))
    client = NodeClient(HttpTransport(args.node), key)
    agent = DeviceAgent(
        manifest,
        Path(args.root),
        SealedKey(key),
        submit=lambda e: client.submit_event("main", e),
        period_ms=args.period,
        jitter_ms=args.jitter,
    )
    stop = threading.Event()
    cycles = {"n": 0}

    def on_cycle(now):
        cycles["n"] += 1
        if args.cycles and cycles["n"] >= args.cycles:
            stop.set()

    sys.stderr.write(f"agent for {manifest.device_id} reporting to {args.node}\n")
    try:
        agent.run(WallClock(), stop, on_cycle)
    except KeyboardInterrupt:
        pass
    return 0


def cmd_manifest_build(args) -> int:
    root = Path(args.root)
    paths = args.paths or sorted(
        str(p.relative_to(root)) for p in root.rglob("*") if p.is_file()
    )
    manifest = build_manifest(args.device, root, paths, created_at=WallClock.now_ms())
    payload = canonical_json(manifest.to_wire()) + b"\n"
    if args.out:
        Path(args.out).write_bytes(payload)
    _print(
        manifest.to_wire(),
        args.json or not args.out,
        lambda d: f"manifest {d['manifest_id'][:16]} over {len(d['entries'])} artifacts",
    )
    return 0


def cmd_supply_register(args) -> int:
    key = _load_key(args.key)
    record = json.loads(Path(args.file).read_text())
    body = parse_body(EventKind.SUPPLY_CHAIN, record)
    event = make_event(EventKind.SUPPLY_CHAIN, body, key, WallClock.now_ms())
    client = NodeClient(HttpTransport(args.node), key)
    receipt = client.submit_event("main", event)
    _print(receipt, args.json, lambda d: f"registered, receipt {d['event_id'][:16]} ({d['status']})")
    return 0


def cmd_satellite_create(args) -> int:
    client = _client(args)
    members = [m.strip() for m in args.members.split(",") if m.strip()]
    created = client.create_satellite(members)
    _print(created, args.json, lambda d: f"satellite {d['chain_id']} created")
    return 0


def cmd_status(args) -> int:
    if args.node:
        status = _client(args).get_device_status(args.device)
    else:
        config, ledger = _offline_world(args.config)
        events = [e for _, _, e in ledger.main.committed_events()]
        status = derive_device_status(
            events,
            args.device,
            WallClock.now_ms(),
            config.freshness_window_ms,
            config.device_registry(),
            config.membership,
        ).to_wire()
        ledger.close()
    _print(status, args.json, lambda d: f"{d['device_id']}: {d['state']}")
    return 0


def cmd_audit(args) -> int:
    range_from = args.range_from or 0
    range_to = args.range_to or WallClock.now_ms()
    if args.node:
        report = _client(args).get_audit_report(range_from, range_to)
    else:
        config = load_config(Path(args.config))
        log = config.data_dir / "chains" / f"{config.main_chain_id}.log"
        if not log.exists():  # node never ran: materialize the genesis
            Ledger(
                config.membership, config.validators(), config.data_dir, config.main_chain_id
            ).close()
        report = audit_stored_chain(
            config.data_dir,
            config.main_chain_id,
            config.membership,
            range_from,
            range_to,
            config.supply_policy,
            config.freshness_window_ms,
            config.device_registry(),
            generated_at=WallClock.now_ms(),
        ).to_wire()
    _print(
        report,
        args.json,
        lambda d: (
            f"integrity: {d['chain_integrity']['status']}; "
            f"devices: {len(d['device_statuses'])}; "
            f"accepted reports: {d['reports_accepted']}; "
            f"rejected: {len(d['rejected_reports'])}"
        ),
    )
    return 0 if report["chain_integrity"]["status"] == "valid" else DOMAIN_ERROR


def cmd_sim_run(args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        sys.stderr.write(f"scenario file not found: {path}\n")
        return USAGE_ERROR
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        sys.stderr.write(f"scenario is not valid JSON: {e}\n")
        return USAGE_ERROR
    scenario = scenario_from_wire(data)
    metrics = run_scenario(scenario)
    payload = metrics.to_json() + b"\n"
    if args.out:
        Path(args.out).write_bytes(payload)
        _print(
            {"out": args.out, "blocks": metrics.blocks_produced},
            args.json,
            lambda d: f"metrics written to {d['out']} ({d['blocks']} blocks)",
        )
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veriledger",
        description="Consortium security-event ledger: nodes, agents, audits.",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="generate keys, membership, and node configs")
    p.add_argument("--dir", required=True)
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--devices", type=int, default=2)
    p.add_argument("--base-port", type=int, default=8440)
    p.add_argument("--block-interval", type=int, default=1000)
    p.set_defaults(fn=cmd_init)

    node = sub.add_parser("node", help="node operations").add_subparsers(
        dest="action", required=True
    )
    p = node.add_parser("run", help="run a consortium node")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_node_run)

    agent = sub.add_parser("agent", help="device agent operations").add_subparsers(
        dest="action", required=True
    )
    p = agent.add_parser("run", help="run a measurement agent")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--period", type=int, default=1000)
    p.add_argument("--jitter", type=int, default=100)
    p.add_argument("--cycles", type=int, default=0, help="stop after N cycles (0 = run forever)")
    p.set_defaults(fn=cmd_agent_run)

    manifest = sub.add_parser("manifest", help="manifest operations").add_subparsers(
        dest="action", required=True
    )
    p = manifest.add_parser("build", help="hash artifacts into a golden manifest")
    p.add_argument("--device", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--out")
    p.add_argument("paths", nargs="*")
    p.set_defaults(fn=cmd_manifest_build)

    supply = sub.add_parser("supply-chain", help="supply-chain records").add_subparsers(
        dest="action", required=True
    )
    p = supply.add_parser("register", help="register a component list on the ledger")
    p.add_argument("--node", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--file", required=True)
    p.set_defaults(fn=cmd_supply_register)

    satellite = sub.add_parser("satellite", help="satellite chains").add_subparsers(
        dest="action", required=True
    )
    p = satellite.add_parser("create", help="create an access-restricted satellite chain")
    p.add_argument("--node", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--members", required=True, help="comma-separated member ids")
    p.set_defaults(fn=cmd_satellite_create)

    p = sub.add_parser("status", help="trust state of one device")
    p.add_argument("device")
    p.add_argument("--node")
    p.add_argument("--key")
    p.add_argument("--config", help="node config for offline derivation")
    p.set_defaults(fn=cmd_status)

    p = sub.add_parser("audit", help="audit report over a time range")
    p.add_argument("--from", dest="range_from", type=int)
    p.add_argument("--to", dest="range_to", type=int)
    p.add_argument("--node")
    p.add_argument("--key")
    p.add_argument("--config", help="node config for offline derivation")
    p.set_defaults(fn=cmd_audit)

    sim = sub.add_parser("sim", help="simulated runs").add_subparsers(
        dest="action", required=True
    )
    p = sim.add_parser("run", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sim_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.fn in (cmd_status, cmd_audit):
        if bool(args.node) == bool(args.config):
            parser.error("exactly one of --node or --config is required")
        if args.node and not args.key:
            parser.error("--key is required with --node")
    try:
        return args.fn(args)
    except TransportError as e:
        sys.stderr.write(f"transport error: {e}\n")
        return DOMAIN_ERROR
    except LedgerError as e:
        sys.stderr.write(f"error: {e}\n")
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
