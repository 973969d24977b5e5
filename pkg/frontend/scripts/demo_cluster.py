#!/usr/bin/env python3
"""Real-time demo cluster for console testing: four nodes over HTTP, two
devices with live measurement agents, and a compromise injected into dev-0
a few seconds in. Prints one bootstrap JSON line, then runs until killed.
"""

import json
import signal
import socket
import sys
import tempfile
import threading
import time
from pathlib import Path

from veriledger.agent import DeviceAgent, SealedKey, build_manifest
from veriledger.keys import SigningKey
from veriledger.membership import Member, Membership
from veriledger.node.client import HttpTransport, NodeClient
from veriledger.node.config import DeviceConfig, NodeConfig, PeerConfig
from veriledger.node.httpd import NodeRunner
from veriledger.node.service import NodeService, WallClock

NODES = 4
DEVICES = ["dev-0", "dev-1"]
ARTIFACTS = ["bin/app", "etc/conf"]
INJECT_AFTER_S = 5.0
AGENT_PERIOD_MS = 1000
BLOCK_INTERVAL_MS = 1000


def free_ports(n):
    sockets = [socket.socket() for _ in range(n)]
    for s in sockets:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in sockets]
    for s in sockets:
        s.close()
    return ports


def main() -> int:
    workdir = Path(tempfile.mkdtemp(prefix="veriledger-console-demo-"))
    node_keys = [SigningKey.generate() for _ in range(NODES)]
    operator_key = SigningKey.generate()
    auditor_key = SigningKey.generate()
    agent_keys = {d: SigningKey.generate() for d in DEVICES}

    members = [
        Member.create(k.public_bytes, f"node-{i}", ("operator", "integrator"))
        for i, k in enumerate(node_keys)
    ]
    members.append(Member.create(operator_key.public_bytes, "console-operator", ("operator",)))
    members.append(Member.create(auditor_key.public_bytes, "console-auditor", ("auditor",)))
    members.extend(
        Member.create(k.public_bytes, f"agent-{d}", ("device-agent",))
        for d, k in sorted(agent_keys.items())
    )
    directory = Membership(members)
    validator_ids = tuple(k.member_id for k in node_keys)
    devices = tuple(
        DeviceConfig(d, agent_keys[d].member_id, f"Device {d}") for d in DEVICES
    )
    links = (("dev-0", "dev-1"),)
    ports = free_ports(NODES)

    runners = []
    for i, key in enumerate(node_keys):
        config = NodeConfig(
            member_id=key.member_id,
            data_dir=workdir / f"node-{i}",
            membership=directory,
            validator_ids=validator_ids,
            peers=tuple(
                PeerConfig(node_keys[j].member_id, f"http://127.0.0.1:{ports[j]}")
                for j in range(NODES)
                if j != i
            ),
            devices=devices,
            links=links,
            listen_port=ports[i],
            block_interval_ms=BLOCK_INTERVAL_MS,
            freshness_window_ms=10 * AGENT_PERIOD_MS,
        )
        runner = NodeRunner(NodeService(config, key), flush_interval_s=0.01)
        runner.start()
        runners.append(runner)

    stop = threading.Event()
    agent_threads = []
    roots = {}
    for idx, device_id in enumerate(DEVICES):
        root = workdir / "devices" / device_id
        for artifact in ARTIFACTS:
            target = root / artifact
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(f"{device_id}:{artifact}:v1".encode() * 20)
        roots[device_id] = root
        manifest = build_manifest(device_id, root, ARTIFACTS)
        client = NodeClient(
            HttpTransport(f"http://127.0.0.1:{ports[idx % NODES]}"), agent_keys[device_id]
        )
        agent = DeviceAgent(
            manifest,
            root,
            SealedKey(agent_keys[device_id]),
            submit=lambda e, c=client: c.submit_event("main", e),
            period_ms=AGENT_PERIOD_MS,
        )
        thread = threading.Thread(
            target=agent.run, args=(WallClock(), stop), daemon=True
        )
        thread.start()
        agent_threads.append(thread)

    injected_at = {}

    def inject():
        target = roots["dev-0"] / ARTIFACTS[0]
        data = bytearray(target.read_bytes())
        data[7] ^= 0x40
        target.write_bytes(bytes(data))
        injected_at["t"] = int(time.time() * 1000)

    injector = threading.Timer(INJECT_AFTER_S, inject)
    injector.daemon = True
    injector.start()

    bootstrap = {
        "baseUrl": f"http://127.0.0.1:{ports[0]}",
        "operatorKeyHex": operator_key.to_hex(),
        "auditorKeyHex": auditor_key.to_hex(),
        "devices": DEVICES,
        "injection": {"device": "dev-0", "artifact": ARTIFACTS[0], "afterS": INJECT_AFTER_S},
        "pollIntervalMs": 2000,
    }
    sys.stdout.write(json.dumps(bootstrap) + "\n")
    sys.stdout.flush()

    def shutdown(*_):
        stop.set()
        injector.cancel()
        for runner in runners:
            runner.stop()
        sys.exit(0)

    signal.signal(signal.SIGTERM, shutdown)
    signal.signal(signal.SIGINT, shutdown)
    while True:
        time.sleep(0.5)


if __name__ == "__main__":
    sys.exit(main())
