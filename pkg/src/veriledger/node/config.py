"""Node configuration: identity, peers, membership, devices, intervals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..audit import DEFAULT_WINDOW_MS, SupplyChainPolicy
from ..canonical import from_hex
from ..errors import ConfigurationError
from ..membership import Membership


@dataclass(frozen=True)
class PeerConfig:
    member_id: str
    url: str = ""


@dataclass(frozen=True)
class DeviceConfig:
    device_id: str
    agent_member_id: str
    display_name: str = ""


@dataclass
class NodeConfig:
    member_id: str
    data_dir: Path
    membership: Membership
    validator_ids: tuple[str, ...]
    peers: tuple[PeerConfig, ...] = ()
    devices: tuple[DeviceConfig, ...] = ()
    links: tuple[tuple[str, str], ...] = ()
    listen_host: str = "127.0.0.1"
    listen_port: int = 8440
    block_interval_ms: int = 1000
    freshness_window_ms: int = DEFAULT_WINDOW_MS
    main_chain_id: str = "main"
    supply_policy: SupplyChainPolicy = field(default_factory=SupplyChainPolicy)
    key_file: Path | None = None

    def __post_init__(self):
        if self.block_interval_ms <= 0:
            raise ConfigurationError("block_interval_ms must be positive")
        if self.member_id not in self.membership:
            raise ConfigurationError("node identity is not in the membership")
        for vid in self.validator_ids:
            if vid not in self.membership:
                raise ConfigurationError(f"validator {vid} is not in the membership")
        if self.member_id not in self.validator_ids:
            raise ConfigurationError("node identity is not a validator")
        seen = set()
        for d in self.devices:
            if d.device_id in seen:
                raise ConfigurationError(f"duplicate device {d.device_id}")
            seen.add(d.device_id)

    def validators(self) -> Membership:
        return Membership(self.membership.get(v) for v in sorted(self.validator_ids))

    def device_registry(self) -> dict[str, str]:
        return {d.device_id: d.agent_member_id for d in self.devices}


def load_membership_file(path: Path) -> Membership:
    try:
        data = json.loads(Path(path).read_text())
        return Membership.from_wire(data["members"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigurationError(f"cannot load membership from {path}: {e}") from e


def load_config(path: Path) -> NodeConfig:
    """Load a node config file; relative paths resolve against its parent."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot load config {path}: {e}") from e
    base = path.parent
    try:
        membership = load_membership_file(base / data["membership_file"])
        policy_data = data.get("supply_policy", {})
        policy = SupplyChainPolicy(
            supplier_allowlist=frozenset(policy_data.get("supplier_allowlist", [])),
            supplier_denylist=frozenset(policy_data.get("supplier_denylist", [])),
            bad_component_digests=frozenset(
                from_hex(d, size=32, what="bad digest")
                for d in policy_data.get("bad_component_digests", [])
            ),
            unknown_supplier_action=policy_data.get("unknown_supplier_action", "warn"),
        )
        return NodeConfig(
            member_id=data["member_id"],
            data_dir=base / data.get("data_dir", "data"),
            membership=membership,
            validator_ids=tuple(data["validators"]),
            peers=tuple(PeerConfig(p["member_id"], p.get("url", "")) for p in data.get("peers", [])),
            devices=tuple(
                DeviceConfig(d["device_id"], d["agent_member_id"], d.get("display_name", ""))
                for d in data.get("devices", [])
            ),
            links=tuple((a, b) for a, b in data.get("links", [])),
            listen_host=data.get("listen_host", "127.0.0.1"),
            listen_port=data.get("listen_port", 8440),
            block_interval_ms=data.get("block_interval_ms", 1000),
            freshness_window_ms=data.get("freshness_window_ms", DEFAULT_WINDOW_MS),
            main_chain_id=data.get("main_chain_id", "main"),
            supply_policy=policy,
            key_file=base / data["key_file"] if "key_file" in data else None,
        )
    except (KeyError, TypeError) as e:
        raise ConfigurationError(f"malformed config {path}: {e}") from e
