"""Client surface for the node REST API, with signed requests.

Agents, the CLI, the simulation harness, and the console all speak to
nodes through this interface; nothing consumes node internals directly.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Callable

from ..canonical import canonical_json
from ..errors import TransportError
from ..events import EventRecord
from ..keys import SigningKey
from .service import WallClock, sign_headers

# transport: (method, target, headers, body) -> (status, parsed JSON dict)
Transport = Callable[[str, str, dict, bytes], tuple[int, dict]]


class HttpTransport:
    def __init__(self, base_url: str, timeout_s: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def __call__(self, method: str, target: str, headers: dict, body: bytes) -> tuple[int, dict]:
        req = urllib.request.Request(
            self.base_url + target, data=body if body else None, method=method
        )
        for k, v in headers.items():
            req.add_header(k, v)
        req.add_header("content-type", "application/json")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = resp.read()
                status = resp.status
        except urllib.error.HTTPError as e:
            payload = e.read()
            status = e.code
        except (urllib.error.URLError, OSError, TimeoutError) as e:
            raise TransportError(str(e)) from e
        try:
            data = json.loads(payload.decode("utf-8")) if payload else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise TransportError(f"non-JSON response: {e}") from e
        return status, data


class NodeClient:
    def __init__(self, transport: Transport, signing_key: SigningKey, clock=None):
        self.transport = transport
        self.key = signing_key
        self.member_id = signing_key.member_id
        self.clock = clock if clock is not None else WallClock()

    def request(self, method: str, target: str, body: dict | None = None) -> tuple[int, dict]:
        raw = canonical_json(body) if body is not None else b""
        headers = sign_headers(self.key, method, target, raw, self.clock.now_ms())
        return self.transport(method, target, headers, raw)

    def _expect(self, ok_status: int, method: str, target: str, body: dict | None = None) -> dict:
        status, data = self.request(method, target, body)
        if status != ok_status:
            raise TransportError(f"{method} {target} -> {status}: {data.get('error', data)}")
        return data

    # -- convenience wrappers over the public endpoints ------------------

    def submit_event(self, chain_id: str, event: EventRecord | dict) -> dict:
        wire = event.to_wire() if isinstance(event, EventRecord) else event
        return self._expect(202, "POST", f"/v1/chains/{chain_id}/events", wire)

    def get_head(self, chain_id: str = "main") -> dict:
        return self._expect(200, "GET", f"/v1/chains/{chain_id}/head")

    def get_blocks(self, chain_id: str = "main", start: int = 0, end: int | None = None) -> dict:
        target = f"/v1/chains/{chain_id}/blocks?from={start}"
        if end is not None:
            target += f"&to={end}"
        return self._expect(200, "GET", target)

    def get_device_status(self, device_id: str) -> dict:
        return self._expect(200, "GET", f"/v1/devices/{device_id}/status")

    def get_topology(self) -> dict:
        return self._expect(200, "GET", "/v1/topology")

    def get_audit_report(self, range_from: int = 0, range_to: int | None = None) -> dict:
        target = f"/v1/audit/report?from={range_from}"
        if range_to is not None:
            target += f"&to={range_to}"
        return self._expect(200, "GET", target)

    def create_satellite(self, members: list[str]) -> dict:
        return self._expect(201, "POST", "/v1/satellite-chains", {"members": members})
