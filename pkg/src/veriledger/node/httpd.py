"""HTTP runner: binds a NodeService to a real socket and drives its
block-production tick and outbox delivery with background threads."""

from __future__ import annotations

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..canonical import canonical_json
from ..errors import TransportError
from .client import HttpTransport
from .service import NodeService, Outbound, Request, sign_headers

logger = logging.getLogger(__name__)


def _make_handler(service: NodeService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _serve(self):
            length = int(self.headers.get("content-length") or 0)
            body = self.rfile.read(length) if length else b""
            request = Request(
                method=self.command,
                target=self.path,
                headers={k.lower(): v for k, v in self.headers.items()},
                body=body,
            )
            response = service.dispatch(request)
            payload = canonical_json(response.body)
            self.send_response(response.status)
            self.send_header("content-type", "application/json")
            self.send_header("content-length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        do_GET = _serve
        do_POST = _serve

        def log_message(self, fmt, *args):
            logger.debug("%s %s", self.address_string(), fmt % args)

    return Handler


class NodeRunner:
    """Owns the server socket, the tick timer, and the outbox flusher."""

    def __init__(self, service: NodeService, flush_interval_s: float = 0.02):
        self.service = service
        self.flush_interval_s = flush_interval_s
        self._peer_urls = {p.member_id: p.url for p in service.config.peers if p.url}
        self._transports = {m: HttpTransport(u, timeout_s=3.0) for m, u in self._peer_urls.items()}
        self._stop = threading.Event()
        self._server = ThreadingHTTPServer(
            (service.config.listen_host, service.config.listen_port),
            _make_handler(service),
        )
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._threads = [
            threading.Thread(target=self._server.serve_forever, daemon=True),
            threading.Thread(target=self._tick_loop, daemon=True),
            threading.Thread(target=self._flush_loop, daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        self._server.shutdown()
        self._server.server_close()
        self.service.close()

    def _tick_loop(self) -> None:
        interval = self.service.config.block_interval_ms / 1000.0
        while not self._stop.wait(interval):
            try:
                self.service.tick()
            except Exception:
                logger.exception("tick failed")

    def _flush_loop(self) -> None:
        while not self._stop.wait(self.flush_interval_s):
            for message in self.service.drain_outbox():
                self._deliver(message)

    def _deliver(self, message: Outbound) -> None:
        transport = self._transports.get(message.peer)
        if transport is None:
            if message.tag is not None:
                self.service.handle_response(message.tag, message.peer, None, None)
            return
        raw = canonical_json(message.body) if message.body is not None else b""
        headers = sign_headers(
            self.service.key, message.method, message.target, raw, self.service.clock.now_ms()
        )
        if message.body is not None:
            headers["x-relay"] = "1"
        try:
            status, data = transport(message.method, message.target, headers, raw)
        except TransportError:
            status, data = None, None
        if message.tag is not None:
            self.service.handle_response(message.tag, message.peer, status, data)
