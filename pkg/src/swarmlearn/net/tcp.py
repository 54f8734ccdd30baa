"""TCP transport: one connection per request, one frame each way.

Passing a :class:`TlsConfig` turns every connection into mutually
authenticated TLS: each node holds its own certificate and key, and peers
are accepted only if their certificate chains to the configured CA.
"""
from __future__ import annotations

import logging
import socket
import socketserver
import ssl
import threading
import time
from dataclasses import dataclass

from ..errors import ConnRefused, DecodeError, Timeout, TransportDown
from .codec import HEADER_SIZE, SwarmMessage, decode, encode, parse_header
from .transport import BaseTransport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TlsConfig:
    certfile: str
    keyfile: str
    cafile: str

    def server_context(self) -> ssl.SSLContext:
        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        ctx.minimum_version = ssl.TLSVersion.TLSv1_2
        ctx.load_cert_chain(self.certfile, self.keyfile)
        ctx.load_verify_locations(self.cafile)
        ctx.verify_mode = ssl.CERT_REQUIRED
        return ctx

    def client_context(self) -> ssl.SSLContext:
        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
        ctx.minimum_version = ssl.TLSVersion.TLSv1_2
        ctx.load_cert_chain(self.certfile, self.keyfile)
        ctx.load_verify_locations(self.cafile)
        # peers are addressed by ip:port; identity comes from the CA chain
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_REQUIRED
        return ctx


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock) -> bytes:
    """Read one frame; raises DecodeError on a short or malformed stream."""
    head = _recv_exact(sock, HEADER_SIZE)
    _, _, length = parse_header(head)
    body = _recv_exact(sock, length)
    return head + body


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        transport: TcpTransport = self.server.transport
        sock = self.request
        try:
            if transport.tls is not None:
                sock = transport._server_ctx.wrap_socket(sock, server_side=True)
            sock.settimeout(transport.io_timeout)
            frame = read_frame(sock)
            reply = transport._on_frame(frame, transport.now())
            if reply is not None:
                sock.sendall(reply)
        except (OSError, DecodeError, ssl.SSLError) as exc:
            log.debug("node %s: inbound connection failed: %s", transport.node_id, exc)


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class TcpTransport(BaseTransport):
    def __init__(self, node_id: int, host: str = "127.0.0.1", port: int = 0, tls: TlsConfig | None = None,
                 io_timeout: float = 5.0):
        super().__init__(node_id)
        self.tls = tls
        self.io_timeout = io_timeout
        self._server_ctx = tls.server_context() if tls else None
        self._client_ctx = tls.client_context() if tls else None
        self._server = _Server((host, port), _Handler)
        self._server.transport = self
        self.address = f"{host}:{self._server.server_address[1]}"
        self._thread = threading.Thread(target=self._server.serve_forever, name=f"swarm-tcp-{node_id}",
                                        daemon=True)
        self._thread.start()

    def now(self) -> float:
        return time.monotonic() * 1000.0

    def request(self, address: str, msg: SwarmMessage, timeout_ms: float = 5000.0) -> SwarmMessage:
        if self.closed:
            raise TransportDown(f"transport {self.address} is closed")
        host, _, port = address.rpartition(":")
        timeout = timeout_ms / 1000.0
        try:
            raw = socket.create_connection((host, int(port)), timeout=timeout)
        except ConnectionRefusedError as exc:
            raise ConnRefused(f"{address}: {exc}") from None
        except socket.timeout:
            raise Timeout(f"connect to {address} timed out") from None
        except OSError as exc:
            raise ConnRefused(f"{address}: {exc}") from None
        try:
            sock = self._client_ctx.wrap_socket(raw) if self._client_ctx else raw
            with sock:
                sock.settimeout(timeout)
                sock.sendall(encode(msg))
                return decode(read_frame(sock))
        except socket.timeout:
            raise Timeout(f"no reply from {address} within {timeout_ms} ms") from None
        except (OSError, ssl.SSLError, DecodeError) as exc:
            raise ConnRefused(f"{address}: {exc}") from None
        finally:
            raw.close()

    def poll(self, window_ms: float, expect: int | None = None) -> list[SwarmMessage]:
        """Wait up to ``window_ms`` (or until ``expect`` messages are queued)."""
        deadline = time.monotonic() + window_ms / 1000.0
        with self._lock:
            while expect is None or len(self.inbox) < expect:
                left = deadline - time.monotonic()
                if left <= 0:
                    break
                self._lock.wait(left)
        return self._take_until(float("inf"))

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._server.shutdown()
            self._server.server_close()
