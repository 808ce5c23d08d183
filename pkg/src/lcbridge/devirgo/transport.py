"""
Message transports between the coordinator and its workers.

A frame is (tag, payload) where the payload is a JSON document. On TCP the
wire format is a 4-byte little-endian length of the rest of the frame, one
tag byte, then the UTF-8 payload. In-process channels pass the same frames
through queues, so both transports see identical frame counts.
"""

from __future__ import annotations

import json
import queue
import socket
import struct
import threading
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

PROTOCOL_VERSION = 1
MAX_FRAME = 1 << 28

# message tags
HELLO = 1
SETUP = 2
GKR_BEGIN = 3
GKR_BIND = 4
PC_COMMIT = 5
PC_EVAL = 6
PC_QUOTIENT = 7
PC_FOLD = 8
PC_SHARES = 9
PC_OPEN = 10
SC_LOAD = 11
SC_BEGIN = 12
SC_BIND = 13
SHUTDOWN = 14
REPLY = 15
ERROR = 16
STATS = 17
CLOSE = 18

TAG_NAMES = {
    HELLO: "hello", SETUP: "setup", GKR_BEGIN: "gkr_begin", GKR_BIND: "gkr_bind",
    PC_COMMIT: "pc_commit", PC_EVAL: "pc_eval", PC_QUOTIENT: "pc_quotient", PC_FOLD: "pc_fold",
    PC_SHARES: "pc_shares", PC_OPEN: "pc_open", SC_LOAD: "sc_load", SC_BEGIN: "sc_begin",
    SC_BIND: "sc_bind", SHUTDOWN: "shutdown", REPLY: "reply", ERROR: "error", STATS: "stats",
    CLOSE: "close",
}


class TransportError(RuntimeError):
    def __init__(self, message: str, worker: Optional[int] = None):
        super().__init__(message if worker is None else f"worker {worker}: {message}")
        self.worker = worker


@dataclass
class FrameCounter:
    sent: int = 0
    received: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    by_tag: dict = field(default_factory=dict)

    def count_send(self, tag: int, size: int):
        self.sent += 1
        self.bytes_sent += size
        name = TAG_NAMES.get(tag, str(tag))
        self.by_tag[name] = self.by_tag.get(name, 0) + 1

    def count_recv(self, tag: int, size: int):
        self.received += 1
        self.bytes_received += size


def encode_payload(payload: Any) -> bytes:
    return json.dumps(payload, separators=(",", ":")).encode()


def decode_payload(data: bytes) -> Any:
    try:
        return json.loads(data.decode()) if data else None
    except (UnicodeDecodeError, ValueError) as exc:
        raise TransportError(f"malformed frame payload: {exc}") from None


def pack_frame(tag: int, payload: Any) -> bytes:
    body = bytes([tag]) + encode_payload(payload)
    return struct.pack("<I", len(body)) + body


class Channel:
    """One endpoint of an ordered, reliable, typed link."""

    def __init__(self):
        self.counter = FrameCounter()

    def send(self, tag: int, payload: Any = None):
        raise NotImplementedError

    def recv(self, timeout: Optional[float] = None) -> Tuple[int, Any]:
        raise NotImplementedError

    def close(self):
        pass


class QueueChannel(Channel):
    def __init__(self, inbox: "queue.Queue", outbox: "queue.Queue"):
        super().__init__()
        self.inbox = inbox
        self.outbox = outbox

    def send(self, tag: int, payload: Any = None):
        data = encode_payload(payload)
        self.counter.count_send(tag, len(data) + 5)
        self.outbox.put((tag, data))

    def recv(self, timeout: Optional[float] = None) -> Tuple[int, Any]:
        try:
            tag, data = self.inbox.get(timeout=timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for a frame") from None
        self.counter.count_recv(tag, len(data) + 5)
        return tag, decode_payload(data)


def channel_pair() -> Tuple[QueueChannel, QueueChannel]:
    a, b = queue.Queue(), queue.Queue()
    return QueueChannel(a, b), QueueChannel(b, a)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportError("connection closed mid-frame" if buf else "connection closed")
        buf.extend(chunk)
    return bytes(buf)


class TcpChannel(Channel):
    def __init__(self, sock: socket.socket):
        super().__init__()
        self.sock = sock
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._lock = threading.Lock()

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "TcpChannel":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot reach {host}:{port}: {exc}") from None
        sock.settimeout(None)
        return cls(sock)

    def send(self, tag: int, payload: Any = None):
        frame = pack_frame(tag, payload)
        self.counter.count_send(tag, len(frame))
        with self._lock:
            try:
                self.sock.sendall(frame)
            except OSError as exc:
                raise TransportError(f"send failed: {exc}") from None

    def recv(self, timeout: Optional[float] = None) -> Tuple[int, Any]:
        self.sock.settimeout(timeout)
        try:
            (length,) = struct.unpack("<I", _recv_exact(self.sock, 4))
            if length < 1 or length > MAX_FRAME:
                raise TransportError(f"frame length {length} out of range")
            body = _recv_exact(self.sock, length)
        except socket.timeout:
            raise TransportError("timed out waiting for a frame") from None
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from None
        self.counter.count_recv(body[0], length + 4)
        return body[0], decode_payload(body[1:])

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def parse_endpoint(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint {text!r} is not host:port")
    return host or "127.0.0.1", int(port)
