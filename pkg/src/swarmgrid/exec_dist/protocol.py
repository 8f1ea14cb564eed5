"""Length-prefixed JSON frames.

A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
object ``{"v": 1, "kind": ..., ...}``.  Floats use Python's shortest
round-trip repr, so values survive the wire bit-for-bit.
"""

from __future__ import annotations

import json
import socket
import struct

from swarmgrid.errors import ConnectionLost, ProtocolError

VERSION = 1
MAX_FRAME = 256 * 1024 * 1024
_HEADER = struct.Struct(">I")

KINDS = frozenset(
    {
        "HelloClient",
        "HelloWorker",
        "AvailabilityQuery",
        "AvailabilityReply",
        "SubmitBatch",
        "ExecuteChunk",
        "ChunkResult",
        "OkReply",
        "FailedReply",
        "InitCmd",
        "BroadcastCmd",
        "RunOnAllThreadsCmd",
        "ForwardBatch",
        "BatchResult",
    }
)


def message(kind: str, **fields) -> dict:
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind '{kind}'")
    return {"v": VERSION, "kind": kind, **fields}


def encode(msg: dict) -> bytes:
    if msg.get("kind") not in KINDS:
        raise ProtocolError(f"unknown message kind '{msg.get('kind')}'")
    body = json.dumps(msg, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise ProtocolError("frame too large")
    return _HEADER.pack(len(body)) + body


def decode(body: bytes) -> dict:
    try:
        msg = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("frame is not a JSON object")
    if msg.get("v") != VERSION:
        raise ProtocolError(f"unsupported protocol version {msg.get('v')!r}")
    if msg.get("kind") not in KINDS:
        raise ProtocolError(f"unknown message kind {msg.get('kind')!r}")
    return msg


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except (ConnectionError, OSError) as exc:
            raise ConnectionLost(str(exc)) from exc
        if not chunk:
            raise ConnectionLost("peer closed the connection")
        buf += chunk
    return bytes(buf)


def send_msg(sock: socket.socket, msg: dict) -> None:
    data = encode(msg)
    try:
        sock.sendall(data)
    except (ConnectionError, OSError) as exc:
        raise ConnectionLost(str(exc)) from exc


def recv_msg(sock: socket.socket) -> dict:
    (n,) = _HEADER.unpack(_recv_exact(sock, _HEADER.size))
    if n > MAX_FRAME:
        raise ProtocolError("frame too large")
    return decode(_recv_exact(sock, n))


def request(sock: socket.socket, msg: dict) -> dict:
    send_msg(sock, msg)
    return recv_msg(sock)


def chunk_tasks(n_tasks: int, n_workers: int) -> list[int]:
    """Near-equal chunk sizes, one per worker, remainder to the earliest chunks."""
    if n_tasks < 1 or n_workers < 1:
        raise ValueError("need at least one task and one worker")
    k = min(n_tasks, n_workers)
    q, r = divmod(n_tasks, k)
    return [q + 1] * r + [q] * (k - r)
