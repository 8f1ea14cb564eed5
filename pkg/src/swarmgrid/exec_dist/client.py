"""Blocking clients for the dispatch server."""

from __future__ import annotations

import itertools
import socket
import threading

from swarmgrid.errors import AlreadyInitialized, CmdFailed, ConnectionLost, InitFailed, ProtocolError, ServerFailedReply
from swarmgrid.exec_dist.protocol import message, recv_msg, send_msg
from swarmgrid.exec_dist.tasks import TaskDescriptor


class Client:
    """One connection to a server; calls are serialized per connection.

    ``server_id`` is set when the connecting party is itself a server, so the
    receiving side knows where forwarded requests came from.
    """

    def __init__(self, host: str, port: int, *, server_id: str | None = None, timeout: float | None = None):
        self.addr = (host, port)
        self._lock = threading.Lock()
        self._ids = itertools.count(1)
        try:
            self.sock = socket.create_connection(self.addr, timeout=timeout)
        except OSError as exc:
            raise ConnectionLost(f"cannot connect to {host}:{port}: {exc}") from exc
        self.sock.settimeout(timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.closed = False
        reply = self._call(message("HelloClient", server_id=server_id))
        if reply["kind"] != "OkReply":
            raise ProtocolError(f"handshake refused: {reply}")
        self.remote_server_id = reply.get("server_id")

    def _call(self, msg: dict) -> dict:
        with self._lock:
            if self.closed:
                raise ConnectionLost("client is closed")
            try:
                send_msg(self.sock, msg)
                return recv_msg(self.sock)
            except (ConnectionLost, socket.timeout) as exc:
                self.close()
                raise ConnectionLost(str(exc)) from exc

    def _results(self, reply: dict) -> list:
        if reply["kind"] == "BatchResult":
            return reply["results"]
        if reply["kind"] == "FailedReply":
            raise ServerFailedReply(reply.get("reason", "request failed"))
        raise ProtocolError(f"unexpected reply {reply['kind']}")

    def submit_work(self, tasks) -> list:
        """Run ``tasks`` on the network; results come back in task order."""
        wire = [TaskDescriptor.coerce(t) for t in tasks]
        return self._results(self._call(message("SubmitBatch", request_id=next(self._ids), tasks=wire)))

    def forward(self, tasks, path: list[str], origin: str) -> list:
        msg = message("ForwardBatch", origin_server_id=origin, request_id=next(self._ids), tasks=tasks, path=path)
        return self._results(self._call(msg))

    def submit_cmd(self, cmd, all_threads: bool = False) -> None:
        """Run ``cmd`` on every current and future worker (each pool thread if ``all_threads``)."""
        kind = "RunOnAllThreadsCmd" if all_threads else "BroadcastCmd"
        reply = self._call(message(kind, cmd=TaskDescriptor.coerce(cmd)))
        if reply["kind"] != "OkReply":
            raise CmdFailed(reply.get("reason", "command failed"), reply.get("worker_ids", []))

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class InitedClient(Client):
    """Client for servers whose workers need an init command first."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._init_sent = False

    def submit_init_cmd(self, cmd, ok_reply_requested: bool = True) -> None:
        if self._init_sent:
            raise AlreadyInitialized("submit_init_cmd may be called only once per client")
        self._init_sent = True
        reply = self._call(message("InitCmd", cmd=TaskDescriptor.coerce(cmd), ok_reply_requested=ok_reply_requested))
        if reply["kind"] != "OkReply":
            raise InitFailed(reply.get("reason", "init failed"))
