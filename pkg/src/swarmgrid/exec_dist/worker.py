"""Worker process: connects to a server and runs chunks on a local thread pool."""

from __future__ import annotations

import logging
import socket
import threading

from swarmgrid.errors import ConnectionLost, ProtocolError
from swarmgrid.exec_dist.protocol import message, recv_msg, send_msg
from swarmgrid.exec_dist.tasks import REGISTRY, TaskContext, UnknownTaskKind, lookup
from swarmgrid.exec_local import BatchExecutor, FailedResult

log = logging.getLogger("swarmgrid.worker")


class Worker:
    """One worker identity.  A reconnect is a new ``Worker``."""

    def __init__(self, host: str, port: int, threads: int = 1, registry: dict | None = None, tag=None):
        self.addr = (host, port)
        self.threads = threads
        self.registry = REGISTRY if registry is None else registry
        self.state: dict = {"tag": tag}
        self._state_lock = threading.Lock()
        self.worker_id = None
        self.sock: socket.socket | None = None
        self.executor = BatchExecutor(threads, name="worker")
        self.executed_chunks: list[str] = []
        self._thread: threading.Thread | None = None

    def connect(self) -> None:
        self.sock = socket.create_connection(self.addr)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        send_msg(self.sock, message("HelloWorker", threads=self.threads))
        reply = recv_msg(self.sock)
        if reply["kind"] != "OkReply":
            raise ProtocolError(f"handshake refused: {reply}")
        self.worker_id = reply.get("worker_id")
        log.info("event=worker_connected worker=%s server=%s:%s", self.worker_id, *self.addr)

    def _ctx(self) -> TaskContext:
        return TaskContext(self.state, self.executor.thread_state(), self._state_lock)

    def _task(self, t):
        handler = lookup(t["kind"], self.registry)
        return lambda: handler(t.get("payload"), self._ctx())

    def _execute_chunk(self, msg) -> dict:
        try:
            jobs = [self._task(t) for t in msg["tasks"]]
        except UnknownTaskKind as exc:
            return message("FailedReply", reason=str(exc), chunk_id=msg.get("chunk_id"))
        results = self.executor.execute_batch(jobs)
        for r in results:
            if isinstance(r, FailedResult):
                return message("FailedReply", reason=r.error, chunk_id=msg.get("chunk_id"))
        self.executed_chunks.append(msg.get("chunk_id"))
        return message("ChunkResult", chunk_id=msg.get("chunk_id"), results=results)

    def _run_cmd(self, msg) -> dict:
        cmd = msg["cmd"]
        try:
            job = self._task(cmd)
        except UnknownTaskKind as exc:
            return message("FailedReply", reason=str(exc))
        if msg["kind"] == "RunOnAllThreadsCmd":
            try:
                self.executor.execute_on_all_threads(job)
            except Exception as exc:
                return message("FailedReply", reason=str(exc))
        else:
            (r,) = self.executor.execute_batch([job])
            if isinstance(r, FailedResult):
                return message("FailedReply", reason=r.error)
        return message("OkReply")

    def handle(self, msg: dict) -> dict:
        kind = msg["kind"]
        if kind == "AvailabilityQuery":
            return message("AvailabilityReply", free_threads=self.threads)
        if kind == "ExecuteChunk":
            return self._execute_chunk(msg)
        if kind in ("InitCmd", "BroadcastCmd", "RunOnAllThreadsCmd"):
            return self._run_cmd(msg)
        return message("FailedReply", reason=f"unexpected message {kind}")

    def serve_forever(self) -> None:
        if self.sock is None:
            self.connect()
        try:
            while True:
                msg = recv_msg(self.sock)
                send_msg(self.sock, self.handle(msg))
        except (ConnectionLost, ProtocolError, OSError) as exc:
            log.info("event=worker_exit worker=%s reason=%s", self.worker_id, exc)
        finally:
            self.close()

    def start(self) -> Worker:
        """Connect, then serve on a daemon thread (in-process use)."""
        self.connect()
        self._thread = threading.Thread(target=self.serve_forever, name=f"worker-{self.worker_id}", daemon=True)
        self._thread.start()
        return self

    def close(self) -> None:
        sock, self.sock = self.sock, None
        if sock is not None:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
        self.executor.shutdown(wait=False)

    kill = close


def worker_main(host: str, port: int, pool_size: int = 1, tag=None) -> None:
    Worker(host, port, pool_size, tag=tag).serve_forever()
