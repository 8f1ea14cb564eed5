"""Dispatch server: accepts clients on one port and workers on another.

A request is cut into one chunk per known worker; each chunk gets its own
submission thread that claims the next available worker.  Worker failures
follow :func:`on_worker_event`.  When no local worker is free, a request
that has not been forwarded yet is passed whole to a peer server that is
not already on its path.
"""

from __future__ import annotations

import collections
import enum
import itertools
import logging
import socket
import threading
import time
import uuid
from dataclasses import dataclass, field

from swarmgrid.errors import ConnectionLost, ProtocolError, ServerFailedReply
from swarmgrid.exec_dist.protocol import chunk_tasks, message, recv_msg, request, send_msg

log = logging.getLogger("swarmgrid.server")

DEFAULT_TIMEOUT = 60.0
MAX_CONSECUTIVE_FAILURES = 2


class WorkerState(enum.Enum):
    PENDING_INIT = "pending_init"
    AVAILABLE = "available"
    BUSY = "busy"
    REMOVED = "removed"


@dataclass
class WorkerRecord:
    worker_id: int
    sock: socket.socket | None
    threads: int = 1
    consecutive_failures: int = 0
    state: WorkerState = WorkerState.AVAILABLE
    lock: threading.RLock = field(default_factory=threading.RLock)

    def close(self) -> None:
        if self.sock is not None:
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()


class Event(enum.Enum):
    CHUNK_OK = "chunk_ok"
    CHUNK_FAILED_REPLY = "chunk_failed_reply"
    CONNECTION_LOST = "connection_lost_midbatch"


class Action(enum.Enum):
    KEEP = "keep"
    RETRY = "retry"
    REMOVE_AND_RETRY = "remove_and_retry"


def on_worker_event(rec: WorkerRecord, event: Event) -> Action:
    """Apply one outcome to a worker record; returns what to do with the chunk."""
    if rec.state is WorkerState.REMOVED:
        raise ValueError("event on a removed worker")
    if event is Event.CHUNK_OK:
        rec.consecutive_failures = 0
        rec.state = WorkerState.AVAILABLE
        return Action.KEEP
    if event is Event.CHUNK_FAILED_REPLY:
        rec.consecutive_failures += 1
        if rec.consecutive_failures >= MAX_CONSECUTIVE_FAILURES:
            rec.state = WorkerState.REMOVED
            rec.close()
            return Action.REMOVE_AND_RETRY
        rec.state = WorkerState.AVAILABLE
        return Action.RETRY
    if event is Event.CONNECTION_LOST:
        rec.state = WorkerState.REMOVED
        rec.close()
        return Action.REMOVE_AND_RETRY
    raise ValueError(f"unknown event {event}")


class _RequestFailed(Exception):
    pass


class Server:
    """``client_port``/``worker_port`` of 0 pick free ports (see ``.client_port``)."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        client_port: int = 7890,
        worker_port: int = 7891,
        peers=(),
        inited: bool = False,
        timeout: float = DEFAULT_TIMEOUT,
        server_id: str | None = None,
    ):
        self.host = host
        self.server_id = server_id or uuid.uuid4().hex[:12]
        self.inited = inited
        self.timeout = timeout
        self._client_ls = self._listen(client_port)
        self._worker_ls = self._listen(worker_port)
        self.client_port = self._client_ls.getsockname()[1]
        self.worker_port = self._worker_ls.getsockname()[1]
        self._peer_addrs = [tuple(p) for p in peers]
        self._peers: dict[tuple, object] = {}
        self._peer_lock = threading.Lock()

        self._cv = threading.Condition()
        self._workers: dict[int, WorkerRecord] = {}
        self._idle: collections.deque[WorkerRecord] = collections.deque()
        self._ids = itertools.count(1)
        self._req_ids = itertools.count(1)

        self.init_cmd: dict | None = None
        self.stored_cmds: list[dict] = []
        self.trace: list[dict] = []
        self.dispatch_log: list[tuple[int, str]] = []  # (worker_id, chunk_id)
        self._closed = False
        self._threads: list[threading.Thread] = []

    def _listen(self, port):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((self.host, port))
        s.listen(64)
        return s

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> Server:
        for target, ls in ((self._serve_client, self._client_ls), (self._accept_worker, self._worker_ls)):
            t = threading.Thread(target=self._accept_loop, args=(ls, target), daemon=True)
            t.start()
            self._threads.append(t)
        log.info(
            "event=server_started server=%s client_port=%d worker_port=%d",
            self.server_id, self.client_port, self.worker_port,
        )
        return self

    def add_peer(self, host: str, port: int) -> None:
        self._peer_addrs.append((host, port))

    def close(self) -> None:
        self._closed = True
        for ls in (self._client_ls, self._worker_ls):
            try:
                ls.close()
            except OSError:
                pass
        with self._cv:
            for rec in self._workers.values():
                rec.close()
            self._cv.notify_all()
        with self._peer_lock:
            for clt in self._peers.values():
                clt.close()

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._closed:
                time.sleep(0.5)
        finally:
            self.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()

    def _accept_loop(self, ls, handler):
        while not self._closed:
            try:
                conn, _ = ls.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            threading.Thread(target=handler, args=(conn,), daemon=True).start()

    # -- workers -------------------------------------------------------------

    @property
    def workers(self) -> list[WorkerRecord]:
        with self._cv:
            return [r for r in self._workers.values() if r.state is not WorkerState.REMOVED]

    def ready_workers(self) -> list[WorkerRecord]:
        with self._cv:
            return [r for r in self._workers.values() if r.state in (WorkerState.AVAILABLE, WorkerState.BUSY)]

    def _accept_worker(self, conn):
        try:
            hello = recv_msg(conn)
            if hello["kind"] != "HelloWorker":
                raise ProtocolError("expected HelloWorker")
            rec = WorkerRecord(next(self._ids), conn, int(hello.get("threads", 1)), state=WorkerState.PENDING_INIT)
            send_msg(conn, message("OkReply", worker_id=rec.worker_id, server_id=self.server_id))
        except (ConnectionLost, ProtocolError, OSError):
            conn.close()
            return
        with self._cv:
            self._workers[rec.worker_id] = rec
            init = self.init_cmd
        log.info("event=worker_joined server=%s worker=%d threads=%d", self.server_id, rec.worker_id, rec.threads)
        if self.inited and init is None:
            return  # waits until a client supplies the init command
        self._bring_up(rec)

    def _bring_up(self, rec: WorkerRecord) -> bool:
        """Replay the init command and stored commands, then mark available."""
        with rec.lock:
            if rec.state is not WorkerState.PENDING_INIT:
                return rec.state is not WorkerState.REMOVED
            cmds = []
            if self.init_cmd is not None:
                cmds.append(message("InitCmd", cmd=self.init_cmd["cmd"], ok_reply_requested=True))
            cmds.extend(self.stored_cmds)
            for msg in cmds:
                try:
                    reply = request(rec.sock, msg)
                except (ConnectionLost, ProtocolError):
                    self._remove(rec, "connection lost during init")
                    return False
                if reply["kind"] != "OkReply":
                    self._remove(rec, f"init failed: {reply.get('reason')}")
                    return False
            with self._cv:
                rec.state = WorkerState.AVAILABLE
                self._idle.append(rec)
                self._cv.notify_all()
        return True

    def _remove(self, rec: WorkerRecord, why: str) -> None:
        with self._cv:
            rec.state = WorkerState.REMOVED
            rec.close()
            try:
                self._idle.remove(rec)
            except ValueError:
                pass
            self._cv.notify_all()
        log.info("event=worker_removed server=%s worker=%d reason=%s", self.server_id, rec.worker_id, why)

    def _claim(self, deadline: float) -> WorkerRecord | None:
        """Next worker that answers an availability query with a free thread."""
        while True:
            with self._cv:
                while not self._idle:
                    left = deadline - time.monotonic()
                    if left <= 0 or self._closed:
                        return None
                    self._cv.wait(left)
                rec = self._idle.popleft()
                if rec.state is not WorkerState.AVAILABLE:
                    continue
                rec.state = WorkerState.BUSY
            with rec.lock:
                try:
                    reply = request(rec.sock, message("AvailabilityQuery"))
                except (ConnectionLost, ProtocolError, OSError):
                    self._remove(rec, "connection lost")
                    continue
            if reply["kind"] == "AvailabilityReply" and reply.get("free_threads", 0) >= 1:
                return rec
            self._release(rec)

    def _release(self, rec: WorkerRecord) -> None:
        with self._cv:
            if rec.state is not WorkerState.REMOVED:
                rec.state = WorkerState.AVAILABLE
                self._idle.append(rec)
                self._cv.notify_all()

    def _has_idle(self) -> bool:
        with self._cv:
            return any(r.state is WorkerState.AVAILABLE for r in self._idle)

    # -- dispatch ------------------------------------------------------------

    def _run_chunk(self, chunk_id: str, tasks: list, deadline: float) -> list:
        attempts = 0
        while True:
            rec = self._claim(deadline)
            if rec is None:
                raise _RequestFailed("timed out waiting for an available worker")
            with rec.lock:
                self.dispatch_log.append((rec.worker_id, chunk_id))
                try:
                    reply = request(rec.sock, message("ExecuteChunk", chunk_id=chunk_id, tasks=tasks))
                    event = Event.CHUNK_OK if reply["kind"] == "ChunkResult" else Event.CHUNK_FAILED_REPLY
                except (ConnectionLost, ProtocolError, OSError):
                    reply, event = None, Event.CONNECTION_LOST
                with self._cv:
                    action = on_worker_event(rec, event)
            if action is Action.KEEP:
                self._release(rec)
                return reply["results"]
            if action is Action.RETRY:
                self._release(rec)
            else:
                self._remove(rec, event.value)
            reason = reply.get("reason") if reply else "connection lost"
            log.info("event=chunk_failed server=%s worker=%d chunk=%s reason=%s", self.server_id, rec.worker_id, chunk_id, reason)
            attempts += 1
            if attempts > 1:
                raise _RequestFailed(f"chunk {chunk_id} failed after retry: {reason}")

    def dispatch_request(self, tasks: list, request_id: str) -> list:
        deadline = time.monotonic() + self.timeout
        with self._cv:
            while not any(r.state in (WorkerState.AVAILABLE, WorkerState.BUSY) for r in self._workers.values()):
                left = deadline - time.monotonic()
                if left <= 0 or self._closed:
                    raise _RequestFailed("no workers connected")
                self._cv.wait(left)
            n_workers = sum(r.state in (WorkerState.AVAILABLE, WorkerState.BUSY) for r in self._workers.values())
        sizes = chunk_tasks(len(tasks), n_workers)
        chunks, start = [], 0
        for i, n in enumerate(sizes):
            chunks.append((f"{request_id}.{i}", tasks[start : start + n]))
            start += n
        results: list = [None] * len(chunks)
        errors: list[str] = []

        def run(i, cid, part):
            try:
                results[i] = self._run_chunk(cid, part, deadline)
            except _RequestFailed as exc:
                errors.append(str(exc))

        threads = [threading.Thread(target=run, args=(i, cid, part), daemon=True) for i, (cid, part) in enumerate(chunks)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise _RequestFailed(errors[0])
        return [r for part in results for r in part]

    def _peer(self, addr):
        from swarmgrid.exec_dist.client import Client

        with self._peer_lock:
            clt = self._peers.get(addr)
            if clt is None or clt.closed:
                clt = Client(*addr, server_id=self.server_id)
                self._peers[addr] = clt
            return clt

    def handle_request(self, tasks: list, path: list[str], request_id: str) -> list:
        if self.server_id in path:
            raise _RequestFailed(f"request {request_id} revisited server {self.server_id}")
        forwarded = bool(path)
        if not forwarded and not self._has_idle():
            for addr in list(self._peer_addrs):
                try:
                    clt = self._peer(addr)
                except (OSError, ConnectionLost, ProtocolError):
                    continue
                if clt.remote_server_id in path:
                    continue  # never back to a server the request came through
                self.trace.append({"request": request_id, "path": list(path), "action": "forward", "to": clt.remote_server_id})
                log.info("event=forward server=%s request=%s to=%s", self.server_id, request_id, clt.remote_server_id)
                try:
                    return clt.forward(tasks, path + [self.server_id], origin=self.server_id)
                except (ServerFailedReply, ConnectionLost, ProtocolError, OSError) as exc:
                    log.info("event=forward_failed server=%s request=%s reason=%s", self.server_id, request_id, exc)
                    with self._peer_lock:
                        self._peers.pop(addr, None)
        self.trace.append({"request": request_id, "path": list(path), "action": "local"})
        return self.dispatch_request(tasks, request_id)

    # -- commands ------------------------------------------------------------

    def _broadcast(self, msg: dict) -> list[int]:
        """Send ``msg`` to every ready worker; return ids of workers that failed."""
        failed = []
        for rec in self.ready_workers():
            with rec.lock:
                if rec.state is WorkerState.REMOVED:
                    continue
                try:
                    reply = request(rec.sock, msg)
                except (ConnectionLost, ProtocolError, OSError):
                    self._remove(rec, "connection lost during command")
                    failed.append(rec.worker_id)
                    continue
            if reply["kind"] != "OkReply":
                failed.append(rec.worker_id)
        return failed

    def _init(self, msg: dict) -> dict:
        with self._cv:
            first = self.init_cmd is None
            if first:
                self.init_cmd = {"cmd": msg["cmd"]}
            pending = [r for r in self._workers.values() if r.state is WorkerState.PENDING_INIT]
        if not first:
            return message("OkReply", server_id=self.server_id, note="already initialized")
        ok_event = threading.Event()

        def bring(rec):
            if self._bring_up(rec):
                ok_event.set()

        for rec in pending:
            threading.Thread(target=bring, args=(rec,), daemon=True).start()
        if not msg.get("ok_reply_requested"):
            return message("OkReply", server_id=self.server_id)
        deadline = time.monotonic() + self.timeout
        while time.monotonic() < deadline:
            if ok_event.wait(0.05) or self.ready_workers():
                return message("OkReply", server_id=self.server_id)
        return message("FailedReply", reason="InitFailed: no worker initialized before timeout")

    def _command(self, msg: dict) -> dict:
        stored = message(msg["kind"], cmd=msg["cmd"])
        with self._cv:
            self.stored_cmds.append(stored)
        failed = self._broadcast(stored)
        if failed:
            return message("FailedReply", reason="command failed on some workers", worker_ids=failed)
        return message("OkReply", server_id=self.server_id)

    # -- clients -------------------------------------------------------------

    def _serve_client(self, conn):
        peer_id = None
        try:
            while not self._closed:
                msg = recv_msg(conn)
                kind = msg["kind"]
                if kind == "HelloClient":
                    peer_id = msg.get("server_id")
                    reply = message("OkReply", server_id=self.server_id)
                elif kind in ("SubmitBatch", "ForwardBatch"):
                    rid = f"{self.server_id}:{next(self._req_ids)}"
                    path = list(msg.get("path") or ([] if peer_id is None else [peer_id]))
                    try:
                        results = self.handle_request(msg["tasks"], path, rid)
                        reply = message("BatchResult", request_id=msg.get("request_id"), results=results)
                    except _RequestFailed as exc:
                        log.info("event=request_failed server=%s request=%s reason=%s", self.server_id, rid, exc)
                        reply = message("FailedReply", request_id=msg.get("request_id"), reason=str(exc))
                elif kind == "InitCmd":
                    reply = self._init(msg)
                elif kind in ("BroadcastCmd", "RunOnAllThreadsCmd"):
                    reply = self._command(msg)
                else:
                    reply = message("FailedReply", reason=f"unexpected message {kind}")
                send_msg(conn, reply)
        except (ConnectionLost, ProtocolError, OSError):
            pass
        finally:
            conn.close()
