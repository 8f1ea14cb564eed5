import socket
import struct
import threading
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmgrid.benchfns import make_function
from swarmgrid.core import EvalBudget, Evaluator
from swarmgrid.errors import (
    AlreadyInitialized,
    DistributedEvalFailed,
    ProtocolError,
    ServerFailedReply,
)
from swarmgrid.exec_dist import (
    Action,
    Client,
    Event,
    InitedClient,
    Server,
    Worker,
    WorkerRecord,
    WorkerState,
    chunk_tasks,
    decode,
    encode,
    message,
    on_worker_event,
)
from swarmgrid.exec_dist.protocol import recv_msg
from swarmgrid.metaheuristics import GeneticAlgorithm

HOST = "127.0.0.1"


def wait_for(pred, timeout=5.0):
    end = time.monotonic() + timeout
    while time.monotonic() < end:
        if pred():
            return True
        time.sleep(0.01)
    raise AssertionError("condition not reached in time")


class Net:
    """Servers and in-process workers torn down together."""

    def __init__(self):
        self.servers, self.workers, self.clients = [], [], []

    def server(self, **kw):
        kw.setdefault("timeout", 5.0)
        s = Server(HOST, client_port=0, worker_port=0, **kw).start()
        self.servers.append(s)
        return s

    def worker(self, srv, threads=1, tag=None, wait=True):
        n = len(srv.ready_workers())
        w = Worker(HOST, srv.worker_port, threads, tag=tag).start()
        self.workers.append(w)
        if wait:
            wait_for(lambda: len(srv.ready_workers()) == n + 1)
        return w

    def client(self, srv, cls=Client, **kw):
        c = cls(HOST, srv.client_port, **kw)
        self.clients.append(c)
        return c

    def close(self):
        for c in self.clients:
            c.close()
        for w in self.workers:
            w.kill()
        for s in self.servers:
            s.close()


@pytest.fixture
def net():
    n = Net()
    yield n
    n.close()


def sq(v):
    return {"kind": "square", "payload": v}


# -- protocol ----------------------------------------------------------------


def test_frame_layout():
    data = encode(message("OkReply"))
    (n,) = struct.unpack(">I", data[:4])
    assert n == len(data) - 4
    assert decode(data[4:]) == {"v": 1, "kind": "OkReply"}


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=20))
def test_floats_round_trip_exactly(xs):
    msg = decode(encode(message("ChunkResult", chunk_id="c", results=xs))[4:])
    assert msg["results"] == xs


@pytest.mark.parametrize(
    "body",
    [b'{"v":1,"kind":"Gossip"}', b'{"v":2,"kind":"OkReply"}', b"[1,2]", b"{not json", b"\xff\xfe"],
)
def test_decode_rejects(body):
    with pytest.raises(ProtocolError):
        decode(body)


def test_message_rejects_unknown_kind():
    with pytest.raises(ProtocolError):
        message("Gossip")


def test_recv_over_socketpair_handles_split_frames():
    a, b = socket.socketpair()
    data = encode(message("SubmitBatch", request_id=1, tasks=[sq(3)]))
    for i in range(len(data)):
        a.send(data[i : i + 1])
    assert recv_msg(b)["tasks"] == [{"kind": "square", "payload": 3}]
    a.close(), b.close()


def test_chunk_examples():
    assert chunk_tasks(6, 3) == [2, 2, 2]
    assert chunk_tasks(10, 3) == [4, 3, 3]
    assert chunk_tasks(2, 3) == [1, 1]
    with pytest.raises(ValueError):
        chunk_tasks(0, 2)


@given(st.integers(1, 500), st.integers(1, 64))
def test_chunk_property(n, w):
    sizes = chunk_tasks(n, w)
    assert sum(sizes) == n
    assert len(sizes) == min(n, w) and min(sizes) >= 1
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)


# -- worker state machine ----------------------------------------------------


def test_failure_then_success_resets():
    rec = WorkerRecord(1, None)
    assert on_worker_event(rec, Event.CHUNK_FAILED_REPLY) is Action.RETRY
    assert rec.consecutive_failures == 1
    assert on_worker_event(rec, Event.CHUNK_OK) is Action.KEEP
    assert rec.consecutive_failures == 0 and rec.state is WorkerState.AVAILABLE


def test_two_consecutive_failures_remove():
    a, b = socket.socketpair()
    rec = WorkerRecord(1, a)
    on_worker_event(rec, Event.CHUNK_FAILED_REPLY)
    assert on_worker_event(rec, Event.CHUNK_FAILED_REPLY) is Action.REMOVE_AND_RETRY
    assert rec.state is WorkerState.REMOVED
    assert a.fileno() == -1
    with pytest.raises(ValueError):
        on_worker_event(rec, Event.CHUNK_OK)
    b.close()


def test_connection_loss_removes():
    rec = WorkerRecord(1, None)
    assert on_worker_event(rec, Event.CONNECTION_LOST) is Action.REMOVE_AND_RETRY
    assert rec.state is WorkerState.REMOVED


@given(st.lists(st.sampled_from([Event.CHUNK_OK, Event.CHUNK_FAILED_REPLY]), max_size=30))
def test_removed_iff_two_failures_in_a_row(events):
    rec = WorkerRecord(1, None)
    run = 0
    for ev in events:
        if rec.state is WorkerState.REMOVED:
            break
        on_worker_event(rec, ev)
        run = run + 1 if ev is Event.CHUNK_FAILED_REPLY else 0
        assert rec.consecutive_failures == (run if run < 2 else 2)
        assert (rec.state is WorkerState.REMOVED) == (run >= 2)


# -- worker message handling (no network) ------------------------------------


def test_worker_availability_reports_pool():
    w = Worker(HOST, 1, threads=4)
    try:
        assert w.handle(message("AvailabilityQuery")) == message("AvailabilityReply", free_threads=4)
    finally:
        w.close()


def test_worker_unknown_kind_fails_chunk():
    w = Worker(HOST, 1, threads=2)
    try:
        r = w.handle(message("ExecuteChunk", chunk_id="x.0", tasks=[sq(1), {"kind": "nope", "payload": None}]))
        assert r["kind"] == "FailedReply" and "UnknownTaskKind" in r["reason"]
    finally:
        w.close()


def test_worker_chunk_in_order():
    w = Worker(HOST, 1, threads=4)
    try:
        r = w.handle(message("ExecuteChunk", chunk_id="x.0", tasks=[sq(i) for i in range(8)]))
        assert r["kind"] == "ChunkResult" and r["results"] == [i * i for i in range(8)]
        assert w.executed_chunks == ["x.0"]
    finally:
        w.close()


def test_worker_failing_task_fails_chunk():
    w = Worker(HOST, 1)
    try:
        r = w.handle(message("ExecuteChunk", chunk_id="x.0", tasks=[{"kind": "fail", "payload": "boom"}]))
        assert r["kind"] == "FailedReply" and "boom" in r["reason"]
    finally:
        w.close()


# -- end to end --------------------------------------------------------------


def test_nine_tasks_one_chunk_per_worker(net):
    srv = net.server()
    ws = [net.worker(srv, tag=t) for t in "abc"]
    tasks = [{"kind": "sleep", "payload": {"seconds": 0.05, "value": i}} for i in range(9)]
    assert net.client(srv).submit_work(tasks) == list(range(9))
    assert sorted(len(w.executed_chunks) for w in ws) == [1, 1, 1]
    assert sorted(c for w in ws for c in w.executed_chunks) == [f"{srv.server_id}:1.{i}" for i in range(3)]


def test_results_in_task_order(net):
    srv = net.server()
    for t in range(3):
        net.worker(srv, threads=2)
    clt = net.client(srv)
    for n in (1, 2, 7, 50):
        assert clt.submit_work([sq(i) for i in range(n)]) == [i * i for i in range(n)]


def test_tuple_and_descriptor_tasks(net):
    from swarmgrid.exec_dist import TaskDescriptor

    srv = net.server()
    net.worker(srv)
    assert net.client(srv).submit_work([("square", 3), TaskDescriptor("noop", "x")]) == [9, "x"]


def test_unknown_kind_fails_request(net):
    srv = net.server()
    net.worker(srv)
    with pytest.raises(ServerFailedReply, match="UnknownTaskKind"):
        net.client(srv).submit_work([{"kind": "nope", "payload": 1}])


def test_no_workers_times_out(net):
    srv = net.server(timeout=0.3)
    t0 = time.monotonic()
    with pytest.raises(ServerFailedReply):
        net.client(srv).submit_work([sq(2)])
    assert time.monotonic() - t0 < 3.0


def test_failing_worker_removed_after_two(net):
    srv = net.server()
    a = net.worker(srv, tag="a")
    b = net.worker(srv, tag="b")
    clt = net.client(srv)
    task = [{"kind": "failif", "payload": {"tag": "a", "value": 7}}]
    assert clt.submit_work(task) == [7]
    assert [r.worker_id for r in srv.workers] == [a.worker_id, b.worker_id]
    assert clt.submit_work(task) == [7]
    wait_for(lambda: [r.worker_id for r in srv.workers] == [b.worker_id])
    mark = len(srv.dispatch_log)
    for _ in range(5):
        assert clt.submit_work(task * 3) == [7, 7, 7]
    assert {wid for wid, _ in srv.dispatch_log[mark:]} == {b.worker_id}


def test_chunk_failing_its_retry_fails_request(net):
    srv = net.server()
    net.worker(srv, tag="a")
    with pytest.raises(ServerFailedReply, match="after retry"):
        net.client(srv).submit_work([{"kind": "fail", "payload": "x"}])


def test_killed_worker_chunk_rerun(net):
    srv = net.server()
    w1 = net.worker(srv, tag="w1")
    w2 = net.worker(srv, tag="w2")
    tasks = [{"kind": "sleep", "payload": {"seconds": 0.3, "value": i}} for i in range(4)]
    clt = net.client(srv)
    killer = threading.Timer(0.1, w1.kill)
    killer.start()
    assert clt.submit_work(tasks) == [0, 1, 2, 3]
    killer.join()
    assert [r.worker_id for r in srv.workers] == [w2.worker_id]
    assert len(w2.executed_chunks) == 2


def test_new_worker_gets_later_requests(net):
    srv = net.server()
    net.worker(srv, tag="a")
    clt = net.client(srv)
    assert clt.submit_work([{"kind": "whoami"}]) == ["a"]
    net.worker(srv, tag="b")
    tasks = [{"kind": "sleep", "payload": {"seconds": 0.1, "value": None}}, {"kind": "whoami"}]
    mark = len(srv.dispatch_log)
    clt.submit_work(tasks * 2)
    assert {wid for wid, _ in srv.dispatch_log[mark:]} == {1, 2}


# -- forwarding --------------------------------------------------------------


def test_forward_to_idle_peer(net):
    s2 = net.server(server_id="S2")
    net.worker(s2, tag="remote")
    s1 = net.server(server_id="S1", peers=[(HOST, s2.client_port)])
    assert net.client(s1).submit_work([{"kind": "whoami"}] * 4) == ["remote"] * 4
    assert [t["action"] for t in s1.trace] == ["forward"]
    assert s2.trace == [{"request": "S2:1", "path": ["S1"], "action": "local"}]


def test_local_workers_preferred(net):
    s2 = net.server(server_id="S2")
    net.worker(s2, tag="remote")
    s1 = net.server(server_id="S1", peers=[(HOST, s2.client_port)])
    net.worker(s1, tag="local")
    assert net.client(s1).submit_work([{"kind": "whoami"}] * 3) == ["local"] * 3
    assert s2.trace == []


def test_no_ping_pong(net):
    s1 = net.server(server_id="S1", timeout=0.4)
    s2 = net.server(server_id="S2", timeout=0.4, peers=[(HOST, s1.client_port)])
    s1.add_peer(HOST, s2.client_port)
    with pytest.raises(ServerFailedReply):
        net.client(s1).submit_work([sq(1)])
    assert [t["action"] for t in s1.trace] == ["forward", "local"]
    assert [t["action"] for t in s2.trace] == ["local"]
    assert s2.trace[0]["path"] == ["S1"]


def test_request_from_peer_not_sent_back(net):
    s1 = net.server(server_id="S1", timeout=0.4)
    s2 = net.server(server_id="S2", timeout=0.4, peers=[(HOST, s1.client_port)])
    # S2 connects to S1 as a server; S1 has S2 as a peer but must not bounce the request.
    s1.add_peer(HOST, s2.client_port)
    clt = net.client(s1, server_id="S2")
    with pytest.raises(ServerFailedReply):
        clt.submit_work([sq(1)])
    assert [t["action"] for t in s1.trace] == ["local"]
    assert s2.trace == []


# -- commands and inited servers ---------------------------------------------


def test_inited_worker_waits_for_init(net):
    srv = net.server(inited=True)
    w = net.worker(srv, wait=False)
    wait_for(lambda: len(srv._workers) == 1)
    time.sleep(0.1)
    assert srv.ready_workers() == []
    clt = net.client(srv, cls=InitedClient)
    clt.submit_init_cmd({"kind": "initparams", "payload": {"fn.scale": 2.0}})
    wait_for(lambda: len(srv.ready_workers()) == 1)
    assert w.state["params"] == {"fn.scale": 2.0}
    with pytest.raises(AlreadyInitialized):
        clt.submit_init_cmd({"kind": "noop"})
    late = net.worker(srv)
    assert late.state["params"] == {"fn.scale": 2.0}
    assert clt.submit_work([sq(4)]) == [16]


def test_init_without_ack(net):
    srv = net.server(inited=True)
    net.worker(srv, wait=False)
    clt = net.client(srv, cls=InitedClient)
    clt.submit_init_cmd({"kind": "noop"}, ok_reply_requested=False)
    wait_for(lambda: len(srv.ready_workers()) == 1)


def test_failed_init_removes_worker(net):
    from swarmgrid.errors import InitFailed

    srv = net.server(inited=True, timeout=0.5)
    net.worker(srv, wait=False)
    wait_for(lambda: len(srv._workers) == 1)
    with pytest.raises(InitFailed):
        net.client(srv, cls=InitedClient).submit_init_cmd({"kind": "fail"})
    wait_for(lambda: srv.workers == [])


def test_run_on_all_threads(net):
    srv = net.server()
    ws = [net.worker(srv, threads=4) for _ in range(2)]
    net.client(srv).submit_cmd({"kind": "countexec"}, all_threads=True)
    assert sum(w.state["count"] for w in ws) == 8
    assert [w.state["count"] for w in ws] == [4, 4]


def test_thread_tables_visible_to_tasks(net):
    srv = net.server()
    net.worker(srv, threads=4)
    clt = net.client(srv)
    clt.submit_cmd({"kind": "setthreaddata", "payload": {"table": [1, 2]}}, all_threads=True)
    assert clt.submit_work([{"kind": "getthreaddata"}] * 12) == [{"table": [1, 2]}] * 12


def test_stored_cmd_reaches_later_worker(net):
    srv = net.server()
    clt = net.client(srv)
    clt.submit_cmd({"kind": "countexec"})
    assert len(srv.stored_cmds) == 1
    w = net.worker(srv, threads=2)
    assert w.state["count"] == 1


def test_failing_cmd_reports_workers(net):
    from swarmgrid.errors import CmdFailed

    srv = net.server()
    w = net.worker(srv)
    with pytest.raises(CmdFailed) as info:
        net.client(srv).submit_cmd({"kind": "fail"})
    assert info.value.worker_ids == (w.worker_id,)


# -- distributed evaluation --------------------------------------------------


def test_distributed_ga_matches_local(net):
    srv = net.server()
    for _ in range(3):
        net.worker(srv, threads=2)
    f = make_function("rastrigin")
    params = {"seed": 9, "dim": 5, "budget": 600, "ga.pop": 30, "ga.gens": 10}
    local = GeneticAlgorithm(params).minimize(f)
    remote = GeneticAlgorithm(params, client=net.client(srv)).minimize(f)
    np.testing.assert_array_equal(local.arg, remote.arg)
    assert local.value == remote.value and local.evals_used == remote.evals_used


def test_remote_eval_without_workers(net):
    srv = net.server(timeout=0.3)
    ev = Evaluator(make_function("sphere"), {}, EvalBudget(10), client=net.client(srv))
    with pytest.raises(DistributedEvalFailed):
        ev.many(np.zeros((2, 3)))


def test_remote_eval_shifted_function(net):
    srv = net.server()
    net.worker(srv)
    f = make_function("rosenbrock_shifted", dim=4, seed=3)
    X = np.random.default_rng(0).uniform(-5, 5, (6, 4))
    ev = Evaluator(f, {}, None, client=net.client(srv))
    np.testing.assert_array_equal(ev.many(X), f.batch(X))
