"""Command-line front end: ``swarmgrid {run,speedup,compare,server,worker}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from swarmgrid.errors import ConfigError, UnknownFunction
from swarmgrid.harness.config import RunConfig, read_config
from swarmgrid.harness.runner import COMPARE_METHODS, DESK_DIM, DESK_REPS, compare, run_once, speedup

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _setup_logging():
    level = os.environ.get("SWARMGRID_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(asctime)s %(name)s %(message)s")


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _load(path, seed=None) -> RunConfig:
    params = read_config(path)
    cfg = RunConfig.from_params(params)
    if seed is not None:
        cfg.seed = seed
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed)
    client = None
    if args.dist:
        from swarmgrid.exec_dist import Client

        client = Client(*args.dist)
    try:
        for rep in range(cfg.reps):
            rec = run_once(cfg.optimizer, cfg.function, cfg.dim, cfg.seed + rep, cfg.budget, cfg.params, client=client)
            print(rec.result_line())
            print(rec.arg_line())
    finally:
        if client is not None:
            client.close()
    return EXIT_OK


def cmd_speedup(args) -> int:
    cfg = _load(args.config, args.seed)
    rows = speedup(cfg, args.threads)
    print("threads  seconds  speedup  efficiency")
    for r in rows:
        print(f"{r.threads:7d}  {r.seconds:7.2f}  {r.speedup:7.2f}  {r.efficiency:10.2f}")
    for r in rows:
        print(r.line())
    return EXIT_OK


def cmd_compare(args) -> int:
    functions = None if args.suite == "desk" else [s for s in args.suite.split(",") if s]
    methods = [m for m in args.methods.split(",") if m]

    def progress(rec):
        if args.verbose:
            print(rec.result_line(), flush=True)

    cmp = compare(methods, functions, args.dim, args.reps, args.budget, args.seed, args.threads, progress)
    for r in cmp.results:
        print("MEAN," + r.name + "," + ",".join(repr(v) for v in r.values))
    lines = cmp.matrix_lines()
    print("\n".join(lines))
    print(cmp.table())
    if args.csv:
        Path(args.csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_server(args) -> int:
    from swarmgrid.exec_dist import Server

    srv = Server(args.host, args.client_port, args.worker_port, peers=args.peer or (), inited=args.inited, timeout=args.timeout)
    print(f"SERVER,{srv.server_id},{srv.client_port},{srv.worker_port}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_worker(args) -> int:
    from swarmgrid.exec_dist import worker_main

    try:
        worker_main(args.server[0], args.server[1], args.threads, tag=args.tag)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmgrid", description="Parallel metaheuristics and benchmark harness.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configured optimizer")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--dist", type=_addr, help="evaluate through a server at host:port")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("speedup", help="thread sweep with the barrier off")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=_int_list, default=[1, 2, 4])
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_speedup)

    c = sub.add_parser("compare", help="pairwise comparison matrix")
    c.add_argument("--suite", default="desk", help="'desk' or comma-separated function names")
    c.add_argument("--methods", default=",".join(COMPARE_METHODS))
    c.add_argument("--reps", type=int, default=DESK_REPS)
    c.add_argument("--dim", type=int, default=DESK_DIM)
    c.add_argument("--budget", type=int)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--csv")
    c.add_argument("-v", "--verbose", action="store_true")
    c.set_defaults(fn=cmd_compare)

    sv = sub.add_parser("server", help="run a dispatch server")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--client-port", type=int, default=7890)
    sv.add_argument("--worker-port", type=int, default=7891)
    sv.add_argument("--peer", type=_addr, action="append")
    sv.add_argument("--inited", action="store_true")
    sv.add_argument("--timeout", type=float, default=60.0)
    sv.set_defaults(fn=cmd_server)

    w = sub.add_parser("worker", help="run a worker")
    w.add_argument("--server", type=_addr, required=True)
    w.add_argument("--threads", type=int, default=1)
    w.add_argument("--tag")
    w.set_defaults(fn=cmd_worker)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, UnknownFunction, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
