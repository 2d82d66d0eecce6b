"""Command line entry points.

Subcommands:
  gen     turn a short system description into a full configuration
  run     simulate a configuration, optionally serving a debug socket
  attach  connect to a live debug socket and record events as JSONL
  serve   bridge a live debug socket to the browser console

Exit codes: 0 success, 2 bad input files or arguments, 3 simulation setup
errors, 4 connection or protocol failures.
"""

from __future__ import annotations

import argparse
import json
import os
import select
import socket
import sys
import time
from typing import Dict, List, Optional, Tuple

from .debug import FrameTooShort, decode_stream, encode_frame
from .host import (NoSuchModule, ProtocolError, Session, TcpTransport,
                   TriggerSpec, TypeMismatch, events_to_jsonl, merge_streams)
from .isa import ParseError, assemble
from .platform import ConfigError, ValidationError, canonical_json, generate
from .system import SystemInstance, build_system

EXIT_USAGE = 2
EXIT_SETUP = 3
EXIT_CONNECT = 4

RUN_CHUNK = 32


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _cycles_arg(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError("not an integer: %r" % text)
    if not 1 <= value < 2 ** 32:
        raise argparse.ArgumentTypeError("cycle budget out of range")
    return value


def _hostport_arg(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError("expected HOST:PORT, got %r" % text)
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError("bad port in %r" % text)


def _program_arg(text: str) -> Tuple[int, str]:
    tile, sep, path = text.partition(":")
    if not sep or not path:
        raise argparse.ArgumentTypeError(
            "expected TILE:PATH, got %r" % text)
    try:
        return int(tile), path
    except ValueError:
        raise argparse.ArgumentTypeError("bad tile id in %r" % text)


# -- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        config_text = generate(_read_text(args.description))
        _write_text(args.output, config_text)
    except (ValidationError, OSError) as exc:
        print("gen: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    return 0


# -- run ----------------------------------------------------------------------

def _load_system(args) -> SystemInstance:
    config = json.loads(_read_text(args.config))
    programs = {}
    for tile, path in args.program or []:
        programs[tile] = assemble(_read_text(path))
    return build_system(config, programs, seed=args.seed)


def _pump_io(conn: Optional[socket.socket], buf: bytearray,
             system: SystemInstance) -> bool:
    """Move debug frames both ways; False once the peer is gone."""
    fabric = system.debug_fabric
    if conn is None or fabric is None:
        return False
    try:
        while select.select([conn], [], [], 0)[0]:
            data = conn.recv(4096)
            if not data:
                return False
            buf.extend(data)
        packets, consumed = decode_stream(bytes(buf))
        del buf[:consumed]
        for packet in packets:
            fabric.host_send(packet, system.cycle)
        while fabric.host_rx:
            conn.sendall(encode_frame(fabric.host_rx.popleft()))
    except (ConnectionError, BrokenPipeError, OSError):
        return False
    return True


def _run_with_debug(system: SystemInstance, port: int, budget: int) -> int:
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", port))
    server.listen(1)
    print("debug socket listening on 127.0.0.1:%d" % server.getsockname()[1],
          file=sys.stderr)
    conn, _ = server.accept()
    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    buf = bytearray()
    fabric = system.debug_fabric
    assert fabric is not None
    # hold the simulation until the client starts the run; debug
    # configuration traffic still flows through the ring meanwhile
    while not fabric.extif.run:
        if not _pump_io(conn, buf, system):
            print("run: debug client left before starting", file=sys.stderr)
            server.close()
            return EXIT_SETUP
        fabric.tick(0)
        time.sleep(0.001)
    ran = 0
    alive = True
    while ran < budget and not system.finished():
        ran += system.step(min(RUN_CHUNK, budget - ran))
        if alive:
            alive = _pump_io(conn, buf, system)
    system.drain_debug()
    if alive:
        _pump_io(conn, buf, system)
        try:
            conn.shutdown(socket.SHUT_WR)  # EOF marks end of the event stream
        except OSError:
            pass
    conn.close()
    server.close()
    return 0


def cmd_run(args) -> int:
    try:
        system = _load_system(args)
    except (OSError, ValueError) as exc:
        print("run: %s" % exc, file=sys.stderr)
        return EXIT_SETUP
    if args.debug_listen is not None:
        if system.debug_fabric is None:
            print("run: configuration has debug disabled", file=sys.stderr)
            return EXIT_SETUP
        status = _run_with_debug(system, args.debug_listen, args.cycles)
        if status != 0:
            return status
    else:
        system.run(args.cycles)
        system.drain_debug()
    print("run: %d cycles, %s" % (
        system.cycle, "finished" if system.finished() else "budget exhausted"),
        file=sys.stderr)
    if args.stats is not None:
        try:
            _write_text(args.stats, canonical_json(system.stats()))
        except OSError as exc:
            print("run: %s" % exc, file=sys.stderr)
            return EXIT_SETUP
    return 0


# -- attach ---------------------------------------------------------------------

def _load_trigger_plan(path: str) -> Tuple[List[TriggerSpec], List[int]]:
    data = json.loads(_read_text(path))
    if isinstance(data, list):
        raw_specs, collection = data, []
    elif isinstance(data, dict):
        raw_specs = data.get("triggers", [])
        collection = data.get("collection", [])
        unknown = set(data) - {"triggers", "collection"}
        if unknown:
            raise ValueError("unknown keys in trigger file: %s"
                             % ", ".join(sorted(unknown)))
    else:
        raise ValueError("trigger file must be a list or an object")
    if not isinstance(raw_specs, list) or not isinstance(collection, list):
        raise ValueError("triggers and collection must be lists")
    specs = []
    for idx, raw in enumerate(raw_specs):
        if not isinstance(raw, dict):
            raise ValueError("trigger %d is not an object" % idx)
        unknown = set(raw) - {"module", "condition", "argument", "action",
                              "scope"}
        if unknown:
            raise ValueError("trigger %d has unknown keys: %s"
                             % (idx, ", ".join(sorted(unknown))))
        try:
            if not isinstance(raw["argument"], (int, float)):
                raise ValueError("trigger %d argument must be a number" % idx)
            specs.append(TriggerSpec(
                module=int(raw["module"]), condition=str(raw["condition"]),
                argument=raw["argument"],
                action=str(raw.get("action", "collect_on")),
                scope=str(raw.get("scope", "local"))))
        except KeyError as exc:
            raise ValueError("trigger %d is missing %s" % (idx, exc))
    if not all(isinstance(m, int) for m in collection):
        raise ValueError("collection entries must be module ids")
    return specs, collection


def cmd_attach(args) -> int:
    try:
        specs, collection = ([], [])
        if args.triggers is not None:
            specs, collection = _load_trigger_plan(args.triggers)
    except (OSError, ValueError) as exc:
        print("attach: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    host, port = args.connect
    try:
        session = Session(TcpTransport(host, port))
    except OSError as exc:
        print("attach: cannot connect to %s:%d: %s" % (host, port, exc),
              file=sys.stderr)
        return EXIT_CONNECT
    try:
        session.enumerate_modules()
        try:
            for module in collection:
                session.set_collection(module, True)
            for spec in specs:
                session.set_trigger(spec)
        except (NoSuchModule, TypeMismatch, ValueError) as exc:
            print("attach: %s" % exc, file=sys.stderr)
            return EXIT_USAGE
        session.start_run()
        events = []
        deadline = time.monotonic() + args.timeout
        while True:
            try:
                event = session.next_event()
            except TimeoutError:
                if time.monotonic() > deadline:
                    print("attach: no events for %gs, giving up"
                          % args.timeout, file=sys.stderr)
                    return EXIT_CONNECT
                continue
            if event is None:
                break
            events.append(event)
            deadline = time.monotonic() + args.timeout
    except (ProtocolError, FrameTooShort, OSError) as exc:
        print("attach: %s" % exc, file=sys.stderr)
        return EXIT_CONNECT
    finally:
        session.close()
    streams = {}
    for event in events:
        streams.setdefault(event.module, []).append(event)
    merged = merge_streams([streams[k] for k in sorted(streams)])
    try:
        _write_text(args.out, events_to_jsonl(merged))
    except OSError as exc:
        print("attach: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    print("attach: wrote %d events" % len(merged), file=sys.stderr)
    return 0


# -- serve --------------------------------------------------------------------

def cmd_serve(args) -> int:
    import uvicorn

    from .serve import create_app

    if args.console is not None and not os.path.isfile(
            os.path.join(args.console, "index.html")):
        print("serve: no index.html under %s (console not built?)"
              % args.console, file=sys.stderr)
        return EXIT_USAGE
    host, port = args.connect
    try:
        session = Session(TcpTransport(host, port))
    except OSError as exc:
        print("serve: cannot connect to %s:%d: %s" % (host, port, exc),
              file=sys.stderr)
        return EXIT_CONNECT
    app = create_app(session, console_dir=args.console)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilesim",
        description="tiled manycore simulator and debug tools")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a configuration")
    gen.add_argument("--description", required=True,
                     help="system description JSON ('-' for stdin)")
    gen.add_argument("--output", default="-",
                     help="configuration destination (default stdout)")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="simulate a configuration")
    run.add_argument("--config", required=True,
                     help="configuration JSON ('-' for stdin)")
    run.add_argument("--program", action="append", type=_program_arg,
                     metavar="TILE:PATH",
                     help="assembly program for one tile (repeatable)")
    run.add_argument("--cycles", type=_cycles_arg, default=1_000_000,
                     help="cycle budget (default 1000000)")
    run.add_argument("--stats", metavar="PATH",
                     help="write run statistics JSON here ('-' for stdout)")
    run.add_argument("--debug-listen", type=int, metavar="PORT",
                     help="serve the debug fabric on this TCP port and wait "
                          "for a client before running")
    run.add_argument("--seed", type=int, default=0,
                     help="recorded in statistics (default 0)")
    run.set_defaults(func=cmd_run)

    attach = sub.add_parser("attach", help="record events from a live run")
    attach.add_argument("--connect", required=True, type=_hostport_arg,
                        metavar="HOST:PORT", help="debug socket to attach to")
    attach.add_argument("--triggers", metavar="PATH",
                        help="JSON trigger plan applied before the run")
    attach.add_argument("--out", default="-",
                        help="JSONL event destination (default stdout)")
    attach.add_argument("--timeout", type=float, default=60.0,
                        help="give up after this many idle seconds")
    attach.set_defaults(func=cmd_attach)

    serve = sub.add_parser("serve", help="serve the browser console API")
    serve.add_argument("--connect", required=True, type=_hostport_arg,
                       metavar="HOST:PORT", help="debug socket to bridge")
    serve.add_argument("--host", default="127.0.0.1",
                       help="HTTP bind address (default 127.0.0.1)")
    serve.add_argument("--port", type=int, default=8000,
                       help="HTTP port (default 8000)")
    serve.add_argument("--console", metavar="DIR",
                       help="also serve the built browser console from DIR")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)
