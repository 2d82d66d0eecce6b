"""Host-side control and event collection for the debug fabric.

A Session speaks the framed packet protocol to the external interface,
either over TCP against a live simulation or through an in-process
loopback. It enumerates modules, arms triggers, starts the run, and turns
incoming packets into typed events ready for merging and export.
"""

from __future__ import annotations

import json
import socket
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

from .debug import (ACTION_COLLECT_OFF, ACTION_COLLECT_ON, COND_EVENT_COUNT,
                    COND_LINK_LOAD, COND_PC_EQUALS, DebugPacket,
                    EVENT_TYPES, FrameTooShort, MODULE_TYPE_CORE_TRACE,
                    MODULE_TYPE_EXTIF, MODULE_TYPE_NOC_STAT, PacketType,
                    REG_ACTION, REG_ARG0, REG_ARG1, REG_ARMED, REG_COLLECT,
                    REG_COND_KIND, REG_MODULE_COUNT, REG_RUN, REG_SCOPE,
                    SCOPE_GLOBAL, SCOPE_LOCAL, decode_frame,
                    decompress_itrace, encode_frame)
from .ring import BROADCAST_ID

__all__ = [
    "Event", "LoopbackTransport", "ModuleInfo", "NoSuchModule",
    "NonMonotoneInput", "ProtocolError", "Session", "TcpTransport",
    "TriggerSpec", "TypeMismatch", "decompress_itrace", "events_to_jsonl",
    "merge_streams",
]

MODULE_TYPE_NAMES = {
    MODULE_TYPE_EXTIF: "EXTIF",
    MODULE_TYPE_CORE_TRACE: "CORE_TRACE",
    MODULE_TYPE_NOC_STAT: "NOC_STAT",
}

CONDITION_CODES = {
    "pc_equals": COND_PC_EQUALS,
    "event_count_reaches": COND_EVENT_COUNT,
    "link_load_above": COND_LINK_LOAD,
}
ACTION_CODES = {"collect_on": ACTION_COLLECT_ON, "collect_off": ACTION_COLLECT_OFF}
ACTION_NAMES = {v: k for k, v in ACTION_CODES.items()}
CONDITION_NAMES = {v: k for k, v in CONDITION_CODES.items()}
SCOPE_CODES = {"local": SCOPE_LOCAL, "global": SCOPE_GLOBAL}


class NoSuchModule(ValueError):
    pass


class TypeMismatch(ValueError):
    """Trigger condition not supported by the target module's type."""


class NonMonotoneInput(ValueError):
    """A stream handed to merge_streams was not sorted by timestamp."""


class ProtocolError(RuntimeError):
    """The far end violated the packet protocol."""


@dataclass(frozen=True)
class ModuleInfo:
    module_id: int
    module_type: int
    version: int
    attach: int

    @property
    def type_name(self) -> str:
        return MODULE_TYPE_NAMES.get(self.module_type,
                                     "UNKNOWN_%d" % self.module_type)


@dataclass(frozen=True)
class Event:
    module: int
    kind: str
    timestamp: int
    payload: Dict[str, object]


@dataclass
class TriggerSpec:
    module: int
    condition: str
    argument: float
    action: str = "collect_on"
    scope: str = "local"


def _decode_event(packet: DebugPacket) -> Event:
    ptype = PacketType(packet.type)
    body = packet.body
    payload: Dict[str, object]
    if ptype == PacketType.ITRACE:
        payload = {"pc": (body[0] << 16) | body[1], "run": body[2]}
    elif ptype == PacketType.NOCSTAT:
        payload = {"x": body[0] >> 8, "y": body[0] & 0xFF,
                   "window_start": (body[1] << 16) | body[2],
                   "counts": list(body[3:])}
    elif ptype == PacketType.TRIGGER:
        payload = {"action": ACTION_NAMES.get(body[0], body[0]),
                   "condition": CONDITION_NAMES.get(body[1], body[1])}
    else:
        payload = {"code": body[0], "detail": (body[1] << 16) | body[2]}
    return Event(packet.src, ptype.name, packet.timestamp, payload)


class TcpTransport:
    """Framed packet stream over a TCP connection."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0,
                 recv_timeout: float = 1.0):
        self.sock = socket.create_connection((host, port),
                                             timeout=connect_timeout)
        self.sock.settimeout(recv_timeout)
        self._buf = bytearray()
        self._eof = False

    def send(self, packet: DebugPacket) -> None:
        self.sock.sendall(encode_frame(packet))

    def recv(self) -> Optional[DebugPacket]:
        while True:
            result = decode_frame(bytes(self._buf))
            if result is not None:
                packet, end = result
                del self._buf[:end]
                return packet
            if self._eof:
                if self._buf:
                    raise FrameTooShort(
                        "stream closed with %d leftover bytes" % len(self._buf))
                return None
            data = self.sock.recv(4096)
            if not data:
                self._eof = True
                continue
            self._buf.extend(data)

    def close(self) -> None:
        self.sock.close()


class LoopbackTransport:
    """In-process transport against anything with .debug_fabric and .step(n).

    step(n) must advance the target by at most n cycles and return how many
    cycles actually ran; zero means the target is finished. When the host
    side runs dry the transport pumps the target to produce more traffic.
    """

    def __init__(self, target, pump_cycles: int = 64,
                 max_pump_cycles: int = 10_000_000):
        self.target = target
        self.pump_cycles = pump_cycles
        self.max_pump_cycles = max_pump_cycles
        self._finalized = False

    @property
    def _fabric(self):
        return self.target.debug_fabric

    def send(self, packet: DebugPacket) -> None:
        # reuse the wire encoding so loopback exercises the same format
        decoded, _ = decode_frame(encode_frame(packet))
        self._fabric.host_send(decoded, getattr(self.target, "cycle", 0))

    def recv(self) -> Optional[DebugPacket]:
        pumped = 0
        while True:
            if self._fabric.host_rx:
                return self._fabric.host_rx.popleft()
            if pumped >= self.max_pump_cycles:
                raise TimeoutError("target produced no packets while pumping")
            advanced = self.target.step(self.pump_cycles)
            if advanced == 0:
                if self._fabric.host_rx:
                    continue
                if not self._finalized:
                    self._finalized = True
                    self._fabric.finalize(getattr(self.target, "cycle", 0))
                    continue
                return None
            pumped += advanced

    def close(self) -> None:
        pass


class Session:
    """Control connection to a simulation's debug fabric."""

    def __init__(self, transport):
        self.transport = transport
        self.modules: List[ModuleInfo] = []
        self._event_buf: Deque[Event] = deque()
        self._eof = False

    def close(self) -> None:
        self.transport.close()

    # -- low-level packet plumbing ------------------------------------------

    def _send(self, dest: int, ptype: PacketType, body: List[int]) -> None:
        self.transport.send(DebugPacket(dest, 0, int(ptype), 0, body))

    def _await_control(self, ptype: PacketType,
                       src: Optional[int] = None) -> DebugPacket:
        while True:
            packet = self.transport.recv()
            if packet is None:
                raise ProtocolError("stream ended while awaiting %s" % ptype.name)
            if packet.type in EVENT_TYPES:
                self._event_buf.append(_decode_event(packet))
                continue
            if packet.type == ptype and (src is None or packet.src == src):
                return packet

    def read_register(self, module: int, reg: int) -> int:
        self._send(module, PacketType.REG_READ, [reg])
        packet = self._await_control(PacketType.REG_VALUE, src=module)
        if packet.body[0] != reg:
            raise ProtocolError("register readback answered reg %d, wanted %d"
                                % (packet.body[0], reg))
        return packet.body[1]

    def write_register(self, module: int, reg: int, value: int) -> None:
        self._send(module, PacketType.REG_WRITE, [reg, value & 0xFFFF])

    # -- discovery -----------------------------------------------------------

    def enumerate_modules(self) -> List[ModuleInfo]:
        count = self.read_register(0, REG_MODULE_COUNT)
        self._send(BROADCAST_ID, PacketType.DISCOVER, [])
        found: Dict[int, ModuleInfo] = {}
        while len(found) < count:
            packet = self._await_control(PacketType.DISCOVER_RESP)
            mtype, version, attach = packet.body
            found[packet.src] = ModuleInfo(packet.src, mtype, version, attach)
        self.modules = [found[k] for k in sorted(found)]
        return self.modules

    def _module_info(self, module: int) -> ModuleInfo:
        if not self.modules:
            self.enumerate_modules()
        for info in self.modules:
            if info.module_id == module:
                return info
        raise NoSuchModule("no module %d" % module)

    # -- configuration ---------------------------------------------------------

    def set_trigger(self, spec: TriggerSpec) -> None:
        info = self._module_info(spec.module)
        if spec.condition not in CONDITION_CODES:
            raise ValueError("unknown condition %r" % spec.condition)
        if spec.action not in ACTION_CODES:
            raise ValueError("unknown action %r" % spec.action)
        if spec.scope not in SCOPE_CODES:
            raise ValueError("unknown scope %r" % spec.scope)
        cond = CONDITION_CODES[spec.condition]
        if cond == COND_PC_EQUALS and info.module_type != MODULE_TYPE_CORE_TRACE:
            raise TypeMismatch("pc_equals requires a CORE_TRACE module")
        if cond == COND_LINK_LOAD and info.module_type != MODULE_TYPE_NOC_STAT:
            raise TypeMismatch("link_load_above requires a NOC_STAT module")
        if info.module_type == MODULE_TYPE_EXTIF:
            raise TypeMismatch("module 0 does not take triggers")
        if cond == COND_LINK_LOAD:
            arg0 = min(int(spec.argument * 65536), 65535)
            arg1 = 0
        else:
            value = int(spec.argument)
            arg0, arg1 = (value >> 16) & 0xFFFF, value & 0xFFFF
        module = spec.module
        self.write_register(module, REG_COND_KIND, cond)
        self.write_register(module, REG_ARG0, arg0)
        self.write_register(module, REG_ARG1, arg1)
        self.write_register(module, REG_ACTION, ACTION_CODES[spec.action])
        self.write_register(module, REG_SCOPE, SCOPE_CODES[spec.scope])
        self.write_register(module, REG_ARMED, 1)
        if self.read_register(module, REG_ARMED) != 1:
            raise ProtocolError("trigger on module %d did not arm" % module)

    def set_collection(self, module: int, enabled: bool) -> None:
        self._module_info(module)
        self.write_register(module, REG_COLLECT, 1 if enabled else 0)
        want = 1 if enabled else 0
        if self.read_register(module, REG_COLLECT) != want:
            raise ProtocolError("collection state on module %d stuck" % module)

    def start_run(self) -> None:
        self.write_register(0, REG_RUN, 1)

    # -- events ------------------------------------------------------------------

    def next_event(self) -> Optional[Event]:
        if self._event_buf:
            return self._event_buf.popleft()
        if self._eof:
            return None
        while True:
            packet = self.transport.recv()
            if packet is None:
                self._eof = True
                return None
            if packet.type in EVENT_TYPES:
                return _decode_event(packet)
            # stray control packets after configuration are ignorable

    def collect_events(self) -> List[Event]:
        events = []
        while True:
            event = self.next_event()
            if event is None:
                return events
            events.append(event)


def merge_streams(streams: Sequence[Sequence[Event]]) -> List[Event]:
    """Merge per-module event streams into one timeline.

    Each input stream must already be sorted by timestamp; the output is
    ordered by (timestamp, module) and stable for equal keys.
    """
    for i, stream in enumerate(streams):
        for a, b in zip(stream, list(stream)[1:]):
            if b.timestamp < a.timestamp:
                raise NonMonotoneInput(
                    "stream %d goes back in time (%d after %d)"
                    % (i, b.timestamp, a.timestamp))
    merged: List[Event] = []
    for stream in streams:
        merged.extend(stream)
    merged.sort(key=lambda e: (e.timestamp, e.module))
    return merged


def events_to_jsonl(events: Iterable[Event]) -> str:
    lines = []
    for event in events:
        lines.append(json.dumps(
            {"module": event.module, "payload": event.payload,
             "timestamp": event.timestamp, "type": event.kind},
            sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def itrace_pcs(events: Iterable[Event], module: int) -> List[int]:
    """Expand one module's compressed trace records back to a pc list."""
    records = [(e.payload["pc"], e.payload["run"]) for e in events
               if e.kind == "ITRACE" and e.module == module]
    return decompress_itrace(records)
