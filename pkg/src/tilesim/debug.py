"""Debug fabric: trace modules on a shared ring, reachable from a host.

One module sits at each ring node: node 0 is the external interface that
bridges to the host, followed by one execution-trace module per tile and
one traffic-statistics module per router. Modules observe the functional
simulation without disturbing it, compress what they see into 16-bit
packets, and push them around the ring toward node 0. The host configures
modules through register read/write packets travelling the other way.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Deque, Dict, List, Optional, Tuple

from .ring import BROADCAST_ID, RingFlit, RingNetwork

TS_MASK = 0xFFFF_FFFF
MAX_EVENT_BODY = 12
MIN_PACKET_FLITS = 4
MAX_PACKET_FLITS = MIN_PACKET_FLITS + MAX_EVENT_BODY


class PacketType(IntEnum):
    # trace events emitted by modules
    ITRACE = 1
    NOCSTAT = 2
    TRIGGER = 3
    FAULT = 4
    # control exchanged with the host
    DISCOVER = 16
    DISCOVER_RESP = 17
    REG_WRITE = 18
    REG_READ = 19
    REG_VALUE = 20


EVENT_TYPES = (PacketType.ITRACE, PacketType.NOCSTAT,
               PacketType.TRIGGER, PacketType.FAULT)

# module register map (16-bit registers)
REG_COLLECT = 0
REG_TRIGGER_INPUT = 1
REG_COND_KIND = 2
REG_ARG0 = 3
REG_ARG1 = 4
REG_ACTION = 5
REG_SCOPE = 6
REG_ARMED = 7
REG_MODULE_TYPE = 8
REG_VERSION = 9
REG_ATTACH = 10
READONLY_REGS = (REG_MODULE_TYPE, REG_VERSION, REG_ATTACH)

# external interface registers
REG_RUN = 0
REG_MODULE_COUNT = 1

MODULE_TYPE_EXTIF = 1
MODULE_TYPE_CORE_TRACE = 2
MODULE_TYPE_NOC_STAT = 3
MODULE_VERSION = 1

COND_PC_EQUALS = 1
COND_EVENT_COUNT = 2
COND_LINK_LOAD = 3

ACTION_COLLECT_ON = 1
ACTION_COLLECT_OFF = 2

SCOPE_LOCAL = 0
SCOPE_GLOBAL = 1


class FrameTooShort(ValueError):
    """Byte stream ended inside a packet frame."""


class FlitCountMismatch(ValueError):
    """Frame header announces an impossible flit count."""


@dataclass
class TraceEvent:
    kind: PacketType
    module: int
    timestamp: int
    payload: List[int]


@dataclass
class DebugPacket:
    dest: int
    src: int
    type: int
    timestamp: int
    body: List[int] = field(default_factory=list)

    def to_flits(self) -> List[RingFlit]:
        ts = self.timestamp & TS_MASK
        words = [((self.dest & 0xFF) << 8) | (self.src & 0xFF),
                 self.type & 0xFFFF, (ts >> 16) & 0xFFFF, ts & 0xFFFF]
        words.extend(w & 0xFFFF for w in self.body)
        last = len(words) - 1
        return [RingFlit(w, head=(i == 0), tail=(i == last))
                for i, w in enumerate(words)]

    @classmethod
    def from_words(cls, words: List[int]) -> "DebugPacket":
        dest, src = words[0] >> 8, words[0] & 0xFF
        return cls(dest, src, words[1], (words[2] << 16) | words[3],
                   list(words[4:]))

    @classmethod
    def from_flits(cls, flits: List[RingFlit]) -> "DebugPacket":
        return cls.from_words([f.data for f in flits])


def encode_frame(packet: DebugPacket) -> bytes:
    flits = packet.to_flits()
    return struct.pack("<H", len(flits)) + struct.pack(
        "<%dH" % len(flits), *[f.data for f in flits])


def decode_frame(data: bytes, offset: int = 0) -> Optional[Tuple[DebugPacket, int]]:
    """Decode one frame at offset; None if more bytes are needed."""
    if len(data) - offset < 2:
        return None
    (count,) = struct.unpack_from("<H", data, offset)
    if count < MIN_PACKET_FLITS or count > MAX_PACKET_FLITS:
        raise FlitCountMismatch("frame announces %d flits" % count)
    end = offset + 2 + 2 * count
    if len(data) < end:
        return None
    words = struct.unpack_from("<%dH" % count, data, offset + 2)
    return DebugPacket.from_words(list(words)), end


def decode_stream(data: bytes) -> Tuple[List[DebugPacket], int]:
    """Decode as many complete frames as possible; returns (packets, consumed)."""
    packets = []
    offset = 0
    while True:
        result = decode_frame(data, offset)
        if result is None:
            return packets, offset
        packet, offset = result
        packets.append(packet)


class ItraceCompressor:
    """Collapses sequential program counters into (start, run) records.

    A record (pc, n) stands for n+1 retirements at pc, pc+4, ... pc+4n.
    Runs are capped so the count fits a 16-bit field.
    """

    def __init__(self):
        self.start: Optional[int] = None
        self.count = 0
        self._next = 0

    def feed(self, pc: int) -> List[Tuple[int, int]]:
        if self.start is None:
            self.start, self.count, self._next = pc, 0, pc + 4
            return []
        if pc == self._next and self.count < 0xFFFF:
            self.count += 1
            self._next = pc + 4
            return []
        record = (self.start, self.count)
        self.start, self.count, self._next = pc, 0, pc + 4
        return [record]

    def flush(self) -> List[Tuple[int, int]]:
        if self.start is None:
            return []
        record = (self.start, self.count)
        self.start, self.count = None, 0
        return [record]


def decompress_itrace(records) -> List[int]:
    pcs: List[int] = []
    for start, run in records:
        pcs.extend(start + 4 * i for i in range(run + 1))
    return pcs


class DebugModule:
    """Common register file and trigger machinery for ring modules."""

    module_type = 0

    def __init__(self, module_id: int, attach: int):
        self.module_id = module_id
        self.regs: Dict[int, int] = {
            REG_COLLECT: 0, REG_TRIGGER_INPUT: 1, REG_COND_KIND: 0,
            REG_ARG0: 0, REG_ARG1: 0, REG_ACTION: 0, REG_SCOPE: 0,
            REG_ARMED: 0, REG_MODULE_TYPE: self.module_type,
            REG_VERSION: MODULE_VERSION, REG_ATTACH: attach,
        }
        self.outbox: Deque[DebugPacket] = deque()
        self.event_count = 0
        self.last_collect_change: Optional[int] = None

    # -- register access ---------------------------------------------------

    def read_reg(self, reg: int) -> int:
        return self.regs.get(reg, 0)

    def write_reg(self, reg: int, value: int, cycle: int) -> None:
        if reg in READONLY_REGS:
            return
        if reg == REG_COLLECT:
            self._set_collect(value & 1, cycle)
        else:
            self.regs[reg] = value & 0xFFFF

    def _set_collect(self, value: int, cycle: int) -> None:
        old = self.regs[REG_COLLECT]
        if old == value:
            return
        self.regs[REG_COLLECT] = value
        self.last_collect_change = cycle
        if value:
            self.on_collect_on()
        else:
            self.on_collect_off(cycle)

    def on_collect_on(self) -> None:
        pass

    def on_collect_off(self, cycle: int) -> None:
        pass

    # -- packets -----------------------------------------------------------

    def emit(self, type_: int, body: List[int], cycle: int,
             dest: int = 0) -> None:
        self.outbox.append(DebugPacket(dest, self.module_id, int(type_),
                                       cycle & TS_MASK, body))

    def handle_packet(self, packet: DebugPacket, cycle: int) -> None:
        ptype = packet.type
        if ptype == PacketType.REG_WRITE:
            self.write_reg(packet.body[0], packet.body[1], cycle)
        elif ptype == PacketType.REG_READ:
            reg = packet.body[0]
            self.emit(PacketType.REG_VALUE, [reg, self.read_reg(reg)],
                      cycle, dest=packet.src)
        elif ptype == PacketType.DISCOVER:
            self.emit(PacketType.DISCOVER_RESP,
                      [self.regs[REG_MODULE_TYPE], self.regs[REG_VERSION],
                       self.regs[REG_ATTACH]], cycle, dest=packet.src)
        elif ptype == PacketType.TRIGGER and packet.dest == BROADCAST_ID:
            # cross-trigger: apply silently when trigger input is enabled
            if self.regs[REG_TRIGGER_INPUT]:
                target = 1 if packet.body[0] == ACTION_COLLECT_ON else 0
                self._set_collect(target, cycle)

    # -- trigger -----------------------------------------------------------

    def _arg32(self) -> int:
        return (self.regs[REG_ARG0] << 16) | self.regs[REG_ARG1]

    def fire_trigger(self, cycle: int) -> None:
        self.regs[REG_ARMED] = 0
        action = self.regs[REG_ACTION]
        target = 1 if action == ACTION_COLLECT_ON else 0
        if self.regs[REG_COLLECT] == target:
            return  # already in the requested state; nothing to announce
        self._set_collect(target, cycle)
        body = [action, self.regs[REG_COND_KIND]]
        self.emit(PacketType.TRIGGER, body, cycle, dest=0)
        if self.regs[REG_SCOPE] == SCOPE_GLOBAL:
            self.emit(PacketType.TRIGGER, body, cycle, dest=BROADCAST_ID)


class CoreTraceModule(DebugModule):
    """Observes one core's retirement stream."""

    module_type = MODULE_TYPE_CORE_TRACE

    def __init__(self, module_id: int, tile: int):
        super().__init__(module_id, attach=tile)
        self.tile = tile
        self.compressor = ItraceCompressor()

    def on_collect_on(self) -> None:
        self.compressor = ItraceCompressor()

    def on_collect_off(self, cycle: int) -> None:
        self._emit_records(self.compressor.flush(), cycle)

    def _emit_records(self, records, cycle: int) -> None:
        for start, run in records:
            self.emit(PacketType.ITRACE,
                      [(start >> 16) & 0xFFFF, start & 0xFFFF, run], cycle)

    def on_retire(self, pc: int, cycle: int) -> None:
        self.event_count = (self.event_count + 1) & TS_MASK
        if self.regs[REG_ARMED]:
            kind = self.regs[REG_COND_KIND]
            if kind == COND_PC_EQUALS and pc == self._arg32():
                self.fire_trigger(cycle)
            elif kind == COND_EVENT_COUNT and self.event_count >= self._arg32():
                self.fire_trigger(cycle)
        if self.regs[REG_COLLECT]:
            self._emit_records(self.compressor.feed(pc), cycle)

    def on_fault(self, code: int, detail: int, cycle: int) -> None:
        # faults are never gated; losing them would hide the interesting part
        self.emit(PacketType.FAULT,
                  [code & 0xFFFF, (detail >> 16) & 0xFFFF, detail & 0xFFFF],
                  cycle)

    def finalize(self, cycle: int) -> None:
        if self.regs[REG_COLLECT]:
            self._emit_records(self.compressor.flush(), cycle)


class NocStatModule(DebugModule):
    """Counts per-port departures at one router over fixed windows."""

    module_type = MODULE_TYPE_NOC_STAT

    def __init__(self, module_id: int, router, x: int, y: int, window: int):
        super().__init__(module_id, attach=(x << 8) | y)
        self.router = router
        self.x, self.y = x, y
        self.window = window
        self._last_counts = [0] * len(router.depart_counts)

    def on_window(self, cycle: int) -> None:
        current = list(self.router.depart_counts)
        counts = [c - p for c, p in zip(current, self._last_counts)]
        self._last_counts = current
        self.event_count = (self.event_count + 1) & TS_MASK
        if self.regs[REG_ARMED]:
            kind = self.regs[REG_COND_KIND]
            if kind == COND_EVENT_COUNT and self.event_count >= self._arg32():
                self.fire_trigger(cycle)
            elif kind == COND_LINK_LOAD:
                # counts/window > ARG0/65536, in integer arithmetic
                if max(counts) * 65536 > self.regs[REG_ARG0] * self.window:
                    self.fire_trigger(cycle)
        if self.regs[REG_COLLECT]:
            start = cycle - self.window
            body = [(self.x << 8) | self.y,
                    (start >> 16) & 0xFFFF, start & 0xFFFF]
            body.extend(min(c, 0xFFFF) for c in counts)
            self.emit(PacketType.NOCSTAT, body, cycle)


class ExtifModule(DebugModule):
    """Ring node 0: bridges the ring to the host connection."""

    module_type = MODULE_TYPE_EXTIF

    def __init__(self, fabric: "DebugFabric"):
        super().__init__(0, attach=0)
        self.fabric = fabric
        self.run = 0

    def handle_packet(self, packet: DebugPacket, cycle: int) -> None:
        ptype = packet.type
        if ptype == PacketType.REG_WRITE:
            reg, value = packet.body
            if reg == REG_RUN:
                self.run = value
        elif ptype == PacketType.REG_READ:
            reg = packet.body[0]
            value = {REG_RUN: self.run,
                     REG_MODULE_COUNT: len(self.fabric.modules),
                     REG_MODULE_TYPE: MODULE_TYPE_EXTIF,
                     REG_VERSION: MODULE_VERSION}.get(reg, 0)
            self.fabric.host_rx.append(DebugPacket(
                0, 0, int(PacketType.REG_VALUE), cycle & TS_MASK, [reg, value]))
        elif ptype == PacketType.DISCOVER:
            self.fabric.host_rx.append(DebugPacket(
                0, 0, int(PacketType.DISCOVER_RESP), cycle & TS_MASK,
                [MODULE_TYPE_EXTIF, MODULE_VERSION, 0]))


class DebugFabric:
    """All debug modules plus the ring connecting them."""

    def __init__(self, mesh, num_tiles: int, window: int = 256):
        self.window = window
        self.extif = ExtifModule(self)
        self.modules: List[DebugModule] = [self.extif]
        self.core_trace: List[CoreTraceModule] = []
        for tile in range(num_tiles):
            mod = CoreTraceModule(len(self.modules), tile)
            self.modules.append(mod)
            self.core_trace.append(mod)
        self.noc_stat: List[NocStatModule] = []
        for idx, router in enumerate(mesh.routers):
            x, y = idx % mesh.width, idx // mesh.width
            mod = NocStatModule(len(self.modules), router, x, y, window)
            self.modules.append(mod)
            self.noc_stat.append(mod)
        self.ring = RingNetwork(len(self.modules))
        self.host_rx: Deque[DebugPacket] = deque()
        self.emission_log: List[TraceEvent] = []

    # -- host side ----------------------------------------------------------

    def host_send(self, packet: DebugPacket, cycle: int) -> None:
        if packet.dest == BROADCAST_ID:
            self.extif.handle_packet(packet, cycle)
            self.ring.submit(0, packet.to_flits())
        elif packet.dest == 0:
            self.extif.handle_packet(packet, cycle)
        else:
            self.ring.submit(0, packet.to_flits())

    # -- observation hooks ----------------------------------------------------

    def on_retire(self, tile: int, pc: int, cycle: int) -> None:
        self.core_trace[tile].on_retire(pc, cycle)

    def on_fault(self, tile: int, code: int, detail: int, cycle: int) -> None:
        self.core_trace[tile].on_fault(code, detail, cycle)

    # -- simulation interface ----------------------------------------------------

    def tick(self, cycle: int) -> None:
        if self.window and cycle > 0 and cycle % self.window == 0:
            for mod in self.noc_stat:
                mod.on_window(cycle)
        self._pump(cycle)

    def _pump(self, cycle: int) -> None:
        for node in range(len(self.modules)):
            for words in self.ring.pop_delivered(node):
                packet = DebugPacket.from_words(words)
                if node == 0:
                    if packet.dest == BROADCAST_ID:
                        continue  # broadcast copies stop at the bridge
                    self.host_rx.append(packet)
                else:
                    self.modules[node].handle_packet(packet, cycle)
        for mod in self.modules:
            while mod.outbox:
                packet = mod.outbox.popleft()
                if packet.dest == 0 and packet.type in EVENT_TYPES:
                    self.emission_log.append(TraceEvent(
                        PacketType(packet.type), packet.src,
                        packet.timestamp, list(packet.body)))
                self.ring.submit(mod.module_id, packet.to_flits())
        self.ring.tick()

    def pending(self) -> bool:
        if not self.ring.idle() or self.ring.has_undelivered():
            return True
        return any(mod.outbox for mod in self.modules)

    def finalize(self, cycle: int) -> int:
        """Flush compressors and drain the ring; returns cycles spent."""
        for mod in self.core_trace:
            mod.finalize(cycle)
        spent = 0
        while self.pending():
            self._pump(cycle)
            spent += 1
            assert spent < 1_000_000, "debug ring failed to drain"
        return spent
