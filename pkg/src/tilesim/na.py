"""Per-tile network adapter: MMIO registers, messaging endpoints, DMA, PGAS.

The adapter owns the tile's view of the mesh. Cores talk to it through a
memory-mapped register window; it packetizes outgoing traffic, reassembles
ejected flits, queues received messages per port, services remote memory
requests, and runs the DMA engine. In PGAS organization it also translates
global data addresses, turning remote loads and stores into single-word
request/response transactions that stall the core until completion.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Tuple

from .core import AccessStatus, MemoryPort
from .isa import WORD_MASK
from .noc import Flit, FlitKind, PacketClass, packetize, parse_packet

MMIO_BASE = 0xFFFF_0000
MMIO_SIZE = 0x100

NUM_PORTS = 16
MSG_QUEUE_DEPTH = 16
MAX_MSG_PAYLOAD = 32

DMA_SLOTS = 8
DMA_MAX_LEN = 1024
DMA_SEGMENT_WORDS = 32
LSU_TXN_ID = 8

MIN_PARTITION_BYTES = 4096

# register offsets within the MMIO window
REG_SEND_DEST_TILE = 0x00
REG_SEND_DEST_PORT = 0x04
REG_SEND_SRC_PORT = 0x08
REG_SEND_LEN = 0x0C
REG_SEND_ADDR = 0x10
REG_SEND_GO = 0x14
REG_RECV_STATUS_BASE = 0x20   # + 4 * port, ports 0..15
REG_RECV_WORD_BASE = 0x60     # + 4 * port, ports 0..15
REG_DMA_DIR = 0xA0
REG_DMA_LOCAL_ADDR = 0xA4
REG_DMA_REMOTE_TILE = 0xA8
REG_DMA_REMOTE_ADDR = 0xAC
REG_DMA_LEN = 0xB0
REG_DMA_GO = 0xB4
REG_DMA_STATUS = 0xB8
REG_TILE_ID = 0xF0

# SEND_GO status bits
SEND_STATUS_BUSY = 1 << 0
SEND_STATUS_LEN_ERR = 1 << 1
SEND_STATUS_ARG_ERR = 1 << 2

RECV_STATUS_OVERFLOW = 1 << 16

DMA_GO_FAILED = 0xFFFF_FFFF

# request/response command word fields
CMD_WRITE = 1 << 31
CMD_ERROR = 1 << 30


def make_command(write: bool, txn: int, segment: int, count: int) -> int:
    cmd = (txn & 0xF) << 24 | (segment & 0xFF) << 16 | (count & 0xFFFF)
    return cmd | CMD_WRITE if write else cmd


def split_command(cmd: int) -> Tuple[bool, bool, int, int, int]:
    return (bool(cmd & CMD_WRITE), bool(cmd & CMD_ERROR),
            (cmd >> 24) & 0xF, (cmd >> 16) & 0xFF, cmd & 0xFFFF)


# diagnostic event codes surfaced to the debug fabric
DIAG_MEMORY_FAULT = 1
DIAG_ILLEGAL_INSTRUCTION = 2
DIAG_UNKNOWN_PORT = 3
DIAG_RECV_OVERFLOW = 4
DIAG_DMA_DONE = 5
DIAG_REMOTE_FAULT = 6


def lsu_translate(addr: int, own_tile: int, partition_bytes: int,
                  num_tiles: int) -> Tuple[str, int, int]:
    """Map a global byte address onto (kind, tile, offset).

    The global space is a row of equal power-of-two partitions, one per
    tile. Returns ("local", own_tile, offset) inside the own partition,
    ("remote", tile, offset) in another tile's partition, and
    ("fault", 0, 0) beyond the last partition.
    """
    if partition_bytes < MIN_PARTITION_BYTES or partition_bytes & (partition_bytes - 1):
        raise ValueError("partition size must be a power of two >= 4 KiB")
    tile = addr // partition_bytes
    if tile >= num_tiles:
        return ("fault", 0, 0)
    offset = addr % partition_bytes
    if tile == own_tile:
        return ("local", own_tile, offset)
    return ("remote", tile, offset)


@dataclass
class Message:
    src_tile: int
    src_port: int
    payload: List[int]

    def info_word(self) -> int:
        return (self.src_tile << 24) | (self.src_port << 20) | len(self.payload)


@dataclass
class _DmaTxn:
    write: bool
    local_addr: int
    remote_tile: int
    remote_addr: int
    length: int
    segments: int
    done_segments: int = 0
    error: bool = False


@dataclass
class _LsuState:
    addr: int = 0
    is_store: bool = False
    pending: bool = False
    result_ready: bool = False
    result_value: int = 0
    result_fault: bool = False


class NetworkAdapter:
    def __init__(self, tile_id: int, num_tiles: int, memory: List[int],
                 vcs: int = 3, partition_bytes: Optional[int] = None,
                 ports: int = NUM_PORTS, queue_depth: int = MSG_QUEUE_DEPTH,
                 dma_slots: int = DMA_SLOTS):
        self.tile_id = tile_id
        self.num_tiles = num_tiles
        self.memory = memory
        self.ports = ports
        self.queue_depth = queue_depth
        self.num_dma_slots = dma_slots
        self.partition_bytes = partition_bytes  # None means plain local addressing
        # receive side
        self.recv_queues: List[Deque[Message]] = [deque() for _ in range(ports)]
        self.recv_overflow: List[bool] = [False] * ports
        self.recv_current: List[Deque[int]] = [deque() for _ in range(ports)]
        self.unknown_port_flag = False
        # send side
        self.send_regs: Dict[int, int] = {
            REG_SEND_DEST_TILE: 0, REG_SEND_DEST_PORT: 0,
            REG_SEND_SRC_PORT: 0, REG_SEND_LEN: 0, REG_SEND_ADDR: 0,
        }
        self.send_status = 0
        self._send_flits: Optional[Deque[Flit]] = None
        # injection queues, one per virtual channel
        self.inject: List[Deque[Deque[Flit]]] = [deque() for _ in range(vcs)]
        self.inject_rr = 0
        self.vcs = vcs
        # receive reassembly, one stream per virtual channel
        self.rx_partial: List[List[Flit]] = [[] for _ in range(vcs)]
        # DMA engine
        self.dma_regs: Dict[int, int] = {
            REG_DMA_DIR: 0, REG_DMA_LOCAL_ADDR: 0, REG_DMA_REMOTE_TILE: 0,
            REG_DMA_REMOTE_ADDR: 0, REG_DMA_LEN: 0,
        }
        self.dma_slots: List[Optional[_DmaTxn]] = [None] * dma_slots
        self.dma_error_bits = 0
        self.dma_last_go = 0
        self.lsu = _LsuState()
        # diagnostics for the debug fabric, drained once per cycle
        self.diag_events: List[Tuple[int, int]] = []
        self.messages_sent = 0
        self.messages_received = 0

    # --- helpers -------------------------------------------------------------

    def _mem_ok(self, addr: int, words: int) -> bool:
        return (addr % 4 == 0 and addr >= 0
                and (addr >> 2) + words <= len(self.memory))

    def _read_words(self, addr: int, count: int) -> List[int]:
        idx = addr >> 2
        return self.memory[idx:idx + count]

    def _write_words(self, addr: int, words: List[int]) -> None:
        idx = addr >> 2
        self.memory[idx:idx + len(words)] = [w & WORD_MASK for w in words]

    def _enqueue_packet(self, cls: PacketClass, dst: int, body: List[int]) -> Deque[Flit]:
        flits = deque(packetize(cls, self.tile_id, dst, body))
        self.inject[int(cls)].append(flits)
        return flits

    def quiescent(self) -> bool:
        """True when nothing is queued or in flight at this adapter."""
        if any(q for q in self.inject):
            return False
        if any(buf for buf in self.rx_partial):
            return False
        if any(self.dma_slots):
            return False
        if self.lsu.pending:
            return False
        return True

    # --- MMIO register file ----------------------------------------------------

    def mmio_read(self, offset: int) -> Tuple[AccessStatus, int]:
        if offset in self.send_regs:
            return AccessStatus.OK, self.send_regs[offset]
        if offset == REG_SEND_GO:
            return AccessStatus.OK, self.send_status
        if REG_RECV_STATUS_BASE <= offset < REG_RECV_STATUS_BASE + 4 * self.ports:
            port = (offset - REG_RECV_STATUS_BASE) >> 2
            value = len(self.recv_queues[port])
            if self.recv_overflow[port]:
                value |= RECV_STATUS_OVERFLOW
            return AccessStatus.OK, value
        if REG_RECV_WORD_BASE <= offset < REG_RECV_WORD_BASE + 4 * self.ports:
            port = (offset - REG_RECV_WORD_BASE) >> 2
            return self._recv_word(port)
        if offset in self.dma_regs:
            return AccessStatus.OK, self.dma_regs[offset]
        if offset == REG_DMA_GO:
            return AccessStatus.OK, self.dma_last_go
        if offset == REG_DMA_STATUS:
            busy = 0
            for i, slot in enumerate(self.dma_slots):
                if slot is not None:
                    busy |= 1 << i
            return AccessStatus.OK, busy | (self.dma_error_bits << 8)
        if offset == REG_TILE_ID:
            return AccessStatus.OK, self.tile_id
        return AccessStatus.FAULT, 0

    def mmio_write(self, offset: int, value: int) -> AccessStatus:
        value &= WORD_MASK
        if offset in self.send_regs:
            self.send_regs[offset] = value
            return AccessStatus.OK
        if offset == REG_SEND_GO:
            self._send_go()
            return AccessStatus.OK
        if REG_RECV_STATUS_BASE <= offset < REG_RECV_STATUS_BASE + 4 * self.ports:
            port = (offset - REG_RECV_STATUS_BASE) >> 2
            self.recv_overflow[port] = False
            return AccessStatus.OK
        if offset in self.dma_regs:
            self.dma_regs[offset] = value
            return AccessStatus.OK
        if offset == REG_DMA_GO:
            self._dma_go()
            return AccessStatus.OK
        return AccessStatus.FAULT

    def _recv_word(self, port: int) -> Tuple[AccessStatus, int]:
        current = self.recv_current[port]
        if not current:
            if not self.recv_queues[port]:
                return AccessStatus.STALL, 0
            msg = self.recv_queues[port].popleft()
            current.append(msg.info_word())
            current.extend(msg.payload)
        return AccessStatus.OK, current.popleft()

    # --- message send ------------------------------------------------------------

    def _send_go(self) -> None:
        if self.send_status & SEND_STATUS_BUSY:
            return  # previous send not yet injected; GO ignored
        self.send_status = 0
        length = self.send_regs[REG_SEND_LEN]
        dest = self.send_regs[REG_SEND_DEST_TILE]
        dest_port = self.send_regs[REG_SEND_DEST_PORT]
        src_port = self.send_regs[REG_SEND_SRC_PORT]
        addr = self.send_regs[REG_SEND_ADDR]
        if length > MAX_MSG_PAYLOAD:
            self.send_status |= SEND_STATUS_LEN_ERR
            return
        if (dest >= self.num_tiles or dest_port >= self.ports
                or src_port >= self.ports or not self._mem_ok(addr, length)):
            self.send_status |= SEND_STATUS_ARG_ERR
            return
        payload = self._read_words(addr, length)
        header = (src_port << 28) | (dest_port << 24) | length
        flits = self._enqueue_packet(PacketClass.MSG, dest, [header] + payload)
        self._send_flits = flits
        self.send_status = SEND_STATUS_BUSY
        self.messages_sent += 1

    # --- DMA -----------------------------------------------------------------------

    def _dma_go(self) -> None:
        length = self.dma_regs[REG_DMA_LEN]
        local = self.dma_regs[REG_DMA_LOCAL_ADDR]
        remote_tile = self.dma_regs[REG_DMA_REMOTE_TILE]
        remote = self.dma_regs[REG_DMA_REMOTE_ADDR]
        write = bool(self.dma_regs[REG_DMA_DIR] & 1)
        if (length > DMA_MAX_LEN or remote_tile >= self.num_tiles
                or remote_tile == self.tile_id or remote % 4
                or not self._mem_ok(local, length)):
            self.dma_last_go = DMA_GO_FAILED
            return
        slot = next((i for i, s in enumerate(self.dma_slots) if s is None), None)
        if slot is None:
            self.dma_last_go = DMA_GO_FAILED
            return
        self.dma_last_go = slot
        self.dma_error_bits &= ~(1 << slot)
        if length == 0:
            self.diag_events.append((DIAG_DMA_DONE, slot))
            return
        segments = (length + DMA_SEGMENT_WORDS - 1) // DMA_SEGMENT_WORDS
        txn = _DmaTxn(write, local, remote_tile, remote, length, segments)
        self.dma_slots[slot] = txn
        for seg in range(segments):
            count = min(DMA_SEGMENT_WORDS, length - seg * DMA_SEGMENT_WORDS)
            seg_remote = remote + 4 * seg * DMA_SEGMENT_WORDS
            cmd = make_command(write, slot, seg, count)
            if write:
                seg_local = local + 4 * seg * DMA_SEGMENT_WORDS
                body = [cmd, seg_remote] + self._read_words(seg_local, count)
            else:
                body = [cmd, seg_remote]
            self._enqueue_packet(PacketClass.REQ, remote_tile, body)

    # --- PGAS load/store ------------------------------------------------------------

    def lsu_access(self, addr: int, is_store: bool,
                   value: int = 0) -> Tuple[AccessStatus, int]:
        """Globally addressed access; remote targets stall until the response."""
        assert self.partition_bytes is not None
        lsu = self.lsu
        if lsu.result_ready:
            # completion of the access issued earlier
            assert (lsu.addr, lsu.is_store) == (addr, is_store)
            lsu.result_ready = False
            if lsu.result_fault:
                return AccessStatus.FAULT, 0
            return AccessStatus.OK, lsu.result_value
        if lsu.pending:
            return AccessStatus.STALL, 0
        kind, tile, offset = lsu_translate(
            addr, self.tile_id, self.partition_bytes, self.num_tiles)
        if kind == "fault":
            return AccessStatus.FAULT, 0
        if kind == "local":
            if not self._mem_ok(offset, 1):
                return AccessStatus.FAULT, 0
            if is_store:
                self.memory[offset >> 2] = value & WORD_MASK
                return AccessStatus.OK, 0
            return AccessStatus.OK, self.memory[offset >> 2]
        if offset % 4:
            return AccessStatus.FAULT, 0
        cmd = make_command(is_store, LSU_TXN_ID, 0, 1)
        body = [cmd, offset, value & WORD_MASK] if is_store else [cmd, offset]
        self._enqueue_packet(PacketClass.REQ, tile, body)
        lsu.addr = addr
        lsu.is_store = is_store
        lsu.pending = True
        return AccessStatus.STALL, 0

    # --- mesh interface --------------------------------------------------------------

    def pick_injection(self, space: Callable[[int], int]) -> Optional[Flit]:
        """Choose at most one flit to inject this cycle, round-robin over VCs."""
        for k in range(self.vcs):
            vc = (self.inject_rr + k) % self.vcs
            queue = self.inject[vc]
            if not queue or space(vc) <= 0:
                continue
            packet = queue[0]
            flit = packet.popleft()
            if not packet:
                queue.popleft()
                if packet is self._send_flits:
                    self._send_flits = None
                    self.send_status &= ~SEND_STATUS_BUSY
            self.inject_rr = (vc + 1) % self.vcs
            return flit
        return None

    def accept_flits(self, flits: List[Flit]) -> None:
        for flit in flits:
            buf = self.rx_partial[int(flit.cls)]
            buf.append(flit)
            if flit.kind in (FlitKind.TAIL, FlitKind.SINGLE):
                cls, src, dst, body = parse_packet(buf)
                buf.clear()
                assert dst == self.tile_id
                self._dispatch(cls, src, body)

    def _dispatch(self, cls: PacketClass, src: int, body: List[int]) -> None:
        if cls == PacketClass.MSG:
            self._accept_message(src, body)
        elif cls == PacketClass.REQ:
            self._serve_request(src, body)
        else:
            self._complete_response(src, body)

    def _accept_message(self, src: int, body: List[int]) -> None:
        header, payload = body[0], body[1:]
        src_port = (header >> 28) & 0xF
        dst_port = (header >> 24) & 0xF
        length = header & 0xFFFF
        if dst_port >= self.ports or length != len(payload):
            self.unknown_port_flag = True
            self.diag_events.append((DIAG_UNKNOWN_PORT, dst_port))
            return
        queue = self.recv_queues[dst_port]
        if len(queue) >= self.queue_depth:
            self.recv_overflow[dst_port] = True
            self.diag_events.append((DIAG_RECV_OVERFLOW, dst_port))
            return
        queue.append(Message(src, src_port, payload))
        self.messages_received += 1

    def _serve_request(self, src: int, body: List[int]) -> None:
        cmd, addr = body[0], body[1]
        write, _, txn, seg, count = split_command(cmd)
        data = body[2:]
        if write:
            if len(data) != count or not self._mem_ok(addr, count):
                self._enqueue_packet(PacketClass.RESP, src, [cmd | CMD_ERROR])
                return
            self._write_words(addr, data)
            self._enqueue_packet(PacketClass.RESP, src, [cmd])
        else:
            if not self._mem_ok(addr, count):
                self._enqueue_packet(PacketClass.RESP, src, [cmd | CMD_ERROR])
                return
            self._enqueue_packet(PacketClass.RESP, src,
                                 [cmd] + self._read_words(addr, count))

    def _complete_response(self, src: int, body: List[int]) -> None:
        cmd = body[0]
        write, error, txn, seg, count = split_command(cmd)
        if txn == LSU_TXN_ID:
            lsu = self.lsu
            lsu.pending = False
            lsu.result_ready = True
            lsu.result_fault = error
            lsu.result_value = body[1] if (not write and not error) else 0
            if error:
                self.diag_events.append((DIAG_REMOTE_FAULT, src))
            return
        slot = txn
        txn_state = self.dma_slots[slot]
        if txn_state is None:
            return  # stale response; nothing to do
        if error:
            txn_state.error = True
            self.dma_error_bits |= 1 << slot
        elif not write:
            dest = txn_state.local_addr + 4 * seg * DMA_SEGMENT_WORDS
            self._write_words(dest, body[1:1 + count])
        txn_state.done_segments += 1
        if txn_state.done_segments == txn_state.segments:
            self.dma_slots[slot] = None
            self.diag_events.append((DIAG_DMA_DONE, slot))


class TileMemoryPort(MemoryPort):
    """Routes core data accesses to local memory, MMIO, or the global space."""

    def __init__(self, memory: List[int], na: NetworkAdapter):
        self.memory = memory
        self.na = na

    def _route(self, addr: int) -> str:
        if MMIO_BASE <= addr < MMIO_BASE + MMIO_SIZE:
            return "mmio"
        if self.na.partition_bytes is not None:
            return "global"
        return "local"

    def load(self, addr: int) -> Tuple[AccessStatus, int]:
        if addr % 4:
            return AccessStatus.FAULT, 0
        route = self._route(addr)
        if route == "mmio":
            return self.na.mmio_read(addr - MMIO_BASE)
        if route == "global":
            return self.na.lsu_access(addr, is_store=False)
        idx = addr >> 2
        if idx >= len(self.memory):
            return AccessStatus.FAULT, 0
        return AccessStatus.OK, self.memory[idx]

    def store(self, addr: int, value: int) -> AccessStatus:
        if addr % 4:
            return AccessStatus.FAULT
        route = self._route(addr)
        if route == "mmio":
            return self.na.mmio_write(addr - MMIO_BASE, value)
        if route == "global":
            status, _ = self.na.lsu_access(addr, is_store=True, value=value)
            return status
        idx = addr >> 2
        if idx >= len(self.memory):
            return AccessStatus.FAULT
        self.memory[idx] = value & WORD_MASK
        return AccessStatus.OK
