"""Wormhole-switched mesh network with virtual channels and credit flow control.

Routers forward one flit per output port per cycle. All routers update
simultaneously: departures are computed on pre-tick state, then arrivals,
credit returns and injections are applied. Routing is dimension-ordered
(X first, then Y; y grows southward), which together with one virtual
channel per traffic class keeps the mesh deadlock free.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Deque, Dict, List, Optional, Tuple

FLIT_WIDTH = 32
DEFAULT_VCS = 3
DEFAULT_BUFFER_DEPTH = 4

# Bodies above this length are rejected; senders must segment. User payloads
# are capped at 32 words upstream, the two extra words cover protocol headers
# (message header word, transfer command words).
MAX_PACKET_BODY = 34

MAX_TILES = 256  # src/dst ids are carried in 8 bits of the header word


class Port(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    LOCAL = 4


DIRECTIONS = (Port.NORTH, Port.EAST, Port.SOUTH, Port.WEST)

_OPPOSITE = {
    Port.NORTH: Port.SOUTH,
    Port.SOUTH: Port.NORTH,
    Port.EAST: Port.WEST,
    Port.WEST: Port.EAST,
}


class FlitKind(IntEnum):
    HEADER = 0
    PAYLOAD = 1
    TAIL = 2
    SINGLE = 3


class PacketClass(IntEnum):
    """Traffic classes; the class index doubles as the virtual channel."""

    MSG = 0
    REQ = 1
    RESP = 2


class BodyTooLong(ValueError):
    """Packet body exceeds MAX_PACKET_BODY words."""


class BufferOverflow(RuntimeError):
    """A flit was pushed into a full buffer; flow control was violated."""


@dataclass(slots=True)
class Flit:
    kind: FlitKind
    data: int
    cls: PacketClass
    src: int
    dst: int


def encode_header(cls: PacketClass, src: int, dst: int) -> int:
    return (dst << 24) | (src << 16) | (int(cls) << 14)


def decode_header(word: int) -> Tuple[PacketClass, int, int]:
    return PacketClass((word >> 14) & 0x3), (word >> 16) & 0xFF, (word >> 24) & 0xFF


def packetize(
    cls: PacketClass,
    src: int,
    dst: int,
    body: List[int],
    flit_width: int = FLIT_WIDTH,
) -> List[Flit]:
    """Build the flit sequence for one packet.

    An empty body yields one SINGLE flit carrying just the header word.
    Otherwise the header flit is followed by the body, with the last body
    word travelling in the TAIL flit.
    """
    if len(body) > MAX_PACKET_BODY:
        raise BodyTooLong(f"body of {len(body)} words exceeds {MAX_PACKET_BODY}")
    limit = 1 << flit_width
    for word in body:
        if not 0 <= word < limit:
            raise ValueError(f"body word {word:#x} does not fit in {flit_width} bits")
    header_word = encode_header(cls, src, dst)
    if not body:
        return [Flit(FlitKind.SINGLE, header_word, cls, src, dst)]
    flits = [Flit(FlitKind.HEADER, header_word, cls, src, dst)]
    for word in body[:-1]:
        flits.append(Flit(FlitKind.PAYLOAD, word, cls, src, dst))
    flits.append(Flit(FlitKind.TAIL, body[-1], cls, src, dst))
    return flits


def parse_packet(flits: List[Flit]) -> Tuple[PacketClass, int, int, List[int]]:
    """Inverse of packetize, for reassembly at ejection points."""
    if not flits:
        raise ValueError("empty flit sequence")
    cls, src, dst = decode_header(flits[0].data)
    if flits[0].kind == FlitKind.SINGLE:
        if len(flits) != 1:
            raise ValueError("SINGLE flit inside a longer sequence")
        return cls, src, dst, []
    if flits[0].kind != FlitKind.HEADER or flits[-1].kind != FlitKind.TAIL:
        raise ValueError("malformed flit sequence")
    return cls, src, dst, [f.data for f in flits[1:]]


def route_xy(x: int, y: int, dst_x: int, dst_y: int) -> Port:
    """Dimension-order route decision: X corrected first, y grows southward."""
    if dst_x > x:
        return Port.EAST
    if dst_x < x:
        return Port.WEST
    if dst_y > y:
        return Port.SOUTH
    if dst_y < y:
        return Port.NORTH
    return Port.LOCAL


class Router:
    """One mesh router: 5 ports x N virtual channels, input buffered."""

    def __init__(self, x: int, y: int, width: int, height: int,
                 vcs: int = DEFAULT_VCS, depth: int = DEFAULT_BUFFER_DEPTH):
        self.x = x
        self.y = y
        self.width = width
        self.height = height
        self.vcs = vcs
        self.depth = depth
        self.in_fifos: List[List[Deque[Flit]]] = [
            [deque() for _ in range(vcs)] for _ in Port
        ]
        # Credits mirror the free slots of the downstream input buffer.
        # LOCAL has no downstream buffer: ejected flits are consumed at once.
        self.out_credits: List[List[int]] = [
            [depth] * vcs if p != Port.LOCAL else [0] * vcs for p in Port
        ]
        # (input port) currently holding each output VC, None when free
        self.out_owner: List[List[Optional[int]]] = [[None] * vcs for _ in Port]
        # route decision latched while a header waits at the FIFO head
        self.route_latch: List[List[Optional[Port]]] = [[None] * vcs for _ in Port]
        self.vc_rr: List[int] = [0] * len(Port)
        self.arb_rr: List[List[int]] = [[0] * vcs for _ in Port]
        self.occupancy = 0
        self.depart_counts: List[int] = [0] * len(Port)

    def has_neighbor(self, port: Port) -> bool:
        if port == Port.NORTH:
            return self.y > 0
        if port == Port.SOUTH:
            return self.y < self.height - 1
        if port == Port.WEST:
            return self.x > 0
        if port == Port.EAST:
            return self.x < self.width - 1
        return False

    def free_slots(self, port: Port, vc: int) -> int:
        return self.depth - len(self.in_fifos[port][vc])

    def _sendable(self, out: Port, vc: int) -> Optional[Tuple[int, Flit]]:
        """Return (input port, flit) ready to cross to `out` on `vc`, if any."""
        if out != Port.LOCAL and self.out_credits[out][vc] <= 0:
            return None
        owner = self.out_owner[out][vc]
        if owner is not None:
            fifo = self.in_fifos[owner][vc]
            if not fifo:
                return None
            return owner, fifo[0]
        start = self.arb_rr[out][vc]
        nports = len(Port)
        for k in range(nports):
            p = (start + k) % nports
            fifo = self.in_fifos[p][vc]
            if not fifo:
                continue
            flit = fifo[0]
            if flit.kind not in (FlitKind.HEADER, FlitKind.SINGLE):
                continue
            route = self.route_latch[p][vc]
            if route is None:
                route = route_xy(self.x, self.y, flit.dst % self.width,
                                 flit.dst // self.width)
                self.route_latch[p][vc] = route
            if route == out:
                return p, flit
        return None

    def compute_departures(self) -> List[Tuple[Port, int, int, Flit]]:
        """Pick at most one departing flit per output port (pre-tick state)."""
        deps: List[Tuple[Port, int, int, Flit]] = []
        if self.occupancy == 0:
            return deps
        for out in Port:
            start = self.vc_rr[out]
            for k in range(self.vcs):
                vc = (start + k) % self.vcs
                got = self._sendable(out, vc)
                if got is not None:
                    deps.append((out, vc, got[0], got[1]))
                    break
        return deps

    def commit_departures(self, deps) -> List[Tuple[int, int]]:
        """Pop departed flits; return (input port, vc) credits owed upstream."""
        granted: List[Tuple[int, int]] = []
        nports = len(Port)
        for out, vc, in_port, flit in deps:
            popped = self.in_fifos[in_port][vc].popleft()
            assert popped is flit
            self.occupancy -= 1
            if flit.kind == FlitKind.HEADER:
                self.out_owner[out][vc] = in_port
                self.arb_rr[out][vc] = (in_port + 1) % nports
                self.route_latch[in_port][vc] = None
            elif flit.kind == FlitKind.TAIL:
                self.out_owner[out][vc] = None
            elif flit.kind == FlitKind.SINGLE:
                self.arb_rr[out][vc] = (in_port + 1) % nports
                self.route_latch[in_port][vc] = None
            self.vc_rr[out] = (vc + 1) % self.vcs
            if out != Port.LOCAL:
                self.out_credits[out][vc] -= 1
            if in_port != Port.LOCAL:
                granted.append((in_port, vc))
            self.depart_counts[out] += 1
        return granted

    def accept(self, port: Port, vc: int, flit: Flit) -> None:
        fifo = self.in_fifos[port][vc]
        if len(fifo) >= self.depth:
            raise BufferOverflow(
                f"router ({self.x},{self.y}) port {Port(port).name} vc {vc} full")
        fifo.append(flit)
        self.occupancy += 1

    def return_credit(self, port: Port, vc: int) -> None:
        self.out_credits[port][vc] += 1
        assert self.out_credits[port][vc] <= self.depth

    def tick(self, arrivals=(), credit_returns=()):
        """Single-router update, used standalone in unit tests.

        Arrivals land after departure decisions, so a flit arriving in
        cycle t can depart in cycle t+1 at the earliest.
        """
        deps = self.compute_departures()
        granted = self.commit_departures(deps)
        for port, vc in credit_returns:
            self.return_credit(port, vc)
        for port, vc, flit in arrivals:
            self.accept(port, vc, flit)
        return deps, granted


class MeshNetwork:
    """width x height grid of routers, row-major tile ids."""

    def __init__(self, width: int, height: int,
                 vcs: int = DEFAULT_VCS, depth: int = DEFAULT_BUFFER_DEPTH):
        if width < 1 or height < 1:
            raise ValueError("mesh dimensions must be positive")
        if width * height > MAX_TILES:
            raise ValueError(f"at most {MAX_TILES} tiles supported")
        self.width = width
        self.height = height
        self.vcs = vcs
        self.depth = depth
        self.routers: List[Router] = [
            Router(x, y, width, height, vcs, depth)
            for y in range(height) for x in range(width)
        ]
        self.cycle = 0
        self.injected = 0
        self.ejected = 0
        # (router index, out port, vc, flit) tuples of the last tick
        self.last_departures: List[Tuple[int, Port, int, Flit]] = []

    def router_at(self, x: int, y: int) -> Router:
        return self.routers[y * self.width + x]

    def neighbor_index(self, idx: int, port: Port) -> int:
        x, y = idx % self.width, idx // self.width
        if port == Port.NORTH:
            return idx - self.width
        if port == Port.SOUTH:
            return idx + self.width
        if port == Port.WEST:
            return idx - 1
        if port == Port.EAST:
            return idx + 1
        raise ValueError("no neighbor through LOCAL")

    def local_space(self, tile: int, vc: int) -> int:
        """Free slots of a tile's injection buffer; callers check before injecting."""
        return self.routers[tile].free_slots(Port.LOCAL, vc)

    def tick(self, injections: Optional[Dict[int, Flit]] = None) -> Dict[int, List[Flit]]:
        """Advance every router one cycle; returns flits ejected per tile."""
        all_deps = [r.compute_departures() for r in self.routers]
        ejections: Dict[int, List[Flit]] = {}
        self.last_departures = []
        for idx, (router, deps) in enumerate(zip(self.routers, all_deps)):
            granted = router.commit_departures(deps)
            for in_port, vc in granted:
                # the upstream router sent through its opposite-facing port
                up = self.routers[self.neighbor_index(idx, Port(in_port))]
                up.return_credit(_OPPOSITE[Port(in_port)], vc)
            for out, vc, _in_port, flit in deps:
                self.last_departures.append((idx, out, vc, flit))
                if out == Port.LOCAL:
                    ejections.setdefault(idx, []).append(flit)
                    self.ejected += 1
                else:
                    down = self.routers[self.neighbor_index(idx, out)]
                    down.accept(_OPPOSITE[out], vc, flit)
        if injections:
            for tile, flit in injections.items():
                self.routers[tile].accept(Port.LOCAL, int(flit.cls), flit)
                self.injected += 1
        self.cycle += 1
        return ejections

    def buffered(self) -> int:
        return sum(r.occupancy for r in self.routers)

    def check_invariants(self) -> None:
        """Credit soundness and flit conservation; meant for test builds."""
        for idx, r in enumerate(self.routers):
            for port in DIRECTIONS:
                if not r.has_neighbor(port):
                    continue
                down = self.routers[self.neighbor_index(idx, port)]
                for vc in range(self.vcs):
                    credits = r.out_credits[port][vc]
                    free = down.free_slots(_OPPOSITE[port], vc)
                    if not 0 <= credits <= self.depth:
                        raise AssertionError(
                            f"credit counter {credits} out of range at "
                            f"({r.x},{r.y}) {port.name} vc {vc}")
                    if credits != free:
                        raise AssertionError(
                            f"credit desync at ({r.x},{r.y}) {port.name} vc {vc}: "
                            f"counter {credits}, downstream free {free}")
        if self.injected != self.ejected + self.buffered():
            raise AssertionError(
                f"flit conservation violated: {self.injected} injected, "
                f"{self.ejected} ejected, {self.buffered()} buffered")
