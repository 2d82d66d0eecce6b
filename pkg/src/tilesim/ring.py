"""Unidirectional buffered ring carrying 16-bit debug traffic.

Every node owns a small transit FIFO fed by its upstream neighbor and an
unbounded local transmit queue. One flit crosses each node-to-node link
per cycle; a packet in flight holds the link until its tail flit passes.
Delivery happens on reception: a packet addressed to node d is consumed
when node d-1 forwards it, so a packet sent to its own source travels the
full loop. Broadcast packets (dest 0xFF) are copied to every node they
pass and retired when they return to their source.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Tuple

RING_FLIT_WIDTH = 16
RING_FIFO_DEPTH = 4
BROADCAST_ID = 0xFF

_TRANSIT = 0
_LOCAL = 1


@dataclass(slots=True)
class RingFlit:
    data: int  # 16-bit word
    head: bool = False
    tail: bool = False


def _addr_fields(head_data: int) -> Tuple[int, int]:
    """The first flit of every ring packet carries dest<<8 | src."""
    return (head_data >> 8) & 0xFF, head_data & 0xFF


class _Node:
    def __init__(self, depth: int):
        self.fifo: Deque[RingFlit] = deque()
        self.depth = depth
        self.tx: Deque[RingFlit] = deque()
        # (stream, dest, src) of the packet currently crossing our output
        self.lock: Optional[Tuple[int, int, int]] = None
        self.rx_buf: List[int] = []
        self.delivered: List[List[int]] = []


class RingNetwork:
    def __init__(self, num_nodes: int, depth: int = RING_FIFO_DEPTH):
        if num_nodes < 2:
            raise ValueError("ring needs at least two nodes")
        self.num_nodes = num_nodes
        self.nodes = [_Node(depth) for _ in range(num_nodes)]
        self.cycle = 0

    def submit(self, node: int, flits: List[RingFlit]) -> None:
        """Queue one packet (its full flit sequence) for injection at a node."""
        if not flits or not flits[0].head or not flits[-1].tail:
            raise ValueError("packet must be head..tail framed")
        self.nodes[node].tx.extend(flits)

    def pop_delivered(self, node: int) -> List[List[int]]:
        out = self.nodes[node].delivered
        self.nodes[node].delivered = []
        return out

    def idle(self) -> bool:
        return all(not n.fifo and not n.tx and n.lock is None for n in self.nodes)

    def has_undelivered(self) -> bool:
        return any(n.delivered for n in self.nodes)

    def _select(self, node: _Node) -> Optional[Tuple[int, RingFlit]]:
        """Choose the flit crossing this node's output link, if any."""
        if node.lock is not None:
            stream = node.lock[0]
            queue = node.fifo if stream == _TRANSIT else node.tx
            if not queue:
                return None
            return stream, queue[0]
        # transit has priority over local injection at packet boundaries
        if node.fifo:
            return _TRANSIT, node.fifo[0]
        if node.tx:
            return _LOCAL, node.tx[0]
        return None

    def tick(self) -> None:
        plans = []
        # decide all link crossings on pre-tick state
        for i, node in enumerate(self.nodes):
            choice = self._select(node)
            if choice is None:
                plans.append(None)
                continue
            stream, flit = choice
            if flit.head:
                dest, src = _addr_fields(flit.data)
            else:
                assert node.lock is not None
                _, dest, src = node.lock
            nxt = (i + 1) % self.num_nodes
            downstream = self.nodes[nxt]
            if dest == BROADCAST_ID:
                if nxt == src:
                    action = "retire"
                else:
                    # copy to the next node and keep circling
                    if len(downstream.fifo) >= downstream.depth:
                        plans.append(None)
                        continue
                    action = "copy"
            elif nxt == dest:
                action = "deliver"
            else:
                if len(downstream.fifo) >= downstream.depth:
                    plans.append(None)
                    continue
                action = "forward"
            plans.append((stream, flit, dest, src, action))
        for i, plan in enumerate(plans):
            if plan is None:
                continue
            stream, flit, dest, src, action = plan
            node = self.nodes[i]
            queue = node.fifo if stream == _TRANSIT else node.tx
            popped = queue.popleft()
            assert popped is flit
            node.lock = None if flit.tail else (stream, dest, src)
            downstream = self.nodes[(i + 1) % self.num_nodes]
            if action in ("forward", "copy"):
                downstream.fifo.append(flit)
            if action in ("deliver", "copy"):
                downstream.rx_buf.append(flit.data)
                if flit.tail:
                    downstream.delivered.append(downstream.rx_buf)
                    downstream.rx_buf = []
        self.cycle += 1
