"""Debug ring tests: hop counts, full-loop delivery, broadcast, backpressure."""

import pytest

from tilesim.ring import BROADCAST_ID, RingFlit, RingNetwork


def make_packet(dest, src, body=()):
    words = [(dest << 8) | src] + list(body)
    flits = [RingFlit(w) for w in words]
    flits[0].head = True
    flits[-1].tail = True
    return flits


def drain(ring, max_cycles=500):
    delivered = {}
    cycles = 0
    while not ring.idle():
        ring.tick()
        cycles += 1
        assert cycles <= max_cycles, "ring failed to drain"
        for n in range(ring.num_nodes):
            for pkt in ring.pop_delivered(n):
                delivered.setdefault(n, []).append((ring.cycle, pkt))
    return delivered


def test_six_hop_delivery():
    # 9 nodes, inject at 3 for 0: travels 4,5,6,7,8 then lands at 0
    ring = RingNetwork(9)
    ring.submit(3, make_packet(dest=0, src=3))
    done = drain(ring)
    assert list(done) == [0]
    (cycle, pkt), = done[0]
    assert cycle == 6
    assert pkt == [(0 << 8) | 3]


def test_self_addressed_packet_travels_full_loop():
    ring = RingNetwork(9)
    ring.submit(3, make_packet(dest=3, src=3))
    done = drain(ring)
    (cycle, pkt), = done[3]
    assert cycle == 9  # N hops, no zero-hop shortcut


def test_multi_flit_packet_arrives_intact():
    ring = RingNetwork(5)
    body = [0x1111, 0x2222, 0x3333]
    ring.submit(1, make_packet(dest=4, src=1, body=body))
    done = drain(ring)
    (_, pkt), = done[4]
    assert pkt == [(4 << 8) | 1] + body


def test_broadcast_reaches_every_other_node_once():
    ring = RingNetwork(6)
    ring.submit(2, make_packet(dest=BROADCAST_ID, src=2, body=[0xABCD]))
    done = drain(ring)
    assert sorted(done) == [0, 1, 3, 4, 5]
    for node, pkts in done.items():
        assert len(pkts) == 1
        assert pkts[0][1] == [(BROADCAST_ID << 8) | 2, 0xABCD]


def test_contention_saturates_then_drains_losslessly():
    # node 1 spends many cycles on its own long packet; transit flits from
    # node 0 pile up behind it until the FIFO is full, then node 0 stalls
    ring = RingNetwork(4)
    ring.submit(1, make_packet(dest=3, src=1, body=list(range(11))))
    ring.tick()  # node 1 locks its output for the local packet
    for i in range(6):
        ring.submit(0, make_packet(dest=2, src=0, body=[i]))
    saw_full = False
    delivered = {2: [], 3: []}
    for _ in range(600):
        ring.tick()
        saw_full = saw_full or len(ring.nodes[1].fifo) == ring.nodes[1].depth
        for n in (2, 3):
            delivered[n].extend(ring.pop_delivered(n))
        if ring.idle():
            break
    assert ring.idle()
    assert saw_full, "scenario never saturated the transit FIFO"
    assert len(delivered[3]) == 1 and len(delivered[2]) == 6
    # per-source order preserved, each packet intact
    assert [p[1] for p in delivered[2]] == sorted(p[1] for p in delivered[2])


def test_packet_framing_validated():
    ring = RingNetwork(3)
    with pytest.raises(ValueError):
        ring.submit(0, [RingFlit(1)])


def test_minimum_ring_size():
    with pytest.raises(ValueError):
        RingNetwork(1)
