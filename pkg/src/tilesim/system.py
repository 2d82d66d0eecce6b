"""Whole-platform simulation: tiles, mesh, and debug fabric stepped together.

Each cycle advances in a fixed order: adapters choose their injections,
cores execute, the mesh moves flits, adapters absorb ejections, and the
debug fabric observes. The functional side never reads debug state, so a
run produces identical results with the fabric enabled or disabled.
"""

from __future__ import annotations

import hashlib
from typing import Dict, List, Optional

from .core import Core, FaultKind
from .debug import DebugFabric
from .isa import ProgramImage
from .na import NetworkAdapter, TileMemoryPort
from .noc import MeshNetwork
from .platform import ConfigError

REQUIRED_SECTIONS = ("topology", "tiles", "noc", "adapter", "debug")


def map_configuration(config: Dict) -> Dict:
    """Structural checks for a configuration, handwritten ones included."""
    if not isinstance(config, dict):
        raise ConfigError("configuration must be a JSON object")
    for section in REQUIRED_SECTIONS:
        if section not in config:
            raise ConfigError("missing section %r" % section)
    topo = config["topology"]
    for key in ("width", "height", "tiles"):
        if not isinstance(topo.get(key), int):
            raise ConfigError("topology.%s: must be an integer" % key)
    width, height = topo["width"], topo["height"]
    if topo.get("pattern") != "mesh":
        raise ConfigError('topology.pattern: must be "mesh"')
    if width < 1 or height < 1 or width > 16 or height > 16:
        raise ConfigError("topology dimensions out of range")
    if topo["tiles"] != width * height:
        raise ConfigError("topology.tiles: must equal width * height")
    tiles = config["tiles"]
    if len(tiles) != topo["tiles"]:
        raise ConfigError("tiles: expected %d entries" % topo["tiles"])
    for i, tile in enumerate(tiles):
        if tile.get("id") != i:
            raise ConfigError("tiles[%d].id: must be %d" % (i, i))
        if tile.get("org") not in ("distributed", "pgas"):
            raise ConfigError("tiles[%d].org: unknown organization" % i)
        if not isinstance(tile.get("memory_kib"), int) or tile["memory_kib"] < 4:
            raise ConfigError("tiles[%d].memory_kib: must be >= 4" % i)
    orgs = {tile["org"] for tile in tiles}
    if len(orgs) > 1:
        raise ConfigError("tiles: mixed addressing organizations")
    noc = config["noc"]
    if noc.get("flit_width") != 32:
        raise ConfigError("noc.flit_width: must be 32")
    if not isinstance(noc.get("vcs"), int) or noc["vcs"] < 3:
        raise ConfigError("noc.vcs: need at least three virtual channels")
    if not isinstance(noc.get("buffer_depth"), int) or noc["buffer_depth"] < 2:
        raise ConfigError("noc.buffer_depth: must be at least 2")
    if "pgas" in orgs:
        pgas = config.get("pgas")
        if not pgas or not isinstance(pgas.get("partition_kib"), int):
            raise ConfigError("pgas.partition_kib: required for pgas tiles")
        sizes = {tile["memory_kib"] for tile in tiles}
        if sizes != {pgas["partition_kib"]}:
            raise ConfigError("pgas.partition_kib: must equal tile memory")
    debug = config["debug"]
    if not isinstance(debug.get("enabled"), bool):
        raise ConfigError("debug.enabled: must be a boolean")
    window = debug.get("nocstat_window")
    if not isinstance(window, int) or not 1 <= window <= 65535:
        raise ConfigError("debug.nocstat_window: must be 1..65535")
    return config


class SystemInstance:
    def __init__(self, config: Dict, programs: Optional[Dict[int, ProgramImage]] = None,
                 seed: int = 0):
        config = map_configuration(config)
        self.config = config
        self.seed = seed  # reserved; the functional model is deterministic
        topo = config["topology"]
        noc = config["noc"]
        adapter = config["adapter"]
        self.width, self.height = topo["width"], topo["height"]
        self.num_tiles = topo["tiles"]
        self.mesh = MeshNetwork(self.width, self.height, vcs=noc["vcs"],
                                depth=noc["buffer_depth"])
        pgas = config.get("pgas")
        self.memories: List[List[int]] = []
        self.nas: List[NetworkAdapter] = []
        self.cores: List[Core] = []
        for tile in config["tiles"]:
            words = tile["memory_kib"] * 1024 // 4
            memory = [0] * words
            partition = None
            if tile["org"] == "pgas":
                partition = pgas["partition_kib"] * 1024
            na = NetworkAdapter(
                tile["id"], self.num_tiles, memory, vcs=noc["vcs"],
                partition_bytes=partition, ports=adapter["ports"],
                queue_depth=adapter["recv_queue_depth"],
                dma_slots=adapter["dma_slots"])
            core = Core(memory, TileMemoryPort(memory, na))
            core.halted = True  # idle until a program is loaded
            self.memories.append(memory)
            self.nas.append(na)
            self.cores.append(core)
        programs = programs or {}
        for tile_id, image in programs.items():
            self.load_program(tile_id, image)
        self.debug_fabric: Optional[DebugFabric] = None
        if config["debug"]["enabled"]:
            self.debug_fabric = DebugFabric(
                self.mesh, self.num_tiles,
                window=config["debug"]["nocstat_window"])
        self.cycle = 0
        self._fault_reported = [False] * self.num_tiles

    def load_program(self, tile_id: int, image: ProgramImage) -> None:
        if not 0 <= tile_id < self.num_tiles:
            raise ConfigError("no tile %d for program assignment" % tile_id)
        memory = self.memories[tile_id]
        base_word = image.base // 4
        if image.base % 4 or base_word + len(image.words) > len(memory):
            raise ConfigError("program does not fit tile %d memory" % tile_id)
        memory[base_word:base_word + len(image.words)] = list(image.words)
        core = self.cores[tile_id]
        core.pc = image.base
        core.halted = False

    # -- simulation loop -----------------------------------------------------

    def finished(self) -> bool:
        if not all(core.halted for core in self.cores):
            return False
        if self.mesh.buffered() != 0:
            return False
        return all(na.quiescent() for na in self.nas)

    def _tick_once(self) -> None:
        self.cycle += 1
        stamp = self.cycle
        fabric = self.debug_fabric
        # adapters pick injections first: traffic started by a core this
        # cycle reaches the mesh no earlier than the next one
        injections = {}
        for tile, na in enumerate(self.nas):
            flit = na.pick_injection(
                lambda vc, t=tile: self.mesh.local_space(t, vc))
            if flit is not None:
                injections[tile] = flit
        for tile, core in enumerate(self.cores):
            if core.halted:
                continue
            retired = core.step()
            if fabric is not None and retired is not None:
                fabric.on_retire(tile, retired, stamp)
            if core.fault is not None and not self._fault_reported[tile]:
                self._fault_reported[tile] = True
                if fabric is not None:
                    fault = core.fault
                    detail = (fault.addr if fault.kind == FaultKind.MEMORY_FAULT
                              else fault.pc)
                    fabric.on_fault(tile, int(fault.kind), detail, stamp)
        ejections = self.mesh.tick(injections)
        for tile, flits in ejections.items():
            self.nas[tile].accept_flits(flits)
        for tile, na in enumerate(self.nas):
            if na.diag_events:
                if fabric is not None:
                    for code, detail in na.diag_events:
                        fabric.on_fault(tile, code, detail, stamp)
                na.diag_events.clear()
        if fabric is not None:
            fabric.tick(stamp)

    def step(self, cycles: int) -> int:
        ran = 0
        for _ in range(cycles):
            if self.finished():
                break
            self._tick_once()
            ran += 1
        return ran

    def run(self, max_cycles: int) -> int:
        return self.step(max_cycles)

    def drain_debug(self) -> int:
        if self.debug_fabric is None:
            return 0
        return self.debug_fabric.finalize(self.cycle)

    # -- reporting ----------------------------------------------------------------

    def stats(self) -> Dict:
        tiles = []
        for tile_id in range(self.num_tiles):
            core = self.cores[tile_id]
            na = self.nas[tile_id]
            entry = {
                "id": tile_id,
                "retired": core.retired,
                "halted": core.halted,
                "messages_sent": na.messages_sent,
                "messages_received": na.messages_received,
            }
            if core.fault is not None:
                entry["fault"] = {"kind": int(core.fault.kind),
                                  "pc": core.fault.pc,
                                  "addr": core.fault.addr}
            tiles.append(entry)
        return {
            "cycles": self.cycle,
            "seed": self.seed,
            "tiles": tiles,
            "noc": {"injected": self.mesh.injected,
                    "ejected": self.mesh.ejected},
        }

    def state_digest(self) -> str:
        """Hash of all functional state; equal runs hash equally."""
        h = hashlib.sha256()
        h.update(str(self.cycle).encode())
        for core in self.cores:
            h.update(repr((core.pc, core.regs, core.halted, core.retired,
                           core.fault)).encode())
        for memory in self.memories:
            h.update(repr(memory).encode())
        h.update(repr((self.mesh.injected, self.mesh.ejected)).encode())
        return h.hexdigest()


def build_system(config: Dict, programs: Optional[Dict[int, ProgramImage]] = None,
                 seed: int = 0) -> SystemInstance:
    return SystemInstance(config, programs, seed)
