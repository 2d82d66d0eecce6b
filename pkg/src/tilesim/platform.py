"""Platform description validation and configuration generation.

A description is the compact, human-written JSON naming a platform: mesh
dimensions, tile memory, addressing organization, debug options. This
module validates it field by field and expands it into the full
configuration consumed by the simulator: explicit tile list, adapter
limits, and the debug module enumeration. Configurations serialize
canonically so identical descriptions produce byte-identical files.
"""

from __future__ import annotations

import json
from typing import Dict, List, Optional

SCHEMA_VERSION = 1
CONFIG_VERSION = 1
MAX_DIM = 16  # keeps tile ids inside the 8-bit address fields

NOC_DEFAULTS = {"vcs": 3, "buffer_depth": 4, "flit_width": 32}
DEBUG_DEFAULTS = {"enabled": True, "nocstat_window": 256}

ADAPTER_LIMITS = {
    "ports": 16,
    "recv_queue_depth": 16,
    "max_msg_payload": 32,
    "dma_slots": 8,
    "dma_max_len": 1024,
    "dma_segment_words": 32,
}


class ValidationError(ValueError):
    """A description field failed validation; .path names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__("%s: %s" % (path, message) if path else message)


class ConfigError(ValueError):
    """A configuration is structurally unusable."""


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ValidationError(path, message)


def _check_keys(section: Dict, allowed, path: str) -> None:
    for key in section:
        _require(key in allowed, "%s.%s" % (path, key) if path else key,
                 "unknown field")


def _get_section(desc: Dict, name: str, defaults: Optional[Dict]) -> Dict:
    section = desc.get(name, {} if defaults is not None else None)
    if section is None:
        raise ValidationError(name, "section is required")
    _require(isinstance(section, dict), name, "must be an object")
    if defaults is not None:
        merged = dict(defaults)
        merged.update(section)
        return merged
    return dict(section)


def _pos_int(value, path: str, low: int, high: int) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), path,
             "must be an integer")
    _require(low <= value <= high, path,
             "must be between %d and %d" % (low, high))
    return value


def _power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


def validate_description(desc: Dict) -> Dict:
    """Check every field; returns the description with defaults filled in."""
    _require(isinstance(desc, dict), "", "description must be a JSON object")
    _check_keys(desc, {"schema_version", "pattern", "width", "height",
                       "tile", "noc", "debug", "pgas"}, "")
    _require(desc.get("schema_version") == SCHEMA_VERSION, "schema_version",
             "must be %d" % SCHEMA_VERSION)
    _require(desc.get("pattern") == "mesh", "pattern", 'must be "mesh"')
    width = _pos_int(desc.get("width"), "width", 1, MAX_DIM)
    height = _pos_int(desc.get("height"), "height", 1, MAX_DIM)

    tile = _get_section(desc, "tile", None)
    _check_keys(tile, {"cores", "memory_kib", "org"}, "tile")
    _require(tile.get("cores") == 1, "tile.cores", "must be 1")
    memory_kib = _pos_int(tile.get("memory_kib"), "tile.memory_kib", 4, 65536)
    org = tile.get("org")
    _require(org in ("distributed", "pgas"), "tile.org",
             'must be "distributed" or "pgas"')

    noc = _get_section(desc, "noc", NOC_DEFAULTS)
    _check_keys(noc, set(NOC_DEFAULTS), "noc")
    vcs = _pos_int(noc.get("vcs"), "noc.vcs", 3, 8)
    _pos_int(noc.get("buffer_depth"), "noc.buffer_depth", 2, 64)
    _require(noc.get("flit_width") == 32, "noc.flit_width", "must be 32")

    debug = _get_section(desc, "debug", DEBUG_DEFAULTS)
    _check_keys(debug, set(DEBUG_DEFAULTS), "debug")
    _require(isinstance(debug.get("enabled"), bool), "debug.enabled",
             "must be a boolean")
    _pos_int(debug.get("nocstat_window"), "debug.nocstat_window", 1, 65535)

    pgas = None
    if org == "pgas":
        _require("pgas" in desc, "pgas", 'section is required when org is "pgas"')
        pgas = _get_section(desc, "pgas", None)
        _check_keys(pgas, {"partition_kib"}, "pgas")
        partition_kib = _pos_int(pgas.get("partition_kib"),
                                 "pgas.partition_kib", 4, 65536)
        _require(_power_of_two(partition_kib), "pgas.partition_kib",
                 "must be a power of two")
        _require(partition_kib == memory_kib, "pgas.partition_kib",
                 "must equal tile.memory_kib so partitions cover local memory")
    else:
        _require("pgas" not in desc, "pgas",
                 'only allowed when tile.org is "pgas"')

    return {
        "schema_version": SCHEMA_VERSION,
        "pattern": "mesh",
        "width": width,
        "height": height,
        "tile": {"cores": 1, "memory_kib": memory_kib, "org": org},
        "noc": {"vcs": vcs, "buffer_depth": noc["buffer_depth"],
                "flit_width": 32},
        "debug": {"enabled": debug["enabled"],
                  "nocstat_window": debug["nocstat_window"]},
        "pgas": pgas,
    }


def _module_table(width: int, height: int) -> List[Dict]:
    modules = [{"id": 0, "type": "EXTIF", "attach": 0}]
    tiles = width * height
    for tile in range(tiles):
        modules.append({"id": 1 + tile, "type": "CORE_TRACE", "attach": tile})
    for idx in range(tiles):
        x, y = idx % width, idx // width
        modules.append({"id": 1 + tiles + idx, "type": "NOC_STAT",
                        "attach": (x << 8) | y})
    return modules


def map_description(desc: Dict) -> Dict:
    """Expand a validated description into a full configuration."""
    norm = validate_description(desc)
    width, height = norm["width"], norm["height"]
    tiles = []
    for tile_id in range(width * height):
        tiles.append({
            "id": tile_id,
            "x": tile_id % width,
            "y": tile_id // width,
            "memory_kib": norm["tile"]["memory_kib"],
            "org": norm["tile"]["org"],
        })
    config = {
        "schema_version": SCHEMA_VERSION,
        "generator": {"config_version": CONFIG_VERSION},
        "topology": {"pattern": "mesh", "width": width, "height": height,
                     "tiles": width * height},
        "tiles": tiles,
        "noc": dict(norm["noc"], classes=["MSG", "REQ", "RESP"]),
        "adapter": dict(ADAPTER_LIMITS),
        "debug": dict(norm["debug"],
                      ring_fifo_depth=4,
                      modules=_module_table(width, height)),
    }
    if norm["pgas"] is not None:
        config["pgas"] = {"partition_kib": norm["pgas"]["partition_kib"]}
    return config


def load_description(text: str) -> Dict:
    try:
        desc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError("", "not valid JSON: %s" % exc) from exc
    return desc


def generate(text: str) -> str:
    """Description JSON text in, canonical configuration text out."""
    return canonical_json(map_description(load_description(text)))
