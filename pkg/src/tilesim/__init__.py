"""Cycle-level simulator for tiled manycore systems.

Tiles with small cores and local memory sit on a mesh NoC; a separate
16-bit ring carries instruction traces and NoC statistics to an external
debug host.
"""

__version__ = "0.1.0"
