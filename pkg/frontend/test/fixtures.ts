/** Shared fixtures: the canonical 4-tile enumeration and event builders. */

import { DebugEvent, ModuleRow } from "../src/types.js";

/** Module table of a 2x2 system: 1 interface + 4 core + 4 router modules. */
export function mesh2x2Modules(): ModuleRow[] {
  const rows: ModuleRow[] = [
    { module_id: 0, type: "EXTIF", version: 1, attach: 0 },
  ];
  for (let tile = 0; tile < 4; tile++) {
    rows.push({
      module_id: 1 + tile,
      type: "CORE_TRACE",
      version: 1,
      attach: tile,
    });
  }
  const coords = [
    [0, 0],
    [1, 0],
    [0, 1],
    [1, 1],
  ] as const;
  for (const [idx, [x, y]] of coords.entries()) {
    rows.push({
      module_id: 5 + idx,
      type: "NOC_STAT",
      version: 1,
      attach: (x << 8) | y,
    });
  }
  return rows;
}

export function itrace(
  module: number,
  timestamp: number,
  pc: number,
  run = 0,
): DebugEvent {
  return { module, timestamp, type: "ITRACE", payload: { pc, run } };
}

export function nocstat(
  module: number,
  timestamp: number,
  x: number,
  y: number,
  windowStart: number,
  counts: number[],
): DebugEvent {
  return {
    module,
    timestamp,
    type: "NOCSTAT",
    payload: { x, y, window_start: windowStart, counts },
  };
}

export function trigger(
  module: number,
  timestamp: number,
  action: string,
  condition = "pc_equals",
): DebugEvent {
  return { module, timestamp, type: "TRIGGER", payload: { action, condition } };
}
