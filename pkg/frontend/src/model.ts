/** Console view model: module table, bounded event log, heatmap, statuses.
 *
 * Pure state, no DOM. Events enter through ingest() in arrival order; the
 * log keeps the most recent LOG_CAPACITY of them in a ring. Heatmap cells
 * hold the most recent statistics window per router, as a fraction of the
 * busiest output link. A malformed message bumps a counter and changes
 * nothing else.
 */

import { DebugEvent, ModuleRow, isDebugEvent, isModuleRow } from "./types.js";

export const LOG_CAPACITY = 10000;

/** Fixed-capacity FIFO over events; pushing past capacity evicts the oldest. */
export class EventRing {
  readonly capacity: number;
  evicted = 0;
  private buf: DebugEvent[] = [];
  private head = 0;

  constructor(capacity: number) {
    this.capacity = capacity;
  }

  get length(): number {
    return this.buf.length;
  }

  push(event: DebugEvent): void {
    if (this.buf.length < this.capacity) {
      this.buf.push(event);
      return;
    }
    this.buf[this.head] = event;
    this.head = (this.head + 1) % this.capacity;
    this.evicted += 1;
  }

  /** Oldest-first index access; index 0 is the oldest retained event. */
  at(index: number): DebugEvent | undefined {
    if (index < 0 || index >= this.buf.length) return undefined;
    return this.buf[(this.head + index) % this.buf.length];
  }

  /** The most recent n events, oldest first. */
  tail(n: number): DebugEvent[] {
    const start = Math.max(0, this.buf.length - n);
    const out: DebugEvent[] = [];
    for (let i = start; i < this.buf.length; i++) {
      out.push(this.at(i) as DebugEvent);
    }
    return out;
  }

  toArray(): DebugEvent[] {
    return this.tail(this.buf.length);
  }
}

export interface HeatCell {
  x: number;
  y: number;
  window: number;
  counts: number[];
  fraction: number;
  timestamp: number;
}

export interface MeshSize {
  width: number;
  height: number;
}

/** Busiest output link of the window, as a fraction of its capacity.
 *
 * The event carries the window start and is stamped at the window end,
 * so the window length needs no extra configuration.
 */
export function heatFraction(event: DebugEvent): HeatCell | null {
  const p = event.payload;
  const x = p.x, y = p.y, start = p.window_start, counts = p.counts;
  if (
    typeof x !== "number" || typeof y !== "number" ||
    typeof start !== "number" || !Array.isArray(counts) ||
    !counts.every((c) => typeof c === "number")
  ) {
    return null;
  }
  const window = event.timestamp - start;
  if (window <= 0) return null;
  const peak = counts.length ? Math.max(...counts) : 0;
  return {
    x, y, window,
    counts: counts as number[],
    fraction: peak / window,
    timestamp: event.timestamp,
  };
}

export function formatFraction(fraction: number): string {
  return fraction.toFixed(2);
}

export class ConsoleModel {
  modules: ModuleRow[] = [];
  log = new EventRing(LOG_CAPACITY);
  malformed = 0;
  heat = new Map<string, HeatCell>();
  status = new Map<number, string>();
  private highlights = new Set<number>();

  setModules(rows: unknown): boolean {
    if (!Array.isArray(rows) || !rows.every(isModuleRow)) return false;
    this.modules = rows;
    return true;
  }

  meshSize(): MeshSize {
    let width = 0;
    let height = 0;
    for (const row of this.modules) {
      if (row.type !== "NOC_STAT") continue;
      width = Math.max(width, (row.attach >> 8) + 1);
      height = Math.max(height, (row.attach & 0xff) + 1);
    }
    return { width, height };
  }

  /** Feed one raw WebSocket message; returns the event or null if malformed. */
  ingest(raw: unknown): DebugEvent | null {
    let parsed: unknown = raw;
    if (typeof raw === "string") {
      try {
        parsed = JSON.parse(raw);
      } catch {
        this.malformed += 1;
        return null;
      }
    }
    if (!isDebugEvent(parsed)) {
      this.malformed += 1;
      return null;
    }
    const event = parsed;
    this.log.push(event);
    if (event.type === "NOCSTAT") {
      const cell = heatFraction(event);
      if (cell !== null) this.heat.set(`${cell.x},${cell.y}`, cell);
    } else if (event.type === "TRIGGER") {
      const action = event.payload.action;
      this.status.set(
        event.module,
        action === "collect_off" ? "stopped" : "collecting",
      );
      this.highlights.add(event.module);
    }
    return event;
  }

  setStatus(module: number, status: string): void {
    this.status.set(module, status);
  }

  /** Modules whose rows should flash, cleared by the read. */
  takeHighlights(): number[] {
    const out = [...this.highlights];
    this.highlights.clear();
    return out;
  }
}
