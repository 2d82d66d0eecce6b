import { describe, expect, it } from "vitest";

import {
  ConsoleModel,
  EventRing,
  LOG_CAPACITY,
  formatFraction,
  heatFraction,
} from "../src/model.js";
import { itrace, mesh2x2Modules, nocstat, trigger } from "./fixtures.js";

describe("event ring", () => {
  it("keeps arrival order below capacity", () => {
    const ring = new EventRing(100);
    for (let i = 0; i < 50; i++) ring.push(itrace(1, i, 4 * i));
    expect(ring.length).toBe(50);
    expect(ring.toArray().map((e) => e.timestamp)).toEqual(
      [...Array(50).keys()],
    );
  });

  it("evicts exactly the oldest event past capacity", () => {
    const ring = new EventRing(LOG_CAPACITY);
    for (let i = 0; i < LOG_CAPACITY + 1; i++) ring.push(itrace(1, i, 0));
    expect(ring.length).toBe(LOG_CAPACITY);
    expect(ring.evicted).toBe(1);
    expect(ring.at(0)?.timestamp).toBe(1);
    expect(ring.at(LOG_CAPACITY - 1)?.timestamp).toBe(LOG_CAPACITY);
  });

  it("stays ordered under sustained overflow", () => {
    const ring = new EventRing(8);
    for (let i = 0; i < 100; i++) ring.push(itrace(1, i, 0));
    expect(ring.toArray().map((e) => e.timestamp)).toEqual(
      [92, 93, 94, 95, 96, 97, 98, 99],
    );
    expect(ring.evicted).toBe(92);
    expect(ring.tail(3).map((e) => e.timestamp)).toEqual([97, 98, 99]);
  });
});

describe("heatmap arithmetic", () => {
  it("computes east 200 over window 256 as 0.78", () => {
    const event = nocstat(6, 256, 1, 0, 0, [0, 200, 0, 0, 0]);
    const cell = heatFraction(event);
    expect(cell).not.toBeNull();
    expect(Math.abs(cell!.fraction - 0.78)).toBeLessThanOrEqual(0.005);
    expect(formatFraction(cell!.fraction)).toBe("0.78");
    expect(cell!.window).toBe(256);
  });

  it("uses the busiest output link", () => {
    const cell = heatFraction(nocstat(5, 128, 0, 0, 0, [3, 17, 64, 9, 2]));
    expect(cell!.fraction).toBe(0.5);
  });

  it("derives the window length from the timestamps", () => {
    const cell = heatFraction(nocstat(5, 320, 0, 0, 256, [0, 32, 0, 0, 0]));
    expect(cell!.window).toBe(64);
    expect(cell!.fraction).toBe(0.5);
  });

  it("rejects windows of zero length and bad payloads", () => {
    expect(heatFraction(nocstat(5, 0, 0, 0, 0, [1, 2, 3]))).toBeNull();
    expect(
      heatFraction({
        module: 5,
        timestamp: 256,
        type: "NOCSTAT",
        payload: { x: 0, y: 0, counts: "nope" },
      }),
    ).toBeNull();
  });
});

describe("console model", () => {
  it("accepts the module table and derives the mesh size", () => {
    const model = new ConsoleModel();
    expect(model.setModules(mesh2x2Modules())).toBe(true);
    expect(model.modules).toHaveLength(9);
    expect(model.meshSize()).toEqual({ width: 2, height: 2 });
  });

  it("rejects malformed module tables", () => {
    const model = new ConsoleModel();
    expect(model.setModules([{ module_id: "zero" }])).toBe(false);
    expect(model.modules).toHaveLength(0);
  });

  it("logs events in arrival order", () => {
    const model = new ConsoleModel();
    const events = [
      itrace(1, 5, 0x10),
      nocstat(5, 256, 0, 0, 0, [1, 2, 3, 4, 5]),
      itrace(2, 3, 0x40),
    ];
    for (const event of events) model.ingest(JSON.stringify(event));
    expect(model.log.toArray()).toEqual(events);
  });

  it("counts malformed messages without touching the log", () => {
    const model = new ConsoleModel();
    model.ingest(itrace(1, 1, 0));
    expect(model.ingest("this is not json")).toBeNull();
    expect(model.ingest('{"module": 1}')).toBeNull();
    expect(model.ingest(JSON.stringify({ module: 1, timestamp: "x" }))).toBeNull();
    expect(model.malformed).toBe(3);
    expect(model.log.length).toBe(1);
  });

  it("keeps only the latest window per router", () => {
    const model = new ConsoleModel();
    model.ingest(nocstat(6, 256, 1, 0, 0, [0, 200, 0, 0, 0]));
    model.ingest(nocstat(6, 512, 1, 0, 256, [0, 64, 0, 0, 0]));
    const cell = model.heat.get("1,0");
    expect(cell?.fraction).toBe(0.25);
    expect(cell?.timestamp).toBe(512);
    expect(model.heat.size).toBe(1);
  });

  it("marks trigger arrivals and flips the status", () => {
    const model = new ConsoleModel();
    model.ingest(trigger(3, 77, "collect_on"));
    expect(model.status.get(3)).toBe("collecting");
    expect(model.takeHighlights()).toEqual([3]);
    expect(model.takeHighlights()).toEqual([]);
    model.ingest(trigger(3, 99, "collect_off"));
    expect(model.status.get(3)).toBe("stopped");
  });

  it("evicts the oldest event at the ring bound", () => {
    const model = new ConsoleModel();
    for (let i = 0; i < LOG_CAPACITY; i++) model.ingest(itrace(1, i, 0));
    expect(model.log.length).toBe(LOG_CAPACITY);
    model.ingest(itrace(2, LOG_CAPACITY, 0));
    expect(model.log.length).toBe(LOG_CAPACITY);
    expect(model.log.at(0)?.timestamp).toBe(1);
    expect(model.log.at(LOG_CAPACITY - 1)?.module).toBe(2);
  });
});
