import { describe, expect, it } from "vitest";

import { ConsoleModel } from "../src/model.js";
import { DebugEvent } from "../src/types.js";
import { itrace, nocstat, trigger } from "./fixtures.js";

/** In-memory stand-in for the event WebSocket endpoint.
 *
 * Mirrors the server contract: every subscriber first receives the full
 * backlog from index 0, then live events in publish order, and the
 * stream closes once the end of the run has been announced and the
 * subscriber has caught up.
 */
class FakeEventStream {
  private events: string[] = [];
  private eof = false;
  private clients: { cursor: number; sink: StreamClient }[] = [];

  subscribe(sink: StreamClient): void {
    const client = { cursor: 0, sink };
    this.clients.push(client);
    this.pump(client);
  }

  publish(event: DebugEvent | string): void {
    if (this.eof) throw new Error("publish after eof");
    this.events.push(
      typeof event === "string" ? event : JSON.stringify(event),
    );
    for (const client of this.clients) this.pump(client);
  }

  finish(): void {
    this.eof = true;
    for (const client of this.clients) this.pump(client);
  }

  private pump(client: { cursor: number; sink: StreamClient }): void {
    while (client.cursor < this.events.length) {
      client.sink.onmessage(this.events[client.cursor]);
      client.cursor += 1;
    }
    if (this.eof) client.sink.onclose();
  }
}

interface StreamClient {
  onmessage: (data: string) => void;
  onclose: () => void;
}

function makeClient(model: ConsoleModel): StreamClient & { closed: boolean } {
  const client = {
    closed: false,
    onmessage: (data: string) => void model.ingest(data),
    onclose: () => {
      client.closed = true;
    },
  };
  return client;
}

function sampleRun(): DebugEvent[] {
  const events: DebugEvent[] = [];
  for (let i = 0; i < 40; i++) {
    events.push(itrace(1 + (i % 4), 10 + i, 4 * i, i % 3));
    if (i % 8 === 7) {
      events.push(nocstat(5 + (i % 4), 256 * (1 + (i >> 3)), i % 2, (i >> 1) % 2,
        256 * (i >> 3), [i, 2 * i, 3, 0, 1]));
    }
  }
  events.push(trigger(2, 300, "collect_off"));
  return events;
}

describe("event stream fan-out", () => {
  it("delivers identical sequences to clients joining at different times", () => {
    const stream = new FakeEventStream();
    const early = new ConsoleModel();
    const late = new ConsoleModel();
    const earlyClient = makeClient(early);
    stream.subscribe(earlyClient);

    const events = sampleRun();
    for (const [index, event] of events.entries()) {
      stream.publish(event);
      if (index === 25) stream.subscribe(makeClient(late));
    }
    stream.finish();

    expect(early.log.length).toBe(events.length);
    expect(late.log.toArray()).toEqual(early.log.toArray());
    expect(late.log.toArray()).toEqual(events);
  });

  it("preserves on-screen order exactly as arrival order", () => {
    const stream = new FakeEventStream();
    const model = new ConsoleModel();
    stream.subscribe(makeClient(model));
    const timestamps = [50, 10, 90, 20];
    for (const ts of timestamps) stream.publish(itrace(1, ts, 0));
    stream.finish();
    expect(model.log.toArray().map((e) => e.timestamp)).toEqual(timestamps);
  });

  it("closes every client at end of stream", () => {
    const stream = new FakeEventStream();
    const a = makeClient(new ConsoleModel());
    const b = makeClient(new ConsoleModel());
    stream.subscribe(a);
    stream.publish(itrace(1, 1, 0));
    stream.finish();
    stream.subscribe(b);
    expect(a.closed).toBe(true);
    expect(b.closed).toBe(true);
  });

  it("keeps malformed frames out of the log on every client alike", () => {
    const stream = new FakeEventStream();
    const one = new ConsoleModel();
    const two = new ConsoleModel();
    stream.subscribe(makeClient(one));
    stream.publish(itrace(1, 1, 0));
    stream.publish("{broken");
    stream.subscribe(makeClient(two));
    stream.publish(itrace(2, 2, 4));
    stream.finish();
    expect(one.log.toArray()).toEqual(two.log.toArray());
    expect(one.malformed).toBe(1);
    expect(two.malformed).toBe(1);
    expect(one.log.length).toBe(2);
  });
});
