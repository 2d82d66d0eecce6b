import { describe, expect, it, vi } from "vitest";

import { ApiClient, validateArgument, withBackoff } from "../src/api.js";
import { mesh2x2Modules } from "./fixtures.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("argument validation", () => {
  it("accepts hex program counters", () => {
    expect(validateArgument("pc_equals", "0x40")).toEqual({ value: 0x40 });
    expect(validateArgument("pc_equals", "DEAD")).toEqual({ value: 0xdead });
  });

  it("rejects non-hex and out-of-range pcs", () => {
    expect(validateArgument("pc_equals", "quux").error).toMatch(/hex/);
    expect(validateArgument("pc_equals", "0x1ffffffff").error).toMatch(/32-bit/);
    expect(validateArgument("pc_equals", "").error).toMatch(/required/);
  });

  it("accepts fractions in [0, 1) and rejects the rest", () => {
    expect(validateArgument("link_load_above", "0.75")).toEqual({ value: 0.75 });
    expect(validateArgument("link_load_above", "0")).toEqual({ value: 0 });
    expect(validateArgument("link_load_above", "1.5").error).toMatch(/\[0, 1\)/);
    expect(validateArgument("link_load_above", "1").error).toMatch(/\[0, 1\)/);
    expect(validateArgument("link_load_above", "-0.1").error).toMatch(/\[0, 1\)/);
  });

  it("accepts whole event counts only", () => {
    expect(validateArgument("event_count_reaches", "12")).toEqual({ value: 12 });
    expect(validateArgument("event_count_reaches", "0").error).toMatch(/least 1/);
    expect(validateArgument("event_count_reaches", "1.5").error).toMatch(/whole/);
  });
});

describe("api client", () => {
  it("fetches and checks the module table", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(mesh2x2Modules()));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const rows = await client.modules();
    expect(rows).toHaveLength(9);
    expect(fetchFn).toHaveBeenCalledWith("/api/modules");
  });

  it("rejects module tables with the wrong shape", async () => {
    const fetchFn = vi.fn(async () => jsonResponse([{ nope: 1 }]));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    await expect(client.modules()).rejects.toThrow(/unexpected shape/);
  });

  it("posts the exact trigger body and reads the ack", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse({ status: "armed", module: 1 }),
    );
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const spec = {
      module: 1,
      condition: "pc_equals",
      argument: 0x40,
      action: "collect_on",
      scope: "local",
    };
    const result = await client.postTrigger(spec);
    expect(result).toEqual({ ok: true, value: { status: "armed", module: 1 } });
    const [url, init] = fetchFn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/api/triggers");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual(spec);
  });

  it("surfaces server rejections inline instead of throwing", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse({ error: "trigger condition pc_equals needs a core module" }, 400),
    );
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const result = await client.postTrigger({
      module: 5,
      condition: "pc_equals",
      argument: 0,
      action: "collect_on",
      scope: "local",
    });
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.error).toMatch(/needs a core module/);
  });

  it("posts collection toggles and the run request", async () => {
    const fetchFn = vi.fn(async (url: string) => {
      if (url.endsWith("/api/collection")) {
        return jsonResponse({ status: "ok", module: 2, enabled: true });
      }
      return jsonResponse({ status: "running" });
    });
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    expect((await client.postCollection(2, true)).ok).toBe(true);
    expect(await client.startRun()).toEqual({
      ok: true,
      value: { status: "running" },
    });
  });
});

describe("backoff", () => {
  it("retries with doubling delays until success", async () => {
    const delays: number[] = [];
    let attempts = 0;
    const result = await withBackoff(
      async () => {
        attempts += 1;
        if (attempts < 4) throw new Error("connection refused");
        return "up";
      },
      {
        baseMs: 500,
        capMs: 5000,
        onError: (_error, delay) => delays.push(delay),
        sleep: async () => {},
      },
    );
    expect(result).toBe("up");
    expect(attempts).toBe(4);
    expect(delays).toEqual([500, 1000, 2000]);
  });

  it("caps the delay", async () => {
    const delays: number[] = [];
    let attempts = 0;
    await withBackoff(
      async () => {
        attempts += 1;
        if (attempts < 7) throw new Error("down");
        return null;
      },
      {
        baseMs: 1000,
        capMs: 3000,
        onError: (_error, delay) => delays.push(delay),
        sleep: async () => {},
      },
    );
    expect(delays).toEqual([1000, 2000, 3000, 3000, 3000, 3000]);
  });
});
