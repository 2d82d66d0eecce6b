/** Typed client for the console's HTTP API, with client-side validation.
 *
 * Every request body and response shape matches the server exactly. Form
 * arguments are validated before any request leaves the browser; server
 * rejections (400/404/409) come back as {ok: false, error} for inline
 * display rather than exceptions.
 */

import { ModuleRow, TriggerRequest, isModuleRow } from "./types.js";

export type ApiResult<T> = { ok: true; value: T } | { ok: false; error: string };

export interface ValidatedArgument {
  value?: number;
  error?: string;
}

/** Parse and range-check a trigger argument for the given condition. */
export function validateArgument(
  condition: string,
  text: string,
): ValidatedArgument {
  const trimmed = text.trim();
  if (trimmed === "") return { error: "argument is required" };
  if (condition === "pc_equals") {
    if (!/^(0x)?[0-9a-fA-F]+$/.test(trimmed)) {
      return { error: "pc must be a hex address like 0x40" };
    }
    const value = parseInt(trimmed, 16);
    if (!Number.isSafeInteger(value) || value > 0xffffffff) {
      return { error: "pc outside the 32-bit range" };
    }
    return { value };
  }
  if (condition === "link_load_above") {
    const value = Number(trimmed);
    if (!Number.isFinite(value)) return { error: "fraction must be a number" };
    if (value < 0 || value >= 1) {
      return { error: "fraction must be in [0, 1)" };
    }
    return { value };
  }
  if (condition === "event_count_reaches") {
    if (!/^[0-9]+$/.test(trimmed)) {
      return { error: "count must be a whole number" };
    }
    const value = parseInt(trimmed, 10);
    if (value < 1) return { error: "count must be at least 1" };
    return { value };
  }
  return { error: `unknown condition ${condition}` };
}

async function errorOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as Record<string, unknown>;
    if (typeof body.error === "string") return body.error;
  } catch {
    // fall through to the status line
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  private fetchFn: typeof fetch;

  constructor(readonly base: string = "", fetchFn?: typeof fetch) {
    this.fetchFn = fetchFn ?? ((...args) => fetch(...args));
  }

  async modules(): Promise<ModuleRow[]> {
    const response = await this.fetchFn(`${this.base}/api/modules`);
    if (!response.ok) throw new Error(await errorOf(response));
    const rows: unknown = await response.json();
    if (!Array.isArray(rows) || !rows.every(isModuleRow)) {
      throw new Error("module table has an unexpected shape");
    }
    return rows;
  }

  private async post(
    path: string,
    body: unknown,
  ): Promise<ApiResult<Record<string, unknown>>> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) return { ok: false, error: await errorOf(response) };
    return { ok: true, value: (await response.json()) as Record<string, unknown> };
  }

  postTrigger(spec: TriggerRequest): Promise<ApiResult<Record<string, unknown>>> {
    return this.post("/api/triggers", spec);
  }

  postCollection(
    module: number,
    enabled: boolean,
  ): Promise<ApiResult<Record<string, unknown>>> {
    return this.post("/api/collection", { module, enabled });
  }

  startRun(): Promise<ApiResult<Record<string, unknown>>> {
    return this.post("/api/run", {});
  }
}

export interface BackoffOptions {
  baseMs?: number;
  capMs?: number;
  onError?: (error: unknown, nextDelayMs: number) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Retry fn with exponential backoff until it resolves. */
export async function withBackoff<T>(
  fn: () => Promise<T>,
  options: BackoffOptions = {},
): Promise<T> {
  const base = options.baseMs ?? 500;
  const cap = options.capMs ?? 5000;
  const sleep = options.sleep ?? defaultSleep;
  let delay = base;
  for (;;) {
    try {
      return await fn();
    } catch (error) {
      options.onError?.(error, delay);
      await sleep(delay);
      delay = Math.min(delay * 2, cap);
    }
  }
}
