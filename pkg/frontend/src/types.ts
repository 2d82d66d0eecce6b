/** Wire shapes of the HTTP/WebSocket API, mirrored field for field. */

export interface ModuleRow {
  module_id: number;
  type: string;
  version: number;
  attach: number;
}

export interface DebugEvent {
  module: number;
  timestamp: number;
  type: string;
  payload: Record<string, unknown>;
}

export interface TriggerRequest {
  module: number;
  condition: string;
  argument: number;
  action: string;
  scope: string;
}

export const CONDITIONS = [
  "pc_equals",
  "event_count_reaches",
  "link_load_above",
] as const;

export const ACTIONS = ["collect_on", "collect_off"] as const;

export const SCOPES = ["local", "global"] as const;

export function isModuleRow(raw: unknown): raw is ModuleRow {
  if (typeof raw !== "object" || raw === null) return false;
  const row = raw as Record<string, unknown>;
  return (
    typeof row.module_id === "number" &&
    typeof row.type === "string" &&
    typeof row.version === "number" &&
    typeof row.attach === "number"
  );
}

export function isDebugEvent(raw: unknown): raw is DebugEvent {
  if (typeof raw !== "object" || raw === null) return false;
  const event = raw as Record<string, unknown>;
  return (
    typeof event.module === "number" &&
    typeof event.timestamp === "number" &&
    typeof event.type === "string" &&
    typeof event.payload === "object" &&
    event.payload !== null
  );
}
