/** Browser entry point: wires the API client, WebSocket stream, view
 * model, and renderers to the static page. UI updates are batched per
 * animation frame so a dense event stream cannot outrun the DOM.
 */

import { ApiClient, validateArgument, withBackoff } from "./api.js";
import { ConsoleModel } from "./model.js";
import {
  applyHighlights,
  renderBanner,
  renderCounters,
  renderHeatmap,
  renderLog,
  renderModules,
} from "./render.js";
import { ACTIONS, CONDITIONS, SCOPES, TriggerRequest } from "./types.js";

function grab<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

const banner = grab<HTMLElement>("banner");
const moduleBody = grab<HTMLElement>("module-rows");
const logList = grab<HTMLElement>("event-log");
const heatGrid = grab<HTMLElement>("heatmap");
const counters = grab<HTMLElement>("counters");
const formError = grab<HTMLElement>("form-error");
const runButton = grab<HTMLButtonElement>("run-button");
const runState = grab<HTMLElement>("run-state");
const triggerForm = grab<HTMLFormElement>("trigger-form");
const moduleSelect = grab<HTMLSelectElement>("trigger-module");
const conditionSelect = grab<HTMLSelectElement>("trigger-condition");
const argumentInput = grab<HTMLInputElement>("trigger-argument");
const actionSelect = grab<HTMLSelectElement>("trigger-action");
const scopeSelect = grab<HTMLSelectElement>("trigger-scope");
const collectAll = grab<HTMLButtonElement>("collect-all");
const collectNone = grab<HTMLButtonElement>("collect-none");

const api = new ApiClient("");
const model = new ConsoleModel();

let frameQueued = false;
function scheduleRender(): void {
  if (frameQueued) return;
  frameQueued = true;
  requestAnimationFrame(() => {
    frameQueued = false;
    renderModules(moduleBody, model);
    applyHighlights(moduleBody, model);
    renderLog(logList, model);
    renderHeatmap(heatGrid, model);
    renderCounters(counters, model);
  });
}

function fillSelect(select: HTMLSelectElement, values: readonly string[]): void {
  for (const value of values) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    select.appendChild(option);
  }
}

fillSelect(conditionSelect, CONDITIONS);
fillSelect(actionSelect, ACTIONS);
fillSelect(scopeSelect, SCOPES);

function fillModuleSelect(): void {
  moduleSelect.textContent = "";
  for (const row of model.modules) {
    if (row.type === "EXTIF") continue;
    const option = document.createElement("option");
    option.value = String(row.module_id);
    option.textContent = `${row.module_id}: ${row.type}`;
    moduleSelect.appendChild(option);
  }
}

async function connect(): Promise<void> {
  const rows = await withBackoff(() => api.modules(), {
    onError: (error) => {
      renderBanner(
        banner,
        `cannot reach the debug daemon: ${String(error)} (retrying)`,
      );
    },
  });
  renderBanner(banner, null);
  model.setModules(rows);
  fillModuleSelect();
  scheduleRender();
}

triggerForm.addEventListener("submit", (submit) => {
  submit.preventDefault();
  formError.textContent = "";
  const condition = conditionSelect.value;
  const checked = validateArgument(condition, argumentInput.value);
  if (checked.error !== undefined || checked.value === undefined) {
    formError.textContent = checked.error ?? "bad argument";
    return;
  }
  const spec: TriggerRequest = {
    module: Number(moduleSelect.value),
    condition,
    argument: checked.value,
    action: actionSelect.value,
    scope: scopeSelect.value,
  };
  void api.postTrigger(spec).then((result) => {
    if (!result.ok) {
      formError.textContent = result.error;
      return;
    }
    model.setStatus(spec.module, String(result.value.status ?? "armed"));
    scheduleRender();
  });
});

async function setCollectionForAll(enabled: boolean): Promise<void> {
  for (const row of model.modules) {
    if (row.type === "EXTIF") continue;
    const result = await api.postCollection(row.module_id, enabled);
    if (!result.ok) {
      formError.textContent = result.error;
      continue;
    }
    model.setStatus(row.module_id, enabled ? "collecting" : "stopped");
  }
  scheduleRender();
}

collectAll.addEventListener("click", () => void setCollectionForAll(true));
collectNone.addEventListener("click", () => void setCollectionForAll(false));

function streamEvents(): void {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const socket = new WebSocket(`${scheme}://${location.host}/ws/events`);
  socket.onmessage = (message) => {
    model.ingest(message.data);
    scheduleRender();
  };
  socket.onclose = () => {
    runState.textContent = "stream ended";
    scheduleRender();
  };
}

runButton.addEventListener("click", () => {
  void api.startRun().then((result) => {
    if (!result.ok) {
      formError.textContent = result.error;
      return;
    }
    runButton.disabled = true;
    runState.textContent = "running";
    streamEvents();
  });
});

void connect();
