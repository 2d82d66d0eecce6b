/** DOM rendering. Every function rebuilds one region from the model, so
 * callers can batch them behind one animation frame without tracking
 * dirty state. No framework; the document owning the target elements is
 * the only dependency.
 */

import { ConsoleModel, formatFraction } from "./model.js";
import { DebugEvent, ModuleRow } from "./types.js";

export const LOG_ROWS_SHOWN = 200;

export function formatAttach(row: ModuleRow): string {
  if (row.type === "CORE_TRACE") return `tile ${row.attach}`;
  if (row.type === "NOC_STAT") {
    return `router (${row.attach >> 8}, ${row.attach & 0xff})`;
  }
  return "host";
}

export function formatEvent(event: DebugEvent): string {
  const head = `[${event.timestamp}] m${event.module} ${event.type}`;
  const p = event.payload;
  if (event.type === "ITRACE") {
    const pc = typeof p.pc === "number" ? p.pc : 0;
    return `${head} pc=0x${pc.toString(16)} run=${p.run}`;
  }
  if (event.type === "NOCSTAT") {
    return `${head} router=(${p.x}, ${p.y}) start=${p.window_start} counts=${JSON.stringify(p.counts)}`;
  }
  if (event.type === "TRIGGER") {
    return `${head} ${p.action} (${p.condition})`;
  }
  if (event.type === "FAULT") {
    const detail = typeof p.detail === "number" ? p.detail : 0;
    return `${head} code=${p.code} detail=0x${detail.toString(16)}`;
  }
  return `${head} ${JSON.stringify(p)}`;
}

export function renderModules(tbody: HTMLElement, model: ConsoleModel): void {
  const doc = tbody.ownerDocument;
  tbody.textContent = "";
  for (const row of model.modules) {
    const tr = doc.createElement("tr");
    tr.dataset.moduleId = String(row.module_id);
    const cells = [
      String(row.module_id),
      row.type,
      formatAttach(row),
      String(row.version),
      model.status.get(row.module_id) ?? "",
    ];
    for (const [i, text] of cells.entries()) {
      const td = doc.createElement("td");
      td.textContent = text;
      if (i === cells.length - 1) td.className = "status";
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
}

/** Flash the rows named by model.takeHighlights(). */
export function applyHighlights(tbody: HTMLElement, model: ConsoleModel): void {
  for (const moduleId of model.takeHighlights()) {
    const row = tbody.querySelector<HTMLElement>(
      `tr[data-module-id="${moduleId}"]`,
    );
    if (row === null) continue;
    row.classList.remove("flash");
    // restart the animation when the same row fires twice
    void row.offsetWidth;
    row.classList.add("flash");
  }
}

export function renderLog(list: HTMLElement, model: ConsoleModel): void {
  const doc = list.ownerDocument;
  list.textContent = "";
  for (const event of model.log.tail(LOG_ROWS_SHOWN)) {
    const li = doc.createElement("li");
    li.textContent = formatEvent(event);
    li.className = `event-${event.type.toLowerCase()}`;
    list.appendChild(li);
  }
  list.scrollTop = list.scrollHeight;
}

export function renderHeatmap(grid: HTMLElement, model: ConsoleModel): void {
  const doc = grid.ownerDocument;
  const { width, height } = model.meshSize();
  grid.textContent = "";
  grid.style.gridTemplateColumns = `repeat(${Math.max(width, 1)}, 3.5rem)`;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const cell = doc.createElement("div");
      cell.className = "heat-cell";
      cell.dataset.router = `${x},${y}`;
      const heat = model.heat.get(`${x},${y}`);
      if (heat === undefined) {
        cell.textContent = "-";
      } else {
        cell.textContent = formatFraction(heat.fraction);
        const alpha = Math.min(1, heat.fraction);
        cell.style.backgroundColor = `rgba(214, 69, 46, ${alpha.toFixed(3)})`;
        cell.title =
          `router (${x}, ${y}) window ${heat.window} counts ` +
          heat.counts.join("/");
      }
      grid.appendChild(cell);
    }
  }
}

export function renderCounters(el: HTMLElement, model: ConsoleModel): void {
  const parts = [`events ${model.log.length + model.log.evicted}`];
  if (model.log.evicted > 0) parts.push(`evicted ${model.log.evicted}`);
  if (model.malformed > 0) parts.push(`malformed ${model.malformed}`);
  el.textContent = parts.join(" | ");
}

export function renderBanner(el: HTMLElement, message: string | null): void {
  el.textContent = message ?? "";
  el.style.display = message === null ? "none" : "block";
}
