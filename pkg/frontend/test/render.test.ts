// @vitest-environment happy-dom

import { beforeEach, describe, expect, it } from "vitest";

import { ConsoleModel } from "../src/model.js";
import {
  LOG_ROWS_SHOWN,
  applyHighlights,
  formatEvent,
  renderBanner,
  renderCounters,
  renderHeatmap,
  renderLog,
  renderModules,
} from "../src/render.js";
import { itrace, mesh2x2Modules, nocstat, trigger } from "./fixtures.js";

function element(tag: string): HTMLElement {
  const el = document.createElement(tag);
  document.body.appendChild(el);
  return el;
}

beforeEach(() => {
  document.body.textContent = "";
});

describe("module table", () => {
  it("renders one row per enumerated module (9 on a 2x2)", () => {
    const model = new ConsoleModel();
    model.setModules(mesh2x2Modules());
    const tbody = element("tbody");
    renderModules(tbody, model);
    const rows = tbody.querySelectorAll("tr");
    expect(rows).toHaveLength(9);
    const first = rows[0].querySelectorAll("td");
    expect([...first].map((td) => td.textContent)).toEqual(
      ["0", "EXTIF", "host", "1", ""],
    );
    const core = rows[2].querySelectorAll("td");
    expect(core[1].textContent).toBe("CORE_TRACE");
    expect(core[2].textContent).toBe("tile 1");
    const router = rows[6].querySelectorAll("td");
    expect(router[1].textContent).toBe("NOC_STAT");
    expect(router[2].textContent).toBe("router (1, 0)");
  });

  it("shows statuses and flashes triggered rows", () => {
    const model = new ConsoleModel();
    model.setModules(mesh2x2Modules());
    model.setStatus(1, "armed");
    model.ingest(trigger(3, 50, "collect_on"));
    const tbody = element("tbody");
    renderModules(tbody, model);
    const statusOf = (id: number) =>
      tbody.querySelector(`tr[data-module-id="${id}"] td.status`)?.textContent;
    expect(statusOf(1)).toBe("armed");
    expect(statusOf(3)).toBe("collecting");
    applyHighlights(tbody, model);
    const flashed = tbody.querySelector('tr[data-module-id="3"]');
    expect(flashed?.classList.contains("flash")).toBe(true);
    expect(
      tbody.querySelector('tr[data-module-id="1"]')?.classList.contains("flash"),
    ).toBe(false);
  });
});

describe("event log", () => {
  it("renders rows in arrival order with type formatting", () => {
    const model = new ConsoleModel();
    model.ingest(itrace(1, 24, 0x8, 3));
    model.ingest(trigger(3, 30, "collect_off", "link_load_above"));
    const list = element("ul");
    renderLog(list, model);
    const items = list.querySelectorAll("li");
    expect(items).toHaveLength(2);
    expect(items[0].textContent).toBe("[24] m1 ITRACE pc=0x8 run=3");
    expect(items[1].textContent).toBe(
      "[30] m3 TRIGGER collect_off (link_load_above)",
    );
    expect(items[1].className).toBe("event-trigger");
  });

  it("shows only the newest rows of a long log", () => {
    const model = new ConsoleModel();
    for (let i = 0; i < LOG_ROWS_SHOWN + 50; i++) {
      model.ingest(itrace(1, i, 4 * i));
    }
    const list = element("ul");
    renderLog(list, model);
    const items = list.querySelectorAll("li");
    expect(items).toHaveLength(LOG_ROWS_SHOWN);
    expect(items[0].textContent).toContain("[50]");
  });

  it("formats statistics and fault events readably", () => {
    expect(formatEvent(nocstat(6, 256, 1, 0, 0, [0, 200, 0, 0, 0]))).toBe(
      "[256] m6 NOCSTAT router=(1, 0) start=0 counts=[0,200,0,0,0]",
    );
    expect(
      formatEvent({
        module: 2,
        timestamp: 9,
        type: "FAULT",
        payload: { code: 5, detail: 0x1f },
      }),
    ).toBe("[9] m2 FAULT code=5 detail=0x1f");
  });
});

describe("heatmap", () => {
  it("renders the east 200 window as cell value 0.78", () => {
    const model = new ConsoleModel();
    model.setModules(mesh2x2Modules());
    model.ingest(nocstat(6, 256, 1, 0, 0, [0, 200, 0, 0, 0]));
    const grid = element("div");
    renderHeatmap(grid, model);
    const cells = grid.querySelectorAll<HTMLElement>(".heat-cell");
    expect(cells).toHaveLength(4);
    const hot = grid.querySelector<HTMLElement>('[data-router="1,0"]');
    expect(hot?.textContent).toBe("0.78");
    const value = Number(hot?.textContent);
    expect(Math.abs(value - 0.78)).toBeLessThanOrEqual(0.005);
    expect(grid.querySelector('[data-router="0,1"]')?.textContent).toBe("-");
  });
});

describe("chrome", () => {
  it("renders counters and the connection banner", () => {
    const model = new ConsoleModel();
    model.ingest(itrace(1, 1, 0));
    model.ingest("garbage");
    const countersEl = element("span");
    renderCounters(countersEl, model);
    expect(countersEl.textContent).toBe("events 1 | malformed 1");

    const bannerEl = element("div");
    renderBanner(bannerEl, "cannot reach the debug daemon");
    expect(bannerEl.style.display).toBe("block");
    renderBanner(bannerEl, null);
    expect(bannerEl.style.display).toBe("none");
    expect(bannerEl.textContent).toBe("");
  });
});
