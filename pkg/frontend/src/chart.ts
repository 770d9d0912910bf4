import type { DisplayPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 560;
const BAR_AREA = 150;
const LABEL_AREA = 46;

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

/**
 * Grouped-bars chart. Bars appear in exactly the order the display payload
 * lists them (already sorted by the engine); heights are value / max(|value|),
 * the one piece of presentation scaling the UI performs.
 */
export function renderBarChart(display: DisplayPayload, diverged: boolean | null): SVGSVGElement {
  const bars = display.groups;
  const svg = svgEl("svg", {
    width: WIDTH,
    height: BAR_AREA + LABEL_AREA,
    viewBox: `0 0 ${WIDTH} ${BAR_AREA + LABEL_AREA}`,
    class: "bar-chart",
    role: "img",
  });
  const peak = Math.max(...bars.map(([, value]) => Math.abs(value)), 0);
  const slot = WIDTH / Math.max(bars.length, 1);
  const barWidth = Math.min(slot * 0.72, 64);

  bars.forEach(([key, value], index) => {
    const scale = peak > 0 ? Math.abs(value) / peak : 0;
    const height = Math.max(scale * BAR_AREA, 1);
    const x = index * slot + (slot - barWidth) / 2;
    const rect = svgEl("rect", {
      x,
      y: BAR_AREA - height,
      width: barWidth,
      height,
      class: index === 0 ? "bar bar-top" : "bar",
      "data-key": key,
      "data-value": value,
    });
    rect.appendChild(svgEl("title", {})).textContent = `${key}: ${String(value)}`;
    svg.appendChild(rect);

    const label = svgEl("text", {
      x: index * slot + slot / 2,
      y: BAR_AREA + 14,
      "text-anchor": "middle",
      class: "bar-label",
    });
    label.textContent = key;
    svg.appendChild(label);

    const valueText = svgEl("text", {
      x: index * slot + slot / 2,
      y: BAR_AREA + 30,
      "text-anchor": "middle",
      class: "bar-value",
    });
    valueText.textContent = String(value);
    svg.appendChild(valueText);
  });

  if (diverged) {
    const marker = svgEl("text", {
      x: WIDTH - 6,
      y: 16,
      "text-anchor": "end",
      class: "diverged-marker",
    });
    marker.textContent = "≠ full data";
    svg.appendChild(marker);
  }
  return svg;
}

export function chartBarOrder(svg: SVGSVGElement): string[] {
  return Array.from(svg.querySelectorAll("rect.bar, rect.bar-top, rect")).map(
    (rect) => rect.getAttribute("data-key") ?? "",
  );
}

/** Filtered views render as a plain table of the top rows. */
export function renderRowTable(display: DisplayPayload, columns: string[]): HTMLTableElement {
  const table = document.createElement("table");
  table.className = "row-table";
  const head = table.createTHead().insertRow();
  for (const column of columns) {
    const cell = document.createElement("th");
    cell.textContent = column;
    head.appendChild(cell);
  }
  const body = table.createTBody();
  for (const row of display.top_rows) {
    const tr = body.insertRow();
    for (const value of row) {
      tr.insertCell().textContent = value;
    }
  }
  return table;
}
