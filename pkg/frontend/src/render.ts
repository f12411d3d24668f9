/**
 * Pure string renderers: ViewState in, markup out. Browser code assigns the
 * result to innerHTML; tests assert on the strings directly.
 */

import type { ViewState } from "./state.js";
import type { Overlays } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

function mapBounds(state: ViewState, overlays?: Overlays): Bounds {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const n of Object.values(state.nodes)) {
    xs.push(n.x);
    ys.push(n.y);
  }
  if (overlays) {
    for (const [x, y, r] of overlays.comm_sites) {
      xs.push(x - r, x + r);
      ys.push(y - r, y + r);
    }
    for (const [x, y] of overlays.geofence) {
      xs.push(x);
      ys.push(y);
    }
  }
  if (state.robotPose) {
    xs.push(state.robotPose[0]);
    ys.push(state.robotPose[1]);
  }
  if (!xs.length) {
    return { minX: -10, minY: -10, maxX: 10, maxY: 10 };
  }
  const pad = 12;
  return {
    minX: Math.min(...xs) - pad,
    minY: Math.min(...ys) - pad,
    maxX: Math.max(...xs) + pad,
    maxY: Math.max(...ys) + pad,
  };
}

/** World coordinates have y up; SVG has y down. */
function tx(b: Bounds, x: number): number {
  return x - b.minX;
}

function ty(b: Bounds, y: number): number {
  return b.maxY - y;
}

export function renderMap(state: ViewState, overlays?: Overlays): string {
  const b = mapBounds(state, overlays);
  const w = b.maxX - b.minX;
  const h = b.maxY - b.minY;
  const parts: string[] = [
    `<svg class="map" viewBox="0 0 ${w.toFixed(1)} ${h.toFixed(1)}" xmlns="http://www.w3.org/2000/svg">`,
  ];
  if (overlays) {
    for (const [x, y, r] of overlays.comm_sites) {
      parts.push(
        `<circle class="comm" cx="${tx(b, x).toFixed(1)}" cy="${ty(b, y).toFixed(1)}" r="${r.toFixed(1)}"/>`,
      );
    }
    if (overlays.geofence.length >= 3) {
      const pts = overlays.geofence
        .map(([x, y]) => `${tx(b, x).toFixed(1)},${ty(b, y).toFixed(1)}`)
        .join(" ");
      parts.push(`<polygon class="geofence" points="${pts}"/>`);
    }
    for (const [x, y] of overlays.waypoints) {
      parts.push(
        `<circle class="waypoint" cx="${tx(b, x).toFixed(1)}" cy="${ty(b, y).toFixed(1)}" r="1.4"/>`,
      );
    }
  }
  for (const e of state.edges) {
    const na = state.nodes[e.a];
    const nb = state.nodes[e.b];
    if (!na || !nb) continue;
    parts.push(
      `<line class="edge ${e.kind}" x1="${tx(b, na.x).toFixed(1)}" y1="${ty(b, na.y).toFixed(1)}" ` +
        `x2="${tx(b, nb.x).toFixed(1)}" y2="${ty(b, nb.y).toFixed(1)}"/>`,
    );
  }
  const ids = Object.keys(state.nodes).sort();
  for (const id of ids) {
    const n = state.nodes[id];
    const x = tx(b, n.x);
    const y = ty(b, n.y);
    if (n.kind === "region") {
      parts.push(
        `<circle class="node region" data-id="${escapeHtml(n.id)}" cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="2.6"/>`,
      );
    } else {
      parts.push(
        `<rect class="node object" data-id="${escapeHtml(n.id)}" x="${(x - 1.8).toFixed(1)}" y="${(y - 1.8).toFixed(1)}" width="3.6" height="3.6"/>`,
      );
    }
    parts.push(
      `<text class="label" x="${(x + 3).toFixed(1)}" y="${(y - 2).toFixed(1)}">${escapeHtml(n.id)}</text>`,
    );
  }
  if (state.robotPose) {
    const [rx, ry] = state.robotPose;
    parts.push(
      `<circle class="robot" cx="${tx(b, rx).toFixed(1)}" cy="${ty(b, ry).toFixed(1)}" r="2.0"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

export function renderPlanPanel(state: ViewState): string {
  if (!state.plan) {
    return `<div class="plan empty">no plan proposed yet</div>`;
  }
  const items = state.plan.tasks
    .map((t) => {
      const args = escapeHtml(JSON.stringify(t.args));
      return `<li class="task ${t.status}"><code>${escapeHtml(t.behavior)}</code> ${args} <span class="status">${t.status}</span></li>`;
    })
    .join("");
  const reasoning = state.plan.reasoning
    ? `<p class="reasoning">${escapeHtml(state.plan.reasoning)}</p>`
    : "";
  const outcome = state.done
    ? `<p class="outcome ${state.outcome === "success" ? "ok" : "bad"}">mission ${escapeHtml(state.outcome ?? "")}</p>`
    : "";
  return `<div class="plan">${reasoning}<ol>${items}</ol>${outcome}</div>`;
}

export function renderFeedbackPanel(state: ViewState): string {
  if (!state.feedback.length) {
    return `<div class="feedback empty">no validation feedback</div>`;
  }
  const lines = state.feedback.map((l) => escapeHtml(l)).join("\n");
  return `<pre class="feedback">${lines}</pre>`;
}

export function renderTicker(state: ViewState): string {
  const items = state.ticker.map((t) => `<li>${escapeHtml(t)}</li>`).join("");
  const ask = state.clarification
    ? `<p class="clarify">awaiting operator: ${escapeHtml(state.clarification)}</p>`
    : "";
  return `<div class="ticker">${ask}<ul>${items}</ul></div>`;
}

export function renderDashboard(state: ViewState, overlays?: Overlays): string {
  return (
    `<section id="map-pane">${renderMap(state, overlays)}</section>` +
    `<section id="plan-pane">${renderPlanPanel(state)}</section>` +
    `<section id="feedback-pane">${renderFeedbackPanel(state)}</section>` +
    `<section id="ticker-pane">${renderTicker(state)}</section>`
  );
}
