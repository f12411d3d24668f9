/**
 * Browser bootstrap: start a mission, render the event stream, forward
 * operator input. All view content comes from the reducer; this file only
 * wires the DOM.
 */

import { approvePlan, createSession, getSession, sendFollowup } from "./api.js";
import { renderDashboard } from "./render.js";
import { applyEvent, initialViewState, type ViewState } from "./state.js";
import { streamEvents } from "./sse.js";
import type { Overlays, SessionSummary } from "./types.js";

const baseUrl = window.location.origin.startsWith("file")
  ? "http://127.0.0.1:8080"
  : window.location.origin;

let state: ViewState = initialViewState();
let summary: SessionSummary | null = null;
let overlays: Overlays | undefined;
let abort: AbortController | null = null;

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function redraw(): void {
  $("dashboard").innerHTML = renderDashboard(state, overlays);
  const approve = $("approve") as HTMLButtonElement;
  approve.disabled = !summary || summary.state !== "awaiting_approval";
  $("session-state").textContent = summary
    ? `${summary.id} · ${summary.state}${state.outcome ? ` · ${state.outcome}` : ""}`
    : "no session";
}

async function pollSummary(): Promise<void> {
  if (!summary) return;
  try {
    summary = await getSession(baseUrl, summary.id);
  } catch {
    return;
  }
  redraw();
  if (!state.done) {
    setTimeout(pollSummary, 400);
  }
}

async function start(): Promise<void> {
  const spec = ($("spec") as HTMLTextAreaElement).value.trim();
  const scenario = ($("scenario") as HTMLInputElement).value.trim();
  const stepMode = ($("step-mode") as HTMLInputElement).checked;
  if (!spec || !scenario) {
    $("error").textContent = "mission text and scenario id are required";
    return;
  }
  $("error").textContent = "";
  abort?.abort();
  state = initialViewState();
  try {
    summary = await createSession(baseUrl, spec, scenario, stepMode);
  } catch (err) {
    $("error").textContent = String(err instanceof Error ? err.message : err);
    return;
  }
  overlays = summary.overlays;
  redraw();
  void pollSummary();
  abort = new AbortController();
  void streamEvents(
    baseUrl,
    summary.id,
    (event) => {
      state = applyEvent(state, event);
      redraw();
    },
    { signal: abort.signal },
  );
}

async function onSend(): Promise<void> {
  if (!summary) return;
  const box = $("message") as HTMLInputElement;
  const text = box.value.trim();
  if (!text) return;
  try {
    await sendFollowup(baseUrl, summary.id, text);
    box.value = "";
  } catch (err) {
    $("error").textContent = String(err instanceof Error ? err.message : err);
  }
}

async function onApprove(): Promise<void> {
  if (!summary) return;
  try {
    await approvePlan(baseUrl, summary.id);
  } catch (err) {
    $("error").textContent = String(err instanceof Error ? err.message : err);
  }
}

window.addEventListener("DOMContentLoaded", () => {
  $("start").addEventListener("click", () => void start());
  $("send").addEventListener("click", () => void onSend());
  $("approve").addEventListener("click", () => void onApprove());
  ($("message") as HTMLInputElement).addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") void onSend();
  });
  redraw();
});
