/** Thin wrappers over the mission-control HTTP endpoints. */

import type { SessionSummary } from "./types.js";

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!resp.ok) {
    let detail = `${resp.status}`;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status code
    }
    throw new Error(detail);
  }
  return (await resp.json()) as T;
}

export function createSession(
  baseUrl: string,
  spec: string,
  scenarioId: string,
  stepMode = false,
): Promise<SessionSummary> {
  return request(`${baseUrl}/sessions`, {
    method: "POST",
    body: JSON.stringify({ spec, scenario_id: scenarioId, step_mode: stepMode }),
  });
}

export function getSession(baseUrl: string, sessionId: string): Promise<SessionSummary> {
  return request(`${baseUrl}/sessions/${sessionId}`);
}

export function sendFollowup(
  baseUrl: string,
  sessionId: string,
  text: string,
): Promise<{ accepted: boolean }> {
  return request(`${baseUrl}/sessions/${sessionId}/message`, {
    method: "POST",
    body: JSON.stringify({ text }),
  });
}

export function approvePlan(
  baseUrl: string,
  sessionId: string,
): Promise<{ approved: boolean }> {
  return request(`${baseUrl}/sessions/${sessionId}/approve`, { method: "POST" });
}
