/**
 * Event-sourced view state.
 *
 * The whole console view derives from the session's event stream: applying
 * the same events in seq order always yields the same state, so a replay
 * after reconnecting converges to exactly the live view. No mission logic
 * lives here, only projection.
 */

import type { SessionEvent, WireDiff, WireEdge, WireNode } from "./types.js";

export type TaskStatus = "pending" | "running" | "done";

export interface TaskView {
  behavior: string;
  args: Record<string, unknown>;
  status: TaskStatus;
}

export interface PlanView {
  reasoning: string;
  tasks: TaskView[];
}

export interface ViewState {
  lastSeq: number;
  nodes: Record<string, WireNode>;
  edges: WireEdge[];
  robotAt: string | null;
  robotPose: [number, number] | null;
  plan: PlanView | null;
  feedback: string[];
  ticker: string[];
  clarification: string | null;
  answer: string | null;
  outcome: string | null;
  done: boolean;
}

export function initialViewState(): ViewState {
  return {
    lastSeq: 0,
    nodes: {},
    edges: [],
    robotAt: null,
    robotPose: null,
    plan: null,
    feedback: [],
    ticker: [],
    clarification: null,
    answer: null,
    outcome: null,
    done: false,
  };
}

function edgeKey(e: WireEdge): string {
  return `${e.a}--${e.b}`;
}

function applyDiff(state: ViewState, diff: WireDiff): void {
  for (const id of diff.removed_nodes) {
    delete state.nodes[id];
  }
  for (const n of diff.added_nodes.concat(diff.changed_nodes)) {
    state.nodes[n.id] = n;
  }
  const removed = new Set(diff.removed_edges.map(edgeKey));
  state.edges = state.edges.filter((e) => !removed.has(edgeKey(e)));
  const present = new Set(state.edges.map(edgeKey));
  for (const e of diff.added_edges) {
    if (!present.has(edgeKey(e))) {
      state.edges.push(e);
      present.add(edgeKey(e));
    }
  }
}

/**
 * Fold one event into the view. Events at or below lastSeq are dropped, so
 * overlapping replays after a reconnect are harmless.
 */
export function applyEvent(prev: ViewState, event: SessionEvent): ViewState {
  if (event.seq <= prev.lastSeq) {
    return prev;
  }
  const state: ViewState = {
    ...prev,
    nodes: { ...prev.nodes },
    edges: [...prev.edges],
    plan: prev.plan
      ? { reasoning: prev.plan.reasoning, tasks: prev.plan.tasks.map((t) => ({ ...t })) }
      : null,
    feedback: [...prev.feedback],
    ticker: [...prev.ticker],
  };
  state.lastSeq = event.seq;
  const p = event.payload as Record<string, any>;

  switch (event.kind) {
    case "map_diff": {
      applyDiff(state, p.diff as WireDiff);
      if (typeof p.at === "string") state.robotAt = p.at;
      if (Array.isArray(p.pose)) state.robotPose = [p.pose[0], p.pose[1]];
      break;
    }
    case "plan_proposed": {
      const tasks = (p.tasks as { behavior: string; args: Record<string, unknown> }[]).map(
        (t) => ({ behavior: t.behavior, args: t.args, status: "pending" as TaskStatus }),
      );
      state.plan = { reasoning: String(p.reasoning ?? ""), tasks };
      state.clarification = null;
      break;
    }
    case "validation_failed": {
      for (const line of String(p.feedback ?? "").split("\n")) {
        if (line.trim()) state.feedback.push(line);
      }
      break;
    }
    case "task_started": {
      const i = Number(p.index ?? p.task_index ?? -1);
      if (state.plan && state.plan.tasks[i]) state.plan.tasks[i].status = "running";
      break;
    }
    case "task_finished": {
      const i = Number(p.task_index ?? p.index ?? -1);
      if (state.plan && state.plan.tasks[i]) state.plan.tasks[i].status = "done";
      if (typeof p.at === "string") state.robotAt = p.at;
      if (Array.isArray(p.pose)) state.robotPose = [p.pose[0], p.pose[1]];
      break;
    }
    case "comm_event": {
      state.ticker.push(`comms: ${p.kind}${p.text ? ` (${p.text})` : ""}`);
      break;
    }
    case "clarification": {
      state.clarification = String(p.question ?? "");
      state.ticker.push(`robot asks: ${state.clarification}`);
      break;
    }
    case "answered": {
      state.answer = String(p.text ?? "");
      state.ticker.push(`answer: ${state.answer}`);
      break;
    }
    case "done": {
      state.outcome = String(p.outcome ?? "");
      state.done = true;
      break;
    }
    default:
      break;
  }
  return state;
}

export function applyAll(state: ViewState, events: SessionEvent[]): ViewState {
  let out = state;
  for (const e of events) {
    out = applyEvent(out, e);
  }
  return out;
}
