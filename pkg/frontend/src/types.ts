/** Wire types mirroring the mission-control service. */

export interface WireNode {
  id: string;
  kind: string;
  class: string;
  x: number;
  y: number;
  desc: string;
  visible: boolean;
}

export interface WireEdge {
  a: string;
  b: string;
  kind: string;
}

export interface WireDiff {
  added_nodes: WireNode[];
  removed_nodes: string[];
  changed_nodes: WireNode[];
  added_edges: WireEdge[];
  removed_edges: WireEdge[];
}

export interface SessionEvent {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface GridInfo {
  rows: number;
  cols: number;
  resolution: number;
  origin: number[];
}

export interface Overlays {
  comm_sites: number[][];
  geofence: number[][];
  waypoints: number[][];
  grid: GridInfo;
}

export interface SessionSummary {
  id: string;
  spec: string;
  scenario_id: string;
  step_mode: boolean;
  state: string;
  outcome: string | null;
  last_seq: number;
  overlays: Overlays;
}
