"""Deterministic ground-truth world.

Executes validated actions, reveals hidden map content within sensing
range of traversed points, accumulates distance, injects odometry and
communication failures, and evaluates mission goal predicates. Identical
(scenario, action sequence) inputs always produce identical results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from fieldplan.errors import (
    CoverageUnreachableError,
    ExecutionError,
    ScenarioError,
)
from fieldplan.graph import (
    OBJECT,
    REGION,
    GraphDiff,
    Node,
    SemanticGraph,
    euclidean,
    graph_diff,
    parse_graph,
    serialize_graph,
    shortest_path,
)
from fieldplan.grid import FREE, OccupancyGrid, find_grid_path, grid_distance_map
from fieldplan.plan import (
    ANSWER,
    CLARIFY,
    EXPLORE_REGION,
    EXTEND_MAP,
    GOTO,
    INSPECT,
    MAP_REGION,
    Action,
    Plan,
    RobotProfile,
    UAV,
)
from fieldplan.validate import EXPLORABLE, KnownOccupancy, validate

DEFAULT_REVEAL_RADIUS_M = 15.0

COMM_LOST = "comm_lost"
COMM_RESTORED = "comm_restored"
BLOCKED = "blocked_by_obstacle"
INSPECTION = "inspection_result"
ANSWERED = "mission_answered"
CLARIFICATION = "clarification_requested"

Point = tuple[float, float]


@dataclass(frozen=True)
class Event:
    kind: str
    text: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "text": self.text}


@dataclass(frozen=True)
class GoalPredicate:
    """Mission success condition; `all_of` composes conjunctions."""

    type: str
    node: str = ""
    cls: str = ""
    substring: str = ""
    parts: tuple[GoalPredicate, ...] = ()

    TYPES = ("visit_node", "node_discovered", "answer_contains", "all_of")

    def __post_init__(self):
        if self.type not in self.TYPES:
            raise ScenarioError(f"unknown goal type {self.type!r}")

    def to_dict(self) -> dict:
        if self.type == "visit_node":
            return {"type": self.type, "node": self.node}
        if self.type == "node_discovered":
            return {"type": self.type, "class": self.cls}
        if self.type == "answer_contains":
            return {"type": self.type, "substring": self.substring}
        return {"type": self.type, "goals": [p.to_dict() for p in self.parts]}

    @classmethod
    def from_dict(cls, d: dict) -> GoalPredicate:
        t = d.get("type", "")
        if t == "visit_node":
            return cls(type=t, node=d["node"])
        if t == "node_discovered":
            return cls(type=t, cls=d["class"])
        if t == "answer_contains":
            return cls(type=t, substring=d["substring"])
        if t == "all_of":
            return cls(type=t, parts=tuple(cls.from_dict(g) for g in d["goals"]))
        raise ScenarioError(f"unknown goal type {t!r}")

    def referenced_ids(self) -> list[str]:
        out = [self.node] if self.type == "visit_node" else []
        for p in self.parts:
            out.extend(p.referenced_ids())
        return out

    def referenced_classes(self) -> list[str]:
        out = [self.cls] if self.type == "node_discovered" else []
        for p in self.parts:
            out.extend(p.referenced_classes())
        return out


@dataclass(frozen=True)
class FailureInjectors:
    comm_dropout: tuple[tuple[int, int], ...] = ()
    odometry_drift_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "comm_dropout": [list(w) for w in self.comm_dropout],
            "odometry_drift_rate": self.odometry_drift_rate,
        }


@dataclass(frozen=True)
class WorldScenario:
    """Ground truth: full graph with start visibility flags, occupancy,
    comm coverage disks, robot profile, and the mission goal."""

    id: str
    truth_graph: SemanticGraph
    grid: OccupancyGrid
    start_node: str
    profile: RobotProfile
    goal: GoalPredicate
    reveal_radius_m: float = DEFAULT_REVEAL_RADIUS_M
    comm_sites: tuple[tuple[float, float, float], ...] = ()
    failure_injectors: FailureInjectors = field(default_factory=FailureInjectors)
    seed: int = 0

    def __post_init__(self):
        if self.reveal_radius_m <= 0:
            raise ScenarioError("reveal_radius_m must be positive")
        if self.start_node not in self.truth_graph:
            raise ScenarioError(f"start node '{self.start_node}' is not in the graph")
        start = self.truth_graph.node(self.start_node)
        if not start.visible:
            raise ScenarioError(f"start node '{self.start_node}' must be visible")
        if not self.grid.contains_point(start.position):
            raise ScenarioError(f"start node '{self.start_node}' lies outside the grid")
        for x, y, rng in self.comm_sites:
            if rng <= 0:
                raise ScenarioError(f"comm site ({x}, {y}) has non-positive range {rng}")
        for nid in self.goal.referenced_ids():
            if nid not in self.truth_graph:
                raise ScenarioError(f"goal references unknown node '{nid}'")
        classes = {n.cls for n in self.truth_graph.nodes}
        for c in self.goal.referenced_classes():
            if c not in classes:
                raise ScenarioError(f"goal references unknown class '{c}'")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "graph": json.loads(serialize_graph(self.truth_graph)),
            "grid": self.grid.to_dict(),
            "start_node": self.start_node,
            "profile": self.profile.to_dict(),
            "goal": self.goal.to_dict(),
            "reveal_radius_m": self.reveal_radius_m,
            "comm_sites": [list(s) for s in self.comm_sites],
            "failure_injectors": self.failure_injectors.to_dict(),
            "seed": self.seed,
        }


def scenario_from_dict(d: dict) -> WorldScenario:
    try:
        graph = parse_graph(json.dumps(d["graph"]))
        g = d["grid"]
        grid = OccupancyGrid.from_rects(
            rows=int(g["rows"]),
            cols=int(g["cols"]),
            resolution=float(g["resolution"]),
            origin=(float(g["origin"][0]), float(g["origin"][1])),
            obstacle_rects=[tuple(map(float, r)) for r in g.get("obstacles", [])],
        )
        inj = d.get("failure_injectors", {})
        return WorldScenario(
            id=d.get("id", "scenario"),
            truth_graph=graph,
            grid=grid,
            start_node=d["start_node"],
            profile=RobotProfile.from_dict(d["profile"]),
            goal=GoalPredicate.from_dict(d["goal"]),
            reveal_radius_m=float(d.get("reveal_radius_m", DEFAULT_REVEAL_RADIUS_M)),
            comm_sites=tuple(
                (float(x), float(y), float(r)) for x, y, r in d.get("comm_sites", [])
            ),
            failure_injectors=FailureInjectors(
                comm_dropout=tuple(
                    (int(a), int(b)) for a, b in inj.get("comm_dropout", [])
                ),
                odometry_drift_rate=float(inj.get("odometry_drift_rate", 0.0)),
            ),
            seed=int(d.get("seed", 0)),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario missing field {exc.args[0]!r}") from exc


def load_scenario(path: str) -> WorldScenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return scenario_from_dict(json.load(fh))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc.msg}") from exc


@dataclass(frozen=True)
class RobotState:
    """Robot knowledge and position; replaced wholesale on every step."""

    at: str
    pose: Point
    odometer_m: float
    reported_odometer_m: float
    known: SemanticGraph
    known_occ: KnownOccupancy
    step: int


@dataclass(frozen=True)
class StepResult:
    diff: GraphDiff
    distance_m: float
    events: tuple[Event, ...]
    done: bool

    def to_dict(self) -> dict:
        return {
            "diff": self.diff.to_dict(),
            "distance_m": self.distance_m,
            "events": [e.to_dict() for e in self.events],
            "done": self.done,
        }


def _known_copy(n: Node) -> Node:
    # Known-map nodes start with a blank description; inspect fills it in.
    return replace(n, desc="", visible=True)


def initial_state(world: WorldScenario) -> RobotState:
    visible = {n.id for n in world.truth_graph.nodes if n.visible}
    nodes = [_known_copy(n) for n in world.truth_graph.nodes if n.id in visible]
    edges = [e for e in world.truth_graph.edges if e.a in visible and e.b in visible]
    known = SemanticGraph(nodes, edges)
    occ = OccupancyGrid.blank(world.grid.rows, world.grid.cols,
                              world.grid.resolution, world.grid.origin)
    start = world.truth_graph.node(world.start_node)
    return RobotState(
        at=world.start_node,
        pose=start.position,
        odometer_m=0.0,
        reported_odometer_m=0.0,
        known=known,
        known_occ=occ,
        step=0,
    )


def in_comms(world: WorldScenario, pose: Point, step: int) -> bool:
    """Inside any coverage disk and outside any dropout window.

    Scenarios with no comm sites model ubiquitous infrastructure."""
    if not world.comm_sites:
        return True
    for t0, t1 in world.failure_injectors.comm_dropout:
        if t0 <= step <= t1:
            return False
    return any(euclidean(pose, (x, y)) <= rng for x, y, rng in world.comm_sites)


def _covered(world: WorldScenario, point: Point) -> bool:
    return any(euclidean(point, (x, y)) <= rng for x, y, rng in world.comm_sites)


def nearest_comm_point(world: WorldScenario, state: RobotState) -> Point:
    """Center of the closest grid-reachable free cell inside coverage.

    Distance is grid hops from the robot's pose; ties break on the smaller
    (row, col). Raises CoverageUnreachableError when no covered cell can be
    reached."""
    if not world.comm_sites:
        raise CoverageUnreachableError("scenario defines no communication coverage")
    dist = grid_distance_map(world.grid, state.pose)
    best: tuple[int, tuple[int, int]] | None = None
    for cell, d in dist.items():
        if _covered(world, world.grid.cell_center(cell)):
            key = (d, cell)
            if best is None or key < best:
                best = key
    if best is None:
        raise CoverageUnreachableError(
            f"no covered cell reachable from {state.pose[0]:.3f}, {state.pose[1]:.3f}")
    return world.grid.cell_center(best[1])


def check_goal(world: WorldScenario, state: RobotState, answer: str | None = None) -> bool:
    return _eval_goal(world.goal, state, answer)


def _eval_goal(goal: GoalPredicate, state: RobotState, answer: str | None) -> bool:
    if goal.type == "visit_node":
        return state.at == goal.node
    if goal.type == "node_discovered":
        return any(n.cls == goal.cls for n in state.known.nodes)
    if goal.type == "answer_contains":
        return answer is not None and goal.substring.casefold() in answer.casefold()
    return all(_eval_goal(p, state, answer) for p in goal.parts)


# -- reveal machinery -------------------------------------------------------


def _segment_points(a: Point, b: Point, step: float) -> list[Point]:
    """Points along a segment sampled every `step` meters, endpoints included."""
    length = euclidean(a, b)
    if length == 0.0:
        return [a]
    n = int(length / step)
    pts = [(a[0] + (b[0] - a[0]) * (k * step / length),
            (a[1] + (b[1] - a[1]) * (k * step / length))) for k in range(n + 1)]
    if pts[-1] != b:
        pts.append(b)
    return pts


def _reveal_near_points(world: WorldScenario, known: SemanticGraph,
                        points: list[Point]) -> SemanticGraph:
    """Add hidden truth nodes within sensing range of any traversed point."""
    if not points:
        return known
    radius = world.reveal_radius_m
    new_nodes = []
    for n in world.truth_graph.nodes:
        if n.id in known:
            continue
        if any(euclidean(n.position, p) <= radius for p in points):
            new_nodes.append(_known_copy(n))
    if not new_nodes:
        return known
    return _with_nodes(world, known, new_nodes)


def _with_nodes(world: WorldScenario, known: SemanticGraph,
                new_nodes: list[Node]) -> SemanticGraph:
    nodes = list(known.nodes) + new_nodes
    ids = {n.id for n in nodes}
    edges = [e for e in world.truth_graph.edges if e.a in ids and e.b in ids]
    return SemanticGraph(nodes, edges)


def _corridor_clear(grid: OccupancyGrid, a: Point, b: Point) -> bool:
    """True when the straight swath between two points crosses no obstacle
    cell and stays on the grid. Oversampled at half resolution so no cell
    along the line is skipped."""
    for p in _segment_points(a, b, grid.resolution * 0.5):
        if not grid.passable(grid.world_to_cell(p)):
            return False
    return True


def _grid_traverse(world: WorldScenario, start: Point, target: Point,
                   budget_m: float | None) -> tuple[Point, list[Point], float, bool]:
    """Walk the truth-grid path toward a target, optionally stopping after
    a travel budget. Returns (final pose, traversed cell centers, distance,
    blocked)."""
    path = find_grid_path(world.grid, start, target)
    if path is None:
        return start, [], 0.0, True
    res = world.grid.resolution
    moves = len(path) - 1
    if budget_m is not None:
        moves = min(moves, int(budget_m / res + 1e-9))
    cells = path[: moves + 1]
    points = [world.grid.cell_center(c) for c in cells]
    return points[-1], points, moves * res, False


# -- the executor -----------------------------------------------------------


def _gate(action: Action, world: WorldScenario, state: RobotState) -> None:
    """Refuse actions that were not (or could not have been) validated.

    Explorable findings are not refusals: the validator is optimistic about
    unknown space and ground-truth conflicts surface as blocked events."""
    report = validate(Plan(reasoning="", tasks=(action,)), state.known, state.at,
                      state.known_occ, world.profile)
    hard = [v for v in report.violations if v.kind != EXPLORABLE]
    if hard:
        raise ExecutionError(
            f"action '{action.behavior}' was not validated: {hard[0].message}")


def _reachable_regions(known: SemanticGraph, anchor: str) -> set[str]:
    seeds = known.regions_of(anchor)
    seen = set(seeds)
    frontier = list(seeds)
    adj = known._adjacency
    while frontier:
        nxt = []
        for nid in frontier:
            for nb in adj[nid]:
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        frontier = nxt
    return seen


def _nearest_region(known: SemanticGraph, pose: Point, anchor: str) -> str:
    """Closest region to a pose, restricted to the anchor's traversable
    component so position re-anchoring can never teleport the robot across
    disconnected parts of the graph (ties break on the smaller id)."""
    candidates = _reachable_regions(known, anchor)
    if not candidates:
        return anchor
    best_id = None
    best_d = math.inf
    for nid in sorted(candidates):
        d = euclidean(known.node(nid).position, pose)
        if d < best_d - 1e-12:
            best_id, best_d = nid, d
    return best_id if best_id is not None else anchor


def execute(action: Action, world: WorldScenario, state: RobotState) -> tuple[RobotState, StepResult]:
    """Execute one validated action against ground truth.

    Raises ExecutionError for actions that fail the validation gate; all
    world-model surprises (obstructed corridors, comm changes) are events,
    not errors."""
    _gate(action, world, state)
    b = action.behavior
    args = action.args
    res = world.grid.resolution

    at = state.at
    pose = state.pose
    known = state.known
    occ = state.known_occ
    distance = 0.0
    events: list[Event] = []
    answer_text: str | None = None

    if b == GOTO:
        target = known.node(args["node"])
        if world.profile.kind == UAV:
            wp = world.profile.nearest_waypoint(target.position)
            known = _reveal_near_points(world, known, _segment_points(pose, wp, res))
            distance = euclidean(pose, wp)
            pose = wp
            at = target.id
        else:
            path, _ = shortest_path(known, at, target.id)
            pos = {n.id: n.position for n in known.nodes}
            for u, v in zip(path, path[1:]):
                if not _corridor_clear(world.grid, pos[u], pos[v]):
                    events.append(Event(BLOCKED, f"path from {u} to {v} is obstructed; stopped at {u}"))
                    break
                known = _reveal_near_points(world, known, _segment_points(pos[u], pos[v], res))
                distance += euclidean(pos[u], pos[v])
                at = v
                pose = pos[v]

    elif b == MAP_REGION:
        region = known.node(args["region"])
        classes = args.get("classes")
        found = []
        for n in world.truth_graph.nodes:
            if n.id in known or n.kind != OBJECT:
                continue
            if not world.truth_graph.has_edge(n.id, region.id):
                continue
            if euclidean(n.position, region.position) > world.reveal_radius_m:
                continue
            if classes is not None and n.cls not in classes:
                continue
            found.append(_known_copy(n))
        if found:
            known = _with_nodes(world, known, found)

    elif b == EXPLORE_REGION:
        region = known.node(args["region"])
        end, points, distance, blocked = _grid_traverse(
            world, pose, region.position, float(args["radius_m"]))
        if blocked:
            events.append(Event(BLOCKED, f"no traversable path toward region {region.id}"))
        else:
            known = _reveal_near_points(world, known, points)
            pose = end
            at = _nearest_region(known, pose, at)

    elif b == EXTEND_MAP:
        target = (float(args["x"]), float(args["y"]))
        end, points, distance, blocked = _grid_traverse(world, pose, target, None)
        if blocked:
            events.append(Event(BLOCKED,
                                f"no traversable path toward ({target[0]:.3f}, {target[1]:.3f})"))
        else:
            known = _reveal_near_points(world, known, points)
            occ = occ.copy()
            for p in points:
                occ.set_state(occ.world_to_cell(p), FREE)
            pose = end
            at = _nearest_region(known, pose, at)

    elif b == INSPECT:
        node_id = args["node"]
        truth = world.truth_graph.node(node_id)
        events.append(Event(INSPECTION, truth.desc))
        if known.node(node_id).desc != truth.desc:
            nodes = [replace(n, desc=truth.desc) if n.id == node_id else n for n in known.nodes]
            known = SemanticGraph(nodes, known.edges)

    elif b == ANSWER:
        answer_text = args["text"]
        events.append(Event(ANSWERED, answer_text))

    elif b == CLARIFY:
        events.append(Event(CLARIFICATION, args["question"]))

    else:  # pragma: no cover - the gate rejects unknown behaviors
        raise ExecutionError(f"unknown behavior '{b}'")

    drift = world.failure_injectors.odometry_drift_rate
    new_state = RobotState(
        at=at,
        pose=pose,
        odometer_m=state.odometer_m + distance,
        reported_odometer_m=state.reported_odometer_m + distance * (1.0 + drift),
        known=known,
        known_occ=occ,
        step=state.step + 1,
    )

    was = in_comms(world, state.pose, state.step)
    now = in_comms(world, new_state.pose, new_state.step)
    if was and not now:
        events.append(Event(COMM_LOST))
    elif not was and now:
        events.append(Event(COMM_RESTORED))

    terminal = b in (ANSWER, CLARIFY)
    done = terminal or check_goal(world, new_state, answer_text)
    diff = graph_diff(state.known, known)
    return new_state, StepResult(diff=diff, distance_m=distance,
                                 events=tuple(events), done=done)


def return_to_comms(world: WorldScenario, state: RobotState) -> tuple[RobotState, StepResult]:
    """Grid move back to the nearest covered free cell.

    Used by the mission loop before planning when the robot has left
    communication range. Raises CoverageUnreachableError when no covered
    cell can be reached."""
    target = nearest_comm_point(world, state)
    end, points, distance, blocked = _grid_traverse(world, state.pose, target, None)
    if blocked:
        raise CoverageUnreachableError(
            f"covered point ({target[0]:.3f}, {target[1]:.3f}) is not grid-reachable")
    known = _reveal_near_points(world, state.known, points)
    new_state = RobotState(
        at=_nearest_region(known, end, state.at),
        pose=end,
        odometer_m=state.odometer_m + distance,
        reported_odometer_m=state.reported_odometer_m
        + distance * (1.0 + world.failure_injectors.odometry_drift_rate),
        known=known,
        known_occ=state.known_occ,
        step=state.step + 1,
    )
    events: list[Event] = []
    if not in_comms(world, state.pose, state.step) and in_comms(world, new_state.pose, new_state.step):
        events.append(Event(COMM_RESTORED))
    done = check_goal(world, new_state, None)
    return new_state, StepResult(diff=graph_diff(state.known, known), distance_m=distance,
                                 events=tuple(events), done=done)
