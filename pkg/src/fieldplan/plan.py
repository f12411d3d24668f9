"""Behavior API types, the raw-output plan parser, and prompt rendering.

The model-facing contract is a closed behavior set and one JSON grammar:
{"reasoning": <string>, "tasks": [{"behavior": <name>, "args": {...}} ...]}.
Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from fieldplan.errors import PlanError, PlanParseError, ProfileError
from fieldplan.graph import SemanticGraph, serialize_graph

GOTO = "goto"
MAP_REGION = "map_region"
EXPLORE_REGION = "explore_region"
EXTEND_MAP = "extend_map"
INSPECT = "inspect"
ANSWER = "answer"
CLARIFY = "clarify"

ALL_BEHAVIORS = (GOTO, MAP_REGION, EXPLORE_REGION, EXTEND_MAP, INSPECT, ANSWER, CLARIFY)
TERMINAL_BEHAVIORS = (ANSWER, CLARIFY)
UAV_BEHAVIORS = frozenset({INSPECT, MAP_REGION, EXPLORE_REGION, GOTO, ANSWER, CLARIFY})

UGV = "ugv"
UAV = "uav"

Point = tuple[float, float]


@dataclass(frozen=True)
class Action:
    """One task: a behavior name plus its arguments."""

    behavior: str
    args: dict = field(default_factory=dict)

    @classmethod
    def goto(cls, node: str) -> Action:
        return cls(GOTO, {"node": node})

    @classmethod
    def map_region(cls, region: str, classes: list[str] | None = None) -> Action:
        args: dict = {"region": region}
        if classes is not None:
            args["classes"] = list(classes)
        return cls(MAP_REGION, args)

    @classmethod
    def explore_region(cls, region: str, radius_m: float) -> Action:
        return cls(EXPLORE_REGION, {"region": region, "radius_m": radius_m})

    @classmethod
    def extend_map(cls, x: float, y: float) -> Action:
        return cls(EXTEND_MAP, {"x": x, "y": y})

    @classmethod
    def inspect(cls, node: str, query: str) -> Action:
        return cls(INSPECT, {"node": node, "query": query})

    @classmethod
    def answer(cls, text: str) -> Action:
        return cls(ANSWER, {"text": text})

    @classmethod
    def clarify(cls, question: str) -> Action:
        return cls(CLARIFY, {"question": question})

    def to_dict(self) -> dict:
        return {"behavior": self.behavior, "args": dict(self.args)}

    def __eq__(self, other):
        if not isinstance(other, Action):
            return NotImplemented
        return self.behavior == other.behavior and self.args == other.args

    def __hash__(self):
        return hash((self.behavior, tuple(sorted(self.args.items(), key=lambda kv: kv[0]))))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def check_action_args(behavior: str, args: dict, task_index: int) -> list[str]:
    """Argument arity and type errors for one task; empty when well-formed."""
    if behavior not in ALL_BEHAVIORS:
        return [f"unknown behavior '{behavior}' at task {task_index}"]
    errors: list[str] = []

    def need(name: str, check, what: str):
        if name not in args:
            errors.append(f"missing argument '{name}' for '{behavior}' at task {task_index}")
        elif not check(args[name]):
            errors.append(f"argument '{name}' for '{behavior}' at task {task_index} must be {what}")

    is_str = lambda v: isinstance(v, str) and bool(v)
    expected: set[str] = set()
    if behavior == GOTO:
        need("node", is_str, "a non-empty string")
        expected = {"node"}
    elif behavior == MAP_REGION:
        need("region", is_str, "a non-empty string")
        if "classes" in args:
            ok = isinstance(args["classes"], list) and all(isinstance(c, str) for c in args["classes"])
            if not ok:
                errors.append(f"argument 'classes' for '{behavior}' at task {task_index} must be a list of strings")
        expected = {"region", "classes"}
    elif behavior == EXPLORE_REGION:
        need("region", is_str, "a non-empty string")
        need("radius_m", lambda v: _is_number(v) and v > 0, "a positive number")
        expected = {"region", "radius_m"}
    elif behavior == EXTEND_MAP:
        need("x", _is_number, "a finite number")
        need("y", _is_number, "a finite number")
        expected = {"x", "y"}
    elif behavior == INSPECT:
        need("node", is_str, "a non-empty string")
        need("query", lambda v: isinstance(v, str), "a string")
        expected = {"node", "query"}
    elif behavior == ANSWER:
        need("text", lambda v: isinstance(v, str), "a string")
        expected = {"text"}
    elif behavior == CLARIFY:
        need("question", lambda v: isinstance(v, str), "a string")
        expected = {"question"}
    for key in sorted(args):
        if key not in expected:
            errors.append(f"unexpected argument '{key}' for '{behavior}' at task {task_index}")
    return errors


@dataclass(frozen=True)
class Plan:
    """Chain-of-thought rationale plus an ordered task list."""

    reasoning: str
    tasks: tuple[Action, ...]

    def check_invariants(self) -> None:
        """Raise PlanError unless the plan satisfies the plan invariants."""
        if not self.tasks:
            raise PlanError("plan has no tasks")
        for i, t in enumerate(self.tasks):
            errs = check_action_args(t.behavior, t.args, i)
            if errs:
                raise PlanError(errs[0])
            if t.behavior in TERMINAL_BEHAVIORS and i != len(self.tasks) - 1:
                raise PlanError(
                    f"terminal behavior '{t.behavior}' at task {i} must be the last task"
                )

    def to_dict(self) -> dict:
        return {"reasoning": self.reasoning, "tasks": [t.to_dict() for t in self.tasks]}


def _top_level_object_spans(raw: str) -> list[tuple[int, int]]:
    """(start, end) spans of balanced top-level {...} blocks, string-aware."""
    spans = []
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(raw):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            if depth > 0:
                in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append((start, i + 1))
    return spans


_FENCE_TAIL = re.compile(r"```[a-zA-Z0-9_-]*\s*$")


def parse_plan(raw: str) -> Plan:
    """Extract and type-check the last well-formed plan block in raw output.

    Accepts bare JSON or a triple-backtick fenced block; prose before the
    block becomes the reasoning when the block has no reasoning field.
    Raises PlanParseError with the field, task index, and reason on schema
    violations -- these strings feed the validator feedback channel.
    """
    if not isinstance(raw, str):
        raise PlanParseError("model output is not text")
    obj = None
    block_start = 0
    for start, end in reversed(_top_level_object_spans(raw)):
        try:
            candidate = json.loads(raw[start:end])
        except json.JSONDecodeError:
            continue
        if isinstance(candidate, dict):
            obj = candidate
            block_start = start
            break
    if obj is None:
        raise PlanParseError("no structured plan block found in model output")

    tasks_raw = obj.get("tasks")
    if tasks_raw is None:
        raise PlanParseError("plan block has no 'tasks' field")
    if not isinstance(tasks_raw, list) or not tasks_raw:
        raise PlanParseError("'tasks' must be a non-empty list")
    tasks: list[Action] = []
    for i, t in enumerate(tasks_raw):
        if not isinstance(t, dict):
            raise PlanParseError(f"task {i} is not an object")
        behavior = t.get("behavior")
        if not isinstance(behavior, str):
            raise PlanParseError(f"missing or non-string 'behavior' at task {i}")
        args = t.get("args", {})
        if not isinstance(args, dict):
            raise PlanParseError(f"'args' at task {i} is not an object")
        errs = check_action_args(behavior, args, i)
        if errs:
            raise PlanParseError("; ".join(errs))
        tasks.append(Action(behavior, args))

    reasoning = obj.get("reasoning")
    if reasoning is not None and not isinstance(reasoning, str):
        raise PlanParseError("'reasoning' must be a string")
    if reasoning is None:
        prose = raw[:block_start].rstrip()
        prose = _FENCE_TAIL.sub("", prose).rstrip()
        reasoning = prose

    plan = Plan(reasoning=reasoning, tasks=tuple(tasks))
    try:
        plan.check_invariants()
    except PlanError as exc:
        raise PlanParseError(str(exc)) from exc
    return plan


def serialize_plan(p: Plan) -> str:
    """Canonical text form; refuses plans that violate the plan invariants."""
    p.check_invariants()
    return json.dumps(p.to_dict(), sort_keys=True, separators=(", ", ": "), ensure_ascii=False)


# -- robot profiles and geofence geometry ----------------------------------


def _segments_properly_intersect(p1: Point, p2: Point, p3: Point, p4: Point) -> bool:
    def orient(a: Point, b: Point, c: Point) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def polygon_is_simple(vertices: tuple[Point, ...]) -> bool:
    """True when no two non-adjacent polygon edges cross."""
    n = len(vertices)
    if n < 3:
        return False
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return False
    return True


def point_in_polygon(point: Point, vertices: tuple[Point, ...]) -> bool:
    """Even-odd ray casting."""
    x, y = point
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


@dataclass(frozen=True)
class RobotProfile:
    """Platform capabilities: behavior set, and for aerial robots the
    waypoint list and geofence."""

    kind: str
    allowed_behaviors: frozenset[str]
    waypoints: tuple[Point, ...] = ()
    geofence: tuple[Point, ...] = ()

    def __post_init__(self):
        if self.kind not in (UGV, UAV):
            raise ProfileError(f"profile kind must be 'ugv' or 'uav', got {self.kind!r}")
        unknown = self.allowed_behaviors - set(ALL_BEHAVIORS)
        if unknown:
            raise ProfileError(f"unknown behaviors in profile: {sorted(unknown)}")
        if self.kind == UAV:
            extra = self.allowed_behaviors - UAV_BEHAVIORS
            if extra:
                raise ProfileError(f"behaviors not available to uav: {sorted(extra)}")
            if not self.waypoints:
                raise ProfileError("uav profile requires a non-empty waypoint list")
            if len(self.geofence) < 3:
                raise ProfileError("uav geofence requires at least 3 vertices")
            if not polygon_is_simple(self.geofence):
                raise ProfileError("uav geofence polygon is self-intersecting")
        else:
            if self.waypoints or self.geofence:
                raise ProfileError("waypoints and geofence apply only to uav profiles")

    def nearest_waypoint(self, point: Point) -> Point:
        """Closest waypoint to a requested target; ties keep list order."""
        best = self.waypoints[0]
        best_d = math.hypot(point[0] - best[0], point[1] - best[1])
        for wp in self.waypoints[1:]:
            d = math.hypot(point[0] - wp[0], point[1] - wp[1])
            if d < best_d:
                best, best_d = wp, d
        return best

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "allowed_behaviors": sorted(self.allowed_behaviors),
            "waypoints": [list(w) for w in self.waypoints],
            "geofence": [list(v) for v in self.geofence],
        }

    @classmethod
    def from_dict(cls, d: dict) -> RobotProfile:
        return cls(
            kind=d.get("kind", UGV),
            allowed_behaviors=frozenset(d.get("allowed_behaviors", ALL_BEHAVIORS)),
            waypoints=tuple((float(x), float(y)) for x, y in d.get("waypoints", [])),
            geofence=tuple((float(x), float(y)) for x, y in d.get("geofence", [])),
        )


def default_ugv_profile() -> RobotProfile:
    return RobotProfile(kind=UGV, allowed_behaviors=frozenset(ALL_BEHAVIORS))


def default_uav_profile(waypoints: tuple[Point, ...], geofence: tuple[Point, ...]) -> RobotProfile:
    return RobotProfile(kind=UAV, allowed_behaviors=UAV_BEHAVIORS,
                        waypoints=waypoints, geofence=geofence)


# -- prompt rendering -------------------------------------------------------

_BEHAVIOR_DOCS = {
    GOTO: 'goto: args {"node": <node id>} -- navigate to a node along traversability edges.',
    MAP_REGION: 'map_region: args {"region": <region id>, "classes": [<class>, ...] optional} -- '
                "look for objects in a reachable region; new objects appear as map updates.",
    EXPLORE_REGION: 'explore_region: args {"region": <region id>, "radius_m": <meters > 0>} -- '
                    "drive toward a region and sweep out to the given radius.",
    EXTEND_MAP: 'extend_map: args {"x": <meters>, "y": <meters>} -- push the known map toward a '
                "coordinate; the path there must be obstacle-free.",
    INSPECT: 'inspect: args {"node": <node id>, "query": <question>} -- look closely at a node; '
             "its description is updated with what is seen.",
    ANSWER: 'answer: args {"text": <answer>} -- finish the mission with an answer to the operator.',
    CLARIFY: 'clarify: args {"question": <question>} -- ask the operator for clarification; use '
             "only when the mission is too vague to plan.",
}


def behavior_api_description(profile: RobotProfile) -> str:
    """Deterministic system-prompt text for a profile's behavior set."""
    lines = [
        f"You are the mission planner for a {profile.kind} field robot.",
        "You are given a semantic map (region and object nodes with traversability",
        "and containment edges), the robot's current location, and a mission",
        "specification in natural language.",
        "",
        "Think step by step, then emit exactly one JSON object:",
        '{"reasoning": <string>, "tasks": [{"behavior": <name>, "args": {...}}, ...]}',
        "",
        "Available behaviors:",
    ]
    for name in ALL_BEHAVIORS:
        if name in profile.allowed_behaviors:
            lines.append("- " + _BEHAVIOR_DOCS[name])
    lines += [
        "",
        "Rules:",
        "- Reference only node ids that exist in the semantic map.",
        "- Navigation targets must be reachable over traversability edges.",
        "- Exploration targets must admit an obstacle-free path.",
        "- At most one answer or clarify task, and only as the final task.",
    ]
    if profile.kind == UAV:
        wps = ", ".join(f"({x:.3f}, {y:.3f})" for x, y in profile.waypoints)
        fence = ", ".join(f"({x:.3f}, {y:.3f})" for x, y in profile.geofence)
        lines += [
            f"- Navigation snaps to the nearest of these waypoints: {wps}.",
            f"- All targets must stay inside the geofence polygon: {fence}.",
        ]
    return "\n".join(lines)


def render_user_message(spec: str, graph: SemanticGraph, history: tuple[str, ...] | list[str],
                        robot_at: str) -> str:
    parts = [
        "SEMANTIC GRAPH:\n" + serialize_graph(graph),
        "CURRENT LOCATION: " + robot_at,
        "MISSION SPECIFICATION:\n" + spec,
    ]
    if history:
        parts.append("HISTORY:\n" + "\n".join(history))
    return "\n\n".join(parts)


def render_prompt(spec: str, graph: SemanticGraph, profile: RobotProfile,
                  history: tuple[str, ...] | list[str], robot_at: str) -> str:
    """Full prompt: behavior API description, map, location, mission, history.

    A pure function -- equal inputs produce byte-identical output.
    """
    return behavior_api_description(profile) + "\n\n" + render_user_message(
        spec, graph, history, robot_at)
