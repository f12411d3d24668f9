"""Ground proposed plans before execution.

Checks each task for syntax (behavior allowed, argument types, ids exist),
reachability over traversability edges, explorability (an obstacle-free
grid path on the robot's known occupancy, unknown cells treated as free),
and, for aerial profiles, geofence containment. Position updates from
earlier navigation tasks are simulated so later tasks validate against
where the robot will actually be. All violations are collected; nothing
short-circuits.
"""

from __future__ import annotations

from dataclasses import dataclass

from fieldplan.graph import REGION, SemanticGraph, reachable
from fieldplan.grid import OccupancyGrid, find_grid_path
from fieldplan.plan import (
    EXPLORE_REGION,
    EXTEND_MAP,
    GOTO,
    INSPECT,
    MAP_REGION,
    Plan,
    RobotProfile,
    TERMINAL_BEHAVIORS,
    UAV,
    check_action_args,
    point_in_polygon,
)

# The robot-known free-space model the explorable check runs against.
KnownOccupancy = OccupancyGrid

SYNTAX = "syntax"
REACHABILITY = "reachability"
EXPLORABLE = "explorable"
GEOFENCE = "geofence"


@dataclass(frozen=True)
class Violation:
    """One grounding failure, addressed to the planner in plain language."""

    task_index: int
    behavior: str
    kind: str
    subject: str
    message: str

    def to_dict(self) -> dict:
        return {
            "task_index": self.task_index,
            "behavior": self.behavior,
            "kind": self.kind,
            "subject": self.subject,
            "message": self.message,
        }


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...]
    feedback_text: str

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [v.to_dict() for v in self.violations],
            "feedback_text": self.feedback_text,
        }


def _feedback_line(v: Violation) -> str:
    return f"Task {v.task_index} ({v.behavior}): {v.kind} violation — {v.message}"


def render_feedback(report: ValidationReport) -> str:
    """One line per violation in task order; empty string when ok."""
    return "\n".join(_feedback_line(v) for v in report.violations)


def _report(violations: list[Violation]) -> ValidationReport:
    ordered = tuple(sorted(violations, key=lambda v: v.task_index))
    rep = ValidationReport(ok=not ordered, violations=ordered, feedback_text="")
    object.__setattr__(rep, "feedback_text", render_feedback(rep))
    return rep


def _fmt_point(x: float, y: float) -> str:
    return f"({x:.3f}, {y:.3f})"


def validate(plan: Plan, graph: SemanticGraph, robot_at: str, occ: KnownOccupancy,
             profile: RobotProfile, connect8: bool = False) -> ValidationReport:
    """Check every task of a plan against the known map and free space.

    Pure and total: bad input becomes violations, never an exception.
    The explorable check searches 4-connected by default; connect8 widens it.
    """
    violations: list[Violation] = []
    if robot_at not in graph:
        first = plan.tasks[0].behavior if plan.tasks else "plan"
        violations.append(Violation(
            0, first, SYNTAX, robot_at,
            f"robot location '{robot_at}' is not a node in the graph (task 0)"))
        return _report(violations)
    if not plan.tasks:
        violations.append(Violation(
            0, "plan", SYNTAX, "tasks",
            "plan has an empty 'tasks' list (task 0)"))
        return _report(violations)

    cur_node = robot_at
    cur_pos = graph.node(robot_at).position
    for i, task in enumerate(plan.tasks):
        b = task.behavior
        bad = False

        def flag(kind: str, subject: str, message: str):
            nonlocal bad
            bad = True
            violations.append(Violation(i, b, kind, subject, message))

        arg_errors = check_action_args(b, task.args, i)
        if arg_errors:
            for msg in arg_errors:
                violations.append(Violation(i, b, SYNTAX, b, msg))
            continue
        if b not in profile.allowed_behaviors:
            flag(SYNTAX, b, f"behavior '{b}' is not available on this {profile.kind} (task {i})")
            continue
        # Terminal placement is re-checked so programmatically built plans
        # that bypassed Plan.check_invariants fail validation, not execution.
        if b in TERMINAL_BEHAVIORS and i != len(plan.tasks) - 1:
            flag(SYNTAX, b, f"terminal behavior '{b}' at task {i} must be the last task")
            continue

        # Resolve referenced nodes.
        target_id = task.args.get("node") or task.args.get("region")
        target = None
        if b in (GOTO, INSPECT, MAP_REGION, EXPLORE_REGION):
            if target_id not in graph:
                flag(SYNTAX, target_id, f"node '{target_id}' does not exist in the graph (task {i})")
                continue
            target = graph.node(target_id)
            if b in (MAP_REGION, EXPLORE_REGION) and target.kind != REGION:
                flag(SYNTAX, target_id,
                     f"'{target_id}' is a {target.kind}, but '{b}' requires a region (task {i})")
                continue

        # Reachability over traversability edges from the simulated position.
        if b in (GOTO, INSPECT, MAP_REGION):
            if not reachable(graph, cur_node, target_id):
                flag(REACHABILITY, target_id,
                     f"'{target_id}' is not reachable from '{cur_node}' over traversability "
                     f"edges (task {i})")

        # Explorable: an obstacle-free known-grid path, unknown = free.
        if b == EXPLORE_REGION:
            if find_grid_path(occ, cur_pos, target.position, connect8=connect8) is None:
                flag(EXPLORABLE, target_id,
                     f"no obstacle-free path from {_fmt_point(*cur_pos)} to region "
                     f"'{target_id}' (task {i})")
        elif b == EXTEND_MAP:
            tx, ty = float(task.args["x"]), float(task.args["y"])
            subject = _fmt_point(tx, ty)
            if find_grid_path(occ, cur_pos, (tx, ty), connect8=connect8) is None:
                flag(EXPLORABLE, subject,
                     f"no obstacle-free path from {_fmt_point(*cur_pos)} to {subject} (task {i})")

        # Geofence containment for aerial profiles.
        if profile.kind == UAV:
            fence_points: list[tuple[str, tuple[float, float]]] = []
            if b == GOTO and target is not None:
                fence_points.append((target_id, profile.nearest_waypoint(target.position)))
            elif b in (MAP_REGION, EXPLORE_REGION, INSPECT) and target is not None:
                fence_points.append((target_id, target.position))
            elif b == EXTEND_MAP:
                pt = (float(task.args["x"]), float(task.args["y"]))
                fence_points.append((_fmt_point(*pt), pt))
            for subject, pt in fence_points:
                if not point_in_polygon(pt, profile.geofence):
                    flag(GEOFENCE, subject,
                         f"target {subject} at {_fmt_point(*pt)} is outside the geofence (task {i})")

        # Position simulation for subsequent tasks, only when this task is
        # valid. Exploration moves the pose but never the graph anchor: the
        # executor re-anchors within the robot's traversable component, and
        # explore targets carry no reachability guarantee.
        if bad:
            continue
        if b == GOTO:
            cur_node = target_id
            cur_pos = (profile.nearest_waypoint(target.position)
                       if profile.kind == UAV else target.position)
        elif b == EXPLORE_REGION:
            cur_pos = target.position
        elif b == EXTEND_MAP:
            cur_pos = (float(task.args["x"]), float(task.args["y"]))

    return _report(violations)
