"""Closed-loop mission planning for field robots.

A language model proposes task sequences over a semantic map, every plan is
grounded against the map and the robot's free-space knowledge before
execution, and a deterministic simulator executes behaviors while revealing
map content online. Includes a distillation data pipeline, an evaluation
harness for candidate planner models, and a session-oriented mission-control
service.
"""

from fieldplan.graph import Edge, GraphDiff, Node, SemanticGraph
from fieldplan.plan import Action, Plan, RobotProfile
from fieldplan.validate import ValidationReport, Violation, validate
from fieldplan.world import GoalPredicate, RobotState, WorldScenario

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Edge",
    "GoalPredicate",
    "GraphDiff",
    "Node",
    "Plan",
    "RobotProfile",
    "RobotState",
    "SemanticGraph",
    "ValidationReport",
    "Violation",
    "WorldScenario",
    "validate",
    "__version__",
]
