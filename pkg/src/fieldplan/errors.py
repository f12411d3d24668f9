"""Exception types shared across the package."""


class FieldPlanError(Exception):
    """Base class for all package errors."""


class GraphError(FieldPlanError):
    """Invalid graph construction or mutation."""


class UnknownNodeError(GraphError):
    """An operation referenced a node id that is not in the graph."""

    def __init__(self, node_id: str, context: str = ""):
        self.node_id = node_id
        suffix = f" ({context})" if context else ""
        super().__init__(f"unknown node id '{node_id}'{suffix}")


class NoPathError(GraphError):
    """No traversable path between two nodes."""

    def __init__(self, a: str, b: str):
        self.a = a
        self.b = b
        super().__init__(f"no traversable path from '{a}' to '{b}'")


class GraphParseError(FieldPlanError):
    """Graph text could not be parsed; carries position and reason."""

    def __init__(self, reason: str, line: int = 1, column: int = 1):
        self.reason = reason
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {reason}")


class PlanError(FieldPlanError):
    """A plan violates the plan invariants."""


class PlanParseError(FieldPlanError):
    """Raw model output could not be turned into a plan."""


class ProfileError(FieldPlanError):
    """Invalid robot profile."""


class ScenarioError(FieldPlanError):
    """Invalid world scenario definition."""


class ExecutionError(FieldPlanError):
    """The executor refused an action that did not pass validation."""


class CoverageUnreachableError(FieldPlanError):
    """No communication-covered cell is reachable from the robot's pose."""


class TransportError(FieldPlanError):
    """A remote model call failed at the transport level."""


class ScriptExhaustedError(TransportError):
    """A scripted model client ran out of canned responses."""
