"""Distillation pipeline and planner evaluation harness.

Generates mission specifications over a map, collects (observation, action)
chat triples from expert closed-loop runs, exports a finetuning corpus, and
scores candidate planner clients on held-out short-horizon cases. Model
training itself is out of scope; the corpus file is the hand-off.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field

from fieldplan.errors import FieldPlanError, PlanParseError, TransportError
from fieldplan.graph import OBJECT, REGION, SemanticGraph, parse_graph, serialize_graph
from fieldplan.grid import OccupancyGrid
from fieldplan.loop import LoopConfig, MissionHooks, ModelClient, run_mission
from fieldplan.plan import (
    ANSWER,
    Plan,
    RobotProfile,
    behavior_api_description,
    default_ugv_profile,
    parse_plan,
    render_user_message,
    serialize_plan,
)
from fieldplan.util import canonical_json
from fieldplan.validate import validate
from fieldplan.world import WorldScenario

log = logging.getLogger(__name__)

SPEC_TEMPLATES = (
    "Is there activity in the {cls} {region}?",
    "Inspect {node} for {condition}",
    "Map the area around {region}",
)
_CONDITIONS = ("damage", "construction", "recent activity", "occupancy")


@dataclass(frozen=True)
class DatasetRecord:
    """One training example: system / user / assistant chat triple."""

    messages: tuple[dict, ...]
    meta: dict

    def __post_init__(self):
        roles = [m.get("role") for m in self.messages]
        if roles != ["system", "user", "assistant"]:
            raise FieldPlanError(f"record messages must be system/user/assistant, got {roles}")

    @property
    def system(self) -> str:
        return self.messages[0]["content"]

    @property
    def user(self) -> str:
        return self.messages[1]["content"]

    @property
    def assistant(self) -> str:
        return self.messages[2]["content"]

    def to_dict(self) -> dict:
        return {"messages": [dict(m) for m in self.messages], "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d: dict) -> DatasetRecord:
        return cls(messages=tuple(d["messages"]), meta=d.get("meta", {}))


def make_record(system: str, user: str, plan: Plan, scenario_id: str,
                iteration: int, expert_model: str) -> DatasetRecord:
    return DatasetRecord(
        messages=(
            {"role": "system", "content": system},
            {"role": "user", "content": user},
            {"role": "assistant", "content": serialize_plan(plan)},
        ),
        meta={"scenario_id": scenario_id, "iteration": iteration,
              "expert_model": expert_model},
    )


# -- spec generation --------------------------------------------------------


def generate_specs(graph: SemanticGraph, n: int, mode: str = "template",
                   seed: int = 0, client: ModelClient | None = None) -> list[str]:
    """Mission specifications referencing only content of the given map.

    Template mode fills seeded templates with classes and ids sampled from
    the graph; model mode asks a client and filters out specs that name
    ids absent from the graph."""
    if n <= 0:
        raise ValueError("n must be positive")
    if mode == "template":
        return _template_specs(graph, n, seed)
    if mode == "model":
        if client is None:
            raise ValueError("model mode requires a client")
        return _model_specs(graph, n, client)
    raise ValueError(f"unknown spec generation mode {mode!r}")


def _template_specs(graph: SemanticGraph, n: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    regions = [node for node in graph.nodes if node.kind == REGION]
    objects = [node for node in graph.nodes if node.kind == OBJECT]
    if not regions:
        raise ValueError("graph has no regions to template over")
    specs = []
    for i in range(n):
        template = SPEC_TEMPLATES[i % len(SPEC_TEMPLATES)]
        region = rng.choice(regions)
        node = rng.choice(objects) if objects else region
        specs.append(template.format(
            cls=region.cls.replace("_", " "),
            region=region.id,
            node=node.id,
            condition=rng.choice(_CONDITIONS),
        ))
    return specs


_IDISH = re.compile(r"\b[a-z0-9]+(?:_[a-z0-9]+)+\b")


def _model_specs(graph: SemanticGraph, n: int, client: ModelClient) -> list[str]:
    prompt = (
        f"Here is a semantic map of an environment:\n{serialize_graph(graph)}\n\n"
        f"Write {n} distinct one-sentence mission specifications for a ground robot "
        "operating on this map. Reference only node ids and classes that appear in "
        "the map. Output one specification per line with no numbering."
    )
    raw = client.complete(prompt)
    ids = set(graph.node_ids())
    specs = []
    for line in raw.splitlines():
        line = line.strip().lstrip("-*0123456789. ").strip()
        if not line:
            continue
        # Underscored tokens look like node ids; drop specs naming unknown ones.
        if any(tok not in ids for tok in _IDISH.findall(line)):
            continue
        specs.append(line)
    return specs[:n]


# -- expert data collection -------------------------------------------------


class _Recorder(MissionHooks):
    def __init__(self, scenario_id: str, expert_model: str):
        self.scenario_id = scenario_id
        self.expert_model = expert_model
        self.records: list[DatasetRecord] = []

    def on_validated_plan(self, system: str, user: str, plan: Plan, iteration: int) -> None:
        self.records.append(make_record(system, user, plan, self.scenario_id,
                                        iteration, self.expert_model))


def collect(missions: list[tuple[str, WorldScenario]], expert: ModelClient,
            cfg: LoopConfig, limit: int | None = None) -> list[DatasetRecord]:
    """Run the expert over each (spec, scenario) mission and keep one record
    per successfully validated planning iteration. Per-mission failures are
    logged and skipped; invalid expert output never reaches the corpus."""
    out: list[DatasetRecord] = []
    for spec, scenario in missions:
        recorder = _Recorder(scenario.id, expert.model_name)
        try:
            run_mission(spec, scenario, expert, cfg, hooks=recorder)
        except FieldPlanError as exc:
            log.warning("skipping scenario %s: %s", scenario.id, exc)
            continue
        out.extend(recorder.records)
        if limit is not None and len(out) >= limit:
            return out[:limit]
    return out


# -- corpus I/O and hygiene -------------------------------------------------


def export_corpus(records: list[DatasetRecord], path: str) -> None:
    """One canonical record per line, trailing newline included."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(canonical_json(rec.to_dict()))
                fh.write("\n")
    except OSError as exc:
        raise FieldPlanError(f"cannot write corpus to {path}: {exc}") from exc


def import_corpus(path: str) -> list[DatasetRecord]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [DatasetRecord.from_dict(json.loads(line))
                    for line in fh if line.strip()]
    except OSError as exc:
        raise FieldPlanError(f"cannot read corpus from {path}: {exc}") from exc


_GRAPH_LINE = re.compile(r"^SEMANTIC GRAPH:\n(.+)$", re.MULTILINE)
_LOCATION_LINE = re.compile(r"^CURRENT LOCATION: (.+)$", re.MULTILINE)


def extract_graph(user_message: str) -> SemanticGraph:
    m = _GRAPH_LINE.search(user_message)
    if not m:
        raise FieldPlanError("user message has no semantic graph section")
    return parse_graph(m.group(1))


def extract_location(user_message: str) -> str:
    m = _LOCATION_LINE.search(user_message)
    if not m:
        raise FieldPlanError("user message has no current-location line")
    return m.group(1).strip()


def grid_for_graph(graph: SemanticGraph, resolution: float = 2.0,
                   margin_m: float = 30.0) -> OccupancyGrid:
    """All-unknown grid covering the graph's bounding box plus margin."""
    xs = [n.x for n in graph.nodes] or [0.0]
    ys = [n.y for n in graph.nodes] or [0.0]
    x0, y0 = min(xs) - margin_m, min(ys) - margin_m
    cols = max(1, int((max(xs) + margin_m - x0) / resolution) + 1)
    rows = max(1, int((max(ys) + margin_m - y0) / resolution) + 1)
    return OccupancyGrid.blank(rows, cols, resolution, (x0, y0))


def revalidate_record(record: DatasetRecord,
                      profile: RobotProfile | None = None) -> tuple[bool, str]:
    """Corpus hygiene: the assistant plan must parse and validate against
    the graph snapshot embedded in the record's own user message."""
    try:
        graph = extract_graph(record.user)
        robot_at = extract_location(record.user)
        plan = parse_plan(record.assistant)
    except FieldPlanError as exc:
        return False, str(exc)
    occ = grid_for_graph(graph)
    report = validate(plan, graph, robot_at, occ, profile or default_ugv_profile())
    if not report.ok:
        return False, report.feedback_text
    return True, ""


# -- short-horizon evaluation -----------------------------------------------


@dataclass(frozen=True)
class EvalCase:
    """One held-out planning problem with the accepted first tasks."""

    spec: str
    graph: SemanticGraph
    robot_at: str
    accept: tuple[tuple[str, str], ...]
    profile: RobotProfile = field(default_factory=default_ugv_profile)

    def __post_init__(self):
        if not self.accept:
            raise FieldPlanError("eval case needs at least one accepted (behavior, target)")
        for behavior, target in self.accept:
            if behavior in ("goto", "map_region", "explore_region", "inspect") \
                    and target not in self.graph:
                raise FieldPlanError(f"accept target '{target}' is not in the graph")
        if self.robot_at not in self.graph:
            raise FieldPlanError(f"robot location '{self.robot_at}' is not in the graph")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "graph": json.loads(serialize_graph(self.graph)),
            "robot_at": self.robot_at,
            "accept": [list(a) for a in self.accept],
            "profile": self.profile.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalCase:
        return cls(
            spec=d["spec"],
            graph=parse_graph(json.dumps(d["graph"])),
            robot_at=d["robot_at"],
            accept=tuple((a, b) for a, b in d["accept"]),
            profile=RobotProfile.from_dict(d["profile"]) if "profile" in d
            else default_ugv_profile(),
        )


def load_eval_cases(path: str) -> list[EvalCase]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [EvalCase.from_dict(c) for c in data["cases"]]


def _first_task_matches(plan: Plan, accept: tuple[tuple[str, str], ...]) -> bool:
    task = plan.tasks[0]
    primary = {
        "goto": task.args.get("node"),
        "map_region": task.args.get("region"),
        "explore_region": task.args.get("region"),
        "inspect": task.args.get("node"),
        "extend_map": None,
        "answer": task.args.get("text"),
        "clarify": task.args.get("question"),
    }.get(task.behavior)
    for behavior, target in accept:
        if behavior != task.behavior:
            continue
        if behavior == ANSWER:
            if primary is not None and target.casefold() in primary.casefold():
                return True
        elif primary == target:
            return True
    return False


@dataclass(frozen=True)
class EvalResult:
    success_rate: float
    per_case: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {"success_rate": self.success_rate,
                "per_case": list(self.per_case)}


def format_rate(rate: float) -> str:
    """Rates print with one decimal unless whole: '72.7 %', '100 %'."""
    if rate == int(rate):
        return f"{int(rate)} %"
    return f"{rate:.1f} %"


def evaluate(client: ModelClient, cases: list[EvalCase], repeats: int = 1) -> EvalResult:
    """Single planning iteration per case: the response must parse, validate,
    and open with an accepted (behavior, target) pair.

    `repeats` re-runs the whole case list and pools the pass fraction; with a
    deterministic client it changes nothing, with a sampling endpoint it
    averages over trials."""
    if not cases:
        raise ValueError("cases must be non-empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    per_case: list[dict] = []
    passes = 0
    expanded = [(i, case) for _ in range(repeats) for i, case in enumerate(cases)]
    for i, case in expanded:
        prompt = behavior_api_description(case.profile) + "\n\n" + render_user_message(
            case.spec, case.graph, [], case.robot_at)
        entry: dict = {"case_index": i, "passed": False, "reason": ""}
        try:
            raw = client.complete(prompt)
        except TransportError as exc:
            entry["reason"] = f"transport error: {exc}"
            per_case.append(entry)
            continue
        try:
            plan = parse_plan(raw)
        except PlanParseError as exc:
            entry["reason"] = f"parse error: {exc}"
            per_case.append(entry)
            continue
        occ = grid_for_graph(case.graph)
        report = validate(plan, case.graph, case.robot_at, occ, case.profile)
        if not report.ok:
            entry["reason"] = f"validation error: {report.feedback_text}"
            per_case.append(entry)
            continue
        if not _first_task_matches(plan, case.accept):
            first = plan.tasks[0]
            entry["reason"] = f"first task {first.behavior} {first.args} not accepted"
            per_case.append(entry)
            continue
        entry["passed"] = True
        passes += 1
        per_case.append(entry)
    rate = round(100.0 * passes / (len(cases) * repeats), 1)
    return EvalResult(success_rate=rate, per_case=tuple(per_case))
