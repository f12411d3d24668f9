"""The closed mission loop.

Per iteration: regain comms if needed, render the prompt, query the model
client, parse and validate the response (retrying with feedback), execute
validated tasks, and fold map updates back into the next prompt. Scripted
clients make the whole loop deterministic and replayable.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol

import httpx

from fieldplan.errors import (
    CoverageUnreachableError,
    PlanParseError,
    ScriptExhaustedError,
    TransportError,
)
from fieldplan.graph import GraphDiff, render_diff_text
from fieldplan.plan import (
    CLARIFY,
    Plan,
    behavior_api_description,
    parse_plan,
    render_user_message,
    serialize_plan,
)
from fieldplan.util import canonical_json, sha256_hex
from fieldplan.validate import validate
from fieldplan.world import (
    ANSWERED,
    BLOCKED,
    CLARIFICATION,
    COMM_LOST,
    COMM_RESTORED,
    WorldScenario,
    check_goal,
    execute,
    in_comms,
    initial_state,
    return_to_comms,
)

SUCCESS = "success"
FAILURE_MAX_ITERATIONS = "failure_max_iterations"
FAILURE_COMM = "failure_comm"
FAILURE_MODEL_ERROR = "failure_model_error"
FAILURE_VALIDATION_EXHAUSTED = "failure_validation_exhausted"
# Terminal answer/clarify that leaves the goal unmet; not one of the four
# canonical failure buckets but a real outcome batch runs can produce.
FAILURE_GOAL_NOT_MET = "failure_goal_not_met"


class ModelClient(Protocol):
    """Anything that maps one prompt to one completion."""

    model_name: str

    def complete(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class ScriptRule:
    """Scripted response selected by prompt content.

    An empty rule always matches; `when_contains` matches on substring and
    `when_sha256` on the exact prompt hash."""

    response: str
    when_contains: str = ""
    when_sha256: str = ""

    def matches(self, prompt: str) -> bool:
        if self.when_sha256:
            return sha256_hex(prompt) == self.when_sha256
        if self.when_contains:
            return self.when_contains in prompt
        return True


class ScriptedClient:
    """Deterministic stand-in for a language model.

    Either a fixed response sequence (consumed in order, exhaustion is an
    error) or an ordered rule list keyed on prompt content (first match
    wins, rules are not consumed)."""

    def __init__(self, responses: list[str] | None = None,
                 rules: list[ScriptRule] | None = None):
        if (responses is None) == (rules is None):
            raise ValueError("provide exactly one of responses or rules")
        self._responses = list(responses) if responses is not None else None
        self._rules = list(rules) if rules is not None else None
        self.model_name = "scripted"
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self._responses is not None:
            if not self._responses:
                raise ScriptExhaustedError("scripted client has no responses left")
            return self._responses.pop(0)
        for rule in self._rules:
            if rule.matches(prompt):
                return rule.response
        raise ScriptExhaustedError("no script rule matches the prompt")


def _rule_from_dict(d: dict) -> ScriptRule:
    if "response_plan" in d:
        response = json.dumps(d["response_plan"], ensure_ascii=False)
    else:
        response = d["response"]
    return ScriptRule(response=response,
                      when_contains=d.get("when_contains", ""),
                      when_sha256=d.get("when_sha256", ""))


def script_from_dict(d: dict) -> ScriptedClient:
    """Script file schema: {"responses": [...]} or {"rules": [...]};
    a response may be given as "response_plan" (a plan object) instead of
    raw text."""
    if "rules" in d:
        return ScriptedClient(rules=[_rule_from_dict(r) for r in d["rules"]])
    responses = []
    for r in d.get("responses", []):
        if isinstance(r, dict):
            responses.append(json.dumps(r, ensure_ascii=False))
        else:
            responses.append(r)
    return ScriptedClient(responses=responses)


def load_script(path: str) -> ScriptedClient:
    with open(path, "r", encoding="utf-8") as fh:
        return script_from_dict(json.load(fh))


class ChatClient:
    """Minimal chat-completions HTTP client.

    POSTs {model, messages, temperature} to <base_url>/chat/completions and
    reads the first choice's message content. Never retries unless a retry
    budget is configured explicitly."""

    def __init__(self, base_url: str, model: str, api_key: str = "",
                 temperature: float = 0.0, timeout: float = 60.0, max_retries: int = 0):
        self.base_url = base_url.rstrip("/")
        self.model_name = model
        self.api_key = api_key
        self.temperature = temperature
        self.timeout = timeout
        self.max_retries = max_retries

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        last_error: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                resp = httpx.post(f"{self.base_url}/chat/completions", json=body,
                                  headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
                content = payload["choices"][0]["message"]["content"]
                if not isinstance(content, str):
                    raise KeyError("content")
                return content
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise TransportError(f"chat endpoint failed: {last_error}")


@dataclass(frozen=True)
class LoopConfig:
    max_iterations: int = 20
    max_validation_retries: int = 3
    feedback_enabled: bool = True
    comm_gating: bool = True
    replan_on_diff: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.max_validation_retries <= 0:
            raise ValueError("loop limits must be positive")


class MissionHooks:
    """Integration points for interactive front ends; no-ops for batch runs."""

    def on_event(self, kind: str, payload: dict) -> None:
        pass

    def await_approval(self, plan: Plan) -> None:
        """Block until the operator approves the proposed plan."""

    def await_operator(self, question: str) -> str | None:
        """Answer to a clarify question; None terminates the mission."""
        return None

    def drain_messages(self) -> list[str]:
        """Operator messages queued since the last planning iteration."""
        return []

    def on_validated_plan(self, system: str, user: str, plan: Plan, iteration: int) -> None:
        """Called once per planning iteration that produced a valid plan."""


@dataclass(frozen=True)
class MissionReport:
    outcome: str
    distance_m: float
    reported_distance_m: float
    iterations: int
    llm_calls: int
    answer: str | None
    trace: tuple[dict, ...]

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "distance_m": self.distance_m,
            "reported_distance_m": self.reported_distance_m,
            "iterations": self.iterations,
            "llm_calls": self.llm_calls,
            "answer": self.answer,
            "trace": list(self.trace),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def _diff_payload(result) -> dict:
    return {"diff": result.diff.to_dict(), "text": render_diff_text(result.diff)}


def run_mission(spec: str, scenario: WorldScenario, client: ModelClient,
                cfg: LoopConfig, hooks: MissionHooks | None = None) -> MissionReport:
    """Run one mission to completion; always returns a report."""
    hooks = hooks or MissionHooks()
    state = initial_state(scenario)
    system_message = behavior_api_description(scenario.profile)
    history: list[str] = []
    trace: list[dict] = []
    answer: str | None = None
    outcome: str | None = None
    llm_calls = 0
    iterations = 0
    mission_done = False

    # Seed the event stream with the starting map so observers can render it.
    start_diff = GraphDiff(added_nodes=state.known.nodes, added_edges=state.known.edges)
    hooks.on_event("map_diff", {
        "diff": start_diff.to_dict(),
        "text": render_diff_text(start_diff),
        "at": state.at,
        "pose": list(state.pose),
    })

    while iterations < cfg.max_iterations and outcome is None and not mission_done:
        iterations += 1

        for msg in hooks.drain_messages():
            history.append("OPERATOR: " + msg)

        # Regain communications before planning: the model server is remote.
        if cfg.comm_gating and not in_comms(scenario, state.pose, state.step):
            try:
                state, result = return_to_comms(scenario, state)
            except CoverageUnreachableError as exc:
                trace.append({"iteration": iterations, "comm_return": {"error": str(exc)}})
                outcome = FAILURE_COMM
                break
            rec = {"step": state.step, "action": {"behavior": "return_to_comms", "args": {}}}
            rec.update(result.to_dict())
            rec.update({"at": state.at, "pose": list(state.pose)})
            trace.append({"iteration": iterations, "comm_return": rec})
            for ev in result.events:
                hooks.on_event("comm_event", ev.to_dict())
            if not result.diff.is_empty():
                history.append("MAP UPDATES:\n" + render_diff_text(result.diff))
                hooks.on_event("map_diff", _diff_payload(result))
            if result.done:
                mission_done = True
                break

        plan: Plan | None = None
        user_message = ""
        for _ in range(cfg.max_validation_retries):
            user_message = render_user_message(spec, state.known, history, state.at)
            prompt = system_message + "\n\n" + user_message
            try:
                raw = client.complete(prompt)
            except TransportError as exc:
                trace.append({
                    "iteration": iterations,
                    "prompt_digest": sha256_hex(prompt),
                    "raw_response": None,
                    "plan": None,
                    "validation_report": None,
                    "step_results": [],
                    "transport_error": str(exc),
                })
                outcome = FAILURE_MODEL_ERROR
                break
            llm_calls += 1
            record = {
                "iteration": iterations,
                "prompt_digest": sha256_hex(prompt),
                "raw_response": raw,
                "plan": None,
                "validation_report": None,
                "step_results": [],
            }
            trace.append(record)
            try:
                candidate = parse_plan(raw)
            except PlanParseError as exc:
                feedback = f"Plan could not be parsed: {exc}"
                record["validation_report"] = {"ok": False, "violations": [],
                                               "feedback_text": feedback}
                hooks.on_event("validation_failed", {"feedback": feedback})
                if cfg.feedback_enabled:
                    history.append("PLANNING FEEDBACK:\n" + feedback)
                continue
            record["plan"] = candidate.to_dict()
            report = validate(candidate, state.known, state.at, state.known_occ,
                              scenario.profile)
            record["validation_report"] = report.to_dict()
            if not report.ok:
                hooks.on_event("validation_failed", {"feedback": report.feedback_text})
                if cfg.feedback_enabled:
                    history.append("VALIDATION FEEDBACK:\n" + report.feedback_text)
                continue
            plan = candidate
            break
        if outcome is not None:
            break
        if plan is None:
            outcome = FAILURE_VALIDATION_EXHAUSTED
            break

        hooks.on_validated_plan(system_message, user_message, plan, iterations)
        hooks.on_event("plan_proposed", {
            "reasoning": plan.reasoning,
            "tasks": [t.to_dict() for t in plan.tasks],
            "serialized": serialize_plan(plan),
        })
        hooks.await_approval(plan)

        record = trace[-1]
        for ti, task in enumerate(plan.tasks):
            # The world may have shifted mid-plan (blocked corridors, map
            # growth); re-check each task where the robot actually is.
            single = validate(Plan("", (task,)), state.known, state.at,
                              state.known_occ, scenario.profile)
            if not single.ok:
                hooks.on_event("validation_failed", {"feedback": single.feedback_text})
                if cfg.feedback_enabled:
                    history.append("VALIDATION FEEDBACK:\n" + single.feedback_text)
                break
            hooks.on_event("task_started", {"index": ti, "action": task.to_dict()})
            state, result = execute(task, scenario, state)
            step_rec = {"step": state.step, "task_index": ti, "action": task.to_dict()}
            step_rec.update(result.to_dict())
            step_rec.update({"at": state.at, "pose": list(state.pose)})
            record["step_results"].append(step_rec)
            hooks.on_event("task_finished", step_rec)

            blocked_texts = []
            for ev in result.events:
                if ev.kind in (COMM_LOST, COMM_RESTORED):
                    hooks.on_event("comm_event", ev.to_dict())
                elif ev.kind == ANSWERED:
                    answer = ev.text
                    hooks.on_event("answered", {"text": ev.text})
                elif ev.kind == CLARIFICATION:
                    hooks.on_event("clarification", {"question": ev.text})
                elif ev.kind == BLOCKED:
                    blocked_texts.append(ev.text)

            has_diff = not result.diff.is_empty()
            if has_diff:
                history.append("MAP UPDATES:\n" + render_diff_text(result.diff))
                hooks.on_event("map_diff", _diff_payload(result))
            if blocked_texts:
                history.append("EXECUTION EVENT:\n" + "\n".join(blocked_texts))

            if result.done:
                if task.behavior == CLARIFY:
                    reply = hooks.await_operator(task.args["question"])
                    if reply is not None:
                        history.append("OPERATOR: " + reply)
                        break
                mission_done = True
                break
            if blocked_texts:
                break
            if cfg.replan_on_diff and has_diff:
                break

    if outcome is None:
        if mission_done:
            outcome = SUCCESS if check_goal(scenario, state, answer) else FAILURE_GOAL_NOT_MET
        else:
            outcome = FAILURE_MAX_ITERATIONS

    report = MissionReport(
        outcome=outcome,
        distance_m=state.odometer_m,
        reported_distance_m=state.reported_odometer_m,
        iterations=iterations,
        llm_calls=llm_calls,
        answer=answer,
        trace=tuple(trace),
    )
    hooks.on_event("done", {"outcome": outcome, "distance_m": state.odometer_m,
                            "iterations": iterations})
    return report


# -- suite running ----------------------------------------------------------


@dataclass
class SuiteCase:
    """One specification, run one or more times against a scenario."""

    spec_id: str
    spec: str
    scenario: WorldScenario
    client_factory: Callable[[int], ModelClient]
    runs: int = 1


@dataclass
class SuiteRow:
    spec_id: str
    outcome: str
    avg_distance_m: int
    failure_modes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "outcome": self.outcome,
            "avg_distance_m": self.avg_distance_m,
            "failure_modes": list(self.failure_modes),
        }


@dataclass
class SuiteReport:
    rows: tuple[SuiteRow, ...]
    reports: dict[str, list[MissionReport]]

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "runs": {sid: [r.to_dict() for r in reps] for sid, reps in self.reports.items()},
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def _run_failure_modes(report: MissionReport) -> set[str]:
    modes: set[str] = set()
    if report.outcome == FAILURE_COMM:
        modes.add("Comm.")
    for rec in report.trace:
        results = rec.get("step_results", [])
        if "comm_return" in rec:
            results = results + [rec["comm_return"]]
        for step in results:
            for ev in step.get("events", []):
                if ev["kind"] == COMM_LOST:
                    modes.add("Comm.")
                if ev["kind"] == BLOCKED:
                    modes.add("Obst. det.")
    if abs(report.reported_distance_m - report.distance_m) > 1e-6:
        modes.add("Odometry")
    return modes


def run_suite(cases: list[SuiteCase], cfg: LoopConfig, jobs: int = 1) -> SuiteReport:
    """Run every case; aggregate per-spec outcome ratios, average distance
    (rounded to meters), and a failure-mode tally. Parallel execution over
    independent sessions never changes a single report byte."""
    tasks = [(ci, ri) for ci, case in enumerate(cases) for ri in range(case.runs)]

    def one(key: tuple[int, int]) -> MissionReport:
        ci, ri = key
        case = cases[ci]
        return run_mission(case.spec, case.scenario, case.client_factory(ri), cfg)

    results: dict[tuple[int, int], MissionReport] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for key, rep in zip(tasks, pool.map(one, tasks)):
                results[key] = rep
    else:
        for key in tasks:
            results[key] = one(key)

    rows: list[SuiteRow] = []
    reports: dict[str, list[MissionReport]] = {}
    for ci, case in enumerate(cases):
        runs = [results[(ci, ri)] for ri in range(case.runs)]
        reports[case.spec_id] = runs
        successes = sum(1 for r in runs if r.success)
        avg = round(sum(r.distance_m for r in runs) / len(runs)) if runs else 0
        modes: set[str] = set()
        for r in runs:
            modes |= _run_failure_modes(r)
        rows.append(SuiteRow(
            spec_id=case.spec_id,
            outcome=f"{successes}/{len(runs)}",
            avg_distance_m=avg,
            failure_modes=tuple(sorted(modes)) if modes else ("N/A",),
        ))
    return SuiteReport(rows=tuple(rows), reports=reports)


def render_suite_table(report: SuiteReport) -> str:
    """Rows of Specification / Outcome / Avg. Distance (m) / Failure modes."""
    headers = ("Specification", "Outcome", "Avg. Distance (m)", "Failure modes")
    rows = [(r.spec_id, r.outcome, str(r.avg_distance_m), ", ".join(r.failure_modes))
            for r in report.rows]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(headers), line(tuple("-" * w for w in widths))]
    out.extend(line(row) for row in rows)
    return "\n".join(out)
