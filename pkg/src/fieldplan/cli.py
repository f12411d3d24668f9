"""Batch entry points: run missions and suites, run the validation-feedback
ablation, generate distillation corpora, evaluate planner clients, and serve
the mission-control service."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from fieldplan import fixtures
from fieldplan.distill import (
    collect,
    evaluate,
    export_corpus,
    format_rate,
    load_eval_cases,
)
from fieldplan.errors import FieldPlanError
from fieldplan.loop import (
    ChatClient,
    LoopConfig,
    ModelClient,
    SuiteCase,
    load_script,
    run_mission,
    run_suite,
    render_suite_table,
)
from fieldplan.util import canonical_json
from fieldplan.world import WorldScenario, load_scenario

ENV_BASE = "FIELDPLAN_API_BASE"
ENV_KEY = "FIELDPLAN_API_KEY"
ENV_MODEL = "FIELDPLAN_MODEL"
ENV_TEMPERATURE = "FIELDPLAN_TEMPERATURE"


def _chat_client_from_env(endpoint: str | None, model: str | None,
                          temperature: float | None) -> ChatClient:
    base = endpoint or os.environ.get(ENV_BASE, "")
    if not base:
        raise click.ClickException(
            f"no model endpoint: pass --endpoint or set {ENV_BASE}, or use --scripted")
    name = model or os.environ.get(ENV_MODEL, "gpt-4o")
    temp = temperature if temperature is not None else float(
        os.environ.get(ENV_TEMPERATURE, "0"))
    return ChatClient(base_url=base, model=name,
                      api_key=os.environ.get(ENV_KEY, ""), temperature=temp)


def _resolve_client(scripted: str | None, endpoint: str | None, model: str | None,
                    temperature: float | None) -> ModelClient:
    if scripted:
        if scripted == "builtin:demo":
            return fixtures.demo_client()
        if scripted == "builtin:console":
            return fixtures.console_client()
        if scripted == "builtin:uav-demo":
            from fieldplan.loop import script_from_dict
            return script_from_dict(fixtures.uav_demo_script())
        if scripted == "builtin:perfect":
            return fixtures.eval_client_perfect()
        if scripted == "builtin:distilled":
            return fixtures.eval_client_distilled()
        if scripted == "builtin:garbage":
            return fixtures.eval_client_garbage()
        if scripted == "builtin:collection":
            return fixtures.collection_client()
        if not Path(scripted).exists():
            raise click.ClickException(f"script file not found: {scripted}")
        return load_script(scripted)
    return _chat_client_from_env(endpoint, model, temperature)


def _resolve_scenario(path: str) -> WorldScenario:
    if path == "builtin:demo":
        return fixtures.demo_scenario()
    if not Path(path).exists():
        raise click.ClickException(f"scenario file not found: {path}")
    try:
        return load_scenario(path)
    except FieldPlanError as exc:
        raise click.ClickException(str(exc))


def _loop_config(seed: int, no_feedback: bool, no_comm_gating: bool,
                 max_iterations: int) -> LoopConfig:
    return LoopConfig(
        max_iterations=max_iterations,
        feedback_enabled=not no_feedback,
        comm_gating=not no_comm_gating,
        seed=seed,
    )


@click.group()
def main():
    """Closed-loop mission planning over semantic maps."""


@main.command()
@click.option("--scenario", "scenario_path", required=True,
              help="Scenario file, or builtin:demo.")
@click.option("--spec", "spec_text", default=None, help="Mission specification text.")
@click.option("--spec-file", type=click.Path(), default=None)
@click.option("--scripted", default=None,
              help="Scripted client file, or builtin:demo.")
@click.option("--endpoint", default=None, help="Chat-completions base URL.")
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--no-feedback", is_flag=True, help="Disable validation feedback (ablation arm).")
@click.option("--no-comm-gating", is_flag=True)
@click.option("--max-iterations", type=int, default=20)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Write the trace record stream (JSONL).")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the full mission report (JSON).")
def run(scenario_path, spec_text, spec_file, scripted, endpoint, model, temperature,
        seed, no_feedback, no_comm_gating, max_iterations, trace_path, report_path):
    """Run one mission; exit 0 iff the mission succeeds."""
    scenario = _resolve_scenario(scenario_path)
    if spec_text is None and spec_file:
        spec_text = Path(spec_file).read_text(encoding="utf-8").strip()
    if spec_text is None:
        if scenario_path == "builtin:demo":
            spec_text = fixtures.demo_spec()
        else:
            raise click.ClickException("provide --spec or --spec-file")
    client = _resolve_client(scripted, endpoint, model, temperature)
    cfg = _loop_config(seed, no_feedback, no_comm_gating, max_iterations)
    report = run_mission(spec_text, scenario, client, cfg)
    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as fh:
            for record in report.trace:
                fh.write(canonical_json(record) + "\n")
    if report_path:
        Path(report_path).write_text(report.to_json() + "\n", encoding="utf-8")
    click.echo(f"outcome: {report.outcome}")
    click.echo(f"distance_m: {report.distance_m:.1f}")
    click.echo(f"iterations: {report.iterations}  llm_calls: {report.llm_calls}")
    if report.answer is not None:
        click.echo(f"answer: {report.answer}")
    sys.exit(0 if report.success else 1)


def _load_suite_cases(cases_path: str, scripted: str | None, endpoint: str | None,
                      model: str | None, temperature: float | None) -> list[SuiteCase]:
    if cases_path == "builtin:outcomes":
        return fixtures.outcome_suite()
    if cases_path == "builtin:uav":
        client = _resolve_client(scripted, endpoint, model, temperature)
        return [SuiteCase(spec_id=f"M{i + 1}", spec=spec, scenario=scn,
                          client_factory=lambda run, c=client: c, runs=1)
                for i, (spec, scn) in enumerate(fixtures.uav_missions())]
    if not Path(cases_path).exists():
        raise click.ClickException(f"cases file not found: {cases_path}")
    base = Path(cases_path).parent
    data = json.loads(Path(cases_path).read_text(encoding="utf-8"))
    cases = []
    for entry in data["cases"]:
        scenario = _resolve_scenario(str(base / entry["scenario"])
                                     if not entry["scenario"].startswith("builtin:")
                                     else entry["scenario"])
        runs = int(entry.get("runs", 1))
        scripts = entry.get("scripts")
        script = entry.get("script")
        if scripts:
            paths = [str(base / s) for s in scripts]
            factory = lambda run, p=paths: load_script(p[run % len(p)])
        elif script:
            path = str(base / script)
            factory = lambda run, p=path: load_script(p)
        else:
            client = _chat_client_from_env(endpoint, model, temperature)
            factory = lambda run, c=client: c
        cases.append(SuiteCase(spec_id=entry["id"], spec=entry["spec"],
                               scenario=scenario, client_factory=factory, runs=runs))
    return cases


@main.command()
@click.option("--cases", "cases_path", default="builtin:outcomes",
              help="Suite file, builtin:outcomes, or builtin:uav.")
@click.option("--scripted", default=None)
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--jobs", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
def suite(cases_path, scripted, endpoint, model, temperature, jobs, seed, out_path):
    """Run a mission suite and print the outcome table."""
    cases = _load_suite_cases(cases_path, scripted, endpoint, model, temperature)
    report = run_suite(cases, _loop_config(seed, False, False, 20), jobs=jobs)
    click.echo(render_suite_table(report))
    if out_path:
        Path(out_path).write_text(report.to_json() + "\n", encoding="utf-8")


@main.command()
@click.option("--size", type=int, default=20, help="Number of repair missions.")
@click.option("--jobs", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
def ablation(size, jobs, seed, out_path):
    """Run the repair suite with validation feedback on and off."""
    results = {}
    for feedback_on in (True, False):
        cases = fixtures.repair_suite(size)
        cfg = LoopConfig(feedback_enabled=feedback_on, seed=seed)
        report = run_suite(cases, cfg, jobs=jobs)
        successes = sum(1 for row in report.rows if row.outcome == "1/1")
        results["on" if feedback_on else "off"] = {
            "successes": successes,
            "total": len(cases),
            "rows": [r.to_dict() for r in report.rows],
        }
        click.echo(f"feedback {'on ' if feedback_on else 'off'}: "
                   f"{successes}/{len(cases)} missions succeeded")
    if out_path:
        Path(out_path).write_text(canonical_json(results) + "\n", encoding="utf-8")
    if results["on"]["successes"] < results["off"]["successes"]:
        click.echo("warning: feedback-on underperformed feedback-off", err=True)
        sys.exit(1)


@main.command(name="collect")
@click.option("--missions", "missions_path", default="builtin:collection",
              help="Missions file or builtin:collection.")
@click.option("--scripted", default="builtin:collection")
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--limit", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), required=True)
def collect_cmd(missions_path, scripted, endpoint, model, temperature, limit, seed, out_path):
    """Collect expert planning iterations into a finetuning corpus."""
    if missions_path == "builtin:collection":
        missions = fixtures.collection_missions()
    else:
        if not Path(missions_path).exists():
            raise click.ClickException(f"missions file not found: {missions_path}")
        base = Path(missions_path).parent
        data = json.loads(Path(missions_path).read_text(encoding="utf-8"))
        missions = [(entry["spec"], _resolve_scenario(str(base / entry["scenario"])))
                    for entry in data["missions"]]
    client = _resolve_client(scripted, endpoint, model, temperature)
    records = collect(missions, client, _loop_config(seed, False, False, 20), limit=limit)
    export_corpus(records, out_path)
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command(name="eval")
@click.option("--cases", "cases_path", default="builtin:eval",
              help="Eval-set file or builtin:eval.")
@click.option("--scripted", default=None,
              help="Scripted client file, or builtin:perfect / builtin:distilled / builtin:garbage.")
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--repeats", type=int, default=1)
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_cmd(cases_path, scripted, endpoint, model, temperature, repeats, out_path):
    """Score a planner client on held-out short-horizon cases."""
    if cases_path == "builtin:eval":
        cases = fixtures.eval_cases()
    else:
        if not Path(cases_path).exists():
            raise click.ClickException(f"cases file not found: {cases_path}")
        cases = load_eval_cases(cases_path)
    client = _resolve_client(scripted, endpoint, model, temperature)
    result = evaluate(client, cases, repeats=repeats)
    for entry in result.per_case:
        status = "pass" if entry["passed"] else f"fail ({entry['reason']})"
        click.echo(f"case {entry['case_index']}: {status}")
    click.echo("")
    click.echo("Model                Success Rate")
    click.echo(f"{client.model_name:<20} {format_rate(result.success_rate)}")
    if out_path:
        Path(out_path).write_text(canonical_json(result.to_dict()) + "\n", encoding="utf-8")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--scenarios", "scenarios_dir", type=click.Path(), default=None,
              help="Directory of scenario JSON files to register.")
@click.option("--scripted", default="builtin:console")
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Serve the operator console from this directory.")
def serve(host, port, scenarios_dir, scripted, endpoint, model, temperature, static_dir):
    """Start the mission-control service."""
    import uvicorn

    from fieldplan.service import MissionService, create_app

    scenarios: dict[str, WorldScenario] = {
        "demo": fixtures.demo_scenario(),
        "two_lots": fixtures.clarify_scenario(),
    }
    for _, scn in fixtures.uav_missions():
        scenarios[scn.id] = scn
    if scenarios_dir:
        for path in sorted(Path(scenarios_dir).glob("*.json")):
            scn = _resolve_scenario(str(path))
            scenarios[scn.id] = scn

    def client_factory():
        return _resolve_client(scripted, endpoint, model, temperature)

    service = MissionService(scenarios=scenarios, client_factory=client_factory)
    app = create_app(service, static_dir=static_dir)
    click.echo(f"serving {len(scenarios)} scenarios on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command(name="init-demo")
@click.option("--out", "out_dir", type=click.Path(), default="demo")
def init_demo(out_dir):
    """Write the demo scenario and script files for hand editing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(
        json.dumps(fixtures.demo_scenario().to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "script.json").write_text(
        json.dumps(fixtures.demo_script(), indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {out / 'scenario.json'} and {out / 'script.json'}")
    click.echo(f"try: fieldplan run --scenario {out / 'scenario.json'} "
               f"--scripted {out / 'script.json'} --spec \"{fixtures.demo_spec()}\"")


if __name__ == "__main__":
    main()
