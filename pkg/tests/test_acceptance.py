"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line with its measured result when it holds."""

import json
import random
import time

import pytest
from click.testing import CliRunner

from fieldplan import fixtures
from fieldplan.cli import main as cli_main
from fieldplan.distill import collect, evaluate, export_corpus, format_rate, import_corpus, revalidate_record
from fieldplan.errors import ExecutionError
from fieldplan.graph import apply_diff, graph_diff, merge
from fieldplan.grid import OBSTACLE, OccupancyGrid
from fieldplan.loop import LoopConfig, run_suite
from fieldplan.plan import Action, Plan, default_ugv_profile
from fieldplan.validate import validate
from fieldplan.world import execute, initial_state, scenario_from_dict
from generators import graph_raw, random_graph, random_grid
from oracles import bfs_reachable, grid_path_exists

UGV = default_ugv_profile()


def test_reachability_oracle_1000_graphs():
    """Validator reachability agrees with an independent BFS oracle on 1,000
    seeded random graphs x random goto plans, under 10 seconds."""
    t0 = time.monotonic()
    occ = OccupancyGrid.blank(4, 4, 100.0, (-100.0, -100.0))
    checked = 0
    for seed in range(1000):
        rng = random.Random(seed)
        g = random_graph(rng, max_regions=rng.randint(2, 80),
                         max_objects=rng.randint(0, 20),
                         edge_prob=rng.uniform(0.02, 0.3))
        kinds, _, trav, cont = graph_raw(g)
        ids = list(g.node_ids())
        robot_at = rng.choice([n.id for n in g.nodes if n.kind == "region"])
        for _ in range(3):
            target = rng.choice(ids)
            plan = Plan(reasoning="", tasks=(Action.goto(target),))
            report = validate(plan, g, robot_at, occ, UGV)
            flagged = any(v.kind == "reachability" for v in report.violations)
            want = bfs_reachable(kinds, trav, cont, robot_at, target)
            assert flagged == (not want), (seed, robot_at, target)
            checked += 1
    elapsed = time.monotonic() - t0
    assert elapsed < 10.0, f"reachability oracle took {elapsed:.1f}s"
    print(f"\nPASS reachability-oracle: {checked} decisions on 1000 graphs "
          f"agree 100% in {elapsed:.1f}s")


def test_explorable_oracle_200_grids():
    """Explorable decisions agree with an independent 4-connected grid search
    on 200 seeded 64x64 grids with obstacle density 0-40%."""
    from fieldplan.graph import Edge, Node, SemanticGraph
    checked = 0
    for seed in range(200):
        rng = random.Random(10_000 + seed)
        occ = random_grid(rng, rows=64, cols=64, density=rng.uniform(0.0, 0.4),
                          unknown_frac=rng.uniform(0.0, 0.3))
        sx, sy = rng.uniform(0, 64), rng.uniform(0, 64)
        while occ.state_at(occ.world_to_cell((sx, sy))) == OBSTACLE:
            sx, sy = rng.uniform(0, 64), rng.uniform(0, 64)
        tx, ty = rng.uniform(0, 64), rng.uniform(0, 64)
        g = SemanticGraph(
            [Node("s", "region", "r", sx, sy), Node("t", "region", "r", tx, ty)],
            [Edge("s", "t", "traversability")])
        plan = Plan(reasoning="", tasks=(Action.explore_region("t", 5.0),))
        report = validate(plan, g, "s", occ, UGV)
        want = grid_path_exists(occ.cells, occ.world_to_cell((sx, sy)),
                                occ.world_to_cell((tx, ty)))
        assert report.ok == want, seed
        checked += 1
    assert checked == 200
    print(f"\nPASS explorable-oracle: {checked} grids agree 100%")


def test_feedback_ablation_repair_suite():
    """20 scripted faulty-then-corrected missions: success is 20/20 with
    feedback and at most 2/20 without; on >= off."""
    on = run_suite(fixtures.repair_suite(20), LoopConfig(feedback_enabled=True))
    on_successes = sum(1 for r in on.rows if r.outcome == "1/1")
    off = run_suite(fixtures.repair_suite(20), LoopConfig(feedback_enabled=False))
    off_successes = sum(1 for r in off.rows if r.outcome == "1/1")
    assert on_successes == 20, f"feedback-on solved only {on_successes}/20"
    assert off_successes <= 2, f"feedback-off solved {off_successes}/20"
    assert on_successes >= off_successes

    # The same ablation must be reachable through the CLI flag.
    spec, scenario, script = fixtures.repair_case(0)
    runner = CliRunner()
    with runner.isolated_filesystem():
        with open("scenario.json", "w") as fh:
            json.dump(scenario.to_dict(), fh)
        with open("script.json", "w") as fh:
            json.dump(script, fh)
        flagged = runner.invoke(cli_main, [
            "run", "--scenario", "scenario.json", "--scripted", "script.json",
            "--spec", spec, "--no-feedback"])
        assert flagged.exit_code != 0
    print(f"\nPASS feedback-ablation: on {on_successes}/20, off {off_successes}/20")


def test_determinism_byte_identical_files():
    """The same mission, seed, and script produce byte-identical trace and
    report files."""
    runner = CliRunner()
    outputs = []
    for attempt in ("a", "b"):
        with runner.isolated_filesystem():
            result = runner.invoke(cli_main, [
                "run", "--scenario", "builtin:demo", "--scripted", "builtin:demo",
                "--seed", "3", "--trace", "trace.jsonl", "--report", "report.json"])
            assert result.exit_code == 0, result.output
            outputs.append((open("trace.jsonl", "rb").read(),
                            open("report.json", "rb").read()))
    assert outputs[0][0] == outputs[1][0], "trace files differ"
    assert outputs[0][1] == outputs[1][1], "report files differ"
    print(f"\nPASS determinism: trace ({len(outputs[0][0])} bytes) and report "
          f"({len(outputs[0][1])} bytes) byte-identical across runs")


def _random_scenario_and_plans(seed: int):
    rng = random.Random(50_000 + seed)
    g = random_graph(rng, max_regions=8, max_objects=4, edge_prob=0.3)
    regions = [n for n in g.nodes if n.kind == "region"]
    start = rng.choice(regions)
    # Start node must be visible; rebuild with the flag forced on.
    nodes = [n if n.id != start.id else
             type(n)(n.id, n.kind, n.cls, n.x, n.y, n.desc, True) for n in g.nodes]
    from fieldplan.graph import SemanticGraph, serialize_graph
    g = SemanticGraph(nodes, g.edges)
    obstacles = []
    for _ in range(rng.randint(0, 3)):
        x0 = rng.uniform(0, 90)
        y0 = rng.uniform(0, 90)
        obstacles.append([x0, y0, x0 + rng.uniform(2, 25), y0 + rng.uniform(2, 25)])
    scenario = scenario_from_dict({
        "id": f"fuzz_{seed}",
        "graph": json.loads(serialize_graph(g)),
        "grid": {"rows": 28, "cols": 28, "resolution": 4.0, "origin": [-6.0, -6.0],
                 "obstacles": obstacles},
        "start_node": start.id,
        "profile": {"kind": "ugv",
                    "allowed_behaviors": ["goto", "map_region", "explore_region",
                                          "extend_map", "inspect", "answer", "clarify"]},
        "goal": {"type": "visit_node", "node": start.id},
    })
    ids = list(g.node_ids())
    plans = []
    for _ in range(6):
        tasks = []
        for _ in range(rng.randint(1, 4)):
            roll = rng.random()
            target = rng.choice(ids + ["phantom_zone"])
            if roll < 0.45:
                tasks.append(Action.goto(target))
            elif roll < 0.65:
                tasks.append(Action.map_region(target))
            elif roll < 0.8:
                tasks.append(Action.explore_region(target, rng.uniform(2, 20)))
            elif roll < 0.9:
                tasks.append(Action.extend_map(rng.uniform(-40, 140), rng.uniform(-40, 140)))
            else:
                tasks.append(Action.inspect(target, "look"))
        plans.append(Plan(reasoning="", tasks=tuple(tasks)))
    return scenario, plans


def test_soundness_no_approved_plan_fails_execution():
    """Across a randomized suite, no validator-approved plan ever triggers a
    syntax or reachability execution error."""
    approved = 0
    executed_tasks = 0
    refusals = 0
    for seed in range(150):
        scenario, plans = _random_scenario_and_plans(seed)
        for plan in plans:
            state = initial_state(scenario)
            report = validate(plan, state.known, state.at, state.known_occ,
                              scenario.profile)
            if not report.ok:
                continue
            approved += 1
            for task in plan.tasks:
                try:
                    state, result = execute(task, scenario, state)
                except ExecutionError:
                    refusals += 1
                    break
                executed_tasks += 1
                if result.done:
                    break
    assert approved >= 100, f"only {approved} plans approved; fuzz too weak"
    assert refusals == 0, f"{refusals} validator-approved tasks were refused"
    print(f"\nPASS soundness: {approved} approved plans, {executed_tasks} tasks "
          f"executed, 0 refusals")


def test_table_shapes():
    """The suite table renders the outcome ratios and the eval harness prints
    the comparison-table percentages."""
    report = run_suite(fixtures.outcome_suite(), LoopConfig())
    outcomes = [r.outcome for r in report.rows]
    assert outcomes == ["1/3", "2/2", "4/4", "1/1", "1/1", "1/1", "1/1", "1/1"]

    distilled = evaluate(fixtures.eval_client_distilled(), fixtures.eval_cases())
    assert format_rate(distilled.success_rate) == "72.7 %"
    perfect = evaluate(fixtures.eval_client_perfect(), fixtures.eval_cases())
    assert format_rate(perfect.success_rate) == "100 %"
    print(f"\nPASS table-shapes: outcomes {outcomes}, eval rates "
          f"{format_rate(distilled.success_rate)} and {format_rate(perfect.success_rate)}")


def test_corpus_hygiene_100_records(tmp_path):
    """A 100-record generated corpus re-validates at 100% and round-trips
    losslessly through export/import."""
    missions = fixtures.collection_missions(60)
    records = collect(missions, fixtures.collection_client(60), LoopConfig(),
                      limit=100)
    assert len(records) == 100
    failures = [reason for rec in records
                for ok, reason in [revalidate_record(rec)] if not ok]
    assert not failures, failures[:3]
    path = tmp_path / "corpus.jsonl"
    export_corpus(records, str(path))
    assert import_corpus(str(path)) == records
    assert len(path.read_text(encoding="utf-8").splitlines()) == 100
    print("\nPASS corpus-hygiene: 100/100 records re-validate and round-trip")


def test_graph_algebra_500_pairs():
    """diff/apply round-trip and merge idempotence on 500 randomized pairs."""
    for seed in range(500):
        rng = random.Random(90_000 + seed)
        base = random_graph(rng)
        updated = random_graph(rng)
        assert apply_diff(base, graph_diff(base, updated)) == updated, seed
        assert merge(base, base, "self") == base, seed
    print("\nPASS graph-algebra: 500 diff/apply round-trips and merge "
          "idempotence checks")
