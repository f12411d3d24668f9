"""Distillation pipeline: spec generation, collection, corpus I/O, eval."""

import json

import pytest

from fieldplan import fixtures
from fieldplan.distill import (
    DatasetRecord,
    EvalCase,
    collect,
    evaluate,
    export_corpus,
    extract_graph,
    extract_location,
    format_rate,
    generate_specs,
    import_corpus,
    revalidate_record,
)
from fieldplan.graph import Edge, Node, SemanticGraph
from fieldplan.loop import LoopConfig, ScriptRule, ScriptedClient


def lot_graph() -> SemanticGraph:
    nodes = [Node("home", "region", "base", 0, 0),
             Node("lot_south", "region", "parking_lot", 30, -10),
             Node("car_7", "object", "car", 32, -12)]
    edges = [Edge("home", "lot_south", "traversability"),
             Edge("lot_south", "car_7", "containment")]
    return SemanticGraph(nodes, edges)


class TestGenerateSpecs:
    def test_template_mentions_graph_content(self):
        specs = generate_specs(lot_graph(), 6, mode="template", seed=1)
        assert len(specs) == 6
        mentions = [s for s in specs
                    if "lot_south" in s or "parking lot" in s or "home" in s
                    or "base" in s or "car_7" in s]
        assert mentions

    def test_activity_template_instantiates(self):
        specs = generate_specs(lot_graph(), 30, mode="template", seed=3)
        assert any(s.startswith("Is there activity in the") for s in specs)

    def test_reproducible_under_seed(self):
        a = generate_specs(lot_graph(), 10, mode="template", seed=9)
        b = generate_specs(lot_graph(), 10, mode="template", seed=9)
        assert a == b

    def test_model_mode_filters_unknown_ids(self):
        client = ScriptedClient(responses=[
            "Map the area around lot_south\n"
            "Inspect warehouse_9 for damage\n"
            "Drive to car_7 and report"])
        specs = generate_specs(lot_graph(), 3, mode="model", client=client)
        assert "Map the area around lot_south" in specs
        assert all("warehouse_9" not in s for s in specs)
        assert len(specs) == 2


class TestCollect:
    def test_single_iteration_mission_yields_one_record(self):
        missions = fixtures.collection_missions(1)
        spec, scenario = missions[0]
        client = ScriptedClient(responses=[json.dumps(
            {"reasoning": "", "tasks": [{"behavior": "answer",
                                         "args": {"text": "Found a car in lot_0."}}]})])
        records = collect([(spec, scenario)], client, LoopConfig())
        assert len(records) == 1
        assert records[0].meta["iteration"] == 1
        assert records[0].meta["scenario_id"] == scenario.id

    def test_invalid_attempts_never_become_records(self):
        missions = fixtures.collection_missions(1)
        spec, scenario = missions[0]
        client = ScriptedClient(rules=[
            ScriptRule(when_contains="violation", response=json.dumps(
                {"reasoning": "", "tasks": [{"behavior": "answer",
                                             "args": {"text": "a car, found"}}]})),
            ScriptRule(response=json.dumps(
                {"reasoning": "", "tasks": [{"behavior": "goto",
                                             "args": {"node": "ghost_town"}}]})),
        ])
        records = collect([(spec, scenario)], client, LoopConfig())
        assert len(records) == 1
        assert "ghost_town" not in records[0].assistant

    def test_records_revalidate_against_their_own_user_message(self):
        missions = fixtures.collection_missions(8)
        records = collect(missions, fixtures.collection_client(8), LoopConfig())
        assert len(records) == 16
        for rec in records:
            ok, reason = revalidate_record(rec)
            assert ok, reason

    def test_record_count_matches_successful_iterations(self):
        missions = fixtures.collection_missions(5)
        client = fixtures.collection_client(5)
        records = collect(missions, client, LoopConfig())
        # Two planning iterations per mission: goto, then answer.
        assert len(records) == 10

    def test_failing_scenarios_are_skipped(self):
        missions = fixtures.collection_missions(2)
        client = ScriptedClient(responses=[json.dumps(
            {"reasoning": "", "tasks": [{"behavior": "answer",
                                         "args": {"text": "Found a car in lot_0."}}]})])
        # The single response serves mission 0; mission 1 exhausts the script.
        records = collect(missions, client, LoopConfig())
        assert len(records) >= 1


class TestCorpusIO:
    def test_empty_corpus_is_empty_file(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        export_corpus([], str(path))
        assert path.read_bytes() == b""
        assert import_corpus(str(path)) == []

    def test_roundtrip_and_line_count(self, tmp_path):
        missions = fixtures.collection_missions(10)
        records = collect(missions, fixtures.collection_client(10), LoopConfig())
        path = tmp_path / "corpus.jsonl"
        export_corpus(records, str(path))
        text = path.read_text(encoding="utf-8")
        assert text.endswith("\n")
        assert len(text.splitlines()) == len(records)
        back = import_corpus(str(path))
        assert back == records

    def test_extractors(self):
        missions = fixtures.collection_missions(1)
        records = collect(missions, fixtures.collection_client(1), LoopConfig())
        rec = records[0]
        graph = extract_graph(rec.user)
        assert "home" in graph
        assert extract_location(rec.user) == "home"

    def test_record_shape_enforced(self):
        with pytest.raises(Exception):
            DatasetRecord(messages=({"role": "user", "content": "x"},), meta={})


class TestEvaluate:
    def test_eight_of_eleven_is_72_7(self):
        result = evaluate(fixtures.eval_client_distilled(), fixtures.eval_cases())
        assert result.success_rate == 72.7
        assert format_rate(result.success_rate) == "72.7 %"

    def test_all_pass_is_100(self):
        result = evaluate(fixtures.eval_client_perfect(), fixtures.eval_cases())
        assert result.success_rate == 100.0
        assert format_rate(result.success_rate) == "100 %"

    def test_garbage_client_scores_zero_with_parse_reasons(self):
        result = evaluate(fixtures.eval_client_garbage(), fixtures.eval_cases())
        assert result.success_rate == 0.0
        assert all(not e["passed"] for e in result.per_case)
        assert all(e["reason"].startswith("parse error") for e in result.per_case)

    def test_transport_failure_marks_case_failed(self):
        class Flaky:
            model_name = "flaky"

            def complete(self, prompt):
                from fieldplan.errors import TransportError
                raise TransportError("refused")

        cases = fixtures.eval_cases()[:2]
        result = evaluate(Flaky(), cases)
        assert result.success_rate == 0.0
        assert all("transport error" in e["reason"] for e in result.per_case)

    def test_unaccepted_first_task_fails(self):
        g = lot_graph()
        case = EvalCase(spec="go south", graph=g, robot_at="home",
                        accept=(("goto", "lot_south"),))
        client = ScriptedClient(responses=[json.dumps(
            {"reasoning": "", "tasks": [{"behavior": "goto", "args": {"node": "home"}}]})])
        result = evaluate(client, [case])
        assert result.success_rate == 0.0
        assert "not accepted" in result.per_case[0]["reason"]

    def test_repeats_pool_the_rate(self):
        result = evaluate(fixtures.eval_client_distilled(), fixtures.eval_cases(),
                          repeats=3)
        assert result.success_rate == 72.7
        assert len(result.per_case) == 33

    def test_deterministic_for_scripted_clients(self):
        r1 = evaluate(fixtures.eval_client_distilled(), fixtures.eval_cases())
        r2 = evaluate(fixtures.eval_client_distilled(), fixtures.eval_cases())
        assert r1 == r2

    def test_format_rate_edge_values(self):
        assert format_rate(0.0) == "0 %"
        assert format_rate(9.2) == "9.2 %"
        assert format_rate(100.0) == "100 %"
