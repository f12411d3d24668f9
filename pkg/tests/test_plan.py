"""Plan parsing, serialization, profiles, prompt rendering."""

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldplan.errors import PlanError, PlanParseError, ProfileError
from fieldplan.graph import Node, SemanticGraph
from fieldplan.plan import (
    Action,
    Plan,
    RobotProfile,
    default_ugv_profile,
    default_uav_profile,
    parse_plan,
    point_in_polygon,
    polygon_is_simple,
    render_prompt,
    serialize_plan,
)

SQUARE = ((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0))


class TestParsePlan:
    def test_bare_block(self):
        p = parse_plan('{"reasoning":"go home","tasks":[{"behavior":"goto","args":{"node":"home"}}]}')
        assert p.reasoning == "go home"
        assert p.tasks == (Action.goto("home"),)

    def test_prose_and_fenced_block(self):
        raw = (
            "The lot is unmapped, so map it after arriving.\n"
            "```json\n"
            '{"reasoning": "drive then map", "tasks": ['
            '{"behavior": "goto", "args": {"node": "lot_a"}},'
            '{"behavior": "map_region", "args": {"region": "lot_a"}}]}\n'
            "```"
        )
        p = parse_plan(raw)
        assert p.reasoning == "drive then map"
        assert len(p.tasks) == 2

    def test_unknown_behavior_message(self):
        with pytest.raises(PlanParseError, match="unknown behavior 'fly' at task 0"):
            parse_plan('{"tasks":[{"behavior":"fly","args":{}}]}')

    def test_last_block_wins(self):
        raw = (
            '{"tasks":[{"behavior":"goto","args":{"node":"first"}}]}\n'
            "after reconsidering:\n"
            '{"tasks":[{"behavior":"goto","args":{"node":"second"}}]}'
        )
        assert parse_plan(raw).tasks[0].args["node"] == "second"

    def test_prose_becomes_reasoning_when_field_missing(self):
        raw = 'I will head north.\n```json\n{"tasks":[{"behavior":"goto","args":{"node":"n1"}}]}\n```'
        assert parse_plan(raw).reasoning == "I will head north."

    def test_no_block_error(self):
        with pytest.raises(PlanParseError, match="no structured plan block"):
            parse_plan("just thinking out loud")

    def test_empty_tasks_rejected(self):
        with pytest.raises(PlanParseError, match="non-empty"):
            parse_plan('{"tasks": []}')

    def test_missing_argument_named(self):
        with pytest.raises(PlanParseError, match="missing argument 'node'"):
            parse_plan('{"tasks":[{"behavior":"goto","args":{}}]}')

    def test_unexpected_argument_named(self):
        with pytest.raises(PlanParseError, match="unexpected argument 'speed'"):
            parse_plan('{"tasks":[{"behavior":"goto","args":{"node":"a","speed":3}}]}')

    def test_negative_radius_rejected(self):
        with pytest.raises(PlanParseError, match="positive number"):
            parse_plan('{"tasks":[{"behavior":"explore_region","args":{"region":"a","radius_m":-2}}]}')

    def test_terminal_not_last_rejected(self):
        raw = json.dumps({"tasks": [
            {"behavior": "clarify", "args": {"question": "which lot?"}},
            {"behavior": "goto", "args": {"node": "a"}}]})
        with pytest.raises(PlanParseError, match="must be the last task"):
            parse_plan(raw)

    def test_braces_inside_strings_do_not_confuse_extraction(self):
        raw = '{"reasoning":"use {curly} syntax","tasks":[{"behavior":"answer","args":{"text":"ok {done}"}}]}'
        assert parse_plan(raw).tasks[0].args["text"] == "ok {done}"

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=400))
    def test_never_panics_on_arbitrary_text(self, raw):
        try:
            plan = parse_plan(raw)
            assert plan.tasks
        except PlanParseError:
            pass

    @settings(max_examples=100, deadline=None)
    @given(st.binary(max_size=200))
    def test_never_panics_on_bytes_decoded_lossily(self, blob):
        try:
            parse_plan(blob.decode("utf-8", errors="replace"))
        except PlanParseError:
            pass


def random_plan(rng: random.Random) -> Plan:
    makers = [
        lambda: Action.goto(f"n{rng.randint(0, 30)}"),
        lambda: Action.map_region(f"r{rng.randint(0, 9)}",
                                  classes=["car", "truck"] if rng.random() < 0.5 else None),
        lambda: Action.explore_region(f"r{rng.randint(0, 9)}", rng.uniform(0.5, 30)),
        lambda: Action.extend_map(rng.uniform(-50, 50), rng.uniform(-50, 50)),
        lambda: Action.inspect(f"o{rng.randint(0, 9)}", "what is there?"),
    ]
    tasks = [makers[rng.randrange(len(makers))]() for _ in range(rng.randint(1, 5))]
    if rng.random() < 0.4:
        tasks.append(Action.answer("done") if rng.random() < 0.5
                     else Action.clarify("which one?"))
    return Plan(reasoning=rng.choice(["", "thinking...", "step by step"]),
                tasks=tuple(tasks))


class TestSerializePlan:
    def test_roundtrip_200_random_plans(self):
        rng = random.Random(11)
        for i in range(200):
            p = random_plan(rng)
            back = parse_plan(serialize_plan(p))
            assert back.tasks == p.tasks, i

    def test_single_answer_plan(self):
        p = Plan(reasoning="", tasks=(Action.answer("all clear"),))
        back = parse_plan(serialize_plan(p))
        assert back.tasks == p.tasks
        assert back.tasks[-1].behavior == "answer"

    def test_refuses_clarify_not_last(self):
        p = Plan(reasoning="", tasks=(Action.clarify("?"), Action.goto("a")))
        with pytest.raises(PlanError, match="must be the last task"):
            serialize_plan(p)

    def test_refuses_empty_tasks(self):
        with pytest.raises(PlanError, match="no tasks"):
            serialize_plan(Plan(reasoning="", tasks=()))


class TestProfiles:
    def test_uav_requires_waypoints_and_geofence(self):
        with pytest.raises(ProfileError, match="waypoint"):
            RobotProfile(kind="uav", allowed_behaviors=frozenset({"goto"}),
                         geofence=SQUARE)
        with pytest.raises(ProfileError, match="geofence"):
            RobotProfile(kind="uav", allowed_behaviors=frozenset({"goto"}),
                         waypoints=((1.0, 1.0),))

    def test_uav_behavior_subset_enforced(self):
        with pytest.raises(ProfileError, match="extend_map"):
            RobotProfile(kind="uav", allowed_behaviors=frozenset({"goto", "extend_map"}),
                         waypoints=((1.0, 1.0),), geofence=SQUARE)

    def test_self_intersecting_geofence_rejected(self):
        bowtie = ((0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0))
        assert not polygon_is_simple(bowtie)
        with pytest.raises(ProfileError, match="self-intersecting"):
            RobotProfile(kind="uav", allowed_behaviors=frozenset({"goto"}),
                         waypoints=((1.0, 1.0),), geofence=bowtie)

    def test_nearest_waypoint_snap(self):
        profile = default_uav_profile(waypoints=((100.0, 100.0), (0.0, 0.0)),
                                      geofence=((-200.0, -200.0), (200.0, -200.0),
                                                (200.0, 200.0), (-200.0, 200.0)))
        assert profile.nearest_waypoint((105.0, 98.0)) == (100.0, 100.0)

    def test_point_in_polygon(self):
        assert point_in_polygon((5.0, 5.0), SQUARE)
        assert not point_in_polygon((15.0, 5.0), SQUARE)


class TestRenderPrompt:
    def setup_method(self):
        self.graph = SemanticGraph([Node("home", "region", "base", 0, 0)])
        self.profile = default_ugv_profile()

    def test_contains_graph_and_spec_exactly_once(self):
        from fieldplan.graph import serialize_graph
        prompt = render_prompt("Find the truck.", self.graph, self.profile, [], "home")
        assert prompt.count(serialize_graph(self.graph)) == 1
        assert prompt.count("Find the truck.") == 1

    def test_history_appended_in_order_and_last(self):
        history = ["VALIDATION FEEDBACK:\nTask 0 ...", "MAP UPDATES:\nADDED node x"]
        prompt = render_prompt("spec", self.graph, self.profile, history, "home")
        assert prompt.endswith("MAP UPDATES:\nADDED node x")
        assert prompt.index(history[0]) < prompt.index(history[1])

    def test_byte_identical_across_calls(self):
        args = ("spec text", self.graph, self.profile, ["entry one"], "home")
        assert render_prompt(*args) == render_prompt(*args)

    def test_uav_prompt_lists_waypoints_and_fence(self):
        profile = default_uav_profile(waypoints=((1.0, 2.0),), geofence=SQUARE)
        prompt = render_prompt("spec", self.graph, profile, [], "home")
        assert "(1.000, 2.000)" in prompt
        assert "geofence" in prompt

    def test_disallowed_behaviors_not_documented(self):
        profile = default_uav_profile(waypoints=((1.0, 2.0),), geofence=SQUARE)
        prompt = render_prompt("spec", self.graph, profile, [], "home")
        assert "extend_map" not in prompt
