"""Shipped scenarios, scripts, and suites.

Everything here is built in code so it is deterministic, versioned with the
package, and usable both from tests and from the CLI (`--cases builtin` and
friends). The repair suite powers the validation-feedback ablation; the
outcome suite and eval set exercise the report table formats.
"""

from __future__ import annotations

import json

from fieldplan.distill import EvalCase
from fieldplan.graph import Edge, Node, SemanticGraph, serialize_graph
from fieldplan.loop import ScriptRule, ScriptedClient, SuiteCase
from fieldplan.plan import ALL_BEHAVIORS, UAV_BEHAVIORS
from fieldplan.world import WorldScenario, scenario_from_dict


def _plan(*tasks: dict, reasoning: str = "") -> str:
    return json.dumps({"reasoning": reasoning, "tasks": list(tasks)})


def _goto(node: str) -> dict:
    return {"behavior": "goto", "args": {"node": node}}


def _answer(text: str) -> dict:
    return {"behavior": "answer", "args": {"text": text}}


def _ugv_profile_dict() -> dict:
    return {"kind": "ugv", "allowed_behaviors": list(ALL_BEHAVIORS)}


def _scenario(graph: SemanticGraph, **kwargs) -> WorldScenario:
    d = {
        "graph": json.loads(serialize_graph(graph)),
        "grid": {"rows": 40, "cols": 40, "resolution": 4.0, "origin": [-20.0, -20.0],
                 "obstacles": []},
        "profile": _ugv_profile_dict(),
    }
    d.update(kwargs)
    return scenario_from_dict(d)


# -- demo mission -----------------------------------------------------------


def demo_scenario() -> WorldScenario:
    """Small partially known map: the car in the lot is hidden at start."""
    nodes = [
        Node("home", "region", "base_station", 2, 2),
        Node("road_1", "region", "road", 30, 2),
        Node("lot_a", "region", "parking_lot", 60, 10),
        Node("car_1", "object", "car", 64, 12, desc="a red sedan with a flat tire",
             visible=False),
    ]
    edges = [
        Edge("home", "road_1", "traversability"),
        Edge("road_1", "lot_a", "traversability"),
        Edge("lot_a", "car_1", "containment"),
    ]
    return _scenario(
        SemanticGraph(nodes, edges),
        id="demo",
        start_node="home",
        goal={"type": "answer_contains", "substring": "sedan"},
        reveal_radius_m=10.0,
    )


def demo_spec() -> str:
    return "Is there anything parked in the lot east of the road?"


def demo_script() -> dict:
    """Rules-mode script for the demo mission; resolves in three iterations."""
    return {"rules": [
        {"when_contains": "red sedan",
         "response": _plan(_answer("Yes: a red sedan with a flat tire."),
                           reasoning="The inspection found a red sedan; report it.")},
        {"when_contains": "car_1",
         "response": _plan({"behavior": "inspect",
                            "args": {"node": "car_1", "query": "describe the vehicle"}},
                           reasoning="A car appeared in the lot; look closer.")},
        {"response": _plan(_goto("lot_a"),
                           {"behavior": "map_region", "args": {"region": "lot_a"}},
                           reasoning="Head to the lot and map it for vehicles.")},
    ]}


def demo_client() -> ScriptedClient:
    from fieldplan.loop import script_from_dict
    return script_from_dict(demo_script())


def clarify_scenario() -> WorldScenario:
    """Two candidate lots; the mission is too vague until the operator picks."""
    nodes = [
        Node("home", "region", "base_station", 2, 2),
        Node("north_lot", "region", "parking_lot", 2, 40),
        Node("south_lot", "region", "parking_lot", 2, -36),
    ]
    edges = [Edge("home", "north_lot", "traversability"),
             Edge("home", "south_lot", "traversability")]
    return scenario_from_dict({
        "graph": json.loads(serialize_graph(SemanticGraph(nodes, edges))),
        "grid": {"rows": 30, "cols": 30, "resolution": 4.0, "origin": [-50.0, -50.0],
                 "obstacles": []},
        "profile": _ugv_profile_dict(),
        "id": "two_lots",
        "start_node": "home",
        "goal": {"type": "visit_node", "node": "north_lot"},
    })


def clarify_spec() -> str:
    return "Check the lot."


def console_script() -> dict:
    """Demo rules plus a clarification flow for the two_lots scenario.

    Order matters: operator replies and revealed-content rules must match
    before the mission-spec rules, which must match before the fallback."""
    clarify_rules = [
        {"when_contains": "OPERATOR: I meant the northern lot",
         "response": _plan(_goto("north_lot"),
                           reasoning="Operator clarified: the northern lot.")},
        {"when_contains": clarify_spec(),
         "response": _plan({"behavior": "clarify",
                            "args": {"question": "Which lot should I check?"}},
                           reasoning="Two lots match; ask the operator.")},
    ]
    demo = demo_script()
    return {"rules": clarify_rules + demo["rules"]}


def console_client() -> ScriptedClient:
    from fieldplan.loop import script_from_dict
    return script_from_dict(console_script())


# -- repair suite (validation-feedback ablation) -----------------------------

_REPAIR_KINDS = ("syntax", "reachability", "explorable", "parse")


def repair_case(index: int) -> tuple[str, WorldScenario, dict]:
    """One faulty-then-corrected mission.

    The scripted planner's default response carries a deliberate grounding
    fault; a rule keyed on the feedback text supplies the corrected plan.
    Without feedback the prompt never changes, so the faulty plan repeats
    until the retry budget runs out."""
    kind = _REPAIR_KINDS[index % len(_REPAIR_KINDS)]
    goal_id = f"goal_{index}"
    nodes = [
        Node("start", "region", "staging_area", 0, 0),
        Node(goal_id, "region", "depot", 40, 0),
        Node(f"island_{index}", "region", "clearing", 40, 40),
    ]
    edges = [Edge("start", goal_id, "traversability")]
    scenario = _scenario(
        SemanticGraph(nodes, edges),
        id=f"repair_{index}",
        start_node="start",
        goal={"type": "visit_node", "node": goal_id},
    )
    if kind == "syntax":
        faulty = _plan(_goto(f"warehouse_{index}"), reasoning="Go to the warehouse.")
    elif kind == "reachability":
        faulty = _plan(_goto(f"island_{index}"), reasoning="Cut across to the clearing.")
    elif kind == "explorable":
        faulty = _plan({"behavior": "extend_map", "args": {"x": 900.0, "y": 900.0}},
                       reasoning="Push the map far out.")
    else:  # parse: not a plan at all
        faulty = "On reflection the mission is simple enough to skip planning."
    corrected = _plan(_goto(goal_id), reasoning="Drive straight to the depot.")
    script = {"rules": [
        {"when_contains": "violation", "response": corrected},
        {"when_contains": "could not be parsed", "response": corrected},
        {"response": faulty},
    ]}
    return f"Proceed to the depot (repair case {index}).", scenario, script


def repair_suite(n: int = 20) -> list[SuiteCase]:
    from fieldplan.loop import script_from_dict
    cases = []
    for i in range(n):
        spec, scenario, script = repair_case(i)
        cases.append(SuiteCase(
            spec_id=f"R{i + 1}",
            spec=spec,
            scenario=scenario,
            client_factory=lambda run, s=script: script_from_dict(s),
            runs=1,
        ))
    return cases


# -- outcome suite (report table shape) --------------------------------------

# spec id -> (runs, successes); S1 also exercises comm loss and odometry drift.
_SUITE_SHAPE = {
    "S1": (3, 1), "S2": (2, 2), "S3": (4, 4), "S4": (1, 1),
    "S5": (1, 1), "S6": (1, 1), "S7": (1, 1), "S8": (1, 1),
}


def _simple_goto_scenario(spec_id: str, depot_x: float, **kwargs) -> WorldScenario:
    nodes = [
        Node("home", "region", "base_station", 2, 2),
        Node("depot", "region", "depot", depot_x, 2),
    ]
    edges = [Edge("home", "depot", "traversability")]
    d = {
        "graph": json.loads(serialize_graph(SemanticGraph(nodes, edges))),
        "grid": {"rows": 30, "cols": 80, "resolution": 4.0, "origin": [-10.0, -10.0],
                 "obstacles": []},
        "profile": _ugv_profile_dict(),
        "id": spec_id.lower(),
        "start_node": "home",
        "goal": {"type": "visit_node", "node": "depot"},
    }
    d.update(kwargs)
    return scenario_from_dict(d)


def _blocked_detour_scenario(spec_id: str) -> WorldScenario:
    """The direct corridor to the depot is walled; a side route is clear."""
    nodes = [
        Node("home", "region", "staging_area", 10, 50),
        Node("mid", "region", "road", 50, 50),
        Node("depot", "region", "depot", 90, 50),
        Node("side", "region", "road", 40, 90),
    ]
    edges = [
        Edge("home", "mid", "traversability"),
        Edge("mid", "depot", "traversability"),
        Edge("home", "side", "traversability"),
        Edge("side", "depot", "traversability"),
    ]
    return scenario_from_dict({
        "graph": json.loads(serialize_graph(SemanticGraph(nodes, edges))),
        "grid": {"rows": 60, "cols": 60, "resolution": 2.0, "origin": [0.0, 0.0],
                 "obstacles": [[64.0, 0.0, 70.0, 62.0]]},
        "profile": _ugv_profile_dict(),
        "id": spec_id.lower(),
        "start_node": "home",
        "goal": {"type": "visit_node", "node": "depot"},
    })


def outcome_suite() -> list[SuiteCase]:
    """Eight specifications whose outcome column renders 1/3 through 1/1."""
    cases: list[SuiteCase] = []

    # S1: answer mission beyond comm range with odometry drift; two of the
    # three runs answer wrong.
    s1 = _simple_goto_scenario(
        "S1", 150,
        goal={"type": "answer_contains", "substring": "delivered"},
        comm_sites=[[2.0, 2.0, 40.0]],
        failure_injectors={"odometry_drift_rate": 0.05},
    )
    s1_scripts = [
        [_plan(_goto("depot")), _plan(_answer("the depot is empty"))],
        [_plan(_goto("depot")), _plan(_answer("nothing to report"))],
        [_plan(_goto("depot")), _plan(_answer("package delivered at the depot"))],
    ]
    cases.append(SuiteCase(
        spec_id="S1",
        spec="Deliver the package to the depot and confirm.",
        scenario=s1,
        client_factory=lambda run: ScriptedClient(responses=list(s1_scripts[run])),
        runs=3,
    ))

    distances = {"S2": 231, "S3": 265, "S4": 132, "S5": 250, "S6": 200}
    for sid in ("S2", "S3", "S4", "S5", "S6"):
        runs, _ = _SUITE_SHAPE[sid]
        scenario = _simple_goto_scenario(sid, 2 + distances[sid])
        cases.append(SuiteCase(
            spec_id=sid,
            spec=f"Drive to the depot ({sid}).",
            scenario=scenario,
            client_factory=lambda run: ScriptedClient(responses=[_plan(_goto("depot"))]),
            runs=runs,
        ))

    for sid in ("S7", "S8"):
        scenario = _blocked_detour_scenario(sid)
        responses = [_plan(_goto("depot")), _plan(_goto("side")), _plan(_goto("depot"))]
        cases.append(SuiteCase(
            spec_id=sid,
            spec=f"Reach the depot past the construction zone ({sid}).",
            scenario=scenario,
            client_factory=lambda run, r=responses: ScriptedClient(responses=list(r)),
            runs=1,
        ))
    return cases


# -- evaluation set (11 held-out short-horizon cases) -------------------------


def _eval_graph() -> SemanticGraph:
    nodes = [
        Node("home", "region", "base_station", 0, 0),
        Node("road_n", "region", "road", 10, 20),
        Node("road_s", "region", "road", 10, -20),
        Node("parking_south", "region", "parking_lot", 40, -30),
        Node("parking_north", "region", "parking_lot", 45, 35),
        Node("park", "region", "park", -35, 25),
        Node("field_w", "region", "field", -40, -20),
        Node("car_3", "object", "car", 43, -32),
        Node("excavator_1", "object", "excavator", 47, 38,
             desc="an excavator beside gravel piles", visible=True),
        Node("fountain_1", "object", "fountain", -37, 27),
    ]
    edges = [
        Edge("home", "road_n", "traversability"),
        Edge("home", "road_s", "traversability"),
        Edge("road_s", "parking_south", "traversability"),
        Edge("road_n", "parking_north", "traversability"),
        Edge("road_n", "park", "traversability"),
        Edge("road_s", "field_w", "traversability"),
        Edge("parking_south", "car_3", "containment"),
        Edge("parking_north", "excavator_1", "containment"),
        Edge("park", "fountain_1", "containment"),
    ]
    return SemanticGraph(nodes, edges)


def eval_cases() -> list[EvalCase]:
    g = _eval_graph()
    mk = lambda spec, accept: EvalCase(spec=spec, graph=g, robot_at="home",
                                       accept=tuple(accept))
    return [
        mk("Is there activity in the southern parking lot?",
           [("goto", "parking_south"), ("map_region", "parking_south"),
            ("explore_region", "parking_south")]),
        mk("What is going on in the park?",
           [("goto", "park"), ("map_region", "park"), ("explore_region", "park")]),
        mk("I heard of construction in the northern parking lot. Check.",
           [("goto", "parking_north"), ("map_region", "parking_north"),
            ("inspect", "excavator_1")]),
        mk("Return to home", [("goto", "home")]),
        mk("Take a closer look at the excavator.", [("inspect", "excavator_1")]),
        mk("Find out what the fountain looks like.",
           [("goto", "park"), ("inspect", "fountain_1")]),
        mk("Survey the western field.",
           [("goto", "field_w"), ("map_region", "field_w"),
            ("explore_region", "field_w")]),
        mk("Check whether any cars are parked south of the road.",
           [("goto", "parking_south"), ("map_region", "parking_south"),
            ("inspect", "car_3")]),
        mk("Map the area around the northern lot.",
           [("map_region", "parking_north"), ("goto", "parking_north")]),
        mk("Head up the north road.", [("goto", "road_n")]),
        mk("Patrol the south road.", [("goto", "road_s")]),
    ]


_EVAL_CORRECT = {
    0: _plan(_goto("parking_south")),
    1: _plan(_goto("park")),
    2: _plan(_goto("parking_north")),
    3: _plan(_goto("home")),
    4: _plan({"behavior": "inspect",
              "args": {"node": "excavator_1", "query": "what is it doing"}}),
    5: _plan(_goto("park")),
    6: _plan(_goto("field_w")),
    7: _plan(_goto("parking_south")),
    8: _plan({"behavior": "map_region", "args": {"region": "parking_north"}}),
    9: _plan(_goto("road_n")),
    10: _plan(_goto("road_s")),
}

# The three stumbles of the distilled arm: a wrong target, an unknown node,
# and raw prose that parses as nothing.
_EVAL_DISTILLED_WRONG = {
    2: _plan(_goto("parking_south")),
    6: _plan(_goto("warehouse_9")),
    10: "The road situation is unclear, proceeding on intuition.",
}


def _eval_rules(answers: dict[int, str]) -> list[ScriptRule]:
    cases = eval_cases()
    rules = [ScriptRule(when_contains=case.spec, response=answers[i])
             for i, case in enumerate(cases)]
    rules.append(ScriptRule(response="no idea"))
    return rules


def eval_client_perfect() -> ScriptedClient:
    return ScriptedClient(rules=_eval_rules(_EVAL_CORRECT))


def eval_client_distilled() -> ScriptedClient:
    answers = dict(_EVAL_CORRECT)
    answers.update(_EVAL_DISTILLED_WRONG)
    return ScriptedClient(rules=_eval_rules(answers))


def eval_client_garbage() -> ScriptedClient:
    return ScriptedClient(rules=[ScriptRule(response="I cannot help with that.")])


# -- aerial scenario and missions --------------------------------------------


def uav_scenario(goal: dict, scenario_id: str = "uav") -> WorldScenario:
    nodes = [
        Node("home", "region", "launch_point", 0, 0),
        Node("corridor_s", "region", "air_corridor", 20, -15),
        Node("corridor_n", "region", "air_corridor", 20, 15),
        Node("parking_south", "region", "parking_lot", 40, -30),
        Node("parking_north", "region", "parking_lot", 45, 35),
        Node("park", "region", "park", -35, 25),
        Node("van_2", "object", "van", 42, -33, desc="a delivery van with doors open",
             visible=False),
        Node("excavator_1", "object", "excavator", 47, 38,
             desc="an excavator moving gravel; active construction", visible=False),
        Node("fountain_1", "object", "fountain", -37, 27,
             desc="a stone fountain surrounded by picnic blankets", visible=False),
    ]
    edges = [
        Edge("home", "corridor_s", "traversability"),
        Edge("home", "corridor_n", "traversability"),
        Edge("home", "park", "traversability"),
        Edge("corridor_s", "parking_south", "traversability"),
        Edge("corridor_n", "parking_north", "traversability"),
        Edge("parking_south", "van_2", "containment"),
        Edge("parking_north", "excavator_1", "containment"),
        Edge("park", "fountain_1", "containment"),
    ]
    return scenario_from_dict({
        "graph": json.loads(serialize_graph(SemanticGraph(nodes, edges))),
        "grid": {"rows": 50, "cols": 50, "resolution": 4.0, "origin": [-80.0, -80.0],
                 "obstacles": []},
        "profile": {
            "kind": "uav",
            "allowed_behaviors": sorted(UAV_BEHAVIORS),
            "waypoints": [[0.0, 0.0], [20.0, -15.0], [20.0, 15.0], [40.0, -30.0],
                          [45.0, 35.0], [-35.0, 25.0]],
            "geofence": [[-70.0, -70.0], [70.0, -70.0], [70.0, 70.0], [-70.0, 70.0]],
        },
        "id": scenario_id,
        "start_node": "home",
        "goal": goal,
        "reveal_radius_m": 12.0,
    })


def uav_missions() -> list[tuple[str, WorldScenario]]:
    """The four aerial demonstration missions."""
    return [
        ("Is there activity in the southern parking lot?",
         uav_scenario({"type": "node_discovered", "class": "van"}, "uav_m1")),
        ("What is going on in the park?",
         uav_scenario({"type": "answer_contains", "substring": "fountain"}, "uav_m2")),
        ("I heard of construction in the northern parking lot. Check.",
         uav_scenario({"type": "answer_contains", "substring": "construction"}, "uav_m3")),
        ("Return to home",
         uav_scenario({"type": "visit_node", "node": "home"}, "uav_m4")),
    ]


def uav_demo_script() -> dict:
    """Scripted planner that completes all four aerial missions offline."""
    inspect = lambda node: {"behavior": "inspect", "args": {"node": node, "query": "what is happening"}}
    return {"rules": [
        # Answers keyed on inspection results folded into the map.
        {"when_contains": "stone fountain",
         "response": _plan(_answer("A stone fountain surrounded by picnic blankets; the park is busy."),
                           reasoning="The inspection shows picnic activity at the fountain.")},
        {"when_contains": "active construction",
         "response": _plan(_answer("Confirmed: an excavator is moving gravel; active construction."),
                           reasoning="The excavator confirms the construction report.")},
        # Inspections keyed on newly revealed objects.
        {"when_contains": "fountain_1", "response": _plan(
            inspect("fountain_1"), reasoning="Look closer at the fountain.")},
        {"when_contains": "excavator_1", "response": _plan(
            inspect("excavator_1"), reasoning="Look closer at the excavator.")},
        # Mission openings keyed on the specification text.
        {"when_contains": "southern parking lot",
         "response": _plan(_goto("parking_south"),
                           {"behavior": "map_region", "args": {"region": "parking_south"}},
                           reasoning="Fly south and scan the lot for vehicles.")},
        {"when_contains": "going on in the park",
         "response": _plan(_goto("park"), reasoning="Fly over the park.")},
        {"when_contains": "northern parking lot",
         "response": _plan(_goto("parking_north"), reasoning="Fly to the northern lot.")},
        {"when_contains": "Return to home",
         "response": _plan(_goto("home"), reasoning="Head back to the launch point.")},
    ]}


# -- corpus collection missions ----------------------------------------------


def collection_missions(n_missions: int = 60) -> list[tuple[str, WorldScenario]]:
    """Deterministic two-iteration missions for corpus generation: a goto that
    reveals an object, then an answer."""
    missions = []
    classes = ("car", "truck", "trailer", "container", "pallet")
    for i in range(n_missions):
        cls = classes[i % len(classes)]
        lot = f"lot_{i}"
        obj = f"{cls}_{i}"
        nodes = [
            Node("home", "region", "base_station", 2, 2),
            Node(lot, "region", "parking_lot", 30 + (i % 7) * 2, 2 + (i % 5)),
            Node(obj, "object", cls, 32 + (i % 7) * 2, 5 + (i % 5),
                 desc=f"a {cls} left near the fence", visible=False),
        ]
        edges = [
            Edge("home", lot, "traversability"),
            Edge(lot, obj, "containment"),
        ]
        scenario = _scenario(
            SemanticGraph(nodes, edges),
            id=f"collect_{i}",
            start_node="home",
            goal={"type": "answer_contains", "substring": cls},
            reveal_radius_m=8.0,
        )
        missions.append((f"Is there a {cls} near {lot}?", scenario))
    return missions


def collection_client(n_missions: int = 60) -> ScriptedClient:
    """One rules client that serves every collection mission."""
    rules: list[ScriptRule] = []
    classes = ("car", "truck", "trailer", "container", "pallet")
    for i in range(n_missions):
        cls = classes[i % len(classes)]
        lot = f"lot_{i}"
        obj = f"{cls}_{i}"
        rules.append(ScriptRule(
            when_contains=f"ADDED node {obj} ",
            response=_plan(_answer(f"Found a {cls} in {lot}."),
                           reasoning="The target is on the map now; report it.")))
        rules.append(ScriptRule(
            when_contains=f"near {lot}?",
            response=_plan(_goto(lot), reasoning="Drive over and look around.")))
    return ScriptedClient(rules=rules)
