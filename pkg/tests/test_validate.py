"""Plan grounding: syntax, reachability, explorable, geofence."""

import random

from fieldplan.graph import Edge, Node, SemanticGraph
from fieldplan.grid import FREE, OBSTACLE, OccupancyGrid
from fieldplan.plan import Action, Plan, default_ugv_profile, default_uav_profile
from fieldplan.validate import render_feedback, validate
from generators import random_grid
from oracles import grid_path_exists

UGV = default_ugv_profile()


def simple_graph() -> SemanticGraph:
    nodes = [
        Node("home", "region", "base", 2, 2),
        Node("lot_a", "region", "parking_lot", 40, 2),
        Node("island", "region", "clearing", 40, 40),
        Node("car_1", "object", "car", 42, 4),
    ]
    edges = [Edge("home", "lot_a", "traversability"),
             Edge("lot_a", "car_1", "containment")]
    return SemanticGraph(nodes, edges)


def blank_occ(rows=20, cols=20, res=4.0, origin=(-10.0, -10.0)) -> OccupancyGrid:
    return OccupancyGrid.blank(rows, cols, res, origin)


def plan_of(*actions: Action) -> Plan:
    return Plan(reasoning="", tasks=tuple(actions))


class TestSyntax:
    def test_unknown_goto_target(self):
        rep = validate(plan_of(Action.goto("shed_9")), simple_graph(), "home",
                       blank_occ(), UGV)
        assert not rep.ok
        assert len(rep.violations) == 1
        v = rep.violations[0]
        assert v.kind == "syntax" and v.subject == "shed_9"
        assert "shed_9" in v.message and "0" in v.message

    def test_behavior_not_in_profile(self):
        uav = default_uav_profile(waypoints=((2.0, 2.0),),
                                  geofence=((-50.0, -50.0), (90.0, -50.0),
                                            (90.0, 90.0), (-50.0, 90.0)))
        g = simple_graph()
        rep = validate(plan_of(Action.extend_map(5, 5)), g, "home", blank_occ(), uav)
        assert [v.kind for v in rep.violations] == ["syntax"]
        assert "extend_map" in rep.violations[0].message

    def test_map_region_of_object_rejected(self):
        rep = validate(plan_of(Action.map_region("car_1")), simple_graph(), "home",
                       blank_occ(), UGV)
        assert rep.violations[0].kind == "syntax"
        assert "car_1" in rep.violations[0].message

    def test_robot_location_missing_is_task0_syntax(self):
        rep = validate(plan_of(Action.goto("home")), simple_graph(), "nowhere",
                       blank_occ(), UGV)
        assert not rep.ok
        assert rep.violations[0].task_index == 0
        assert rep.violations[0].kind == "syntax"
        assert "nowhere" in rep.violations[0].message

    def test_bad_args_flagged_per_field(self):
        plan = Plan(reasoning="", tasks=(Action("explore_region", {"region": "lot_a"}),))
        rep = validate(plan, simple_graph(), "home", blank_occ(), UGV)
        assert "radius_m" in rep.violations[0].message


class TestReachability:
    def test_disconnected_component(self):
        rep = validate(plan_of(Action.goto("island")), simple_graph(), "home",
                       blank_occ(), UGV)
        assert [v.kind for v in rep.violations] == ["reachability"]
        assert rep.violations[0].subject == "island"

    def test_object_target_via_containing_region(self):
        rep = validate(plan_of(Action.inspect("car_1", "plate?")), simple_graph(),
                       "home", blank_occ(), UGV)
        assert rep.ok

    def test_valid_two_task_plan(self):
        rep = validate(plan_of(Action.goto("lot_a"), Action.map_region("lot_a")),
                       simple_graph(), "home", blank_occ(), UGV)
        assert rep.ok and rep.violations == ()

    def test_collects_all_violations_without_short_circuit(self):
        plan = plan_of(Action.goto("ghost_1"), Action.goto("island"),
                       Action.goto("lot_a"))
        rep = validate(plan, simple_graph(), "home", blank_occ(), UGV)
        assert [v.task_index for v in rep.violations] == [0, 1]
        assert [v.kind for v in rep.violations] == ["syntax", "reachability"]


class TestExplorable:
    def test_walled_corridor_blocks_exploration(self):
        # A full wall of known obstacles between the robot and the region.
        occ = OccupancyGrid.blank(20, 20, 1.0, (0, 0), state=FREE)
        for r in range(20):
            occ.set_state((r, 10), OBSTACLE)
        nodes = [Node("home", "region", "base", 2, 2),
                 Node("east", "region", "field", 18, 18)]
        g = SemanticGraph(nodes, [Edge("home", "east", "traversability")])
        rep = validate(plan_of(Action.explore_region("east", 5.0)), g, "home", occ, UGV)
        assert [v.kind for v in rep.violations] == ["explorable"]
        assert rep.violations[0].subject == "east"

    def test_unknown_cells_treated_as_free(self):
        occ = blank_occ(rows=20, cols=20, res=1.0, origin=(0.0, 0.0))
        nodes = [Node("home", "region", "base", 2, 2),
                 Node("east", "region", "field", 18, 18)]
        g = SemanticGraph(nodes, [Edge("home", "east", "traversability")])
        rep = validate(plan_of(Action.explore_region("east", 5.0)), g, "home", occ, UGV)
        assert rep.ok

    def test_extend_map_out_of_bounds(self):
        rep = validate(plan_of(Action.extend_map(900.0, 900.0)), simple_graph(),
                       "home", blank_occ(), UGV)
        assert [v.kind for v in rep.violations] == ["explorable"]
        assert "900.000" in rep.violations[0].subject

    def test_position_simulation_uses_prior_goto(self):
        # The wall separates home from the east side; lot_a is already east,
        # so exploring east is only valid after driving to lot_a.
        occ = OccupancyGrid.blank(20, 20, 4.0, (-10.0, -10.0), state=FREE)
        for r in range(20):
            occ.set_state((r, 5), OBSTACLE)  # wall near x = 12
        g = simple_graph()
        direct = validate(plan_of(Action.explore_region("lot_a", 6.0)), g, "home",
                          occ, UGV)
        assert not direct.ok
        staged = validate(plan_of(Action.goto("lot_a"), Action.explore_region("lot_a", 6.0)),
                          g, "home", occ, UGV)
        assert staged.ok

    def test_diagonal_wall_passable_only_with_connect8(self):
        # A full diagonal of obstacles: impassable 4-connected, passable
        # 8-connected through the corner gaps.
        occ = OccupancyGrid.blank(8, 8, 1.0, (0, 0), state=FREE)
        for i in range(8):
            occ.set_state((i, i), OBSTACLE)
        nodes = [Node("a", "region", "r", 0.5, 7.5),
                 Node("b", "region", "r", 7.5, 0.5)]
        g = SemanticGraph(nodes, [Edge("a", "b", "traversability")])
        plan = plan_of(Action.explore_region("b", 3.0))
        assert not validate(plan, g, "a", occ, UGV).ok
        assert validate(plan, g, "a", occ, UGV, connect8=True).ok

    def test_agreement_with_grid_oracle(self):
        agree = 0
        for seed in range(40):
            rng = random.Random(seed)
            occ = random_grid(rng, rows=32, cols=32, density=rng.uniform(0, 0.4))
            sx, sy = rng.uniform(0, 32), rng.uniform(0, 32)
            tx, ty = rng.uniform(0, 32), rng.uniform(0, 32)
            start_cell = occ.world_to_cell((sx, sy))
            if occ.state_at(start_cell) == OBSTACLE:
                continue
            nodes = [Node("s", "region", "r", sx, sy), Node("t", "region", "r", tx, ty)]
            g = SemanticGraph(nodes, [Edge("s", "t", "traversability")])
            rep = validate(plan_of(Action.explore_region("t", 3.0)), g, "s", occ, UGV)
            want = grid_path_exists(occ.cells, start_cell, occ.world_to_cell((tx, ty)))
            assert rep.ok == want, seed
            agree += 1
        assert agree >= 25


class TestGeofence:
    def setup_method(self):
        self.fence = ((0.0, 0.0), (50.0, 0.0), (50.0, 50.0), (0.0, 50.0))
        self.uav = default_uav_profile(waypoints=((2.0, 2.0), (40.0, 2.0)),
                                       geofence=self.fence)
        nodes = [Node("home", "region", "base", 2, 2),
                 Node("lot_a", "region", "parking_lot", 40, 2),
                 Node("far", "region", "field", 80, 80)]
        edges = [Edge("home", "lot_a", "traversability"),
                 Edge("home", "far", "traversability")]
        self.graph = SemanticGraph(nodes, edges)

    def test_target_outside_fence(self):
        rep = validate(plan_of(Action.map_region("far")), self.graph, "home",
                       blank_occ(), self.uav)
        kinds = {v.kind for v in rep.violations}
        assert "geofence" in kinds

    def test_inside_fence_ok(self):
        rep = validate(plan_of(Action.goto("lot_a")), self.graph, "home",
                       blank_occ(), self.uav)
        assert rep.ok

    def test_ugv_never_checks_geofence(self):
        rep = validate(plan_of(Action.goto("far")), self.graph, "home",
                       blank_occ(), UGV)
        assert rep.ok


class TestFeedback:
    def test_ok_report_renders_empty(self):
        rep = validate(plan_of(Action.goto("lot_a")), simple_graph(), "home",
                       blank_occ(), UGV)
        assert render_feedback(rep) == "" and rep.feedback_text == ""

    def test_line_contains_task_kind_subject(self):
        plan = plan_of(Action.goto("lot_a"), Action.goto("island"))
        rep = validate(plan, simple_graph(), "home", blank_occ(), UGV)
        line = render_feedback(rep)
        assert "Task 1" in line and "reachability" in line and "island" in line

    def test_three_violations_three_lines_in_task_order(self):
        plan = plan_of(Action.goto("ghost_a"), Action.goto("ghost_b"),
                       Action.goto("island"))
        rep = validate(plan, simple_graph(), "home", blank_occ(), UGV)
        lines = render_feedback(rep).splitlines()
        assert len(lines) == 3
        assert [f"Task {i}" in line for i, line in enumerate(lines)] == [True] * 3

    def test_every_message_contains_subject(self):
        rng = random.Random(3)
        g = simple_graph()
        for _ in range(50):
            actions = [random.Random(rng.random()).choice([
                Action.goto(rng.choice(["ghost", "island", "lot_a", "car_1"])),
                Action.explore_region(rng.choice(["island", "lot_a"]), rng.uniform(1, 9)),
                Action.extend_map(rng.uniform(-500, 500), rng.uniform(-500, 500)),
            ]) for _ in range(rng.randint(1, 3))]
            rep = validate(plan_of(*actions), g, "home", blank_occ(), UGV)
            for v in rep.violations:
                assert v.subject in v.message

    def test_pure_function(self):
        plan = plan_of(Action.goto("island"), Action.extend_map(900, 900))
        args = (plan, simple_graph(), "home", blank_occ(), UGV)
        assert validate(*args).to_dict() == validate(*args).to_dict()
