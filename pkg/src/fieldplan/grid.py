"""Occupancy grids and deterministic grid path search.

Cells are unknown, free, or obstacle. The same structure backs both the
ground-truth grid (no unknown cells) and the robot's known-occupancy model,
which the validator searches optimistically (unknown treated as free).
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import heappop, heappush
from itertools import count

import numpy as np

from fieldplan.errors import ScenarioError

UNKNOWN = 0
FREE = 1
OBSTACLE = 2

# Neighbor order is part of the determinism contract for path shapes.
_N4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_N8 = _N4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))

Cell = tuple[int, int]


@dataclass
class OccupancyGrid:
    """A rows x cols grid of cell states anchored at `origin` (meters)."""

    rows: int
    cols: int
    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ScenarioError(f"grid dimensions must be positive, got {self.rows}x{self.cols}")
        if self.resolution <= 0:
            raise ScenarioError(f"grid resolution must be positive, got {self.resolution}")
        if self.cells.shape != (self.rows, self.cols):
            raise ScenarioError("grid cell array shape does not match dimensions")

    @classmethod
    def blank(cls, rows: int, cols: int, resolution: float, origin: tuple[float, float],
              state: int = UNKNOWN) -> OccupancyGrid:
        cells = np.full((rows, cols), state, dtype=np.uint8)
        return cls(rows, cols, resolution, origin, cells)

    @classmethod
    def from_rects(cls, rows: int, cols: int, resolution: float, origin: tuple[float, float],
                   obstacle_rects: list[tuple[float, float, float, float]]) -> OccupancyGrid:
        """Ground-truth grid: free background, rectangles rasterized as
        obstacles. A cell is an obstacle when its center falls in a rect
        (half-open on the max edges)."""
        grid = cls.blank(rows, cols, resolution, origin, state=FREE)
        for x0, y0, x1, y1 in obstacle_rects:
            if x1 < x0 or y1 < y0:
                raise ScenarioError(f"malformed obstacle rect ({x0}, {y0}, {x1}, {y1})")
            for r in range(rows):
                for c in range(cols):
                    cx, cy = grid.cell_center((r, c))
                    if x0 <= cx < x1 and y0 <= cy < y1:
                        grid.cells[r, c] = OBSTACLE
        return grid

    def copy(self) -> OccupancyGrid:
        return OccupancyGrid(self.rows, self.cols, self.resolution, self.origin, self.cells.copy())

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def contains_point(self, xy: tuple[float, float]) -> bool:
        return self.in_bounds(self.world_to_cell(xy))

    def world_to_cell(self, xy: tuple[float, float]) -> Cell:
        x, y = xy
        x0, y0 = self.origin
        return (int((y - y0) // self.resolution), int((x - x0) // self.resolution))

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        r, c = cell
        x0, y0 = self.origin
        return (x0 + (c + 0.5) * self.resolution, y0 + (r + 0.5) * self.resolution)

    def state_at(self, cell: Cell) -> int:
        return int(self.cells[cell[0], cell[1]])

    def set_state(self, cell: Cell, state: int) -> None:
        self.cells[cell[0], cell[1]] = state

    def passable(self, cell: Cell, unknown_free: bool = True) -> bool:
        if not self.in_bounds(cell):
            return False
        s = self.state_at(cell)
        if s == OBSTACLE:
            return False
        if s == UNKNOWN and not unknown_free:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "resolution": self.resolution,
            "origin": [self.origin[0], self.origin[1]],
        }


def find_grid_path(grid: OccupancyGrid, start_xy: tuple[float, float],
                   goal_xy: tuple[float, float], unknown_free: bool = True,
                   connect8: bool = False) -> list[Cell] | None:
    """A* between the cells containing two world points.

    Returns the cell sequence including start and goal cells, or None when
    no passable path exists. Deterministic: fixed neighbor order plus an
    insertion counter for heap ties.
    """
    start = grid.world_to_cell(start_xy)
    goal = grid.world_to_cell(goal_xy)
    if not grid.passable(start, unknown_free) or not grid.passable(goal, unknown_free):
        return None
    if start == goal:
        return [start]
    neighbors = _N8 if connect8 else _N4

    def h(cell: Cell) -> int:
        dr = abs(cell[0] - goal[0])
        dc = abs(cell[1] - goal[1])
        return max(dr, dc) if connect8 else dr + dc

    tick = count()
    open_heap: list[tuple[int, int, int, Cell]] = [(h(start), 0, next(tick), start)]
    came_from: dict[Cell, Cell] = {}
    g_score: dict[Cell, int] = {start: 0}
    while open_heap:
        _, g, _, cur = heappop(open_heap)
        if cur == goal:
            path = [cur]
            while cur in came_from:
                cur = came_from[cur]
                path.append(cur)
            path.reverse()
            return path
        if g > g_score.get(cur, g):
            continue
        for dr, dc in neighbors:
            nb = (cur[0] + dr, cur[1] + dc)
            if not grid.passable(nb, unknown_free):
                continue
            ng = g + 1
            if ng < g_score.get(nb, ng + 1):
                g_score[nb] = ng
                came_from[nb] = cur
                heappush(open_heap, (ng + h(nb), ng, next(tick), nb))
    return None


def grid_distance_map(grid: OccupancyGrid, start_xy: tuple[float, float],
                      unknown_free: bool = True) -> dict[Cell, int]:
    """Breadth-first hop counts from the start cell to every reachable cell."""
    start = grid.world_to_cell(start_xy)
    if not grid.passable(start, unknown_free):
        return {}
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for cell in frontier:
            for dr, dc in _N4:
                nb = (cell[0] + dr, cell[1] + dc)
                if nb not in dist and grid.passable(nb, unknown_free):
                    dist[nb] = dist[cell] + 1
                    nxt.append(nb)
        frontier = nxt
    return dist
