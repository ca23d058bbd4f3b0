"""Grid cost map and a weighted hybrid A* planner with motion primitives.

The planner searches over (x, y, discretized heading) using arc primitives
that match the car's five steering bins, returns a drivable pose sequence,
and a pure-pursuit tracker snaps per-step steering back onto those bins.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

STEERING_BINS_DEG = (-50.0, -25.0, 0.0, 25.0, 50.0)
STEERING_BINS = tuple(math.radians(a) for a in STEERING_BINS_DEG)

COST_ROAD = 1
COST_SIDEWALK = 50
COST_BLOCKED = 100

_HEADING_BINS = 16
_STEP = 2.0  # primitive arc length, m
_GOAL_TOL = 2.0
_HEURISTIC_WEIGHT = 1.5  # weighted A*: inflate heuristic for speed
_STEER_TIEBREAK = 0.01  # prefer straight primitives on equal map cost


class PlanningError(RuntimeError):
    """No drivable path between start and goal."""


@dataclass
class CostMap:
    """Discretized bird's-eye obstacle cost grid.

    ``costs[iy, ix]`` covers the square cell with lower corner
    (x0 + ix*res, y0 + iy*res). Queries outside the grid are blocked.
    """

    x0: float
    y0: float
    resolution: float
    costs: np.ndarray  # (ny, nx) int

    def cost_at(self, x: float, y: float) -> int:
        ix = int(math.floor((x - self.x0) / self.resolution))
        iy = int(math.floor((y - self.y0) / self.resolution))
        ny, nx = self.costs.shape
        if not (0 <= ix < nx and 0 <= iy < ny):
            return COST_BLOCKED
        return int(self.costs[iy, ix])

    def contains(self, x: float, y: float) -> bool:
        ix = int(math.floor((x - self.x0) / self.resolution))
        iy = int(math.floor((y - self.y0) / self.resolution))
        ny, nx = self.costs.shape
        return 0 <= ix < nx and 0 <= iy < ny

    def to_text(self) -> str:
        header = f"# x0={self.x0} y0={self.y0} res={self.resolution}\n"
        rows = "\n".join(" ".join(str(int(c)) for c in row) for row in self.costs)
        return header + rows + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CostMap":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        meta = {}
        if lines and lines[0].startswith("#"):
            for token in lines[0][1:].split():
                key, _, val = token.partition("=")
                meta[key] = float(val)
            lines = lines[1:]
        costs = np.array([[int(v) for v in ln.split()] for ln in lines], dtype=int)
        return cls(
            x0=meta.get("x0", 0.0),
            y0=meta.get("y0", 0.0),
            resolution=meta.get("res", 1.0),
            costs=costs,
        )


@dataclass(frozen=True)
class Path:
    """Planner output: poses along the path and the cost of getting there."""

    poses: tuple[tuple[float, float, float], ...]  # (x, y, heading)
    steering: tuple[float, ...]  # primitive steering per segment
    total_cost: float


def _wrap_angle(a: float) -> float:
    return a % (2.0 * math.pi)


def _primitive(x: float, y: float, heading: float, steer: float, wheelbase: float):
    """Advance one arc of length _STEP under constant steering."""
    substeps = 4
    ds = _STEP / substeps
    for _ in range(substeps):
        x += ds * math.cos(heading)
        y += ds * math.sin(heading)
        heading = _wrap_angle(heading + ds / wheelbase * math.tan(steer))
    return x, y, heading


def plan_path(
    cost_map: CostMap,
    start: tuple[float, float, float],
    goal: tuple[float, float],
    wheelbase: float = 2.5,
    goal_tol: float = _GOAL_TOL,
) -> Path:
    """Minimum-cost path from start pose to goal under the grid costs.

    Raises PlanningError if no path exists (blocked start/goal or exhausted
    search). A start already within ``goal_tol`` of the goal yields an empty
    path.
    """
    sx, sy, sh = start
    gx, gy = goal
    if not cost_map.contains(sx, sy) or not cost_map.contains(gx, gy):
        raise PlanningError("start or goal outside the cost map")
    if math.hypot(gx - sx, gy - sy) <= goal_tol:
        return Path(poses=(), steering=(), total_cost=0.0)
    if cost_map.cost_at(gx, gy) >= COST_BLOCKED:
        raise PlanningError("goal cell is blocked")

    res = cost_map.resolution

    def key(x, y, h):
        return (
            int(math.floor((x - cost_map.x0) / res)),
            int(math.floor((y - cost_map.y0) / res)),
            int(round(h / (2 * math.pi / _HEADING_BINS))) % _HEADING_BINS,
        )

    start_key = key(sx, sy, sh)
    best = {start_key: 0.0}
    came: dict = {}
    counter = 0
    frontier = [(0.0, 0, 0.0, (sx, sy, sh), start_key)]
    goal_state = None
    expansions = 0
    max_expansions = 200_000
    while frontier:
        _, _, g_cost, pose, pkey = heapq.heappop(frontier)
        if g_cost > best.get(pkey, math.inf):
            continue
        x, y, h = pose
        if math.hypot(gx - x, gy - y) <= goal_tol:
            goal_state = pkey
            break
        expansions += 1
        if expansions > max_expansions:
            break
        for steer in STEERING_BINS:
            nx_, ny_, nh = _primitive(x, y, h, steer, wheelbase)
            if not cost_map.contains(nx_, ny_):
                continue
            cell = cost_map.cost_at(nx_, ny_)
            if cell >= COST_BLOCKED:
                continue
            step_cost = _STEP * cell + (_STEER_TIEBREAK if steer != 0.0 else 0.0)
            nkey = key(nx_, ny_, nh)
            ng = g_cost + step_cost
            if ng < best.get(nkey, math.inf) - 1e-9:
                best[nkey] = ng
                came[nkey] = (pkey, (nx_, ny_, nh), steer)
                counter += 1
                f = ng + _HEURISTIC_WEIGHT * math.hypot(gx - nx_, gy - ny_)
                heapq.heappush(frontier, (f, counter, ng, (nx_, ny_, nh), nkey))
    if goal_state is None:
        raise PlanningError("no path found")

    poses = []
    steering = []
    node = goal_state
    while node in came:
        parent, pose, steer = came[node]
        poses.append(pose)
        steering.append(steer)
        node = parent
    poses.reverse()
    steering.reverse()
    return Path(poses=tuple(poses), steering=tuple(steering), total_cost=best[goal_state])


def tracking_steering(
    path: Path,
    pose: tuple[float, float, float],
    speed: float,
    wheelbase: float = 2.5,
) -> float:
    """Steering bin that best tracks the path from the current pose.

    Pure-pursuit on a speed-scaled lookahead point, snapped to the discrete
    bins. Returns 0 for an empty path or when past its end.
    """
    if not path.poses:
        return 0.0
    x, y, heading = pose
    lookahead = max(4.0, 0.8 * speed)
    # nearest path index, then walk forward to the lookahead distance
    pts = path.poses
    dists = [math.hypot(px - x, py - y) for px, py, _ in pts]
    i = int(np.argmin(dists))
    target = pts[-1]
    for j in range(i, len(pts)):
        if math.hypot(pts[j][0] - x, pts[j][1] - y) >= lookahead:
            target = pts[j]
            break
    dx, dy = target[0] - x, target[1] - y
    dist = math.hypot(dx, dy)
    if dist < 0.5:
        return 0.0
    eta = math.atan2(dy, dx) - heading
    eta = (eta + math.pi) % (2 * math.pi) - math.pi
    desired = math.atan2(2.0 * wheelbase * math.sin(eta), dist)
    return min(STEERING_BINS, key=lambda b: abs(b - desired))


def cross_track_error(path: Path, x: float, y: float) -> float:
    """Signed lateral offset to the nearest path segment (left positive)."""
    if not path.poses:
        return 0.0
    if len(path.poses) == 1:
        px, py, _ = path.poses[0]
        return math.hypot(x - px, y - py)
    best = math.inf
    signed = 0.0
    pts = path.poses
    for (x1, y1, _), (x2, y2, _) in zip(pts[:-1], pts[1:]):
        vx, vy = x2 - x1, y2 - y1
        seg_len2 = vx * vx + vy * vy
        if seg_len2 == 0:
            continue
        t = max(0.0, min(1.0, ((x - x1) * vx + (y - y1) * vy) / seg_len2))
        cx, cy = x1 + t * vx, y1 + t * vy
        d = math.hypot(x - cx, y - cy)
        if d < best:
            best = d
            cross = vx * (y - y1) - vy * (x - x1)
            signed = math.copysign(d, cross) if cross != 0 else d
    return signed
