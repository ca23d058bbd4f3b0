"""Desk-scale collision-free-navigation POMDP.

A bicycle-model car drives ~100 m down a straight road toward a goal while
pedestrians cross from the sidewalks (optionally occluded by parked cars,
optionally with an oncoming car in the other lane). The agent controls only
the speed action; steering comes from a cost-map path planner. Pedestrian
goals are hidden state: observations expose only positions and velocities of
unoccluded pedestrians within sensing range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import planner
from .planner import CostMap, Path, PlanningError

KMH = 1.0 / 3.6  # km/h -> m/s

ACCELERATE, MAINTAIN, DECELERATE = 0, 1, 2
ACTION_NAMES = ("accelerate", "maintain", "decelerate")
N_ACTIONS = 3


class SceneError(RuntimeError):
    """Scene cannot be instantiated (e.g. goal unreachable)."""


class UsageError(RuntimeError):
    """API misuse, e.g. stepping a finished episode."""


@dataclass(frozen=True)
class EnvConfig:
    """Physical and sensing knobs. Defaults are typical sedan/pedestrian scales."""

    dt: float = 0.1
    wheelbase: float = 2.5
    car_length: float = 4.5
    car_width: float = 2.0
    ped_radius: float = 0.3
    near_miss_margin: float = 1.5
    sense_radius: float = 50.0
    speed_limit: float = 50.0 * KMH
    speed_step: float = 5.0 * KMH
    v_max: float = 60.0 * KMH  # hard clamp above the (penalized) legal limit
    goal_tol: float = 2.0
    max_steps: int = 500
    k_pedestrians: int = 4
    # road geometry: car lane centered on y=0, oncoming lane at y=4
    road_y_min: float = -3.0
    road_y_max: float = 7.0
    sidewalk_width: float = 3.0
    road_x_min: float = -10.0
    road_x_max: float = 112.0
    oncoming_lane_y: float = 4.0
    oncoming_speed: float = 8.0
    map_resolution: float = 1.0


@dataclass(frozen=True)
class OtherCar:
    start: tuple[float, float]
    heading: float
    speed: float
    length: float = 4.5
    width: float = 2.0


@dataclass(frozen=True)
class Scene:
    """One benchmark instantiation: scenario template + spawn grid point."""

    scenario_id: int
    car_start: tuple[float, float, float]  # x, y, heading
    car_goal: tuple[float, float]
    ped_distance: float  # spawn distance ahead of the car start, m
    ped_speed: float  # m/s
    ped_spawn: tuple[float, float]
    ped_goal: tuple[float, float]  # hidden from observations
    obstacles: tuple[tuple[float, float, float, float], ...]  # AABBs (x0,y0,x1,y1)
    other_cars: tuple[OtherCar, ...] = ()


# Scenario templates on the straight road. Reconstructed as parameterized
# crossing situations: which sidewalk the pedestrian starts from, whether a
# parked car occludes it, and whether a car approaches in the oncoming lane.
SCENARIO_TEMPLATES = {
    1: {"side": "right", "occluder": False, "oncoming": False},
    2: {"side": "left", "occluder": False, "oncoming": False},
    3: {"side": "right", "occluder": True, "oncoming": False},
    4: {"side": "left", "occluder": True, "oncoming": False},
    5: {"side": "right", "occluder": False, "oncoming": True},
    6: {"side": "left", "occluder": False, "oncoming": True},
    7: {"side": "right", "occluder": True, "oncoming": True},
    8: {"side": "left", "occluder": True, "oncoming": True},
}

TRAIN_SCENARIOS = (1, 3, 4, 5, 6, 8)
TEST_SCENARIOS = (1, 2, 3, 4, 5, 6, 7, 8)


def make_scene(scenario_id: int, ped_distance: float, ped_speed: float,
               config: EnvConfig = EnvConfig()) -> Scene:
    if scenario_id not in SCENARIO_TEMPLATES:
        raise SceneError(f"unknown scenario id {scenario_id}")
    tpl = SCENARIO_TEMPLATES[scenario_id]
    right_y = config.road_y_min - config.sidewalk_width / 2.0
    left_y = config.road_y_max + config.sidewalk_width / 2.0
    if tpl["side"] == "right":
        spawn_y, goal_y = right_y, left_y
    else:
        spawn_y, goal_y = left_y, right_y
    spawn_x = ped_distance
    obstacles = ()
    if tpl["occluder"]:
        # parked car on the pedestrian's roadside edge, just upstream of the
        # crossing point, blocking the ego car's line of sight
        edge_y = config.road_y_min - 1.0 if tpl["side"] == "right" else config.road_y_max + 1.0
        obstacles = ((spawn_x - 7.0, edge_y - 1.0, spawn_x - 2.5, edge_y + 1.0),)
    other_cars = ()
    if tpl["oncoming"]:
        other_cars = (
            OtherCar(
                start=(min(spawn_x + 40.0, config.road_x_max - 5.0), config.oncoming_lane_y),
                heading=math.pi,
                speed=config.oncoming_speed,
            ),
        )
    return Scene(
        scenario_id=scenario_id,
        car_start=(0.0, 0.0, 0.0),
        car_goal=(100.0, 0.0),
        ped_distance=ped_distance,
        ped_speed=ped_speed,
        ped_spawn=(spawn_x, spawn_y),
        ped_goal=(spawn_x, goal_y),
        obstacles=obstacles,
        other_cars=other_cars,
    )


@dataclass(frozen=True)
class SceneGrid:
    """Cartesian spawn grid: scenarios x pedestrian speeds x distances."""

    scenarios: tuple[int, ...]
    speed_start: float
    speed_stop: float
    speed_step: float
    dist_start: float
    dist_stop: float
    dist_step: float

    @classmethod
    def train_default(cls) -> "SceneGrid":
        return cls(TRAIN_SCENARIOS, 0.6, 2.0, 0.1, 0.0, 40.0, 1.0)

    @classmethod
    def test_default(cls) -> "SceneGrid":
        return cls(TEST_SCENARIOS, 0.25, 2.85, 0.1, 4.75, 49.25, 1.0)

    @staticmethod
    def _values(start: float, stop: float, step: float) -> list[float]:
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 9) for i in range(count)]

    def speeds(self) -> list[float]:
        return self._values(self.speed_start, self.speed_stop, self.speed_step)

    def distances(self) -> list[float]:
        return self._values(self.dist_start, self.dist_stop, self.dist_step)


def generate_scenes(split: str = "train", grid: Optional[SceneGrid] = None,
                    config: EnvConfig = EnvConfig()) -> list[Scene]:
    """Deterministically ordered scene list for a split or explicit grid."""
    if grid is None:
        if split == "train":
            grid = SceneGrid.train_default()
        elif split == "test":
            grid = SceneGrid.test_default()
        else:
            raise SceneError(f"unknown split {split!r}")
    if not grid.scenarios or not grid.speeds() or not grid.distances():
        raise SceneError("empty scene grid")
    scenes = []
    for sid in grid.scenarios:
        for speed in grid.speeds():
            for dist in grid.distances():
                scenes.append(make_scene(sid, dist, speed, config))
    return scenes


# ---------------------------------------------------------------------------
# world state


@dataclass
class CarState:
    x: float
    y: float
    heading: float  # [0, 2pi)
    v: float  # m/s, >= 0


@dataclass
class PedestrianState:
    x: float
    y: float
    goal: tuple[float, float]  # hidden state
    speed: float
    heading: float


@dataclass(frozen=True)
class Action:
    acc: int  # index into ACTION_NAMES
    steer: float  # radians, one of the planner bins


@dataclass
class WorldState:
    scene: Scene
    config: EnvConfig
    cost_map: CostMap
    path: Path
    car: CarState
    peds: list[PedestrianState]
    others: list[CarState]
    t: int = 0
    v_prev: float = 0.0
    prev_action: Action = Action(MAINTAIN, 0.0)
    prev_reward: float = 0.0
    done: bool = False
    outcome: Optional[str] = None  # "goal" | "collision" | "timeout"


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-term reward values; inapplicable terms are zero."""

    goal: float = 0.0
    hit: float = 0.0
    obstacle: float = 0.0
    near_miss: float = 0.0
    over_speeding: float = 0.0
    not_goal: float = 0.0
    braking: float = 0.0
    steer: float = 0.0

    @property
    def total(self) -> float:
        return (self.goal + self.hit + self.obstacle + self.near_miss
                + self.over_speeding + self.not_goal + self.braking + self.steer)


@dataclass(frozen=True)
class PedObservation:
    rel_pos: tuple[float, float]  # car frame, m
    rel_vel: tuple[float, float]  # car frame, m/s
    visible: float  # 1.0 for a sensed pedestrian, 0.0 for an empty slot


@dataclass(frozen=True)
class Observation:
    rel_goal: tuple[float, float]
    cross_track: float
    speed: float
    prev_accel: tuple[float, float, float]  # one-hot speed action
    prev_reward: float
    pedestrians: tuple[PedObservation, ...]

    def to_vector(self) -> np.ndarray:
        parts = [
            self.rel_goal[0] / 50.0,
            self.rel_goal[1] / 50.0,
            self.cross_track / 5.0,
            self.speed / 15.0,
            *self.prev_accel,
            self.prev_reward / 10.0,
        ]
        for ped in self.pedestrians:
            parts.extend([
                ped.rel_pos[0] / 50.0,
                ped.rel_pos[1] / 50.0,
                ped.rel_vel[0] / 3.0,
                ped.rel_vel[1] / 3.0,
                ped.visible,
            ])
        return np.array(parts)

    def to_dict(self) -> dict:
        return asdict(self)


def observation_dim(config: EnvConfig = EnvConfig()) -> int:
    return 8 + 5 * config.k_pedestrians


# ---------------------------------------------------------------------------
# cost map construction


def build_cost_map(scene: Scene, config: EnvConfig = EnvConfig()) -> CostMap:
    res = config.map_resolution
    x0 = config.road_x_min
    y0 = config.road_y_min - config.sidewalk_width - 1.0
    y1 = config.road_y_max + config.sidewalk_width + 1.0
    nx = int(math.ceil((config.road_x_max - x0) / res))
    ny = int(math.ceil((y1 - y0) / res))
    costs = np.full((ny, nx), planner.COST_BLOCKED, dtype=int)
    ys = y0 + (np.arange(ny) + 0.5) * res
    road = (ys >= config.road_y_min) & (ys <= config.road_y_max)
    walk = ((ys >= config.road_y_min - config.sidewalk_width) & (ys < config.road_y_min)) | (
        (ys > config.road_y_max) & (ys <= config.road_y_max + config.sidewalk_width)
    )
    costs[road, :] = planner.COST_ROAD
    costs[walk, :] = planner.COST_SIDEWALK
    cmap = CostMap(x0=x0, y0=y0, resolution=res, costs=costs)
    for (ox0, oy0, ox1, oy1) in scene.obstacles:
        _fill_rect(cmap, ox0, oy0, ox1, oy1, planner.COST_BLOCKED)
    return cmap


def _fill_rect(cmap: CostMap, x0, y0, x1, y1, value):
    ix0 = max(0, int(math.floor((x0 - cmap.x0) / cmap.resolution)))
    iy0 = max(0, int(math.floor((y0 - cmap.y0) / cmap.resolution)))
    ix1 = min(cmap.costs.shape[1], int(math.ceil((x1 - cmap.x0) / cmap.resolution)))
    iy1 = min(cmap.costs.shape[0], int(math.ceil((y1 - cmap.y0) / cmap.resolution)))
    cmap.costs[iy0:iy1, ix0:ix1] = value


# ---------------------------------------------------------------------------
# geometry helpers


def _to_car_frame(car: CarState, x: float, y: float) -> tuple[float, float]:
    dx, dy = x - car.x, y - car.y
    c, s = math.cos(car.heading), math.sin(car.heading)
    return c * dx + s * dy, -s * dx + c * dy


def _rect_distance(car: CarState, x: float, y: float, config: EnvConfig) -> float:
    """Distance from a point to the car's oriented footprint rectangle."""
    lx, ly = _to_car_frame(car, x, y)
    dx = max(abs(lx) - config.car_length / 2.0, 0.0)
    dy = max(abs(ly) - config.car_width / 2.0, 0.0)
    return math.hypot(dx, dy)


def _rects_overlap(ax, ay, ah, alen, awid, bx, by, bh, blen, bwid) -> bool:
    """Separating-axis test for two oriented rectangles."""
    corners = []
    for (cx, cy, ch, ln, wd) in ((ax, ay, ah, alen, awid), (bx, by, bh, blen, bwid)):
        c, s = math.cos(ch), math.sin(ch)
        pts = []
        for sx in (-ln / 2, ln / 2):
            for sy in (-wd / 2, wd / 2):
                pts.append((cx + c * sx - s * sy, cy + s * sx + c * sy))
        corners.append(pts)
    axes = []
    for h in (ah, bh):
        axes.append((math.cos(h), math.sin(h)))
        axes.append((-math.sin(h), math.cos(h)))
    for ux, uy in axes:
        proj = [[px * ux + py * uy for px, py in pts] for pts in corners]
        if max(proj[0]) < min(proj[1]) or max(proj[1]) < min(proj[0]):
            return False
    return True


def _segment_hits_aabb(x1, y1, x2, y2, box) -> bool:
    """Slab test: does the segment intersect the axis-aligned box?"""
    bx0, by0, bx1, by1 = box
    dx, dy = x2 - x1, y2 - y1
    tmin, tmax = 0.0, 1.0
    for p, d, lo, hi in ((x1, dx, bx0, bx1), (y1, dy, by0, by1)):
        if abs(d) < 1e-12:
            if p < lo or p > hi:
                return False
            continue
        t1, t2 = (lo - p) / d, (hi - p) / d
        if t1 > t2:
            t1, t2 = t2, t1
        tmin, tmax = max(tmin, t1), min(tmax, t2)
        if tmin > tmax:
            return False
    return True


def is_occluded(world: WorldState, ped: PedestrianState) -> bool:
    for box in world.scene.obstacles:
        if _segment_hits_aabb(world.car.x, world.car.y, ped.x, ped.y, box):
            return True
    return False


# ---------------------------------------------------------------------------
# proximity / collision


CLEAR, NEAR_MISS, HIT = "clear", "near_miss", "hit"


def check_proximity(world: WorldState) -> list[str]:
    """Hit / near-miss / clear status for every pedestrian.

    Hit: pedestrian disc overlaps the car rectangle. Near miss: within the
    margin of the rectangle while the car is moving.
    """
    config = world.config
    out = []
    for ped in world.peds:
        d = _rect_distance(world.car, ped.x, ped.y, config)
        if d <= config.ped_radius:
            out.append(HIT)
        elif d <= config.near_miss_margin and world.car.v > 0:
            out.append(NEAR_MISS)
        else:
            out.append(CLEAR)
    return out


def _car_collides(world: WorldState) -> bool:
    """Collision of the ego rectangle with other cars or static obstacles."""
    car = world.car
    config = world.config
    for other in world.others:
        if _rects_overlap(car.x, car.y, car.heading, config.car_length, config.car_width,
                          other.x, other.y, other.heading, config.car_length, config.car_width):
            return True
    for (bx0, by0, bx1, by1) in world.scene.obstacles:
        cx, cy = (bx0 + bx1) / 2.0, (by0 + by1) / 2.0
        if _rects_overlap(car.x, car.y, car.heading, config.car_length, config.car_width,
                          cx, cy, 0.0, bx1 - bx0, by1 - by0):
            return True
    return False


def _footprint_cost(world: WorldState) -> int:
    """Max cost-map value under the car footprint (center + corners)."""
    car, config = world.car, world.config
    c, s = math.cos(car.heading), math.sin(car.heading)
    pts = [(0.0, 0.0)]
    for sx in (-config.car_length / 2, config.car_length / 2):
        for sy in (-config.car_width / 2, config.car_width / 2):
            pts.append((sx, sy))
    return max(
        world.cost_map.cost_at(car.x + c * sx - s * sy, car.y + s * sx + c * sy)
        for sx, sy in pts
    )


# ---------------------------------------------------------------------------
# reward


def compute_reward(world: WorldState, action: Action) -> RewardBreakdown:
    """Reward terms for the current world state after applying ``action``.

    goal +200; hit -100*beta with beta = impact speed / 50 km/h; obstacle
    penalty equal to the cost-map value under the car when something is in the
    hit area while moving; near-miss -10; over-speeding -10; per-step goal
    distance penalty -dist/1000; -1 for braking while stationary; -1 for
    nonzero steering.
    """
    config = world.config
    car = world.car
    goal_dist = math.hypot(car.x - world.scene.car_goal[0], car.y - world.scene.car_goal[1])
    at_goal = goal_dist <= config.goal_tol

    prox = check_proximity(world)
    ped_hit = HIT in prox
    car_hit = _car_collides(world)
    hit = ped_hit or car_hit

    terms = {}
    if at_goal:
        terms["goal"] = 200.0
    else:
        terms["not_goal"] = -goal_dist / 1000.0
    if hit:
        beta = car.v / config.speed_limit  # impact speed over the 50 km/h limit
        terms["hit"] = -100.0 * beta
        if car.v != 0:
            terms["obstacle"] = -float(max(_footprint_cost(world), planner.COST_BLOCKED))
    if NEAR_MISS in prox:
        terms["near_miss"] = -10.0
    if car.v > config.speed_limit:
        terms["over_speeding"] = -10.0
    if action.acc == DECELERATE and world.v_prev == 0:
        terms["braking"] = -1.0
    if action.steer != 0.0:
        terms["steer"] = -1.0
    return RewardBreakdown(**terms)


# ---------------------------------------------------------------------------
# observation


def build_observation(world: WorldState) -> Observation:
    config = world.config
    car = world.car
    gx, gy = world.scene.car_goal
    rel_goal = _to_car_frame(car, gx, gy)
    cte = planner.cross_track_error(world.path, car.x, car.y)
    car_vel = (car.v * math.cos(car.heading), car.v * math.sin(car.heading))

    visible = []
    for ped in world.peds:
        dist = math.hypot(ped.x - car.x, ped.y - car.y)
        if dist > config.sense_radius or is_occluded(world, ped):
            continue
        rel = _to_car_frame(car, ped.x, ped.y)
        pvx = ped.speed * math.cos(ped.heading)
        pvy = ped.speed * math.sin(ped.heading)
        c, s = math.cos(car.heading), math.sin(car.heading)
        rvx = c * (pvx - car_vel[0]) + s * (pvy - car_vel[1])
        rvy = -s * (pvx - car_vel[0]) + c * (pvy - car_vel[1])
        visible.append((dist, PedObservation(rel, (rvx, rvy), 1.0)))
    visible.sort(key=lambda item: item[0])
    slots = [obs for _, obs in visible[: config.k_pedestrians]]
    while len(slots) < config.k_pedestrians:
        slots.append(PedObservation((0.0, 0.0), (0.0, 0.0), 0.0))

    onehot = [0.0, 0.0, 0.0]
    onehot[world.prev_action.acc] = 1.0
    return Observation(
        rel_goal=rel_goal,
        cross_track=cte,
        speed=car.v,
        prev_accel=tuple(onehot),
        prev_reward=world.prev_reward,
        pedestrians=tuple(slots),
    )


# ---------------------------------------------------------------------------
# reset / step


def reset(scene: Scene, rng: Optional[np.random.Generator] = None,
          config: EnvConfig = EnvConfig()) -> tuple[WorldState, Observation]:
    """Instantiate a scene: plan the path and place everyone at spawn."""
    cost_map = build_cost_map(scene, config)
    try:
        path = planner.plan_path(cost_map, scene.car_start, scene.car_goal,
                                 wheelbase=config.wheelbase, goal_tol=config.goal_tol)
    except PlanningError as exc:
        raise SceneError(f"unplannable scene: {exc}") from exc
    sx, sy, sh = scene.car_start
    px, py = scene.ped_spawn
    gx, gy = scene.ped_goal
    heading = math.atan2(gy - py, gx - px) % (2 * math.pi)
    world = WorldState(
        scene=scene,
        config=config,
        cost_map=cost_map,
        path=path,
        car=CarState(sx, sy, sh % (2 * math.pi), 0.0),
        peds=[PedestrianState(px, py, (gx, gy), scene.ped_speed, heading)],
        others=[CarState(oc.start[0], oc.start[1], oc.heading, oc.speed)
                for oc in scene.other_cars],
    )
    return world, build_observation(world)


def planned_steering(world: WorldState) -> float:
    return planner.tracking_steering(
        world.path, (world.car.x, world.car.y, world.car.heading),
        world.car.v, world.config.wheelbase,
    )


def step(world: WorldState, acc: int) -> tuple[WorldState, Observation, RewardBreakdown, bool, dict]:
    """Advance one control period; mutates and returns the world state."""
    if world.done:
        raise UsageError("episode already finished")
    if acc not in (ACCELERATE, MAINTAIN, DECELERATE):
        raise UsageError(f"bad speed action {acc!r}")
    config = world.config
    car = world.car
    steer = planned_steering(world)
    action = Action(acc, steer)

    world.v_prev = car.v
    if acc == ACCELERATE:
        car.v = min(car.v + config.speed_step, config.v_max)
    elif acc == DECELERATE:
        car.v = max(car.v - config.speed_step, 0.0)

    # bicycle kinematics
    car.x += car.v * math.cos(car.heading) * config.dt
    car.y += car.v * math.sin(car.heading) * config.dt
    car.heading = (car.heading + car.v / config.wheelbase * math.tan(steer) * config.dt) % (2 * math.pi)

    for ped in world.peds:
        gx, gy = ped.goal
        remaining = math.hypot(gx - ped.x, gy - ped.y)
        advance = min(ped.speed * config.dt, remaining)
        if remaining > 1e-9:
            ped.x += advance * (gx - ped.x) / remaining
            ped.y += advance * (gy - ped.y) / remaining
    for other in world.others:
        other.x += other.v * math.cos(other.heading) * config.dt
        other.y += other.v * math.sin(other.heading) * config.dt

    world.t += 1
    reward = compute_reward(world, action)
    prox = check_proximity(world)

    goal_dist = math.hypot(car.x - world.scene.car_goal[0], car.y - world.scene.car_goal[1])
    if goal_dist <= config.goal_tol:
        world.done, world.outcome = True, "goal"
    elif HIT in prox or _car_collides(world):
        world.done, world.outcome = True, "collision"
    elif world.t >= config.max_steps:
        world.done, world.outcome = True, "timeout"

    world.prev_action = action
    world.prev_reward = reward.total
    obs = build_observation(world)
    info = {"steer": steer, "proximity": prox, "outcome": world.outcome, "t": world.t}
    return world, obs, reward, world.done, info
