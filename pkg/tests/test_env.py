"""Navigation POMDP: scene grids, rewards, kinematics, sensing, termination."""

import math

import numpy as np
import pytest

import qnav.env as env
from qnav.env import (ACCELERATE, DECELERATE, KMH, MAINTAIN, Action,
                      SceneError, UsageError)


def fresh_world(scenario=1, distance=20.0, speed=1.2):
    scene = env.make_scene(scenario, distance, speed)
    world, obs = env.reset(scene)
    return world, obs


def park_pedestrian(world, x=1000.0, y=1000.0):
    """Move the pedestrian far away so proximity terms cannot fire."""
    ped = world.peds[0]
    ped.x, ped.y = x, y
    ped.goal = (x, y)


# ---------------------------------------------------------------------------
# scenes


def test_train_grid_is_3690_scenes():
    scenes = env.generate_scenes("train")
    assert len(scenes) == 3690
    per_scenario = {}
    for s in scenes:
        per_scenario[s.scenario_id] = per_scenario.get(s.scenario_id, 0) + 1
    assert set(per_scenario) == set(env.TRAIN_SCENARIOS)
    assert all(count == 615 for count in per_scenario.values())


def test_train_grid_axes():
    grid = env.SceneGrid.train_default()
    assert len(grid.speeds()) == 15
    assert grid.speeds()[0] == 0.6 and grid.speeds()[-1] == 2.0
    assert len(grid.distances()) == 41
    assert grid.distances() == [float(d) for d in range(41)]


def test_single_point_grid():
    grid = env.SceneGrid((3,), 1.0, 1.0, 0.1, 10.0, 10.0, 1.0)
    scenes = env.generate_scenes(grid=grid)
    assert len(scenes) == 1
    assert scenes[0].scenario_id == 3
    assert scenes[0].ped_speed == 1.0
    assert scenes[0].ped_distance == 10.0


def test_empty_grid_rejected():
    with pytest.raises(SceneError):
        env.generate_scenes(grid=env.SceneGrid((), 1.0, 1.0, 0.1, 10.0, 10.0, 1.0))
    with pytest.raises(SceneError):
        env.generate_scenes("validation")


def test_scene_ordering_deterministic():
    a = env.generate_scenes("train")
    b = env.generate_scenes("train")
    assert a == b


def test_scenario_templates():
    plain = env.make_scene(1, 20.0, 1.0)
    assert plain.obstacles == () and plain.other_cars == ()
    occluded = env.make_scene(3, 20.0, 1.0)
    assert len(occluded.obstacles) == 1
    oncoming = env.make_scene(5, 20.0, 1.0)
    assert len(oncoming.other_cars) == 1
    both = env.make_scene(8, 20.0, 1.0)
    assert len(both.obstacles) == 1 and len(both.other_cars) == 1
    with pytest.raises(SceneError):
        env.make_scene(42, 20.0, 1.0)


def test_pedestrian_crosses_road():
    scene = env.make_scene(1, 20.0, 1.0)  # spawns on the right sidewalk
    assert scene.ped_spawn[1] < 0 < scene.ped_goal[1]
    left = env.make_scene(2, 20.0, 1.0)
    assert left.ped_spawn[1] > 0 > left.ped_goal[1]


# ---------------------------------------------------------------------------
# reset


def test_reset_initial_state():
    world, obs = fresh_world()
    assert world.car.v == 0.0
    assert world.t == 0
    assert not world.done
    assert obs.speed == 0.0
    assert world.path.poses  # plan exists


def test_reset_deterministic():
    scene = env.make_scene(4, 15.0, 0.8)
    _, obs1 = env.reset(scene)
    _, obs2 = env.reset(scene)
    np.testing.assert_array_equal(obs1.to_vector(), obs2.to_vector())


def test_far_pedestrian_not_observed():
    world, obs = fresh_world(distance=60.0)
    assert all(slot.visible == 0.0 for slot in obs.pedestrians)


def test_near_pedestrian_observed():
    world, obs = fresh_world(distance=20.0)
    assert obs.pedestrians[0].visible == 1.0


# ---------------------------------------------------------------------------
# observations hide pedestrian goals


def test_observation_structure_has_no_goal_fields():
    _, obs = fresh_world()
    serialized = obs.to_dict()
    assert "goal" not in str(sorted(serialized)).lower() or "rel_goal" in serialized
    ped_fields = set(serialized["pedestrians"][0])
    assert ped_fields == {"rel_pos", "rel_vel", "visible"}
    assert obs.to_vector().shape == (env.observation_dim(),)
    assert env.observation_dim() == 28


def test_occlusion_blocks_view():
    world, obs = fresh_world(scenario=3, distance=20.0)
    ped = world.peds[0]
    assert env.is_occluded(world, ped)
    assert all(slot.visible == 0.0 for slot in obs.pedestrians)
    # no obstacle between car and pedestrian in the plain scenario
    plain_world, plain_obs = fresh_world(scenario=1, distance=20.0)
    assert not env.is_occluded(plain_world, plain_world.peds[0])
    assert plain_obs.pedestrians[0].visible == 1.0


# ---------------------------------------------------------------------------
# kinematics


def test_accelerate_from_rest():
    world, _ = fresh_world()
    park_pedestrian(world)
    world, _, _, _, _ = env.step(world, ACCELERATE)
    assert world.car.v == pytest.approx(5.0 * KMH)
    assert world.car.v == pytest.approx(1.389, abs=1e-3)


def test_maintain_at_rest_stays_put():
    world, _ = fresh_world()
    park_pedestrian(world)
    x0, y0 = world.car.x, world.car.y
    world, _, _, _, _ = env.step(world, MAINTAIN)
    assert (world.car.x, world.car.y) == (x0, y0)


def test_speed_clamped_to_hard_max():
    world, _ = fresh_world()
    park_pedestrian(world)
    for _ in range(20):
        world, _, _, done, _ = env.step(world, ACCELERATE)
        if done:
            break
    assert world.car.v <= world.config.v_max + 1e-12


def test_decelerate_clamps_at_zero():
    world, _ = fresh_world()
    park_pedestrian(world)
    world, _, _, _, _ = env.step(world, DECELERATE)
    assert world.car.v == 0.0


def test_heading_and_speed_invariants():
    world, _ = fresh_world(scenario=3)
    rng = np.random.default_rng(0)
    while not world.done:
        world, _, _, _, _ = env.step(world, int(rng.integers(3)))
        assert 0.0 <= world.car.heading < 2 * math.pi
        assert world.car.v >= 0.0


def test_episode_caps_at_500_steps():
    world, _ = fresh_world()
    park_pedestrian(world)
    steps = 0
    while not world.done:
        world, _, _, _, _ = env.step(world, MAINTAIN)  # stationary forever
        steps += 1
    assert steps == 500
    assert world.outcome == "timeout"


def test_step_after_done_raises():
    world, _ = fresh_world()
    world.done = True
    with pytest.raises(UsageError):
        env.step(world, MAINTAIN)
    world.done = False
    with pytest.raises(UsageError):
        env.step(world, 7)


def test_transition_deterministic():
    runs = []
    for _ in range(2):
        world, _ = fresh_world(scenario=5)
        states = []
        for _ in range(40):
            world, _, reward, done, _ = env.step(world, ACCELERATE)
            states.append((world.car.x, world.car.y, world.car.v, reward.total))
            if done:
                break
        runs.append(states)
    assert runs[0] == runs[1]


# ---------------------------------------------------------------------------
# proximity


def test_proximity_clear_when_far():
    world, _ = fresh_world(distance=30.0)
    assert env.check_proximity(world) == [env.CLEAR]


def test_proximity_hit_at_car_center():
    world, _ = fresh_world()
    ped = world.peds[0]
    ped.x, ped.y = world.car.x, world.car.y
    assert env.check_proximity(world) == [env.HIT]


def test_proximity_near_miss_requires_motion():
    world, _ = fresh_world()
    ped = world.peds[0]
    # 1.0 m off the side of the car body
    ped.x = world.car.x
    ped.y = world.car.y + world.config.car_width / 2.0 + 1.0
    world.car.v = 0.0
    assert env.check_proximity(world) == [env.CLEAR]
    world.car.v = 2.0
    assert env.check_proximity(world) == [env.NEAR_MISS]


# ---------------------------------------------------------------------------
# reward branches


def test_reward_goal_term():
    world, _ = fresh_world()
    park_pedestrian(world)
    world.car.x, world.car.y = world.scene.car_goal
    breakdown = env.compute_reward(world, Action(MAINTAIN, 0.0))
    assert breakdown.goal == 200.0
    assert breakdown.not_goal == 0.0


def test_reward_stationary_composite_example():
    """Decelerate at rest with 25 degree steering, 100 m out: -1 -1 -0.1."""
    world, _ = fresh_world()
    park_pedestrian(world)
    assert math.hypot(world.car.x - 100.0, world.car.y) == pytest.approx(100.0)
    breakdown = env.compute_reward(world, Action(DECELERATE, math.radians(25.0)))
    assert breakdown.braking == -1.0
    assert breakdown.steer == -1.0
    assert breakdown.not_goal == pytest.approx(-0.1)
    assert breakdown.total == pytest.approx(-2.1)


def test_reward_hit_at_speed_limit():
    world, _ = fresh_world()
    world.car.v = world.config.speed_limit  # 50 km/h
    ped = world.peds[0]
    ped.x, ped.y = world.car.x, world.car.y
    breakdown = env.compute_reward(world, Action(MAINTAIN, 0.0))
    assert breakdown.hit == pytest.approx(-100.0)
    assert breakdown.obstacle <= -100.0


def test_reward_hit_scales_with_impact_speed():
    world, _ = fresh_world()
    ped = world.peds[0]
    ped.x, ped.y = world.car.x, world.car.y
    world.car.v = world.config.speed_limit / 2.0
    assert env.compute_reward(world, Action(MAINTAIN, 0.0)).hit == pytest.approx(-50.0)
    world.car.v = 0.0
    breakdown = env.compute_reward(world, Action(MAINTAIN, 0.0))
    assert breakdown.hit == 0.0
    assert breakdown.obstacle == 0.0  # stationary: no obstacle-cost penalty


def test_reward_near_miss_term():
    world, _ = fresh_world()
    ped = world.peds[0]
    ped.x = world.car.x
    ped.y = world.car.y + world.config.car_width / 2.0 + 1.0
    world.car.v = 2.0
    assert env.compute_reward(world, Action(MAINTAIN, 0.0)).near_miss == -10.0


def test_reward_over_speeding_term():
    world, _ = fresh_world()
    park_pedestrian(world)
    world.car.v = 55.0 * KMH
    assert env.compute_reward(world, Action(MAINTAIN, 0.0)).over_speeding == -10.0
    world.car.v = 50.0 * KMH
    assert env.compute_reward(world, Action(MAINTAIN, 0.0)).over_speeding == 0.0


def test_reward_not_goal_distance_term():
    world, _ = fresh_world()
    park_pedestrian(world)
    world.car.x = 60.0  # 40 m out
    breakdown = env.compute_reward(world, Action(MAINTAIN, 0.0))
    assert breakdown.not_goal == pytest.approx(-0.04)


def test_reward_braking_only_when_stationary():
    world, _ = fresh_world()
    park_pedestrian(world)
    world.v_prev = 0.0
    assert env.compute_reward(world, Action(DECELERATE, 0.0)).braking == -1.0
    world.v_prev = 1.0
    assert env.compute_reward(world, Action(DECELERATE, 0.0)).braking == 0.0


def test_reward_total_is_sum_of_terms():
    world, _ = fresh_world(scenario=3)
    rng = np.random.default_rng(1)
    while not world.done:
        world, _, breakdown, _, _ = env.step(world, int(rng.integers(3)))
        fields = (breakdown.goal + breakdown.hit + breakdown.obstacle
                  + breakdown.near_miss + breakdown.over_speeding
                  + breakdown.not_goal + breakdown.braking + breakdown.steer)
        assert breakdown.total == fields


# ---------------------------------------------------------------------------
# termination


def test_goal_outcome():
    world, _ = fresh_world()
    park_pedestrian(world)
    while not world.done:
        acc = ACCELERATE if world.car.v < 40.0 * KMH else MAINTAIN
        world, _, _, _, _ = env.step(world, acc)
    assert world.outcome == "goal"


def test_collision_outcome():
    world, _ = fresh_world(distance=10.0, speed=0.0)
    ped = world.peds[0]
    ped.x, ped.y = 10.0, 0.0  # parked in the lane
    ped.goal = (10.0, 0.0)
    while not world.done:
        world, _, _, _, _ = env.step(world, ACCELERATE)
    assert world.outcome == "collision"


def test_cost_map_layout():
    scene = env.make_scene(3, 20.0, 1.0)
    cmap = env.build_cost_map(scene)
    from qnav import planner as planner_mod
    assert cmap.cost_at(50.0, 0.0) == planner_mod.COST_ROAD
    assert cmap.cost_at(50.0, -4.5) == planner_mod.COST_SIDEWALK
    assert cmap.cost_at(50.0, 20.0) == planner_mod.COST_BLOCKED
    ox0, oy0, ox1, oy1 = scene.obstacles[0]
    assert cmap.cost_at((ox0 + ox1) / 2.0, (oy0 + oy1) / 2.0) == planner_mod.COST_BLOCKED
