"""Deterministic stepping of the highway world.

All randomness flows through one ``random.Random`` seeded from a string, so
an episode is a pure function of (policy, seed, config).  Blue cars keep
their lane and cruise speed but match the speed of a close leader, which
keeps same-lane traffic physically consistent; they spawn and despawn at the
horizon edges around the agent.
"""

from __future__ import annotations

import random

from ..tracedb import Dataset, Episode, ingest
from .config import Car, HighwayConfig, HighwayState
from .policies import FaultyPolicy, FaultySpec, Policy, make_faulty, make_policy
from .predicates import vocabulary


def _spawn_car(
    rng: random.Random,
    cfg: HighwayConfig,
    agent_lane: int,
    agent_pos: float,
    occupied: list[Car],
    near_edge: bool,
) -> Car:
    for _ in range(60):
        lane = rng.randint(1, cfg.lanes)
        if near_edge:
            distance = cfg.horizon - rng.uniform(2.0, 20.0)
            pos = agent_pos + (distance if rng.random() < 0.5 else -distance)
        else:
            pos = agent_pos + rng.uniform(-cfg.horizon * 0.9, cfg.horizon * 0.9)
        speed = round(rng.uniform(cfg.car_speed_min, cfg.car_speed_max), 2)
        same_lane = [c.pos for c in occupied if c.lane == lane]
        if lane == agent_lane:
            same_lane.append(agent_pos)
        if all(abs(pos - other) > cfg.spawn_clearance for other in same_lane):
            return Car(lane, round(pos, 2), speed, speed)
    # fully blocked (vanishingly rare): take the emptiest lane at the far edge
    lane = min(
        range(1, cfg.lanes + 1),
        key=lambda l: sum(1 for c in occupied if c.lane == l),
    )
    speed = round(rng.uniform(cfg.car_speed_min, cfg.car_speed_max), 2)
    return Car(lane, round(agent_pos + cfg.horizon - 1.0, 2), speed, speed)


def initial_state(rng: random.Random, cfg: HighwayConfig) -> HighwayState:
    agent_lane = cfg.agent_start_lane or rng.randint(1, cfg.lanes)
    cars: list[Car] = []
    for _ in range(cfg.n_cars):
        cars.append(_spawn_car(rng, cfg, agent_lane, 0.0, cars, near_edge=False))
    return HighwayState(
        step=1,
        agent_lane=agent_lane,
        agent_pos=0.0,
        agent_speed=cfg.agent_speed,
        cars=tuple(cars),
    )


def _clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


def _car_speed(car: Car, state: HighwayState, cfg: HighwayConfig) -> float:
    """Cruise, unless a leader (car or agent) is close ahead in the lane."""
    leaders = [
        other.pos
        for other in state.cars
        if other is not car and other.lane == car.lane and other.pos > car.pos
    ]
    leader_speeds = {
        other.pos: other.speed
        for other in state.cars
        if other is not car and other.lane == car.lane
    }
    if car.lane == state.agent_lane and state.agent_pos > car.pos:
        leaders.append(state.agent_pos)
        leader_speeds[state.agent_pos] = state.agent_speed
    if leaders:
        nearest = min(leaders)
        gap = nearest - car.pos
        if gap <= cfg.follow_gap:
            matched = min(car.speed, leader_speeds[nearest])
            if gap <= cfg.min_gap * 2.5:
                matched = max(0.0, matched - 1.0)  # back off when crowding
            return round(matched, 2)
    return car.cruise


def advance(
    state: HighwayState, action: str, rng: random.Random, cfg: HighwayConfig
) -> HighwayState:
    lane = state.agent_lane
    speed = state.agent_speed
    if action == "accelerate":
        speed = _clamp(speed + cfg.accel, cfg.speed_min, cfg.speed_max)
    elif action == "decelerate":
        speed = _clamp(speed - cfg.accel, cfg.speed_min, cfg.speed_max)
    elif action == "lane-up":
        lane = max(1, lane - 1)
    elif action == "lane-down":
        lane = min(cfg.lanes, lane + 1)
    elif action != "idle":
        raise ValueError(f"unknown action {action!r}")
    agent_pos = round(state.agent_pos + speed, 2)

    moved: list[Car] = []
    for car in state.cars:
        new_speed = _car_speed(car, state, cfg)
        moved.append(Car(car.lane, round(car.pos + new_speed, 2), new_speed, car.cruise))

    kept: list[Car] = []
    respawn = 0
    for car in moved:
        if abs(car.pos - agent_pos) > cfg.horizon:
            respawn += 1
        else:
            kept.append(car)
    for _ in range(respawn):
        kept.append(_spawn_car(rng, cfg, lane, agent_pos, kept, near_edge=True))

    collision = False
    for before, after in zip(state.cars, moved):
        if after not in kept:
            continue
        if after.lane != lane:
            continue
        gap_now = after.pos - agent_pos
        if abs(gap_now) < cfg.min_gap:
            collision = True
            break
        # same lane across the whole step: detect pass-through
        if before.lane == state.agent_lane and lane == state.agent_lane:
            gap_before = before.pos - state.agent_pos
            if gap_before * gap_now < 0:
                collision = True
                break
    return HighwayState(
        step=state.step + 1,
        agent_lane=lane,
        agent_pos=agent_pos,
        agent_speed=speed,
        cars=tuple(kept),
        collision=collision,
    )


def simulate(
    policy: Policy,
    steps: int,
    seed,
    config: HighwayConfig | None = None,
    episode_id: str | None = None,
) -> Episode:
    """One deterministic episode with its abstract trace and metadata."""
    cfg = config or HighwayConfig()
    cfg.validate()
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = random.Random(f"highway:{seed}")
    policy.reset()
    states = [initial_state(rng, cfg)]
    actions: list[str] = []
    for _ in range(steps - 1):
        action = policy.act(states[-1])
        actions.append(action)
        states.append(advance(states[-1], action, rng, cfg))
    actions.append(policy.act(states[-1]))  # recorded but never applied

    vocab = vocabulary(cfg)
    payloads = [
        state.to_payload(action) for state, action in zip(states, actions)
    ]
    abstract = [vocab.abstract_state(payload) for payload in payloads]
    metadata = {
        "policy": policy.name,
        "seed": str(seed),
        "road": cfg.road_dict(),
    }
    if isinstance(policy, FaultyPolicy):
        metadata["trigger"] = policy.describe_trigger()
        metadata["trigger_step"] = policy.trigger_step
    return Episode(
        id=episode_id or f"{policy.name}-{seed}",
        concrete=payloads,
        abstract=abstract,
        metadata=metadata,
    )


def generate_dataset(
    policy_spec: str | FaultySpec | Policy,
    episodes: int,
    steps: int,
    seed,
    config: HighwayConfig | None = None,
) -> Dataset:
    """Simulate a batch of episodes under one policy into a dataset.

    Episode i runs with the derived seed ``"<seed>:<i>"``, so the whole
    dataset is reproducible from the call arguments.
    """
    cfg = config or HighwayConfig()
    if isinstance(policy_spec, Policy):
        policy = policy_spec
    elif isinstance(policy_spec, FaultySpec):
        policy = make_faulty(policy_spec, cfg)
    else:
        policy = make_policy(policy_spec, cfg)
    if episodes < 1:
        raise ValueError("at least one episode is required")
    collected = [
        simulate(policy, steps, f"{seed}:{i}", cfg, episode_id=f"ep-{i:04d}")
        for i in range(episodes)
    ]
    return ingest(collected, vocabulary(cfg), verify_abstraction=False)
