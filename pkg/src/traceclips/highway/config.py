"""Road configuration and state types for the highway domain.

Lanes are numbered from top to bottom: lane 1 is the topmost.  "Above"
always means the lane with the smaller number.  Positions are longitudinal
meters; one step is one second.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ACTIONS = ("idle", "accelerate", "decelerate", "lane-up", "lane-down")

LANE_WIDTH = 4.0


class InvalidConfigError(Exception):
    pass


@dataclass(frozen=True)
class HighwayConfig:
    lanes: int = 4
    horizon: float = 100.0  # cars live within +/- horizon of the agent
    n_cars: int = 6
    car_speed_min: float = 15.0
    car_speed_max: float = 25.0
    agent_speed: float = 20.0  # cruise speed of the scripted policies
    speed_min: float = 0.0
    speed_max: float = 30.0
    accel: float = 2.0  # speed change per step
    min_gap: float = 2.0  # same-lane distance that counts as a collision
    spawn_clearance: float = 12.0
    follow_gap: float = 12.0  # blue cars match the speed of a leader this close
    behind_window: float = 10.0  # behind / in-front-of predicate window
    adjacent_window: float = 5.0  # car-above / car-below predicate window
    agent_start_lane: int | None = None  # seeded uniform pick when unset

    def validate(self) -> None:
        if self.lanes < 1:
            raise InvalidConfigError("at least one lane is required")
        if self.horizon <= self.spawn_clearance:
            raise InvalidConfigError("horizon must exceed the spawn clearance")
        if self.n_cars < 0:
            raise InvalidConfigError("car count cannot be negative")
        if not (self.speed_min <= self.car_speed_min <= self.car_speed_max <= self.speed_max):
            raise InvalidConfigError("car speed range must sit inside the speed bounds")
        if not (self.speed_min <= self.agent_speed <= self.speed_max):
            raise InvalidConfigError("agent cruise speed outside the speed bounds")
        if self.accel <= 0:
            raise InvalidConfigError("acceleration step must be positive")
        if self.min_gap <= 0 or self.behind_window <= 0 or self.adjacent_window <= 0:
            raise InvalidConfigError("distance windows must be positive")
        if self.agent_start_lane is not None and not 1 <= self.agent_start_lane <= self.lanes:
            raise InvalidConfigError(
                f"start lane {self.agent_start_lane} outside 1..{self.lanes}"
            )

    def road_dict(self) -> dict:
        return {"lanes": self.lanes, "horizon": self.horizon, "lane_width": LANE_WIDTH}

    @classmethod
    def from_dict(cls, overrides: dict) -> "HighwayConfig":
        known = {f: overrides[f] for f in overrides}
        try:
            config = cls(**known)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from None
        config.validate()
        return config


@dataclass(frozen=True)
class Car:
    lane: int
    pos: float
    speed: float
    cruise: float = field(default=0.0, compare=False)  # sim-internal target speed

    def payload(self) -> dict:
        return {"lane": self.lane, "pos": round(self.pos, 2), "speed": round(self.speed, 2)}


@dataclass(frozen=True)
class HighwayState:
    step: int  # 1-based
    agent_lane: int
    agent_pos: float
    agent_speed: float
    cars: tuple[Car, ...]
    collision: bool = False

    def to_payload(self, action: str | None = None) -> dict:
        return {
            "step": self.step,
            "agent": {
                "lane": self.agent_lane,
                "pos": round(self.agent_pos, 2),
                "speed": round(self.agent_speed, 2),
            },
            "cars": [car.payload() for car in self.cars],
            "collision": self.collision,
            "action": action,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "HighwayState":
        agent = payload["agent"]
        return cls(
            step=payload["step"],
            agent_lane=agent["lane"],
            agent_pos=agent["pos"],
            agent_speed=agent["speed"],
            cars=tuple(
                Car(c["lane"], c["pos"], c["speed"], c["speed"]) for c in payload["cars"]
            ),
            collision=payload.get("collision", False),
        )
