"""Scripted driving policies and the latched faulty-agent composition.

All scripted policies are pure functions of the current state, which makes
the faulty composition testable frame by frame: before the trigger step the
recorded actions must equal the base policy's choices, from the trigger step
on the fault policy's.
"""

from __future__ import annotations

from ..ltlf import Formula, atoms, canonical, evaluate, is_propositional, parse
from ..tracedb import UnknownPredicateError
from .config import HighwayConfig, HighwayState, InvalidConfigError
from .predicates import vocabulary


class Policy:
    name = "policy"

    def reset(self) -> None:
        pass

    def act(self, state: HighwayState) -> str:
        raise NotImplementedError


def _gap_ahead(state: HighwayState, lane: int) -> float | None:
    gaps = [
        car.pos - state.agent_pos
        for car in state.cars
        if car.lane == lane and car.pos > state.agent_pos
    ]
    return min(gaps) if gaps else None


def _gap_behind(state: HighwayState, lane: int) -> float | None:
    gaps = [
        state.agent_pos - car.pos
        for car in state.cars
        if car.lane == lane and car.pos <= state.agent_pos
    ]
    return min(gaps) if gaps else None


def _lane_clear(state: HighwayState, lane: int, clearance: float, lanes: int) -> bool:
    if not 1 <= lane <= lanes:
        return False
    return all(
        car.lane != lane or abs(car.pos - state.agent_pos) > clearance
        for car in state.cars
    )


class PlainPolicy(Policy):
    """Keep the lane and cruise speed; sidestep or brake around traffic."""

    name = "plain"
    evade_gap = 12.0
    safe_clearance = 12.0  # covers one step of worst-case closing speed
    tail_gap = 4.0

    def __init__(self, config: HighwayConfig | None = None):
        self.config = config or HighwayConfig()

    def act(self, state: HighwayState) -> str:
        cfg = self.config
        lane = state.agent_lane
        ahead = _gap_ahead(state, lane)
        if ahead is not None and ahead <= self.evade_gap:
            if _lane_clear(state, lane - 1, self.safe_clearance, cfg.lanes):
                return "lane-up"
            if _lane_clear(state, lane + 1, self.safe_clearance, cfg.lanes):
                return "lane-down"
            return "decelerate"
        behind = _gap_behind(state, lane)
        if behind is not None and behind <= self.tail_gap:
            if _lane_clear(state, lane - 1, self.safe_clearance, cfg.lanes):
                return "lane-up"
            if _lane_clear(state, lane + 1, self.safe_clearance, cfg.lanes):
                return "lane-down"
            return "accelerate" if state.agent_speed < cfg.speed_max else "idle"
        if state.agent_speed < cfg.agent_speed:
            return "accelerate"
        if state.agent_speed > cfg.agent_speed:
            return "decelerate"
        return "idle"


class TopLanePolicy(Policy):
    """Climb toward lane 1 and stay there."""

    name = "top-lane"
    climb_clearance = 4.0
    brake_floor = 12.0

    def __init__(self, config: HighwayConfig | None = None):
        self.config = config or HighwayConfig()

    def act(self, state: HighwayState) -> str:
        cfg = self.config
        if state.agent_lane > 1:
            if _lane_clear(state, state.agent_lane - 1, self.climb_clearance, cfg.lanes):
                return "lane-up"
            # blocked: drop back so the blocker pulls ahead
            return "decelerate" if state.agent_speed > self.brake_floor else "idle"
        ahead = _gap_ahead(state, 1)
        if ahead is not None and ahead <= 12.0:
            return "decelerate"
        if state.agent_speed < cfg.agent_speed:
            return "accelerate"
        return "idle"


class CollisionPolicy(Policy):
    """Steer toward the nearest car and close the distance."""

    name = "collision"

    def __init__(self, config: HighwayConfig | None = None):
        self.config = config or HighwayConfig()

    def act(self, state: HighwayState) -> str:
        if not state.cars:
            return "idle"
        target = min(
            state.cars, key=lambda c: (abs(c.pos - state.agent_pos), c.lane, c.pos)
        )
        if target.lane < state.agent_lane:
            return "lane-up"
        if target.lane > state.agent_lane:
            return "lane-down"
        if target.pos >= state.agent_pos:
            return "accelerate" if state.agent_speed < self.config.speed_max else "idle"
        return "decelerate" if state.agent_speed > self.config.speed_min else "idle"


POLICIES = {
    PlainPolicy.name: PlainPolicy,
    TopLanePolicy.name: TopLanePolicy,
    CollisionPolicy.name: CollisionPolicy,
}


def make_policy(name: str, config: HighwayConfig | None = None) -> Policy:
    try:
        factory = POLICIES[name]
    except KeyError:
        raise InvalidConfigError(
            f"unknown policy {name!r}; choose from {', '.join(sorted(POLICIES))}"
        ) from None
    return factory(config)


class FaultySpec:
    """Base policy, fault policy, and the propositional trigger between them."""

    def __init__(self, base: str | Policy, fault: str | Policy, trigger: str | Formula):
        self.base = base
        self.fault = fault
        self.trigger = trigger


class FaultyPolicy(Policy):
    """Runs the base policy until the trigger first holds, then latches onto
    the fault policy for the rest of the episode.

    Control passes at the trigger step itself: the fault policy picks the
    action of the first state satisfying the trigger.  The step index of
    that state is exposed for ground-truth tests.
    """

    def __init__(self, base: Policy, fault: Policy, trigger: Formula, config: HighwayConfig):
        self.base = base
        self.fault = fault
        self.trigger = trigger
        self.name = f"{base.name}+{fault.name}"
        self._vocab = vocabulary(config)
        self._latched = False
        self.trigger_step: int | None = None

    def reset(self) -> None:
        self.base.reset()
        self.fault.reset()
        self._latched = False
        self.trigger_step = None

    def act(self, state: HighwayState) -> str:
        if not self._latched:
            mask = self._vocab.abstract_state(state.to_payload())
            if evaluate(self.trigger, [self._vocab.to_names(mask)]):
                self._latched = True
                self.trigger_step = state.step
        if self._latched:
            return self.fault.act(state)
        return self.base.act(state)

    def describe_trigger(self) -> str:
        return canonical(self.trigger)


def make_faulty(spec: FaultySpec, config: HighwayConfig | None = None) -> FaultyPolicy:
    cfg = config or HighwayConfig()
    base = spec.base if isinstance(spec.base, Policy) else make_policy(spec.base, cfg)
    fault = spec.fault if isinstance(spec.fault, Policy) else make_policy(spec.fault, cfg)
    trigger = spec.trigger if isinstance(spec.trigger, Formula) else parse(spec.trigger)
    if not is_propositional(trigger):
        raise InvalidConfigError(
            f"trigger must be propositional, got {canonical(trigger)}"
        )
    vocab = vocabulary(cfg)
    try:
        vocab.validate_atoms(atoms(trigger), "faulty trigger")
    except UnknownPredicateError as exc:
        raise InvalidConfigError(str(exc)) from exc
    return FaultyPolicy(base, fault, trigger, cfg)
