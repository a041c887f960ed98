"""The highway predicate vocabulary and its concrete-state evaluators.

Evaluators work on episode payload dicts (see HighwayState.to_payload), so
stored datasets can be re-checked without reconstructing typed states.
"""

from __future__ import annotations

from ..tracedb import GroupDef, PredicateDef, Vocabulary
from .config import HighwayConfig

DOMAIN = "highway"


def _same_lane_gaps(state: dict):
    agent = state["agent"]
    for car in state["cars"]:
        if car["lane"] == agent["lane"]:
            yield car["pos"] - agent["pos"]


def _adjacent_offsets(state: dict, delta: int):
    agent = state["agent"]
    target = agent["lane"] + delta
    for car in state["cars"]:
        if car["lane"] == target:
            yield car["pos"] - agent["pos"]


def vocabulary(config: HighwayConfig | None = None) -> Vocabulary:
    """Lane membership (exclusive), relational windows, and collision status."""
    cfg = config or HighwayConfig()
    cfg.validate()

    def lane_check(index: int):
        return lambda s: s["agent"]["lane"] == index

    def behind(s: dict) -> bool:
        return any(0 < gap <= cfg.behind_window for gap in _same_lane_gaps(s))

    def in_front_of(s: dict) -> bool:
        return any(-cfg.behind_window <= gap < 0 for gap in _same_lane_gaps(s))

    def car_above(s: dict) -> bool:
        return any(
            abs(off) <= cfg.adjacent_window for off in _adjacent_offsets(s, -1)
        )

    def car_below(s: dict) -> bool:
        return any(
            abs(off) <= cfg.adjacent_window for off in _adjacent_offsets(s, +1)
        )

    def collision(s: dict) -> bool:
        return bool(s["collision"])

    groups = [
        GroupDef("lanes", exclusive=True),
        GroupDef("relational", exclusive=False),
        GroupDef("status", exclusive=False),
    ]
    predicates = [
        PredicateDef.make(
            f"lane-{i}", "lanes", f"the agent drives in lane {i} (1 is topmost)"
        )
        for i in range(1, cfg.lanes + 1)
    ] + [
        PredicateDef.make(
            "behind",
            "relational",
            "a car is ahead of the agent in its lane within the window",
            max_gap=cfg.behind_window,
        ),
        PredicateDef.make(
            "in-front-of",
            "relational",
            "a car follows the agent in its lane within the window",
            max_gap=cfg.behind_window,
        ),
        PredicateDef.make(
            "car-above",
            "relational",
            "a car sits in the next lane up within the side window",
            max_offset=cfg.adjacent_window,
        ),
        PredicateDef.make(
            "car-below",
            "relational",
            "a car sits in the next lane down within the side window",
            max_offset=cfg.adjacent_window,
        ),
        PredicateDef.make(
            "collision",
            "status",
            "the agent overlaps another car this step",
            gap=cfg.min_gap,
        ),
    ]
    evaluators = {f"lane-{i}": lane_check(i) for i in range(1, cfg.lanes + 1)}
    evaluators.update(
        {
            "behind": behind,
            "in-front-of": in_front_of,
            "car-above": car_above,
            "car-below": car_below,
            "collision": collision,
        }
    )
    return Vocabulary(groups, predicates, evaluators, domain=DOMAIN)
