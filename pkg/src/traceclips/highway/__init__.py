"""Desk-scale multi-lane driving domain: simulator, policies, predicates."""

from .config import ACTIONS, Car, HighwayConfig, HighwayState, InvalidConfigError
from .policies import (
    POLICIES,
    CollisionPolicy,
    FaultyPolicy,
    FaultySpec,
    PlainPolicy,
    Policy,
    TopLanePolicy,
    make_faulty,
    make_policy,
)
from .predicates import DOMAIN, vocabulary
from .render import ascii_clip, ascii_frame, render_frame
from .sim import advance, generate_dataset, initial_state, simulate

__all__ = [
    "ACTIONS",
    "Car",
    "CollisionPolicy",
    "DOMAIN",
    "FaultyPolicy",
    "FaultySpec",
    "HighwayConfig",
    "HighwayState",
    "InvalidConfigError",
    "POLICIES",
    "PlainPolicy",
    "Policy",
    "TopLanePolicy",
    "advance",
    "ascii_clip",
    "ascii_frame",
    "generate_dataset",
    "initial_state",
    "make_faulty",
    "make_policy",
    "render_frame",
    "simulate",
    "vocabulary",
]
