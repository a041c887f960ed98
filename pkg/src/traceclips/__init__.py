"""traceclips: temporal-logic retrieval of agent-behavior clips."""

__version__ = "0.1.0"
