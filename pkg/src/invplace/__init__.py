"""Inventory placement and online fulfillment on bipartite fulfillment networks."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ArrivalSequence,
    DemandScenario,
    FractionalPlacement,
    NetworkInstance,
    Placement,
    StarNetwork,
    aggregate,
    expand_star,
    rng_stream,
)

__all__ = [
    "ArrivalSequence",
    "DemandScenario",
    "FractionalPlacement",
    "NetworkInstance",
    "Placement",
    "StarNetwork",
    "aggregate",
    "expand_star",
    "rng_stream",
]
