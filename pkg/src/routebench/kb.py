"""Fixed land-cover knowledge base: classes, agents, objectives and constraint vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

from routebench import SCHEMA_VERSION

NUM_CLASSES = 8
MAX_TIER = 8

CLASS_NAMES: Tuple[str, ...] = (
    "Bareland",
    "Rangeland",
    "Developed space",
    "Road",
    "Tree",
    "Water",
    "Agriculture land",
    "Building",
)

BARELAND, RANGELAND, DEVELOPED, ROAD, TREE, WATER, AGRICULTURE, BUILDING = range(NUM_CLASSES)


class KBViolation(ValueError):
    """A scenario contradicts the knowledge base."""


class Agent(str, Enum):
    PEDESTRIAN = "Pedestrian"
    CAR = "Car"
    DRONE = "Drone"
    BOAT = "Boat"


class Objective(str, Enum):
    FASTEST = "Fastest"
    COMFORT = "Comfort"
    SAFEST = "Safest"
    SHORTEST = "Shortest"


# (always, conditional, never)
_TIERS: Dict[Agent, Tuple[FrozenSet[int], FrozenSet[int], FrozenSet[int]]] = {
    Agent.PEDESTRIAN: (frozenset({2, 3}), frozenset({0, 1, 4, 6}), frozenset({5, 7})),
    Agent.CAR: (frozenset({2, 3}), frozenset({0, 1, 6}), frozenset({4, 5, 7})),
    Agent.DRONE: (frozenset({0, 1, 2, 3, 5, 6}), frozenset({4, 7}), frozenset()),
    Agent.BOAT: (frozenset({5}), frozenset(), frozenset({0, 1, 2, 3, 4, 6, 7})),
}

# Rankings are written most-preferred group first; classes inside a group tie.
_RANKINGS: Dict[Agent, Dict[Objective, Tuple[Tuple[int, ...], ...]]] = {
    Agent.PEDESTRIAN: {
        Objective.FASTEST: ((0, 1, 2, 3, 4, 6),),
        Objective.COMFORT: ((2,), (3,), (6,), (1,), (0,), (4,)),
        Objective.SAFEST: ((2,), (3,), (6,), (1,), (0,), (4,)),
        Objective.SHORTEST: ((0, 1, 2, 3, 4, 6),),
    },
    Agent.CAR: {
        Objective.FASTEST: ((3,), (2,), (6,), (1,), (0,)),
        Objective.COMFORT: ((3,), (2,), (6,), (1,), (0,)),
        Objective.SAFEST: ((3,), (2,), (6,), (1,), (0,)),
        Objective.SHORTEST: ((0, 1, 2, 3, 6),),
    },
    Agent.DRONE: {
        Objective.FASTEST: ((0, 1, 2, 3, 5, 6, 7), (4,)),
        Objective.COMFORT: ((0, 1, 2, 3, 6, 7), (5,), (4,)),
        Objective.SAFEST: ((0, 1, 2, 3, 6), (4, 5, 7)),
        Objective.SHORTEST: ((0, 1, 2, 3, 5, 6, 7), (4,)),
    },
    Agent.BOAT: {
        Objective.FASTEST: ((5,),),
        Objective.COMFORT: ((5,),),
        Objective.SAFEST: ((5,),),
        Objective.SHORTEST: ((5,),),
    },
}


def class_name(class_id: int) -> str:
    return CLASS_NAMES[class_id]


def class_id(name: str) -> int:
    try:
        return CLASS_NAMES.index(name)
    except ValueError:
        raise KeyError(f"unknown land-cover class {name!r}") from None


def agent_tiers(agent: Agent | str) -> Tuple[FrozenSet[int], FrozenSet[int], FrozenSet[int]]:
    """Return the (always, conditional, never) traversable class sets for ``agent``."""
    return _TIERS[Agent(agent)]


def ranking(agent: Agent | str, objective: Objective | str) -> Tuple[Tuple[int, ...], ...]:
    """Priority groups for an agent/objective pair, most preferred first."""
    return _RANKINGS[Agent(agent)][Objective(objective)]


@dataclass(frozen=True)
class ScenarioConfig:
    agent: Agent
    objective: Objective
    start_end_classes: Tuple[int, int]
    allowed_classes: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "agent", Agent(self.agent))
        object.__setattr__(self, "objective", Objective(self.objective))
        object.__setattr__(self, "start_end_classes", tuple(int(c) for c in self.start_end_classes))
        object.__setattr__(self, "allowed_classes", frozenset(int(c) for c in self.allowed_classes))
        if len(self.start_end_classes) != 2:
            raise ValueError("start_end_classes must be a pair")

    def validate(self) -> None:
        always, conditional, never = agent_tiers(self.agent)
        bad = self.allowed_classes & never
        if bad:
            names = ", ".join(class_name(c) for c in sorted(bad))
            raise KBViolation(f"{self.agent.value} can never traverse {names}")
        unknown = self.allowed_classes - (always | conditional)
        if unknown:
            raise KBViolation(f"unknown class ids {sorted(unknown)}")
        if not set(self.start_end_classes) <= self.allowed_classes:
            raise KBViolation("start/end classes must be allowed")

    def to_dict(self) -> dict:
        return {
            "agent": self.agent.value,
            "objective": self.objective.value,
            "start_end_classes": list(self.start_end_classes),
            "allowed_classes": sorted(self.allowed_classes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(d["agent"], d["objective"], tuple(d["start_end_classes"]), frozenset(d["allowed_classes"]))


@dataclass(frozen=True)
class ConstraintVectors:
    trav: Tuple[int, ...]
    pref: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "trav", tuple(int(v) for v in self.trav))
        object.__setattr__(self, "pref", tuple(int(v) for v in self.pref))
        if len(self.trav) != NUM_CLASSES or len(self.pref) != NUM_CLASSES:
            raise ValueError("constraint vectors must have length 8")

    def restrict(self, present: Iterable[int]) -> "ConstraintVectors":
        """Keep only classes in ``present`` and re-tier the preferences densely."""
        keep = set(present)
        trav = [t if i in keep else 0 for i, t in enumerate(self.trav)]
        return ConstraintVectors(tuple(trav), tuple(canonicalize_pref(self.pref, trav)))

    def to_dict(self) -> dict:
        return {"trav": list(self.trav), "pref": list(self.pref)}


def canonicalize_pref(raw_pref: Sequence[int], trav: Sequence[int]) -> List[int]:
    """Relabel preferences on traversable positions to dense tiers ``1..T``.

    Ordering and ties among traversable positions are kept; every other position
    becomes 0.
    """
    if len(raw_pref) != len(trav):
        raise ValueError("pref and trav lengths differ")
    levels = sorted({int(p) for p, t in zip(raw_pref, trav) if t})
    tier = {v: k + 1 for k, v in enumerate(levels)}
    return [tier[int(p)] if t else 0 for p, t in zip(raw_pref, trav)]


def derive_vectors(config: ScenarioConfig) -> ConstraintVectors:
    config.validate()
    always, conditional, _ = agent_tiers(config.agent)
    trav = [0] * NUM_CLASSES
    for c in config.allowed_classes:
        if c in always or c in conditional:
            trav[c] = 1
    groups = ranking(config.agent, config.objective)
    raw = [0] * NUM_CLASSES
    for rank, group in enumerate(groups):
        for c in group:
            raw[c] = len(groups) - rank
    return ConstraintVectors(tuple(trav), tuple(canonicalize_pref(raw, trav)))


def kb_document() -> dict:
    """Versioned JSON-ready dump of the whole knowledge base."""
    agents = {}
    for agent in Agent:
        always, conditional, never = agent_tiers(agent)
        agents[agent.value] = {
            "always": sorted(always),
            "conditional": sorted(conditional),
            "never": sorted(never),
        }
    rankings = {
        agent.value: {obj.value: [list(g) for g in ranking(agent, obj)] for obj in Objective}
        for agent in Agent
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "classes": [{"id": i, "name": n} for i, n in enumerate(CLASS_NAMES)],
        "agents": agents,
        "rankings": rankings,
    }


def dump_kb(path=None) -> str:
    text = json.dumps(kb_document(), indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
