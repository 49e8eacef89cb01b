"""Query text generators: the offline template backend and an HTTP backend."""

from __future__ import annotations

import json
import os
import re
import urllib.request
from typing import Optional, Protocol, Tuple

from routebench.kb import (
    NUM_CLASSES,
    Agent,
    ConstraintVectors,
    KBViolation,
    Objective,
    ScenarioConfig,
    agent_tiers,
    canonicalize_pref,
    class_id,
    class_name,
    derive_vectors,
    ranking,
)

ENDPOINT_ENV = "ROUTEBENCH_GENERATOR_URL"

_AGENT_NOUN = {Agent.PEDESTRIAN: "pedestrian", Agent.CAR: "car", Agent.DRONE: "drone", Agent.BOAT: "boat"}
_OBJECTIVE_PHRASE = {
    Objective.FASTEST: "fastest",
    Objective.COMFORT: "most comfortable",
    Objective.SAFEST: "safest",
    Objective.SHORTEST: "shortest",
}


class TextGeneratorPort(Protocol):
    def generate(self, config: ScenarioConfig) -> Tuple[str, ConstraintVectors]:
        """Return query text and the vectors the generator re-derives from it."""

    def verify(self, text: str) -> bool:
        """Independent compliance check of a query against the knowledge base."""


def _names(ids) -> str:
    names = [class_name(c) for c in ids]
    return ", ".join(names) if names else "nothing"


def render_query(config: ScenarioConfig) -> str:
    vec = derive_vectors(config)
    allowed = [c for c in range(NUM_CLASSES) if vec.trav[c]]
    blocked = [c for c in range(NUM_CLASSES) if not vec.trav[c]]
    groups = []
    for group in ranking(config.agent, config.objective):
        kept = [class_name(c) for c in group if vec.trav[c]]
        if kept:
            groups.append(" = ".join(kept))
    s, e = config.start_end_classes
    return (
        f"A {_AGENT_NOUN[config.agent]} must travel from {class_name(s)} to {class_name(e)} "
        f"and wants the {_OBJECTIVE_PHRASE[config.objective]} route. "
        f"It may cross: {_names(allowed)}. "
        f"It must avoid: {_names(blocked)}. "
        f"Terrain preference, best first: {' > '.join(groups)}."
    )


_QUERY_RE = re.compile(
    r"^A (?P<agent>\w+) must travel from (?P<start>[A-Za-z ]+?) to (?P<end>[A-Za-z ]+?) "
    r"and wants the (?P<objective>[a-z ]+?) route\. "
    r"It may cross: (?P<cross>[^.]*)\. "
    r"It must avoid: (?P<avoid>[^.]*)\. "
    r"Terrain preference, best first: (?P<order>[^.]*)\.$"
)


def _parse_list(text: str):
    if text.strip() == "nothing":
        return []
    return [class_id(t.strip()) for t in text.split(",")]


def parse_query(text: str) -> Tuple[ScenarioConfig, ConstraintVectors]:
    """Read a template query back into a scenario and its stated vectors.

    The vectors come only from what the text says, not from the knowledge base.
    """
    m = _QUERY_RE.match(text.strip())
    if m is None:
        raise ValueError("text does not follow the query template")
    agent = {v: k for k, v in _AGENT_NOUN.items()}[m["agent"]]
    objective = {v: k for k, v in _OBJECTIVE_PHRASE.items()}[m["objective"]]
    cross = _parse_list(m["cross"])
    trav = [0] * NUM_CLASSES
    for c in cross:
        trav[c] = 1
    groups = [[class_id(n.strip()) for n in g.split("=")] for g in m["order"].split(">") if g.strip()]
    raw = [0] * NUM_CLASSES
    for rank, group in enumerate(groups):
        for c in group:
            raw[c] = len(groups) - rank
    config = ScenarioConfig(agent, objective, (class_id(m["start"]), class_id(m["end"])), frozenset(cross))
    return config, ConstraintVectors(tuple(trav), tuple(canonicalize_pref(raw, trav)))


class TemplateGenerator:
    """Deterministic English template; self-inference parses the rendered text."""

    def generate(self, config: ScenarioConfig) -> Tuple[str, ConstraintVectors]:
        text = render_query(config)
        _, vectors = parse_query(text)
        return text, vectors

    def verify(self, text: str) -> bool:
        try:
            config, vectors = parse_query(text)
            config.validate()
        except (ValueError, KeyError, KBViolation):
            return False
        m = _QUERY_RE.match(text.strip())
        cross = _parse_list(m["cross"])
        avoid = _parse_list(m["avoid"])
        # Every class described exactly once.
        if sorted(cross + avoid) != list(range(NUM_CLASSES)):
            return False
        never = agent_tiers(config.agent)[2]
        if not never <= set(avoid):
            return False
        ordered = {c for c in range(NUM_CLASSES) if vectors.pref[c]}
        return ordered == set(cross)


class HttpGenerator:
    """Out-of-process generator speaking JSON over HTTP.

    ``POST {url}/generate`` with ``{"config": {...}}`` answers
    ``{"text": str, "trav": [8 ints], "pref": [8 ints]}``;
    ``POST {url}/verify`` with ``{"text": str}`` answers ``{"compliant": bool}``.
    """

    def __init__(self, url: Optional[str] = None, timeout: float = 60.0):
        url = url or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ValueError(f"no generator endpoint; pass a URL or set {ENDPOINT_ENV}")
        self.url = url.rstrip("/")
        self.timeout = timeout

    def _post(self, route: str, payload: dict) -> dict:
        req = urllib.request.Request(
            f"{self.url}/{route}",
            data=json.dumps(payload).encode(),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode())

    def generate(self, config: ScenarioConfig) -> Tuple[str, ConstraintVectors]:
        body = self._post("generate", {"config": config.to_dict()})
        return body["text"], ConstraintVectors(body["trav"], body["pref"])

    def verify(self, text: str) -> bool:
        return bool(self._post("verify", {"text": text}).get("compliant", False))


def make_port(backend: str, url: Optional[str] = None) -> TextGeneratorPort:
    if backend == "template":
        return TemplateGenerator()
    if backend == "http":
        return HttpGenerator(url)
    raise ValueError(f"unknown backend {backend!r}")
