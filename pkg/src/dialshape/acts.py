"""User dialogue acts and the 20-way summary system action set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

from .ontology import Ontology

USER_ACT_TYPES = (
    "hello", "inform", "request", "confirm", "affirm",
    "negate", "reqalts", "bye", "null",
)
USER_ACT_INDEX = {a: i for i, a in enumerate(USER_ACT_TYPES)}

DONTCARE = "dontcare"


@dataclass(frozen=True)
class DialogueAct:
    act_type: str
    slot: Optional[str] = None
    value: Optional[str] = None

    def __post_init__(self):
        if self.act_type not in USER_ACT_INDEX:
            raise ValueError(f"unknown act type {self.act_type!r}")
        if self.act_type == "inform":
            if self.slot is None or self.value is None:
                raise ValueError("inform needs a slot and a value")
        elif self.act_type in ("request", "confirm"):
            if self.slot is None:
                raise ValueError(f"{self.act_type} needs a slot")
        elif self.slot is not None or self.value is not None:
            raise ValueError(f"{self.act_type} carries no slot or value")

    def __str__(self):
        if self.slot is None:
            return f"{self.act_type}()"
        if self.value is None:
            return f"{self.act_type}({self.slot})"
        return f"{self.act_type}({self.slot}={self.value})"

    def to_dict(self) -> dict:
        return {"act_type": self.act_type, "slot": self.slot, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "DialogueAct":
        return cls(d["act_type"], d.get("slot"), d.get("value"))


class SystemAction(NamedTuple):
    """One summary action: ``kind`` plus an optional slot argument."""

    index: int
    kind: str
    slot: Optional[str] = None

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.slot}" if self.slot else self.kind


def summary_actions(ontology: Ontology) -> tuple[SystemAction, ...]:
    """Enumerate the summary actions for ``ontology``.

    For the default ontology (3 constraint, 3 request slots) this yields 20
    actions: request/confirm/select per constraint slot, inform_offer,
    inform_byname, inform_requested per request slot, inform_alternative,
    repeat, reqmore, restart, bye and hello.
    """
    specs = []
    for kind in ("request", "confirm", "select"):
        specs += [(kind, s) for s in ontology.slot_names]
    specs += [("inform_offer", None), ("inform_byname", None)]
    specs += [("inform_requested", s) for s in ontology.request_slots]
    specs += [(k, None) for k in
              ("inform_alternative", "repeat", "reqmore", "restart", "bye", "hello")]
    return tuple(SystemAction(i, k, s) for i, (k, s) in enumerate(specs))


def num_actions(ontology: Ontology) -> int:
    return 3 * len(ontology.constraint_slots) + len(ontology.request_slots) + 8


@dataclass(frozen=True)
class SystemAct:
    """A summary action grounded against the current belief (the "master" act).

    ``value`` holds the confirmed value for confirm, the two offered values
    for select (``"a|b"``), or the informed value for inform_requested.
    ``venue`` is the offered venue index, or -1 when the system asserted that
    no venue matches ``query``.
    """

    action: int
    kind: str
    slot: Optional[str] = None
    value: Optional[str] = None
    venue: Optional[int] = None
    query: Optional[tuple] = None

    def __str__(self):
        parts = [p for p in (self.slot, self.value) if p is not None]
        if self.venue is not None:
            parts.append("none" if self.venue < 0 else f"venue={self.venue}")
        return f"{self.kind}({', '.join(parts)})"

    def to_dict(self) -> dict:
        return {
            "action": self.action, "kind": self.kind, "slot": self.slot,
            "value": self.value, "venue": self.venue,
            "query": [list(q) for q in self.query] if self.query is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemAct":
        q = d.get("query")
        return cls(d["action"], d["kind"], d.get("slot"), d.get("value"), d.get("venue"),
                   tuple(tuple(x) for x in q) if q is not None else None)
