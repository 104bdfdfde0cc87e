"""Slot-filling domain ontology: constraint slots, request slots and a venue table."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NONE_VENUE = "none"


@dataclass(frozen=True)
class Ontology:
    """A restaurant-style domain.

    ``constraint_slots`` is an ordered list of ``(slot, values)`` pairs the
    system can search on; ``request_slots`` are the informable properties of a
    venue once one is offered. Every venue is a mapping over all slots.
    """

    constraint_slots: tuple[tuple[str, tuple[str, ...]], ...]
    request_slots: tuple[str, ...]
    venues: tuple[dict, ...]
    max_turns: int = 30
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError(f"max_turns must be >= 1, got {self.max_turns}")
        if not self.constraint_slots or not self.request_slots:
            raise ValueError("ontology needs at least one constraint and one request slot")
        values = dict(self.constraint_slots)
        for i, venue in enumerate(self.venues):
            for slot, vals in values.items():
                if slot not in venue:
                    raise ValueError(f"venue {i} has no value for constraint slot {slot!r}")
                if venue[slot] not in vals:
                    raise ValueError(f"venue {i}: {slot}={venue[slot]!r} is not in the value list")
            for slot in self.request_slots:
                if slot not in venue:
                    raise ValueError(f"venue {i} has no value for request slot {slot!r}")
        object.__setattr__(self, "_index", values)

    @property
    def slot_names(self) -> list[str]:
        return [s for s, _ in self.constraint_slots]

    def values(self, slot: str) -> tuple[str, ...]:
        try:
            return self._index[slot]
        except KeyError:
            raise KeyError(f"unknown constraint slot {slot!r}") from None

    def matching_venues(self, constraints: dict) -> list[int]:
        """Indices of venues consistent with ``constraints`` (slot -> value)."""
        return [
            i for i, v in enumerate(self.venues)
            if all(v[s] == val for s, val in constraints.items())
        ]

    def to_dict(self) -> dict:
        return {
            "constraint_slots": [[s, list(v)] for s, v in self.constraint_slots],
            "request_slots": list(self.request_slots),
            "venues": [dict(v) for v in self.venues],
            "max_turns": self.max_turns,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Ontology":
        return cls(
            constraint_slots=tuple((s, tuple(v)) for s, v in data["constraint_slots"]),
            request_slots=tuple(data["request_slots"]),
            venues=tuple(dict(v) for v in data["venues"]),
            max_turns=int(data["max_turns"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Ontology":
        return cls.from_dict(json.loads(Path(path).read_text()))


FOODS = ("chinese", "indian", "italian", "french", "thai",
         "british", "spanish", "japanese", "korean", "turkish")
AREAS = ("north", "south", "east", "west", "centre")
PRICES = ("cheap", "moderate", "expensive")


def default_ontology(max_turns: int = 30, seed: int = 0) -> Ontology:
    """The desk ontology: 150 venues, one per (food, area, pricerange) combination."""
    rng = np.random.default_rng(seed)
    venues = []
    for i, (food, area, price) in enumerate(itertools.product(FOODS, AREAS, PRICES)):
        venues.append({
            "name": f"venue{i:03d}",
            "food": food,
            "area": area,
            "pricerange": price,
            "phone": f"01223 {rng.integers(100000, 999999)}",
            "address": f"{rng.integers(1, 200)} {area} road",
            "postcode": f"cb{rng.integers(1, 6)} {rng.integers(1, 9)}{chr(97 + i % 26)}{chr(97 + (i // 26) % 26)}",
        })
    return Ontology(
        constraint_slots=(("food", FOODS), ("area", AREAS), ("pricerange", PRICES)),
        request_slots=("phone", "address", "postcode"),
        venues=tuple(venues),
        max_turns=max_turns,
    )
