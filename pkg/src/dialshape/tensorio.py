"""Self-describing text format for named float64 tensors.

Each tensor is stored as ``{"shape": [...], "values": [...]}`` with values in
row-major order. JSON floats use ``repr`` so a save/load round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def encode(tensors: dict) -> dict:
    return {
        name: {"shape": list(np.shape(a)), "values": np.asarray(a, dtype=float).ravel().tolist()}
        for name, a in tensors.items()
    }


def decode(data: dict) -> dict:
    out = {}
    for name, t in data.items():
        values = np.array(t["values"], dtype=float)
        shape = tuple(t["shape"])
        if values.size != int(np.prod(shape, dtype=int)):
            raise ValueError(f"tensor {name!r}: {values.size} values do not fill shape {shape}")
        out[name] = values.reshape(shape)
    return out


def save(path, header: dict, tensors: dict) -> None:
    doc = dict(header)
    doc["tensors"] = encode(tensors)
    Path(path).write_text(json.dumps(doc) + "\n")


def load(path) -> tuple[dict, dict]:
    doc = json.loads(Path(path).read_text())
    tensors = decode(doc.pop("tensors"))
    return doc, tensors
