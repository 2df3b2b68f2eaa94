"""JSON schemas and atomic file output.

Network files look like

    {"vertices": ["a", "b"],
     "edges": [{"u": "a", "v": "b", "c": 1.0}],
     "mu": {"a": 0.5, "b": 0.5},          # optional reference measure
     "m": {...},                           # optional dominant measure
     "geometry": {...}}                    # optional, emitted by builders

Writes go through a temporary file and an atomic rename so that partial
outputs are never visible.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any

import numpy as np

from .network import ResistanceNetwork, build_network

__all__ = [
    "ParseError",
    "load_json",
    "atomic_write_json",
    "atomic_write_text",
    "network_from_obj",
    "network_to_obj",
]

_NETWORK_KEYS = {"vertices", "edges", "mu", "m", "geometry"}


class ParseError(ValueError):
    """Input file or object does not match the expected schema."""


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def _measure_from_obj(net: ResistanceNetwork, obj, what: str) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ParseError(f"field {what!r} must be an object mapping vertex to weight")
    try:
        return net.check_function(obj)
    except Exception as exc:
        raise ParseError(f"field {what!r}: {exc}") from None


def network_from_obj(obj) -> tuple[ResistanceNetwork, np.ndarray | None, np.ndarray | None]:
    if not isinstance(obj, dict):
        raise ParseError("network description must be a JSON object")
    unknown = set(obj) - _NETWORK_KEYS
    if unknown:
        raise ParseError(f"unknown fields in network description: {sorted(unknown)}")
    for key in ("vertices", "edges"):
        if key not in obj:
            raise ParseError(f"network description missing field {key!r}")
    if not isinstance(obj["vertices"], list) or not all(
        isinstance(v, str) for v in obj["vertices"]
    ):
        raise ParseError("field 'vertices' must be a list of strings")
    edges = []
    for i, e in enumerate(obj["edges"]):
        if not isinstance(e, dict) or not {"u", "v", "c"} <= set(e):
            raise ParseError(f"edge {i} must be an object with fields u, v, c")
        edges.append((e["u"], e["v"], float(e["c"])))
    net = build_network(obj["vertices"], edges)
    mu = _measure_from_obj(net, obj["mu"], "mu") if "mu" in obj else None
    m = _measure_from_obj(net, obj["m"], "m") if "m" in obj else None
    return net, mu, m


def network_to_obj(
    net: ResistanceNetwork,
    mu: np.ndarray | None = None,
    m: np.ndarray | None = None,
    geometry: dict | None = None,
) -> dict:
    obj: dict[str, Any] = {
        "vertices": list(net.vertices),
        "edges": [
            {
                "u": net.vertices[int(t)],
                "v": net.vertices[int(h)],
                "c": float(c),
            }
            for t, h, c in zip(net.tails, net.heads, net.conductances)
        ],
    }
    if mu is not None:
        obj["mu"] = {v: float(w) for v, w in zip(net.vertices, mu)}
    if m is not None:
        obj["m"] = {v: float(w) for v, w in zip(net.vertices, m)}
    if geometry is not None:
        obj["geometry"] = geometry
    return obj


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-netforms-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def atomic_write_text(path: str, text: str) -> None:
    _atomic_write(path, text)
