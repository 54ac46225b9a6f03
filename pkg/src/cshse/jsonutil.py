"""Deterministic JSON helpers; complex values travel as [re, im] pairs."""

from __future__ import annotations

import json
import math

import numpy as np


def complex_to_pairs(v: np.ndarray) -> list:
    v = np.asarray(v, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in v]


def pairs_to_complex(pairs) -> np.ndarray:
    return np.array([p[0] + 1j * p[1] for p in pairs], dtype=complex)


def json_safe(x):
    """Recursively convert numpy scalars and non-finite floats for JSON."""
    if isinstance(x, dict):
        return {str(k): json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
