"""Readers for the JSON/TOML input formats."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .modes import (
    DistinguishabilityMatrix,
    GaussianWavepacket,
    PhotonState,
    PolarizationState,
    gram_matrix,
)
from .optics import Interferometer


class FormatError(ValueError):
    """Input file exists but does not match the expected layout."""


def _complex(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    if len(pair) != 2:
        raise FormatError(f"complex numbers are [re, im] pairs, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def load_structured(path) -> dict | list:
    """JSON, or TOML when the suffix is ``.toml``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def parse_states(data) -> DistinguishabilityMatrix:
    """A state list or a ``{"gram": ...}`` object, as a distinguishability matrix."""
    try:
        if isinstance(data, dict) and "gram" in data:
            g = np.array([[_complex(x) for x in row] for row in data["gram"]], dtype=complex)
            return DistinguishabilityMatrix(g)
        if isinstance(data, dict) and "states" in data:
            data = data["states"]
        if not isinstance(data, list):
            raise FormatError("expected a list of states or an object with 'gram'")
        states = []
        for item in data:
            hr, hi, vr, vi = (float(x) for x in item["polarization"])
            t = item.get("temporal", {})
            states.append(
                PhotonState(
                    PolarizationState(complex(hr, hi), complex(vr, vi)),
                    GaussianWavepacket(
                        float(t.get("center", 0.0)), float(t.get("sigma", 1.0)), float(t.get("carrier", 0.0))
                    ),
                    str(item.get("label", "")),
                )
            )
        return gram_matrix(states)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed state list: {exc!r}") from None


def load_states(path) -> DistinguishabilityMatrix:
    return parse_states(load_structured(path))


def parse_unitary(data) -> Interferometer:
    try:
        rows = np.array([[_complex(x) for x in row] for row in data["rows"]], dtype=complex)
        m = int(data.get("m", len(rows)))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed unitary: {exc!r}") from None
    if rows.shape != (m, m):
        raise FormatError(f"unitary rows have shape {rows.shape}, expected ({m}, {m})")
    return Interferometer(rows)


def load_unitary(path) -> Interferometer:
    return parse_unitary(load_structured(path))


def unitary_to_dict(u: Interferometer) -> dict:
    m = np.asarray(u.matrix)
    return {"m": int(m.shape[0]), "rows": [[[float(x.real), float(x.imag)] for x in row] for row in m]}
