"""Interferometer unitaries.

Convention: ``matrix[i, j]`` couples input ``i`` to output ``j`` (rows are
inputs 1..m, columns are outputs m+1..2m), as in the quitter's defining matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

TWO_PI = 2 * math.pi


def reduce_chi(chi: float) -> float:
    """Map a phase to [0, 2 pi)."""
    r = math.fmod(chi, TWO_PI)
    if r < 0:
        r += TWO_PI
    return 0.0 if r >= TWO_PI else r


@dataclass(frozen=True, eq=False)
class Interferometer:
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        u = np.array(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise DimensionError(f"interferometer matrix must be square, got {u.shape}")
        if self.check and np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) > 1e-10:
            raise ValueError("interferometer matrix is not unitary")
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)

    @property
    def mode_count(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class PathLengths:
    L1: float
    L2: float
    L3: float
    L4: float
    lambda0: float

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")


def quitter(chi: float) -> Interferometer:
    """Balanced, fully connected four-mode splitter with internal phase chi."""
    e = complex(math.cos(chi), math.sin(chi))
    u = 0.5 * np.array(
        [
            [1, 1, 1, 1],
            [1, 1, -1, -1],
            [1, -1, e, -e],
            [1, -1, -e, e],
        ],
        dtype=complex,
    )
    return Interferometer(u, check=False)


def beam_splitter(transmissivity: float = 0.5, phase: float = 0.0) -> Interferometer:
    """Two-mode splitter ``[[t, r e^{i phase}], [r, -t e^{i phase}]]``."""
    if not 0 <= transmissivity <= 1:
        raise ValueError("transmissivity must lie in [0, 1]")
    t = math.sqrt(transmissivity)
    r = math.sqrt(1 - transmissivity)
    e = complex(math.cos(phase), math.sin(phase))
    return Interferometer(np.array([[t, r * e], [r, -t * e]], dtype=complex))


def random_unitary(m: int, rng: np.random.Generator) -> Interferometer:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return Interferometer(q * (d / np.abs(d)))


def chi_from_paths(p: PathLengths) -> float:
    mismatch = (p.L1 + p.L4) - (p.L2 + p.L3)
    # reduce in units of wavelength; snap rounding residue of whole-wavelength mismatches to 0
    waves = mismatch / p.lambda0
    frac = waves - math.floor(waves)
    if min(frac, 1 - frac) < 1e-12:
        return 0.0
    return reduce_chi(TWO_PI * frac)


def hom_probability(r_squared: float, chi: float) -> float:
    """Coincidence probability for inputs (2, 3) -> outputs (5, 7) of the quitter."""
    if not 0 <= r_squared <= 1:
        raise ValueError("r_squared must lie in [0, 1]")
    return (1 - r_squared * math.cos(chi)) / 8
