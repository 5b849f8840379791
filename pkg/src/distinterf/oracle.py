"""Brute-force Fock-space evolution used to cross-check the permanent engine.

Deliberately slow and self-contained: photons are expanded in an orthonormal
internal basis, creation operators are pushed through the interferometer one
photon at a time, and detection probabilities are read off the resulting
amplitude map.  Nothing here touches permanents.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError
from .modes import DistinguishabilityMatrix, PhotonState, overlap

MAX_PHOTONS = 6
MAX_MODES = 4


def _gram_of(states) -> np.ndarray:
    if isinstance(states, DistinguishabilityMatrix):
        return np.array(states.entries)
    states = list(states)
    if states and isinstance(states[0], PhotonState):
        n = len(states)
        g = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                g[i, j] = overlap(states[i], states[j])
        return g
    return np.asarray(states, dtype=complex)


def orthonormalize_internal(states, tol: float = 1e-10):
    """Gram-Schmidt over the span of the internal states.

    Returns ``(d, C)`` where column ``j`` of the ``d x n`` matrix ``C`` holds
    state ``j`` in an orthonormal basis, so ``C^dagger C`` is the Gram matrix.
    Directions with squared residual below ``tol`` are dropped.
    """
    g = _gram_of(states)
    n = g.shape[0]
    basis = []  # each basis vector as coefficients over the input states
    cols = []
    for j in range(n):
        # <e_mu|phi_j> for the current basis
        c = [complex(np.conj(b) @ g[:, j]) for b in basis]
        resid2 = g[j, j].real - sum(abs(x) ** 2 for x in c)
        if resid2 > tol:
            norm = math.sqrt(resid2)
            vec = np.zeros(n, dtype=complex)
            vec[j] = 1.0
            for mu, b in enumerate(basis):
                vec -= c[mu] * b
            basis.append(vec / norm)
            c.append(norm)
        cols.append(c)
    d = len(basis)
    C = np.zeros((d, n), dtype=complex)
    for j, c in enumerate(cols):
        C[: len(c), j] = c
    return d, C


class FockVector:
    """Sparse amplitudes over joint (spatial x internal) occupation tuples."""

    def __init__(self, n_spatial: int, n_internal: int):
        self.m = n_spatial
        self.d = n_internal
        self.amps: dict = {(0,) * (n_spatial * n_internal): 1.0 + 0j}

    def create(self, coeffs: np.ndarray):
        """Apply ``sum_{k,mu} coeffs[k, mu] b^dagger_{k mu}``."""
        flat = [(k * self.d + mu, complex(coeffs[k, mu]))
                for k in range(self.m) for mu in range(self.d) if coeffs[k, mu] != 0]
        new = defaultdict(complex)
        for occ, amp in self.amps.items():
            for mode, c in flat:
                occ2 = list(occ)
                occ2[mode] += 1
                new[tuple(occ2)] += amp * c * math.sqrt(occ2[mode])
        self.amps = dict(new)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amps.values()))

    def spatial_counts(self, occ) -> tuple:
        return tuple(sum(occ[k * self.d : (k + 1) * self.d]) for k in range(self.m))


def evolve(U, input_ports: Sequence[int], states) -> FockVector:
    """Normalized output state for photons entering ``input_ports``."""
    u = np.asarray(getattr(U, "matrix", U), dtype=complex)
    m = u.shape[0]
    n = len(input_ports)
    if n > MAX_PHOTONS or m > MAX_MODES:
        raise CapacityError(f"oracle limited to {MAX_PHOTONS} photons and {MAX_MODES} modes")
    d, C = orthonormalize_internal(states)
    if C.shape[1] != n:
        raise ValueError(f"{C.shape[1]} internal states for {n} photons")
    out = FockVector(m, d)
    inp = FockVector(m, d)
    for j, p in enumerate(input_ports):
        out.create(np.outer(u[p], C[:, j]))
        inp.create(np.outer(np.eye(m)[p], C[:, j]))
    scale = inp.norm()
    out.amps = {k: v / scale for k, v in out.amps.items()}
    return out


def fock_probability(U, input_ports: Sequence[int], states, detection) -> float:
    """Detection probability by explicit Fock-space evolution.

    ``detection`` is either an exact output occupation (tuple of ints, length m)
    or a set of clicking outputs for threshold detectors.
    """
    vec = evolve(U, input_ports, states)
    if isinstance(detection, (set, frozenset)):
        clicked = frozenset(detection)

        def match(counts):
            return frozenset(k for k, c in enumerate(counts) if c) == clicked
    else:
        target = tuple(int(x) for x in detection)

        def match(counts):
            return counts == target

    return float(sum(abs(a) ** 2 for occ, a in vec.amps.items() if match(vec.spatial_counts(occ))))


def pattern_distribution(U, input_ports: Sequence[int], states) -> dict:
    """Probabilities of every exact output occupation."""
    vec = evolve(U, input_ports, states)
    out: dict = defaultdict(float)
    for occ, a in vec.amps.items():
        out[vec.spatial_counts(occ)] += abs(a) ** 2
    return dict(out)


def ports_from_occupation(r: Iterable[int]) -> list[int]:
    return [j for j, k in enumerate(r) for _ in range(int(k))]
