"""Single-photon internal states, their overlaps and collective phases.

A photon's internal state is a polarization spinor times a Gaussian temporal
wavepacket.  Overlaps follow the physics convention ``<x|y>`` (antilinear in
the first argument), so the overlap of ``|H>`` with ``(|H> + e^{i t}|V>)/sqrt 2``
carries the phase ``e^{i t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from .errors import InfeasibleTiming, NonHermitianInput, UndefinedPhase

EDGE_TOL = 1e-9
NORM_TOL = 1e-12

# Quitter input ports 1..4 receive d, b, c, a.
PORT_LABELS = ("d", "b", "c", "a")


def wrap_phase(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    return math.pi - ((math.pi - x) % (2 * math.pi))


@dataclass(frozen=True)
class GaussianWavepacket:
    center: float = 0.0
    sigma: float = 1.0
    carrier: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def amplitude(self, tau):
        """Wavefunction value at time(s) ``tau``."""
        tau = np.asarray(tau, dtype=float)
        d = self.center - tau
        norm = (math.pi * self.sigma**2) ** -0.25
        return norm * np.exp(-(d**2) / (2 * self.sigma**2) + 1j * self.carrier * d)


@dataclass(frozen=True)
class PolarizationState:
    h: complex = 1.0
    v: complex = 0.0

    def __post_init__(self):
        norm = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"polarization not normalized (|h|^2+|v|^2={norm})")

    @classmethod
    def horizontal(cls):
        return cls(1.0, 0.0)

    @classmethod
    def vertical(cls):
        return cls(0.0, 1.0)

    @classmethod
    def equator(cls, theta: float):
        """``(|H> + e^{i theta}|V>)/sqrt(2)``; theta = 0 is diagonal."""
        s = 1 / math.sqrt(2)
        return cls(s, s * complex(math.cos(theta), math.sin(theta)))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)


@dataclass(frozen=True)
class PhotonState:
    polarization: PolarizationState = field(default_factory=PolarizationState)
    temporal: GaussianWavepacket = field(default_factory=GaussianWavepacket)
    label: str | None = None


@dataclass(frozen=True, eq=False)
class DistinguishabilityMatrix:
    """Gram matrix of photon internal states, ``entries[i, j] = <i|j>``."""

    entries: np.ndarray
    check: bool = True

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise NonHermitianInput(f"Gram matrix must be square, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        if self.check:
            if np.max(np.abs(a - a.conj().T)) > 1e-12:
                raise NonHermitianInput("Gram matrix is not Hermitian")
            if np.max(np.abs(np.diag(a) - 1.0)) > 1e-12:
                raise NonHermitianInput("Gram matrix must have unit diagonal")
            if np.linalg.eigvalsh(a).min() < -1e-10:
                raise NonHermitianInput("Gram matrix is not positive semidefinite")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.entries)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.entries)

    def __getitem__(self, idx):
        return self.entries[idx]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, DistinguishabilityMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def permuted(self, order: Sequence[int]) -> "DistinguishabilityMatrix":
        idx = np.asarray(order, dtype=int)
        return DistinguishabilityMatrix(self.entries[np.ix_(idx, idx)], check=False)


def gaussian_overlap(p: GaussianWavepacket, q: GaussianWavepacket) -> complex:
    """Closed-form ``<p|q>`` for two normalized Gaussian wavepackets.

    Completing the square in the product of the two wavefunctions gives
    ``sqrt(pi/a) exp(b^2/4a + c)`` times the normalizations, with ``a`` real.
    """
    sp2, sq2 = p.sigma**2, q.sigma**2
    a = 0.5 / sp2 + 0.5 / sq2
    b = p.center / sp2 + q.center / sq2 + 1j * (p.carrier - q.carrier)
    c = -(p.center**2) / (2 * sp2) - q.center**2 / (2 * sq2) + 1j * (
        q.carrier * q.center - p.carrier * p.center
    )
    pref = (math.pi**2 * sp2 * sq2) ** -0.25 * math.sqrt(math.pi / a)
    return complex(pref * np.exp(b * b / (4 * a) + c))


def overlap(x: PhotonState, y: PhotonState) -> complex:
    pol = complex(np.vdot(x.polarization.vector, y.polarization.vector))
    if pol == 0:
        return 0j
    return pol * gaussian_overlap(x.temporal, y.temporal)


def gram_matrix(states: Sequence[PhotonState]) -> DistinguishabilityMatrix:
    n = len(states)
    g = np.eye(n, dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            g[i, j] = overlap(states[i], states[j])
            g[j, i] = g[i, j].conjugate()
    return DistinguishabilityMatrix(g)


def _cycle_phase(S, cycle, tol):
    S = np.asarray(S)
    total = 0.0
    for i, j in zip(cycle, cycle[1:] + cycle[:1]):
        r = abs(S[i, j])
        if r < tol:
            raise UndefinedPhase((i, j), r)
        total += math.atan2(S[i, j].imag, S[i, j].real)
    return wrap_phase(total)


def triad_phase(S, i: int, j: int, k: int, tol: float = EDGE_TOL) -> float:
    """Sum of overlap arguments around the 3-cycle i -> j -> k -> i."""
    return _cycle_phase(S, [i, j, k], tol)


def four_particle_phase(S, i: int, j: int, k: int, l: int, tol: float = EDGE_TOL) -> float:
    """Sum of overlap arguments around the 4-cycle i -> j -> k -> l -> i."""
    return _cycle_phase(S, [i, j, k, l], tol)


@dataclass(frozen=True)
class TimingConfig:
    """Temporal layout of the three wavepackets used by the four photons.

    ``t1`` (long, shared by a and c) sits at ``center``; the two short
    wavepackets ``t2`` (b) and ``t3`` (d) are walked off symmetrically until
    ``|<t2|t3>|`` equals ``t23_target``.
    """

    sigma_short: float = 1.0
    width_ratio: float = 2.1
    t23_target: float = 0.1
    center: float = 0.0
    carrier: float = 0.0
    tol: float = 1e-10


def solve_walkoff(timing: TimingConfig) -> float:
    """Separation between t2 and t3 giving ``|<t2|t3>| = t23_target``."""
    target = timing.t23_target
    if not 0 < target <= 1:
        raise InfeasibleTiming(f"|<t2|t3>| target {target} outside (0, 1]")
    if target == 1:
        return 0.0

    def gap(sep):
        p = GaussianWavepacket(-sep / 2, timing.sigma_short, timing.carrier)
        q = GaussianWavepacket(sep / 2, timing.sigma_short, timing.carrier)
        return abs(gaussian_overlap(p, q)) - target

    hi = timing.sigma_short
    while gap(hi) > 0:
        hi *= 2
        if hi > 1e6 * timing.sigma_short:
            raise InfeasibleTiming(f"cannot reach |<t2|t3>| = {target}")
    # xtol in separation; the overlap slope is O(1/sigma) so this bounds the modulus error too
    return bisect(gap, 0.0, hi, xtol=timing.tol * timing.sigma_short, maxiter=500)


def temporal_modes(timing: TimingConfig = TimingConfig()):
    """The wavepackets ``(t1, t2, t3)``."""
    sep = solve_walkoff(timing)
    long = timing.sigma_short * timing.width_ratio
    t1 = GaussianWavepacket(timing.center, long, timing.carrier)
    t2 = GaussianWavepacket(timing.center - sep / 2, timing.sigma_short, timing.carrier)
    t3 = GaussianWavepacket(timing.center + sep / 2, timing.sigma_short, timing.carrier)
    return t1, t2, t3


def prepare_experiment_states(theta: float, timing: TimingConfig = TimingConfig()):
    """The four photons ``(a, b, c, d)`` with ``d``'s polarization at angle theta."""
    t1, t2, t3 = temporal_modes(timing)
    a = PhotonState(PolarizationState.horizontal(), t1, "a")
    b = PhotonState(PolarizationState.equator(0.0), t2, "b")
    c = PhotonState(PolarizationState.vertical(), t1, "c")
    d = PhotonState(PolarizationState.equator(theta), t3, "d")
    return a, b, c, d


def ideal_temporal_overlaps(t12=1 / math.sqrt(2), t13=1 / math.sqrt(2), t23=0.0):
    return {"t12": t12, "t13": t13, "t23": t23}


def experiment_gram(
    theta: float,
    timing: TimingConfig | None = None,
    ideal: bool = False,
    temporal: dict | None = None,
) -> DistinguishabilityMatrix:
    """Gram matrix of the four photons in quitter port order (d, b, c, a).

    With ``ideal=True`` the Gaussian machinery is skipped and the temporal
    overlaps are taken from ``temporal`` (default: the top-hat values
    1/sqrt 2, 1/sqrt 2, 0), which makes every surviving edge modulus 1/2.
    """
    if ideal:
        t = ideal_temporal_overlaps(**(temporal or {}))
        tmat = np.array(
            [[1.0, t["t12"], t["t13"]], [t["t12"], 1.0, t["t23"]], [t["t13"], t["t23"], 1.0]],
            dtype=complex,
        )
        pols = {
            "a": PolarizationState.horizontal(),
            "b": PolarizationState.equator(0.0),
            "c": PolarizationState.vertical(),
            "d": PolarizationState.equator(theta),
        }
        tindex = {"a": 0, "c": 0, "b": 1, "d": 2}
        g = np.empty((4, 4), dtype=complex)
        for i, x in enumerate(PORT_LABELS):
            for j, y in enumerate(PORT_LABELS):
                g[i, j] = np.vdot(pols[x].vector, pols[y].vector) * tmat[tindex[x], tindex[y]]
        return DistinguishabilityMatrix(g)
    a, b, c, d = prepare_experiment_states(theta, timing or TimingConfig())
    return gram_matrix([d, b, c, a])
