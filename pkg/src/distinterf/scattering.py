"""Multiphoton scattering probabilities for partially distinguishable photons.

Photon ordering is fixed globally: photons are listed by ascending input port
and photons sharing a port are adjacent.  Distinguishability matrices must use
the same order (or give one row per occupied port, which is then expanded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, NegativeProbability, NonHermitianInput
from .modes import DistinguishabilityMatrix
from .optics import Interferometer
from .permanent import factorial_product, permanent_ryser, permutation_table

PROB_TOL = 1e-10


@dataclass(frozen=True)
class OccupationPattern:
    r: tuple
    s: tuple

    def __post_init__(self):
        r = tuple(int(x) for x in self.r)
        s = tuple(int(x) for x in self.s)
        if any(x < 0 for x in r + s):
            raise DimensionError("occupations must be nonnegative")
        if sum(r) != sum(s) or sum(r) < 1:
            raise DimensionError(f"input and output photon numbers differ or are zero: {r} -> {s}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return sum(self.r)

    @classmethod
    def parse(cls, text: str) -> "OccupationPattern":
        """Parse ``"1111:1111"`` or ``"0,2,2,0:1,1,1,1"``."""
        left, right = text.split(":")

        def vec(part):
            part = part.strip()
            return tuple(int(x) for x in (part.split(",") if "," in part else part))

        return cls(vec(left), vec(right))


@dataclass(frozen=True)
class ExchangeTerm:
    permutation: tuple
    cycle_type: tuple
    coefficient: complex
    overlap_product: complex
    value: complex

    @property
    def cycle(self) -> str:
        return cycle_notation(self.permutation)


def photon_ports(r: Sequence[int]) -> list[int]:
    """Input port of each photon, in the global photon order."""
    return [j for j, k in enumerate(r) for _ in range(int(k))]


def cycles_of(perm: Sequence[int]) -> list[tuple]:
    """Disjoint cycles (0-based), each starting at its smallest element."""
    seen = set()
    out = []
    for start in range(len(perm)):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        j = perm[start]
        while j != start:
            cyc.append(j)
            seen.add(j)
            j = perm[j]
        out.append(tuple(cyc))
    return out


def cycle_type(perm: Sequence[int]) -> tuple:
    return tuple(sorted((len(c) for c in cycles_of(perm)), reverse=True))


def cycle_notation(perm: Sequence[int]) -> str:
    """1-based cycle notation without fixed points, ``I`` for the identity."""
    parts = [c for c in cycles_of(perm) if len(c) > 1]
    if not parts:
        return "I"
    return "".join("(" + ",".join(str(i + 1) for i in c) + ")" for c in parts)


def _as_unitary(U) -> np.ndarray:
    return np.asarray(U.matrix if isinstance(U, Interferometer) else U, dtype=complex)


def effective_matrix(U, occ: OccupationPattern) -> np.ndarray:
    """Rows repeated by input occupation, columns by output occupation."""
    u = _as_unitary(U)
    m = u.shape[0]
    if len(occ.r) != m or len(occ.s) != m:
        raise DimensionError(f"pattern length does not match {m} modes")
    rows = photon_ports(occ.r)
    cols = photon_ports(occ.s)
    return u[np.ix_(rows, cols)]


def photon_gram(S, r: Sequence[int]) -> np.ndarray:
    """Distinguishability matrix in photon order for input occupation ``r``.

    ``S`` may already be n x n, or give one state per occupied port; in the
    latter case photons sharing a port get identical states.
    """
    if isinstance(S, DistinguishabilityMatrix):
        g = S.entries
    else:
        g = np.asarray(S, dtype=complex)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionError(f"distinguishability matrix must be square, got {g.shape}")
        if np.max(np.abs(g - g.conj().T), initial=0.0) > 1e-10:
            raise NonHermitianInput("distinguishability matrix is not Hermitian")
    n = int(sum(r))
    if g.shape[0] == n:
        return g
    occupied = [j for j, k in enumerate(r) if k > 0]
    if g.shape[0] == len(occupied):
        idx = [i for i, j in enumerate(occupied) for _ in range(int(r[j]))]
        return g[np.ix_(idx, idx)]
    raise DimensionError(
        f"distinguishability matrix is {g.shape[0]}x{g.shape[0]}, expected {n} photons"
    )


def _finish(p: complex) -> float:
    if abs(p.imag) > PROB_TOL:
        raise NonHermitianInput(f"probability has imaginary part {p.imag:.3g}")
    x = float(p.real)
    if x < -PROB_TOL or x > 1 + PROB_TOL:
        raise NegativeProbability(f"probability {x:.3g} outside [0, 1]")
    return min(max(x, 0.0), 1.0)


def _exchange_arrays(U, occ: OccupationPattern, S):
    m_eff = effective_matrix(U, occ)
    g = photon_gram(S, occ.r)
    n = occ.n
    perms = permutation_table(n)
    # row j of conj(M) moves to row rho_j, i.e. conj(M)_rho[i] = conj(M)[rho^-1(i)]
    inverse = np.argsort(perms, axis=1)
    stacked = m_eff[None, :, :] * m_eff.conj()[inverse]
    coeffs = permanent_ryser(stacked)
    overlaps = np.prod(g[np.arange(n), perms], axis=1)
    norm = 1.0 / (factorial_product(occ.r) * factorial_product(occ.s))
    return perms, coeffs, overlaps, norm


def transition_probability(U, occ: OccupationPattern, S) -> float:
    """Probability of output pattern ``occ.s`` given input ``occ.r``.

    Sum over permutations rho of ``prod_j S[j, rho_j] * perm(M * conj(M)_rho)``,
    scaled by ``1 / prod r_j! s_j!``.
    """
    _, coeffs, overlaps, norm = _exchange_arrays(U, occ, S)
    return _finish(norm * np.sum(coeffs * overlaps))


def exchange_decomposition(U, occ: OccupationPattern, S) -> list[ExchangeTerm]:
    perms, coeffs, overlaps, norm = _exchange_arrays(U, occ, S)
    terms = []
    for perm, c, o in zip(perms, coeffs, overlaps):
        perm = tuple(int(x) for x in perm)
        terms.append(
            ExchangeTerm(perm, cycle_type(perm), complex(c), complex(o), complex(norm * c * o))
        )
    return terms


def group_by_cycle_type(terms: Iterable[ExchangeTerm]) -> dict:
    out: dict = {}
    for t in terms:
        out[t.cycle_type] = out.get(t.cycle_type, 0j) + t.value
    return out


def compositions(n: int, m: int):
    """All length-m nonnegative integer vectors summing to n."""
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in compositions(n - first, m - 1):
            yield (first,) + rest


def output_patterns(n: int, m: int) -> list[tuple]:
    return list(compositions(n, m))


def _subset_probabilities(U, r: Sequence[int], S) -> dict:
    """Probability that every photon lands inside each output subset.

    For a subset K, ``P(all in K) = perm(H_K o S) / perm(H_all o S)`` with
    ``H_K[i, j] = sum_{k in K} conj(U[p_i, k]) U[p_j, k]``; the denominator is
    the norm of the input state (``prod r_j!`` for identical same-port photons).
    """
    u = _as_unitary(U)
    m = u.shape[0]
    ports = photon_ports(r)
    g = photon_gram(S, r)
    rows = u[ports]  # (n, m)
    subsets = list(range(1 << m))
    hs = []
    for mask in subsets:
        cols = [k for k in range(m) if mask >> k & 1]
        sub = rows[:, cols]
        hs.append(sub.conj() @ sub.T)
    hs = np.array(hs)
    vals = permanent_ryser(hs * g[None, :, :])
    norm = vals[-1]
    return {mask: vals[mask] / norm for mask in subsets}


def click_distribution(U, r: Sequence[int], S) -> dict:
    """Probability of each exact set of clicking threshold detectors.

    Keys are frozensets of 0-based output indices.
    """
    u = _as_unitary(U)
    m = u.shape[0]
    if len(r) != m:
        raise DimensionError(f"input occupation length {len(r)} != {m} modes")
    n = int(sum(r))
    if n < 1:
        return {frozenset(): 1.0}
    inside = _subset_probabilities(u, r, S)
    out = {}
    for mask in range(1 << m):
        total = 0j
        sub = mask
        # Moebius inversion over the subsets of mask; the empty subset holds no photons
        while sub:
            sign = -1 if bin(mask ^ sub).count("1") % 2 else 1
            total += sign * inside[sub]
            sub = (sub - 1) & mask
        key = frozenset(k for k in range(m) if mask >> k & 1)
        out[key] = _finish(complex(total))
    return out


def click_probability(U, r: Sequence[int], S, clicked: Iterable[int], method: str = "subset") -> float:
    """Probability that exactly the detectors in ``clicked`` fire.

    ``method="enumerate"`` sums ``transition_probability`` over every output
    pattern supported exactly on ``clicked``; ``"subset"`` uses
    inclusion-exclusion over subset permanents.  Both agree; the latter is
    much faster for six photons.
    """
    u = _as_unitary(U)
    m = u.shape[0]
    n = int(sum(r))
    if n > 8:
        raise DimensionError(f"click probabilities limited to 8 photons, got {n}")
    clicked = frozenset(int(k) for k in clicked)
    if any(k < 0 or k >= m for k in clicked):
        raise DimensionError(f"clicked outputs {sorted(clicked)} outside 0..{m - 1}")
    if method == "subset":
        return click_distribution(u, r, S)[clicked]
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    g = photon_gram(S, r)
    total = 0.0
    for s in compositions(n, m):
        if frozenset(k for k in range(m) if s[k] > 0) == clicked:
            total += transition_probability(u, OccupationPattern(tuple(r), s), g)
    return total


def closed_form_p1111(r_ab, r_bc, r_cd, r_ad, phi, chi) -> float:
    """Fourfold coincidence probability of the quitter for pairwise-distinguishable inputs.

    Photons a, b, c, d enter ports 4, 2, 3, 1 with ``<a|c> = <b|d> = 0``.
    """
    c2 = math.cos(2 * chi)
    return (
        3
        - r_ab**2
        - r_bc**2
        - r_cd**2
        - r_ad**2
        + (c2 + 2) * (r_ab**2 * r_cd**2 + r_ad**2 * r_bc**2)
        + 2 * (c2 - 2) * r_ab * r_bc * r_cd * r_ad * math.cos(phi)
    ) / 32


def extra_contributions(t23_overlap: float, chi: float, phi: float):
    """Two-, three- and four-photon exchange pieces when ``|<t2|t3>| != 0``.

    Uses ``|<t1|t2>| = |<t1|t3>| = 1/sqrt 2`` and ``<a|c> = 0``.
    """
    t = t23_overlap
    if not 0 <= t <= 1:
        raise ValueError("|<t2|t3>| must lie in [0, 1]")
    p2 = -(t**2) * (1 + math.cos(phi)) / 64
    p3 = t * (1 + math.cos(phi)) / 64
    p4 = -(2 - math.cos(2 * chi)) * math.cos(phi) / 256
    return p2, p3, p4


def exchange_ratios(t23_overlap: float, chi: float):
    """Ratios of the cos(phi) amplitudes: four- to two-photon and four- to three-photon."""
    k = 2 - math.cos(2 * chi)
    t = t23_overlap
    r42 = k / (4 * t**2) if t else math.inf
    r43 = -k / (4 * t) if t else -math.inf
    return r42, r43
