import math

import numpy as np
import pytest

from distinterf.errors import CapacityError
from distinterf.modes import PhotonState, PolarizationState, experiment_gram
from distinterf.optics import beam_splitter, quitter, random_unitary
from distinterf.oracle import (
    evolve,
    fock_probability,
    orthonormalize_internal,
    pattern_distribution,
    ports_from_occupation,
)
from distinterf.scattering import OccupationPattern, click_distribution, output_patterns, transition_probability

from conftest import random_gram


def test_orthonormalize_identical_and_orthogonal():
    d, c = orthonormalize_internal(np.ones((3, 3)))
    assert d == 1 and np.allclose(c, np.ones((1, 3)))
    d, c = orthonormalize_internal(np.eye(3))
    assert d == 3 and np.allclose(c, np.eye(3))


def test_orthonormalize_reproduces_gram(rng):
    for n in (2, 3, 5):
        g = random_gram(n, rng, dim=2).entries
        d, c = orthonormalize_internal(g)
        assert d == 2
        assert np.max(np.abs(c.conj().T @ c - g)) < 1e-10


def test_orthonormalize_ideal_states():
    g = experiment_gram(0.4, ideal=True)
    d, c = orthonormalize_internal(g)
    assert d == 4
    moduli = np.abs(c.conj().T @ c)
    off = {round(float(x), 12) for i, row in enumerate(moduli) for j, x in enumerate(row) if i != j}
    assert off == {0.0, 0.5}


def test_orthonormalize_photon_states():
    h = PhotonState(PolarizationState.horizontal())
    diag = PhotonState(PolarizationState.equator(0.0))
    d, c = orthonormalize_internal([h, diag])
    assert d == 2
    assert (c.conj().T @ c)[0, 1] == pytest.approx(1 / math.sqrt(2))


def test_single_photon(rng):
    u = random_unitary(3, rng)
    for j in range(3):
        assert fock_probability(u, [1], [[1.0]], (int(j == 0), int(j == 1), int(j == 2))) == pytest.approx(
            abs(u.matrix[1, j]) ** 2
        )


def test_hom_bunching():
    bs = beam_splitter(0.5)
    assert fock_probability(bs, [0, 1], np.ones((2, 2)), (1, 1)) == pytest.approx(0.0, abs=1e-15)
    assert fock_probability(bs, [0, 1], np.eye(2), (1, 1)) == pytest.approx(0.5)


def test_norm_and_total_probability(rng):
    u = random_unitary(4, rng)
    g = random_gram(4, rng)
    vec = evolve(u, [0, 1, 2, 3], g)
    assert vec.norm() == pytest.approx(1.0, abs=1e-10)
    assert sum(pattern_distribution(u, [0, 1, 2, 3], g).values()) == pytest.approx(1.0, abs=1e-9)


def test_same_port_relabeling_symmetry(rng):
    u = random_unitary(4, rng)
    g = random_gram(3, rng).entries
    # photons 0 and 1 share port 0 and therefore the same state
    full = g[np.ix_([0, 0, 1, 2], [0, 0, 1, 2])]
    swapped = full[np.ix_([1, 0, 2, 3], [1, 0, 2, 3])]
    for s in output_patterns(4, 4):
        assert fock_probability(u, [0, 0, 1, 2], full, s) == pytest.approx(
            fock_probability(u, [0, 0, 1, 2], swapped, s), abs=1e-12
        )


def expand(g, r):
    """Per-port Gram matrix to photon order."""
    idx = [i for i, k in enumerate(k for k in r if k) for _ in range(k)]
    return np.asarray(g)[np.ix_(idx, idx)]


def test_matches_engine_random(rng):
    for _ in range(30):
        u = random_unitary(4, rng)
        n = int(rng.integers(1, 5))
        r = tuple(int(x) for x in rng.multinomial(n, [0.25] * 4))
        g = random_gram(sum(1 for k in r if k), rng)
        s = output_patterns(n, 4)[int(rng.integers(0, len(output_patterns(n, 4))))]
        occ = OccupationPattern(r, s)
        ref = fock_probability(u, ports_from_occupation(r), expand(g, r), s)
        assert transition_probability(u, occ, g) == pytest.approx(ref, abs=1e-9)


def test_click_sets_match_engine(rng):
    u = quitter(1.1)
    r = (2, 1, 1, 2)
    g = random_gram(4, rng).entries
    full = expand(g, r)
    dist = click_distribution(u, r, g)
    for clicked in (frozenset(range(4)), frozenset({0, 3}), frozenset({1})):
        assert fock_probability(u, ports_from_occupation(r), full, clicked) == pytest.approx(dist[clicked], abs=1e-10)


def test_capacity():
    with pytest.raises(CapacityError):
        evolve(random_unitary(5, np.random.default_rng(0)), [0], [[1.0]])
    with pytest.raises(CapacityError):
        evolve(quitter(0), [0] * 7, np.ones((7, 7)))
