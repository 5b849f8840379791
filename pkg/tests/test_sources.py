import math

import numpy as np
import pytest

from distinterf.optics import quitter
from distinterf.pipeline import THETA_GRID, ChiPolicy, expected_fourfolds, fit_cosine
from distinterf.scattering import OccupationPattern, transition_probability
from distinterf.sources import (
    ALL_INPUTS,
    ALL_OUTPUTS,
    SourceConfig,
    background_subtracted,
    blocked_fourfold_probability,
    channel_probability,
    chi_series,
    degraded_port_gram,
    emission_mixture,
    event_click_distribution,
    measured_background_scale,
    tmsv_pair_probability,
    total_fourfold_probability,
)


def test_tmsv_statistics():
    assert tmsv_pair_probability(0.16, 0) == pytest.approx(1 - 0.16**2)
    assert sum(tmsv_pair_probability(0.3, n) for n in range(200)) == pytest.approx(1.0, abs=1e-14)
    ratio = tmsv_pair_probability(0.16, 2) / tmsv_pair_probability(0.16, 1)
    assert ratio == pytest.approx(0.0256)
    with pytest.raises(ValueError):
        tmsv_pair_probability(1.0, 1)


def test_measured_background_scale():
    assert measured_background_scale(0.0) == 1.0
    assert measured_background_scale(0.16) == pytest.approx(1.0262725779967159, abs=1e-12)


def weights(cfg, theta=0.0):
    return {ev.pattern: ev for ev in emission_mixture(cfg, theta)}


def test_equal_weights_unit_transmission():
    cfg = SourceConfig.ideal()
    ev = weights(cfg)
    fire = 0.16**4 * (1 - 0.16**2) ** 2
    for name in ("AB", "AA", "BB"):
        assert ev[name].weight == pytest.approx(fire, rel=1e-12)
    assert ev["AA"].occupation == (0, 2, 2, 0)
    assert ev["BB"].occupation == (2, 0, 0, 2)
    assert ev["AA"].labels == ("b", "b", "c", "c")
    assert not any(len(p) > 2 for p in ev)


def test_loss_ratio_weights():
    ev = weights(SourceConfig())
    aa = ev["AA"].weight
    assert ev["AB"].weight / aa == pytest.approx(math.sqrt(1.24), rel=1e-12)
    assert round(ev["AB"].weight / aa, 2) == 1.11
    assert ev["BB"].weight / aa == pytest.approx(1.24, rel=1e-12)


def test_weights_sum_to_tmsv_probability():
    lam = 0.16
    cfg = SourceConfig(lam=lam, eta_in=(1.0,) * 4, max_total_photons=6)
    by_n = {}
    for ev in emission_mixture(cfg):
        by_n[ev.n_photons] = by_n.get(ev.n_photons, 0.0) + ev.weight
    for pairs in (1, 2, 3):
        expected = (pairs + 1) * (1 - lam**2) ** 2 * lam ** (2 * pairs)
        assert by_n[2 * pairs] == pytest.approx(expected, rel=1e-12)
    assert all(ev.weight >= 0 for ev in emission_mixture(cfg))


def test_six_photon_events_present():
    names = set(weights(SourceConfig()))
    assert {"AAB", "ABB", "AAA", "BBB"} <= names


def test_blocking_both_sources():
    assert channel_probability(SourceConfig(), 0.3, 1.0, (), ALL_OUTPUTS) == 0.0
    assert emission_mixture(SourceConfig(), 0.0, ()) == []


def test_chi_series_exact():
    cfg = SourceConfig()
    for ev in emission_mixture(cfg, 0.7):
        series = chi_series(cfg, ev.occupation, 0.7)
        for chi in (0.1, 1.7, 3.9):
            dist = event_click_distribution(cfg, ev, 0.7, chi)
            ref = [dist[frozenset(k for k in range(4) if m >> k & 1)] for m in range(16)]
            assert np.max(np.abs(series(chi) - ref)) < 1e-12


def test_double_emission_flat_in_theta():
    cfg = SourceConfig()
    for chi in (0.2, 1.4):
        vals = np.array([total_fourfold_probability(cfg, t, chi)[1:3] for t in THETA_GRID])
        assert np.ptp(vals, axis=0).max() < 1e-12 * vals.max()
        blocked = [blocked_fourfold_probability(cfg, t, chi, "A") for t in THETA_GRID]
        assert np.ptp(blocked) < 1e-12 * max(blocked)


def test_background_identity_cap4():
    cfg = SourceConfig(max_total_photons=4)
    for theta in (0.0, 1.3, 2.9):
        for chi in (0.4, 1.9):
            total, aa, bb, ab = total_fourfold_probability(cfg, theta, chi)
            assert total == pytest.approx(ab + aa + bb, abs=1e-15)
            assert background_subtracted(cfg, theta, chi) == pytest.approx(ab, abs=1e-12 * total)


def test_equal_overlaps_equal_backgrounds():
    # same-source overlaps r_bc and r_ad coincide at theta = 0 for the ideal states
    cfg = SourceConfig.ideal(ideal_states=True)
    g = degraded_port_gram(cfg, 0.0)
    assert abs(g[1, 2]) == pytest.approx(abs(g[0, 3]))
    _, aa, bb, _ = total_fourfold_probability(cfg, 0.0, 0.8)
    assert aa == pytest.approx(bb, rel=1e-12)


def test_spectral_factor_scales_r_squared():
    base = degraded_port_gram(SourceConfig(spectral_factor=1.0), 0.5)
    cross = degraded_port_gram(SourceConfig(spectral_factor=0.95, spectral_pairs="cross"), 0.5)
    every = degraded_port_gram(SourceConfig(spectral_factor=0.95, spectral_pairs="all"), 0.5)
    # d-b is a cross-source pair, b-c shares source A
    assert abs(cross[0, 1]) ** 2 == pytest.approx(0.95 * abs(base[0, 1]) ** 2)
    assert abs(cross[1, 2]) == pytest.approx(abs(base[1, 2]))
    assert abs(every[1, 2]) ** 2 == pytest.approx(0.95 * abs(base[1, 2]) ** 2)


def test_ideal_source_ab_visibility():
    cfg = SourceConfig.ideal()
    ab = [total_fourfold_probability(cfg, t, math.pi / 2)[3] for t in THETA_GRID]
    assert fit_cosine(THETA_GRID, ab).visibility == pytest.approx(0.272, abs=0.001)
    # unit transmissions: AB events are single four-photon scatterings
    u = quitter(math.pi / 2)
    p = transition_probability(u, OccupationPattern((1, 1, 1, 1), (1, 1, 1, 1)), degraded_port_gram(cfg, 0.3))
    weight = 0.16**4 * (1 - 0.16**2) ** 2
    assert total_fourfold_probability(cfg, 0.3, math.pi / 2)[3] == pytest.approx(weight * p, rel=1e-12)


def test_config_roundtrip_and_validation():
    cfg = SourceConfig(lam=(0.1, 0.2), spectral_pairs="all", max_total_photons=4)
    assert SourceConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.lambda_of("B") == 0.2
    for bad in (dict(lam=1.0), dict(eta_in=(1, 1, 1)), dict(spectral_factor=1.2), dict(spectral_pairs="x"), dict(max_total_photons=1)):
        with pytest.raises(ValueError):
            SourceConfig(**bad)


def test_six_photon_reduction_in_expected_band():
    """Six-photon events should cost about one point of bg-subtracted visibility."""
    policy = ChiPolicy("locked")

    def vis(cap):
        sig = expected_fourfolds(SourceConfig(max_total_photons=cap), policy)["bg_subtracted"]
        return fit_cosine(THETA_GRID, sig).visibility

    reduction = vis(4) - vis(6)
    assert 0.005 <= reduction <= 0.015, f"six-photon reduction {100 * reduction:.2f} pp"
