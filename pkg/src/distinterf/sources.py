"""Two SPDC sources feeding the quitter: emission statistics and fourfold signals.

Source A emits pairs into inputs 2 and 3 (photons b and c), source B into
inputs 1 and 4 (photons d and a).  Coherences between the different firing
alternatives are assumed removed by phase averaging, so the input is a
classical mixture of emission events weighted by their preparation
probabilities.  Ports are 0-based in code: input 1 is index 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .modes import PORT_LABELS, TimingConfig, experiment_gram
from .optics import quitter
from .scattering import click_distribution, photon_gram

SOURCE_PORTS = {"A": (1, 2), "B": (0, 3)}
PORT_SOURCE = {0: "B", 1: "A", 2: "A", 3: "B"}
ALL_INPUTS = (0, 1, 2, 3)
ALL_OUTPUTS = frozenset(range(4))


@dataclass(frozen=True)
class SourceConfig:
    lam: float | tuple = 0.16
    eta_in: tuple = (1.0, 1.24**-0.25, 1.24**-0.25, 1.0)
    eta_out: tuple = (1.0, 1.0, 1.0, 1.0)
    spectral_factor: float = 0.95
    spectral_pairs: str = "cross"
    max_total_photons: int = 6
    ideal_states: bool = False
    timing: TimingConfig = field(default_factory=TimingConfig)
    r_ad_drift: float = 0.0
    ideal_t23: float = 0.0  # residual |<t2|t3>| used only with ideal_states

    def __post_init__(self):
        for lam in self.lambdas:
            if not 0 <= lam < 1:
                raise ValueError(f"squeezing parameter must lie in [0, 1), got {lam}")
        if len(self.eta_in) != 4 or len(self.eta_out) != 4:
            raise ValueError("need four input and four output transmissions")
        if any(not 0 <= e <= 1 for e in tuple(self.eta_in) + tuple(self.eta_out)):
            raise ValueError("transmissions must lie in [0, 1]")
        if not 0 <= self.spectral_factor <= 1:
            raise ValueError("spectral_factor must lie in [0, 1]")
        if self.spectral_pairs not in ("all", "cross"):
            raise ValueError("spectral_pairs must be 'all' or 'cross'")
        if self.max_total_photons < 2:
            raise ValueError("max_total_photons must be at least 2")
        object.__setattr__(self, "eta_in", tuple(float(e) for e in self.eta_in))
        object.__setattr__(self, "eta_out", tuple(float(e) for e in self.eta_out))

    @property
    def lambdas(self) -> tuple:
        lam = self.lam
        return (float(lam), float(lam)) if np.isscalar(lam) else tuple(float(x) for x in lam)

    def lambda_of(self, source: str) -> float:
        return self.lambdas[0 if source == "A" else 1]

    @classmethod
    def ideal(cls, **kw):
        """Unit transmissions, no spectral degradation, four-photon sector only."""
        base = dict(eta_in=(1.0,) * 4, spectral_factor=1.0, max_total_photons=4)
        base.update(kw)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "SourceConfig":
        kw = {}
        if "lambda" in d or "lam" in d:
            lam = d.get("lambda", d.get("lam"))
            kw["lam"] = tuple(lam) if isinstance(lam, (list, tuple)) else float(lam)
        for key in ("eta_in", "eta_out"):
            if key in d:
                kw[key] = tuple(d[key])
        for key in ("spectral_factor", "max_total_photons", "spectral_pairs", "ideal_states", "r_ad_drift", "ideal_t23"):
            if key in d:
                kw[key] = d[key]
        if "timing" in d:
            kw["timing"] = TimingConfig(**d["timing"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "lambda": list(self.lam) if isinstance(self.lam, tuple) else self.lam,
            "eta_in": list(self.eta_in),
            "eta_out": list(self.eta_out),
            "spectral_factor": self.spectral_factor,
            "spectral_pairs": self.spectral_pairs,
            "max_total_photons": self.max_total_photons,
            "ideal_states": self.ideal_states,
            "r_ad_drift": self.r_ad_drift,
            "ideal_t23": self.ideal_t23,
            "timing": {
                "sigma_short": self.timing.sigma_short,
                "width_ratio": self.timing.width_ratio,
                "t23_target": self.timing.t23_target,
                "center": self.timing.center,
                "carrier": self.timing.carrier,
            },
        }


@dataclass(frozen=True)
class EmissionEvent:
    pattern: str
    pairs: tuple  # (pairs from A, pairs from B)
    occupation: tuple  # photons per input port after shutters
    labels: tuple  # photon labels in port order
    weight: float

    @property
    def n_photons(self) -> int:
        return sum(self.occupation)


def tmsv_pair_probability(lam: float, n_pairs: int) -> float:
    """Probability of exactly ``n_pairs`` pairs from a two-mode squeezed vacuum."""
    if not 0 <= lam < 1:
        raise ValueError("squeezing parameter must lie in [0, 1)")
    return (1 - lam**2) * lam ** (2 * n_pairs)


def measured_background_scale(lam: float) -> float:
    """How much larger a single-source background is when the other source is blocked.

    Blocking a source turns its vacuum probability ``1 - lam^2`` into 1, so a
    measured background equals this factor times its contribution to the
    all-open signal.
    """
    if not 0 <= lam < 1:
        raise ValueError("squeezing parameter must lie in [0, 1)")
    return 1 / (1 - lam**2)


def double_emission_p1111(r: float, chi: float) -> float:
    """Fourfold probability when one source fires twice; ``r`` is that pair's overlap modulus."""
    return (3 - 4 * r**2 + r**4 * (2 + math.cos(2 * chi))) / 32


def _pattern_name(na: int, nb: int) -> str:
    return "A" * na + "B" * nb


def emission_mixture(
    cfg: SourceConfig, theta: float = 0.0, open_inputs: Sequence[int] = ALL_INPUTS
) -> list[EmissionEvent]:
    return list(_mixture(cfg, tuple(sorted(set(open_inputs)))))


@lru_cache(maxsize=1024)
def _mixture(cfg: SourceConfig, open_inputs: tuple) -> tuple:
    """Emission events reaching the interferometer through the open inputs.

    A source with no open input contributes no factor at all (its firing
    statistics sum to one); otherwise every pair number up to the photon cap is
    enumerated.  Weights are firing probabilities times the input
    transmissions of every photon that enters.
    """
    open_set = set(open_inputs)
    active = {s: any(p in open_set for p in ports) for s, ports in SOURCE_PORTS.items()}
    max_pairs = cfg.max_total_photons // 2
    ranges = {s: (range(max_pairs + 1) if active[s] else (0,)) for s in SOURCE_PORTS}
    events = []
    for na in ranges["A"]:
        for nb in ranges["B"]:
            if na + nb > max_pairs:
                continue
            occ = [0, 0, 0, 0]
            for source, n in (("A", na), ("B", nb)):
                for p in SOURCE_PORTS[source]:
                    if p in open_set:
                        occ[p] += n
            if sum(occ) == 0:
                continue
            w = 1.0
            for source, n in (("A", na), ("B", nb)):
                if active[source]:
                    w *= tmsv_pair_probability(cfg.lambda_of(source), n)
            for p, k in enumerate(occ):
                w *= cfg.eta_in[p] ** k
            labels = tuple(PORT_LABELS[p] for p in range(4) for _ in range(occ[p]))
            events.append(EmissionEvent(_pattern_name(na, nb), (na, nb), tuple(occ), labels, w))
    return tuple(events)


def degraded_port_gram(cfg: SourceConfig, theta: float) -> np.ndarray:
    """Port-ordered (d, b, c, a) Gram matrix with the spectral factor applied.

    The factor multiplies r^2, so each off-diagonal modulus is scaled by its
    square root; with ``spectral_pairs="cross"`` same-source pairs are spared.
    """
    return _degraded_port_gram(
        float(theta),
        cfg.ideal_states,
        cfg.timing,
        cfg.spectral_factor,
        cfg.spectral_pairs,
        cfg.r_ad_drift,
        cfg.ideal_t23,
    )


@lru_cache(maxsize=4096)
def _degraded_port_gram(theta, ideal, timing, factor, pairs, drift, t23):
    temporal = {"t23": t23} if ideal else None
    g = np.array(experiment_gram(theta, timing=timing, ideal=ideal, temporal=temporal).entries)
    s = math.sqrt(factor)
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            if pairs == "cross" and PORT_SOURCE[i] == PORT_SOURCE[j]:
                continue
            g[i, j] *= s
    if drift:
        # r_ad^2 -> r_ad^2 (1 + drift cos theta); d is port 0, a is port 3
        k = math.sqrt(1 + drift * math.cos(theta))
        g[0, 3] *= k
        g[3, 0] *= k
    g.setflags(write=False)
    return g


def event_gram(cfg: SourceConfig, event: EmissionEvent, theta: float) -> np.ndarray:
    g = degraded_port_gram(cfg, theta)
    occupied = [p for p in range(4) if event.occupation[p]]
    sub = g[np.ix_(occupied, occupied)]
    return photon_gram(sub, event.occupation)


def event_click_distribution(cfg: SourceConfig, event: EmissionEvent, theta: float, chi: float) -> dict:
    """Exact click-set probabilities (threshold detectors) for one emission event."""
    g = event_gram(cfg, event, theta)
    return click_distribution(quitter(chi), event.occupation, g)


def _mask_key(mask: int) -> frozenset:
    return frozenset(k for k in range(4) if mask >> k & 1)


class ChiSeries:
    """Click-set probabilities of one event as exact trigonometric polynomials in chi.

    Every amplitude is at most linear in ``e^{i chi}`` per photon, so each
    probability is a Fourier series of degree <= n; sampling 2n+1 equally
    spaced phases determines it exactly.
    """

    def __init__(self, cfg: SourceConfig, occupation: tuple, theta: float):
        n = sum(occupation)
        self.degree = n
        nodes = 2 * np.pi * np.arange(2 * n + 1) / (2 * n + 1)
        ev = EmissionEvent("", (0, 0), occupation, (), 1.0)
        g = event_gram(cfg, ev, theta)
        samples = np.empty((16, len(nodes)))
        for col, chi in enumerate(nodes):
            dist = click_distribution(quitter(chi), occupation, g)
            for mask in range(16):
                samples[mask, col] = dist[_mask_key(mask)]
        self.coeffs = np.fft.fft(samples, axis=1) / len(nodes)
        self.k = np.fft.fftfreq(len(nodes), d=1.0 / len(nodes))

    def __call__(self, chi: float) -> np.ndarray:
        """Probabilities indexed by output bitmask."""
        phase = np.exp(1j * self.k * chi)
        return np.clip((self.coeffs @ phase).real, 0.0, 1.0)


@lru_cache(maxsize=16384)
def chi_series(cfg: SourceConfig, occupation: tuple, theta: float) -> ChiSeries:
    return ChiSeries(cfg, occupation, theta)


def _including_masks(outputs) -> np.ndarray:
    need = sum(1 << k for k in outputs)
    return np.array([mask for mask in range(16) if mask & need == need])


def clicks_including(dist: dict, outputs) -> float:
    """Probability that at least the detectors in ``outputs`` fire."""
    need = frozenset(outputs)
    return sum(p for k, p in dist.items() if need <= k)


def channel_probability(
    cfg: SourceConfig,
    theta: float,
    chi: float,
    open_inputs: Sequence[int],
    outputs,
    patterns: Sequence[str] | None = None,
) -> float:
    """Per-trial probability that all detectors in ``outputs`` fire.

    Sums over the emission mixture for the given shutter configuration, with
    output transmissions applied per required detector.  ``patterns`` restricts
    the sum to named firing patterns such as ``("AB",)``.
    """
    outputs = frozenset(outputs)
    eta = math.prod(cfg.eta_out[k] for k in outputs)
    masks = _including_masks(outputs)
    total = 0.0
    for ev in emission_mixture(cfg, theta, tuple(open_inputs)):
        if patterns is not None and ev.pattern not in patterns:
            continue
        if ev.n_photons < len(outputs):
            continue
        probs = chi_series(cfg, ev.occupation, float(theta))(chi)
        total += ev.weight * probs[masks].sum()
    return total * eta


def blocked_fourfold_probability(cfg: SourceConfig, theta: float, chi: float, source: str) -> float:
    """Fourfold probability measured with only ``source`` open."""
    return channel_probability(cfg, theta, chi, SOURCE_PORTS[source], ALL_OUTPUTS)


def total_fourfold_probability(cfg: SourceConfig, theta: float, chi: float):
    """``(total, bg_AA, bg_BB, ab_only)`` per-trial fourfold probabilities, all inputs open.

    The backgrounds are the in-situ double-emission terms; six-photon events
    appear in ``total`` only.
    """
    total = channel_probability(cfg, theta, chi, ALL_INPUTS, ALL_OUTPUTS)
    bg_aa = channel_probability(cfg, theta, chi, ALL_INPUTS, ALL_OUTPUTS, ("AA",))
    bg_bb = channel_probability(cfg, theta, chi, ALL_INPUTS, ALL_OUTPUTS, ("BB",))
    ab = channel_probability(cfg, theta, chi, ALL_INPUTS, ALL_OUTPUTS, ("AB",))
    return total, bg_aa, bg_bb, ab


def background_subtracted(cfg: SourceConfig, theta: float, chi: float) -> float:
    """All-open fourfolds minus the blocked-source measurements rescaled to in-situ size."""
    total = channel_probability(cfg, theta, chi, ALL_INPUTS, ALL_OUTPUTS)
    for source in ("A", "B"):
        measured = blocked_fourfold_probability(cfg, theta, chi, source)
        other = "B" if source == "A" else "A"
        total -= measured / measured_background_scale(cfg.lambda_of(other))
    return total
