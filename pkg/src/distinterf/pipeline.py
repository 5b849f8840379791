"""Synthetic two-source experiment and the count-normalization ladder.

The simulator plays the role of the apparatus: for every sweep, every
polarization angle theta on the grid and every shutter configuration it
produces coincidence counts on all 15 output subsets.  The analysis side only
ever sees those counts (plus the squeezing parameter for background scaling),
so logs recorded elsewhere can go through the same path.

Inputs and outputs are 0-based in code; the JSONL log uses the lab labels
1-4 for inputs and 5-8 for outputs.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFit, MissingData
from .modes import TimingConfig, experiment_gram
from .optics import quitter, reduce_chi
from .scattering import OccupationPattern, closed_form_p1111, exchange_ratios, transition_probability
from .sources import SOURCE_PORTS, SourceConfig, channel_probability

THETA_GRID = tuple(float(x) for x in np.linspace(-math.pi / 3, 7 * math.pi / 3, 9))
LOCK_LO = math.acos(1 / 3)
LOCK_HI = math.pi - LOCK_LO
INPUTS = (0, 1, 2, 3)
OUTPUTS = (0, 1, 2, 3)
SHUTTER_CONFIGS = tuple(c for k in range(1, 5) for c in combinations(INPUTS, k))
OUTPUT_SUBSETS = tuple(c for k in range(1, 5) for c in combinations(OUTPUTS, k))


# ---------------------------------------------------------------- chi policy


@dataclass(frozen=True)
class ChiPolicy:
    """Distribution of the interferometer phase over the recorded data.

    ``locked`` puts half the samples uniformly in ``[lo, hi]`` (the locking
    window) and half uniformly on the rest of ``[0, pi]``.
    """

    kind: str = "locked"
    value: float = math.pi / 2
    lo: float = LOCK_LO
    hi: float = LOCK_HI

    def __post_init__(self):
        if self.kind not in ("uniform", "locked", "fixed", "window"):
            raise ValueError(f"unknown chi policy {self.kind!r}")
        if self.kind in ("locked", "window") and not 0 <= self.lo < self.hi <= math.pi:
            raise ValueError(f"chi window must satisfy 0 <= lo < hi <= pi, got [{self.lo}, {self.hi}]")

    @classmethod
    def parse(cls, text: str) -> "ChiPolicy":
        """``uniform``, ``locked``, ``fixed:X`` or ``window:LO:HI``."""
        parts = text.strip().split(":")
        kind = parts[0]
        try:
            if kind == "fixed" and len(parts) == 2:
                return cls("fixed", value=float(parts[1]))
            if kind == "window" and len(parts) == 3:
                return cls("window", lo=float(parts[1]), hi=float(parts[2]))
            if kind in ("uniform", "locked") and len(parts) == 1:
                return cls(kind)
        except ValueError as exc:
            raise ValueError(f"bad chi policy {text!r}: {exc}") from None
        raise ValueError(f"bad chi policy {text!r}")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.value!r}"
        if self.kind == "window":
            return f"window:{self.lo!r}:{self.hi!r}"
        return self.kind

    def quantile(self, u: float) -> float:
        """Inverse CDF; ``u`` uniform in [0, 1) gives a sample."""
        if self.kind == "fixed":
            return reduce_chi(self.value)
        if self.kind == "uniform":
            return math.pi * u
        if self.kind == "window":
            return self.lo + u * (self.hi - self.lo)
        if u < 0.5:
            return self.lo + 2 * u * (self.hi - self.lo)
        x = (2 * u - 1) * (self.lo + math.pi - self.hi)
        return x if x < self.lo else self.hi + (x - self.lo)

    def quadrature(self, n: int = 24):
        """Nodes and weights integrating smooth functions against this distribution."""
        if self.kind == "fixed":
            return np.array([reduce_chi(self.value)]), np.array([1.0])
        if self.kind == "uniform":
            pieces = [(0.0, math.pi, 1.0)]
        elif self.kind == "window":
            pieces = [(self.lo, self.hi, 1.0)]
        else:
            span = self.lo + math.pi - self.hi
            pieces = [
                (self.lo, self.hi, 0.5),
                (0.0, self.lo, 0.5 * self.lo / span),
                (self.hi, math.pi, 0.5 * (math.pi - self.hi) / span),
            ]
        x, w = np.polynomial.legendre.leggauss(n)
        nodes, weights = [], []
        for a, b, mass in pieces:
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * w * mass)
        return np.concatenate(nodes), np.concatenate(weights)


def sample_chi(policy: ChiPolicy, rng: np.random.Generator) -> float:
    return policy.quantile(float(rng.random()))


@dataclass(frozen=True)
class ChiWindow:
    """Postselection on the logged chi; ``complement`` keeps everything outside."""

    lo: float
    hi: float
    complement: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError("chi window needs lo <= hi")

    @classmethod
    def parse(cls, text: str) -> "ChiWindow":
        """``lo:hi``, or ``!lo:hi`` for the complement."""
        comp = text.startswith("!")
        lo, hi = (float(x) for x in text.lstrip("!").split(":"))
        return cls(lo, hi, comp)

    def keeps(self, chi: float) -> bool:
        inside = self.lo <= chi <= self.hi
        return inside != self.complement

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "complement": self.complement}


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class Perturbations:
    """Optional imperfections injected into the synthetic counts.

    ``epsilon[k]`` modulates the input-1 singles at output k as
    ``1 + (epsilon_k / 2) cos theta``.  ``r_ad_drift`` makes ``r_ad^2`` vary as
    ``1 + drift cos theta``.  ``sweep_coupling`` gives per-sweep detection
    efficiency multipliers (cycled), which scale a k-fold channel by ``c^k``.
    """

    epsilon: tuple = (0.0, 0.0, 0.0, 0.0)
    r_ad_drift: float = 0.0
    sweep_coupling: tuple = ()

    def __post_init__(self):
        if len(self.epsilon) != 4:
            raise ValueError("epsilon needs one entry per output")
        if any(c <= 0 for c in self.sweep_coupling):
            raise ValueError("sweep couplings must be positive")
        object.__setattr__(self, "epsilon", tuple(float(e) for e in self.epsilon))
        object.__setattr__(self, "sweep_coupling", tuple(float(c) for c in self.sweep_coupling))


@dataclass(frozen=True)
class ExperimentConfig:
    theta_grid: tuple = THETA_GRID
    chi_policy: ChiPolicy = field(default_factory=ChiPolicy)
    shots_per_point: float = 1e6
    n_sweeps: int = 20
    seed: int = 2024
    source: SourceConfig = field(default_factory=SourceConfig)
    perturbations: Perturbations = field(default_factory=Perturbations)
    noiseless: bool = False

    def __post_init__(self):
        if self.shots_per_point < 0:
            raise ValueError("shots_per_point must be nonnegative")
        if self.n_sweeps < 1:
            raise ValueError("need at least one sweep")
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))

    @property
    def simulation_source(self) -> SourceConfig:
        drift = self.perturbations.r_ad_drift
        return replace(self.source, r_ad_drift=drift) if drift else self.source

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        kw = {}
        if "theta_grid" in d:
            kw["theta_grid"] = tuple(d["theta_grid"])
        if "chi_policy" in d:
            p = d["chi_policy"]
            kw["chi_policy"] = ChiPolicy.parse(p) if isinstance(p, str) else ChiPolicy(**p)
        for key in ("shots_per_point", "n_sweeps", "seed", "noiseless"):
            if key in d:
                kw[key] = d[key]
        if "source" in d:
            kw["source"] = SourceConfig.from_dict(d["source"])
        if "perturbations" in d:
            kw["perturbations"] = Perturbations(**d["perturbations"])
        return cls(**kw)

    def to_dict(self) -> dict:
        p = self.perturbations
        return {
            "theta_grid": list(self.theta_grid),
            "chi_policy": str(self.chi_policy),
            "shots_per_point": self.shots_per_point,
            "n_sweeps": self.n_sweeps,
            "seed": self.seed,
            "noiseless": self.noiseless,
            "source": self.source.to_dict(),
            "perturbations": {
                "epsilon": list(p.epsilon),
                "r_ad_drift": p.r_ad_drift,
                "sweep_coupling": list(p.sweep_coupling),
            },
        }


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class CountRecord:
    sweep: int
    theta_index: int
    theta: float
    chi: float
    shutters: tuple  # open inputs, 0-based
    counts: dict  # tuple of outputs (0-based) -> count

    def __post_init__(self):
        if not 0 <= self.chi < 2 * math.pi:
            raise ValueError(f"chi must lie in [0, 2 pi), got {self.chi}")
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be nonnegative")

    def count(self, outputs) -> float:
        try:
            return self.counts[tuple(sorted(outputs))]
        except KeyError:
            raise MissingData(f"channel {_label(outputs, 5)} absent for shutters {_label(self.shutters, 1)}") from None

    def to_json(self) -> str:
        body = {
            "sweep": self.sweep,
            "theta_index": self.theta_index,
            "theta": self.theta,
            "chi": self.chi,
            "shutters": [i + 1 for i in self.shutters],
            "counts": {_label(k, 5): v for k, v in self.counts.items()},
        }
        return json.dumps(body)

    @classmethod
    def from_json(cls, d: dict) -> "CountRecord":
        counts = {}
        for key, v in d["counts"].items():
            counts[tuple(sorted(int(x) - 5 for x in key.split("+")))] = v
        return cls(
            int(d["sweep"]),
            int(d["theta_index"]),
            float(d["theta"]),
            float(d["chi"]),
            tuple(sorted(int(i) - 1 for i in d["shutters"])),
            counts,
        )


def _label(ports, offset: int) -> str:
    return "+".join(str(p + offset) for p in sorted(ports))


def write_log(path, records: Sequence[CountRecord], cfg: ExperimentConfig | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        if cfg is not None:
            fh.write(json.dumps({"config": cfg.to_dict()}) + "\n")
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_log(path):
    """Return ``(records, config_or_None)`` from a JSONL count log."""
    records, cfg = [], None
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if "config" in d:
                    cfg = ExperimentConfig.from_dict(d["config"])
                else:
                    records.append(CountRecord.from_json(d))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{n}: malformed record ({exc})") from None
    return records, cfg


# ---------------------------------------------------------------- simulation


def reference_rate(source: SourceConfig) -> float:
    """Probability of exactly one pair from each source; shots are counted in these units."""
    la, lb = source.lambdas
    return la**2 * lb**2 * (1 - la**2) * (1 - lb**2)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QSIM_THREADS", "1")))
    except ValueError:
        return 1


def _cell_chi(cfg: ExperimentConfig, sweep: int, ti: int) -> float:
    if cfg.noiseless:
        # stratified: one quantile per sweep so a modest number of sweeps covers the distribution
        return cfg.chi_policy.quantile((sweep + 0.5) / cfg.n_sweeps)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(sweep, ti)))
    return sample_chi(cfg.chi_policy, rng)


def _simulate_cell(cfg: ExperimentConfig, sweep: int, ti: int) -> list[CountRecord]:
    theta = cfg.theta_grid[ti]
    chi = reduce_chi(_cell_chi(cfg, sweep, ti))
    source = cfg.simulation_source
    scale = cfg.shots_per_point / reference_rate(source)
    pert = cfg.perturbations
    coupling = pert.sweep_coupling[sweep % len(pert.sweep_coupling)] if pert.sweep_coupling else 1.0
    out = []
    for shutters in SHUTTER_CONFIGS:
        means = {}
        for k in OUTPUT_SUBSETS:
            p = channel_probability(source, theta, chi, shutters, k)
            mu = scale * p * coupling ** len(k)
            if shutters == (0,) and len(k) == 1:
                mu *= 1 + 0.5 * pert.epsilon[k[0]] * math.cos(theta)
            means[k] = max(mu, 0.0)
        if cfg.noiseless:
            counts = dict(means)
        else:
            mask = sum(1 << i for i in shutters)
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(sweep, ti, 16 + mask)))
            draws = rng.poisson([means[k] for k in OUTPUT_SUBSETS])
            counts = {k: int(c) for k, c in zip(OUTPUT_SUBSETS, draws)}
        out.append(CountRecord(sweep, ti, theta, chi, shutters, counts))
    return out


def simulate_sweep(cfg: ExperimentConfig) -> list[CountRecord]:
    """Counts for every (sweep, theta, shutter configuration) cell.

    Expected counts are ``shots_per_point * P / reference_rate``, i.e. shots
    are measured in one-pair-per-source firings.  Every cell draws from its
    own RNG stream spawned from the seed, so results do not depend on the
    worker count or evaluation order.
    """
    cells = [(s, t) for s in range(cfg.n_sweeps) for t in range(len(cfg.theta_grid))]
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(lambda c: _simulate_cell(cfg, *c), cells))
    else:
        chunks = [_simulate_cell(cfg, s, t) for s, t in cells]
    return [rec for chunk in chunks for rec in chunk]


# ---------------------------------------------------------------- analysis


@dataclass(frozen=True)
class ChannelSeries:
    theta: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray

    def modulation(self) -> float:
        """(max - min)/max of the averaged points."""
        return float((self.mean.max() - self.mean.min()) / self.mean.max())


@dataclass(frozen=True)
class VisibilityFit:
    a: float
    b: float
    visibility: float
    stderr: float
    a_err: float = 0.0
    b_err: float = 0.0
    n_points: int = 0

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "visibility": self.visibility,
            "stderr": self.stderr,
            "a_err": self.a_err,
            "b_err": self.b_err,
            "n_points": self.n_points,
            "error_kind": "fit covariance",
        }


@dataclass(frozen=True)
class FourfoldAnalysis:
    total: VisibilityFit
    bg_subtracted: VisibilityFit
    backgrounds: dict  # source -> ChannelSeries
    total_series: ChannelSeries
    bg_subtracted_series: ChannelSeries
    n_records: int
    chi_window: ChiWindow | None

    def to_dict(self) -> dict:
        return {
            "total": self.total.to_dict(),
            "bg_subtracted": self.bg_subtracted.to_dict(),
            "backgrounds": {
                s: {"theta": list(map(float, c.theta)), "mean": list(map(float, c.mean)), "stderr": list(map(float, c.stderr))}
                for s, c in self.backgrounds.items()
            },
            "chi_window": self.chi_window.to_dict() if self.chi_window else None,
            "n_records": self.n_records,
        }


class _Index:
    """Records keyed by (sweep, theta index, shutters)."""

    def __init__(self, records: Iterable[CountRecord]):
        self.cells: dict = {}
        self.theta: dict = {}
        self.chi: dict = {}
        for rec in records:
            self.cells[(rec.sweep, rec.theta_index, tuple(sorted(rec.shutters)))] = rec
            self.theta[rec.theta_index] = rec.theta
            self.chi[(rec.sweep, rec.theta_index)] = rec.chi
        if not self.cells:
            raise MissingData("no count records")
        self.sweeps = sorted({s for s, _, _ in self.cells})
        self.thetas = sorted(self.theta)

    def count(self, sweep, ti, shutters, outputs) -> float:
        key = (sweep, ti, tuple(sorted(shutters)))
        if key not in self.cells:
            raise MissingData(f"shutter configuration {_label(shutters, 1)} missing at sweep {sweep}, theta index {ti}")
        return float(self.cells[key].count(outputs))

    def bg_subtracted(self, sweep, ti, shutters, outputs, lambdas) -> float:
        """Count minus single-source contributions measured with the other source blocked.

        Only applies when both sources have an open arm; each blocked
        measurement is scaled down by the other source's vacuum probability.
        """
        value = self.count(sweep, ti, shutters, outputs)
        open_by = {s: tuple(p for p in shutters if p in ports) for s, ports in SOURCE_PORTS.items()}
        if not (open_by["A"] and open_by["B"]):
            return value
        for s, other in (("A", "B"), ("B", "A")):
            lam = lambdas[0 if other == "A" else 1]
            value -= self.count(sweep, ti, open_by[s], outputs) * (1 - lam**2)
        return value

    def singles(self, sweep, ti, pairs) -> float:
        return math.prod(self.count(sweep, ti, (i,), (k,)) for i, k in pairs)


def _lambdas(lam) -> tuple:
    if lam is None:
        lam = SourceConfig().lam
    return (float(lam), float(lam)) if np.isscalar(lam) else tuple(float(x) for x in lam)


def _ladder(values: np.ndarray):
    """Per-sweep division by the theta-average, then mean and stderr across sweeps."""
    means = values.mean(axis=1, keepdims=True)
    if np.any(means == 0):
        raise MissingData("a sweep has zero mean signal; cannot normalize")
    norm = values / means
    n = norm.shape[0]
    err = norm.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(norm.shape[1])
    return norm.mean(axis=0), err


def _series(index: _Index, fn) -> ChannelSeries:
    vals = np.array([[fn(s, t) for t in index.thetas] for s in index.sweeps])
    mean, err = _ladder(vals)
    return ChannelSeries(np.array([index.theta[t] for t in index.thetas]), mean, err)


def normalize_singles(records) -> dict:
    """``(input, output) -> ChannelSeries`` of sweep-normalized singles."""
    index = records if isinstance(records, _Index) else _Index(records)
    return {
        (i, k): _series(index, lambda s, t, i=i, k=k: index.count(s, t, (i,), (k,)))
        for i in INPUTS
        for k in OUTPUTS
    }


def _normalized_channels(records, order: int, lam) -> dict:
    index = records if isinstance(records, _Index) else _Index(records)
    lambdas = _lambdas(lam)
    out = {}
    for ins in combinations(INPUTS, order):
        for outs in combinations(OUTPUTS, order):
            pairs = tuple(zip(ins, outs))

            def value(s, t, ins=ins, outs=outs, pairs=pairs):
                return index.bg_subtracted(s, t, ins, outs, lambdas) / index.singles(s, t, pairs)

            out[(ins, outs)] = _series(index, value)
    return out


def normalize_twofolds(records, lam=None) -> dict:
    """``((i, j), (k, l)) -> ChannelSeries``: background-subtracted twofolds over singles.

    Cross-source input pairs have the double-emission twofolds of each
    single arm (measured with the other arm blocked) removed first; the
    result is divided by ``C^i_k C^j_l`` and sweep-normalized.
    """
    return _normalized_channels(records, 2, lam)


def normalize_threefolds(records, lam=None) -> dict:
    """Threefold analogue of :func:`normalize_twofolds`."""
    return _normalized_channels(records, 3, lam)


def fit_cosine(theta, y) -> VisibilityFit:
    """Least-squares ``a + b cos(theta)`` with visibility ``2|b| / (a + |b|)``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(np.round(theta, 12))) < 3:
        raise DegenerateFit("need at least three distinct theta values")
    x = np.column_stack([np.ones_like(theta), np.cos(theta)])
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    a, b = (float(c) for c in coef)
    dof = len(y) - 2
    resid = y - x @ coef
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(x.T @ x)
    top = a + abs(b)
    if top == 0:
        raise DegenerateFit("fitted maximum is zero")
    vis = 2 * abs(b) / top
    sign = 1.0 if b >= 0 else -1.0
    jac = np.array([-2 * abs(b) / top**2, sign * 2 * a / top**2])
    err = math.sqrt(max(float(jac @ cov @ jac), 0.0))
    return VisibilityFit(
        a, b, vis, err, math.sqrt(max(cov[0, 0], 0.0)), math.sqrt(max(cov[1, 1], 0.0)), len(y)
    )


def _aggregate(index: _Index, cells, value) -> ChannelSeries:
    """Average a per-cell signal per theta.

    When every kept sweep is complete the sweep-normalization ladder is
    used; otherwise (after chi postselection) cells are pooled per theta and
    the result divided by its overall mean.
    """
    by_sweep: dict = {}
    for s, t in cells:
        by_sweep.setdefault(s, {})[t] = value(s, t)
    thetas = sorted({t for _, t in cells})
    if all(len(v) == len(index.thetas) for v in by_sweep.values()) and len(thetas) == len(index.thetas):
        vals = np.array([[by_sweep[s][t] for t in thetas] for s in sorted(by_sweep)])
        mean, err = _ladder(vals)
    else:
        pooled = {t: [] for t in thetas}
        for v in by_sweep.values():
            for t, x in v.items():
                pooled[t].append(x)
        mean = np.array([np.mean(pooled[t]) for t in thetas])
        err = np.array(
            [np.std(pooled[t], ddof=1) / math.sqrt(len(pooled[t])) if len(pooled[t]) > 1 else 0.0 for t in thetas]
        )
        scale = mean.mean()
        if scale == 0:
            raise MissingData("zero mean signal")
        mean, err = mean / scale, err / abs(scale)
    return ChannelSeries(np.array([index.theta[t] for t in thetas]), mean, err)


def analyze_fourfolds(records, postselect: ChiWindow | None = None, lam=None) -> FourfoldAnalysis:
    """Background-subtract, normalize, postselect on chi and fit the fourfolds."""
    index = records if isinstance(records, _Index) else _Index(records)
    lambdas = _lambdas(lam)
    cells = [
        (s, t)
        for s in index.sweeps
        for t in index.thetas
        if (s, t, INPUTS) in index.cells and (postselect is None or postselect.keeps(index.chi[(s, t)]))
    ]
    if not cells:
        raise MissingData("no all-open fourfold records survive the chi selection")
    if len({t for _, t in cells}) < 3:
        raise DegenerateFit("fewer than three distinct theta values after postselection")
    diag = tuple(zip(INPUTS, OUTPUTS))

    def total(s, t):
        return index.count(s, t, INPUTS, OUTPUTS) / index.singles(s, t, diag)

    def subtracted(s, t):
        return index.bg_subtracted(s, t, INPUTS, OUTPUTS, lambdas) / index.singles(s, t, diag)

    def background(source):
        ports = SOURCE_PORTS[source]
        pairs = tuple(zip((ports[0], ports[0], ports[1], ports[1]), OUTPUTS))
        return lambda s, t: index.count(s, t, ports, OUTPUTS) / index.singles(s, t, pairs)

    tot = _aggregate(index, cells, total)
    sub = _aggregate(index, cells, subtracted)
    bgs = {src: _aggregate(index, cells, background(src)) for src in ("A", "B")}
    return FourfoldAnalysis(
        fit_cosine(tot.theta, tot.mean),
        fit_cosine(sub.theta, sub.mean),
        bgs,
        tot,
        sub,
        len(cells),
        postselect,
    )


# ---------------------------------------------------------------- predictions


def ideal_visibility(chi: float) -> float:
    """Visibility over phi of the ideal-state fourfold probability (all r = 1/2)."""
    hi = closed_form_p1111(0.5, 0.5, 0.5, 0.5, math.pi, chi)
    lo = closed_form_p1111(0.5, 0.5, 0.5, 0.5, 0.0, chi)
    return (hi - lo) / hi


def fourfold_signal(chi: float, theta_grid=THETA_GRID, timing: TimingConfig | None = None, ideal=False) -> np.ndarray:
    """Four-photon 1111 -> 1111 probability over theta, single emission only."""
    occ = OccupationPattern((1, 1, 1, 1), (1, 1, 1, 1))
    u = quitter(chi)
    return np.array(
        [transition_probability(u, occ, experiment_gram(t, timing=timing, ideal=ideal)) for t in theta_grid]
    )


def state_visibility(chi: float, timing: TimingConfig | None = None, ideal=False) -> float:
    theta = np.array(THETA_GRID)
    return fit_cosine(theta, fourfold_signal(chi, theta, timing, ideal)).visibility


def policy_visibility(policy: ChiPolicy, timing: TimingConfig | None = None, ideal=False, n: int = 24) -> float:
    """Visibility of the chi-averaged four-photon signal."""
    nodes, weights = policy.quadrature(n)
    theta = np.array(THETA_GRID)
    signal = sum(w * fourfold_signal(c, theta, timing, ideal) for c, w in zip(nodes, weights))
    return fit_cosine(theta, signal).visibility


def expected_fourfolds(source: SourceConfig, policy: ChiPolicy, theta_grid=THETA_GRID, n: int = 16) -> dict:
    """Chi-averaged all-open fourfold probabilities per theta.

    Keys: ``ab_only``, ``total``, ``bg_AA``, ``bg_BB``, ``six_photon`` and
    ``bg_subtracted`` (total minus blocked-source measurements rescaled).
    """
    from .sources import ALL_INPUTS, ALL_OUTPUTS, measured_background_scale

    nodes, weights = policy.quadrature(n)
    keys = ("ab_only", "total", "bg_AA", "bg_BB", "six_photon", "bg_subtracted")
    out = {k: np.zeros(len(theta_grid)) for k in keys}
    la, lb = source.lambdas
    for ti, theta in enumerate(theta_grid):
        for chi, w in zip(nodes, weights):
            total = channel_probability(source, theta, chi, ALL_INPUTS, ALL_OUTPUTS)
            aa = channel_probability(source, theta, chi, ALL_INPUTS, ALL_OUTPUTS, ("AA",))
            bb = channel_probability(source, theta, chi, ALL_INPUTS, ALL_OUTPUTS, ("BB",))
            ab = channel_probability(source, theta, chi, ALL_INPUTS, ALL_OUTPUTS, ("AB",))
            meas_a = channel_probability(source, theta, chi, SOURCE_PORTS["A"], ALL_OUTPUTS)
            meas_b = channel_probability(source, theta, chi, SOURCE_PORTS["B"], ALL_OUTPUTS)
            sub = total - meas_a / measured_background_scale(lb) - meas_b / measured_background_scale(la)
            vals = (ab, total, aa, bb, total - ab - aa - bb, sub)
            for k, v in zip(keys, vals):
                out[k][ti] += w * v
    return out


@dataclass(frozen=True)
class PredictionReport:
    rows: tuple  # (quantity, value) pairs; visibilities as fractions
    curve: tuple  # (chi, ideal, gaussian, |R43|) rows

    def table_csv(self) -> str:
        lines = ["quantity,value"]
        lines += [f"{k},{v!r}" for k, v in self.rows]
        return "\n".join(lines) + "\n"

    def curve_csv(self) -> str:
        lines = ["chi,visibility_ideal,visibility_gaussian,abs_r43"]
        lines += [",".join(repr(float(x)) for x in row) for row in self.curve]
        return "\n".join(lines) + "\n"

    def value(self, name: str) -> float:
        return dict(self.rows)[name]


def noiseless_predictions(cfg: ExperimentConfig, n_sweeps: int = 40) -> dict:
    """Run the noiseless pipeline and fit total / bg-subtracted visibilities per chi selection."""
    run = replace(cfg, noiseless=True, n_sweeps=n_sweeps, perturbations=Perturbations())
    index = _Index(simulate_sweep(run))
    lam = cfg.source.lambdas
    out = {}
    selections = {"all": None}
    if cfg.chi_policy.kind == "locked":
        window = ChiWindow(cfg.chi_policy.lo, cfg.chi_policy.hi)
        selections["window"] = window
        selections["complement"] = replace(window, complement=True)
    for name, sel in selections.items():
        res = analyze_fourfolds(index, sel, lam)
        out[name] = (res.total.visibility, res.bg_subtracted.visibility)
    return out


def predict_visibilities(cfg: ExperimentConfig | None = None, curve_points: int = 181) -> PredictionReport:
    """Closed-form and semi-analytic visibility predictions plus the visibility(chi) curve."""
    cfg = cfg or ExperimentConfig()
    timing = cfg.source.timing
    rows = [
        ("ideal_max", ideal_visibility(math.pi / 2)),
        ("ideal_min", ideal_visibility(0.0)),
        ("ideal_uniform_average", policy_visibility(ChiPolicy("uniform"), ideal=True)),
        ("gaussian_max", state_visibility(math.pi / 2, timing)),
        ("gaussian_min", state_visibility(0.0, timing)),
        ("gaussian_uniform_average", policy_visibility(ChiPolicy("uniform"), timing)),
        ("gaussian_policy_average", policy_visibility(cfg.chi_policy, timing)),
    ]
    t23 = timing.t23_target
    r43 = [abs(exchange_ratios(t23, c)[1]) for c in (0.0, math.pi / 2)]
    rows += [("abs_r43_min", min(r43)), ("abs_r43_max", max(r43))]
    for name, (tot, sub) in noiseless_predictions(cfg).items():
        rows += [(f"experiment_{name}_total", tot), (f"experiment_{name}_bg_subtracted", sub)]
    curve = []
    for chi in np.linspace(0, math.pi, curve_points):
        curve.append((chi, ideal_visibility(chi), state_visibility(chi, timing), abs(exchange_ratios(t23, chi)[1])))
    return PredictionReport(tuple(rows), tuple(curve))
