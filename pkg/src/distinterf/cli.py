"""Command-line front end.

Exit codes: 0 success, 2 bad flags, 3 unreadable or malformed files,
4 domain errors (undefined phases, invalid physics parameters, ...).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
from dataclasses import replace
from itertools import combinations, permutations

import numpy as np

from . import __version__
from .errors import DistinterfError, UndefinedPhase
from .io import FormatError, load_states, load_structured, load_unitary
from .modes import EDGE_TOL, experiment_gram, four_particle_phase, triad_phase
from .optics import PathLengths, chi_from_paths, hom_probability, quitter
from .oracle import fock_probability, ports_from_occupation
from .pipeline import (
    ChiPolicy,
    ChiWindow,
    ExperimentConfig,
    analyze_fourfolds,
    expected_fourfolds,
    predict_visibilities,
    read_log,
    simulate_sweep,
    write_log,
)
from .scattering import OccupationPattern, exchange_decomposition, transition_probability
from .sources import SourceConfig

EXIT_FLAGS = 2
EXIT_FILE = 3
EXIT_DOMAIN = 4


class FileProblem(Exception):
    pass


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _paths(text: str) -> PathLengths:
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("--paths needs L1,L2,L3,L4,lambda0")
    try:
        return PathLengths(*(float(p) for p in parts))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pattern(text: str) -> OccupationPattern:
    try:
        return OccupationPattern.parse(text)
    except (ValueError, DistinterfError) as exc:
        raise argparse.ArgumentTypeError(f"bad pattern {text!r}: {exc}") from None


def _policy(text: str) -> ChiPolicy:
    try:
        return ChiPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _window(text: str) -> ChiWindow:
    try:
        return ChiWindow.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad chi window {text!r}; use lo:hi or !lo:hi") from None


def _add_interferometer(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--chi", type=_float, help="quitter phase")
    g.add_argument("--paths", type=_paths, help="L1,L2,L3,L4,lambda0 for the quitter phase")
    g.add_argument("--unitary", help="JSON unitary file {m, rows}")


def _add_states(p):
    p.add_argument("--states", help="JSON state list or {gram: ...}; default: experiment states")
    p.add_argument("--theta", type=_float, default=0.0, help="polarization angle for default states")
    p.add_argument("--gaussian", action="store_true", help="default states with Gaussian wavepackets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distinterf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--degrees", action="store_true", help="angles on the command line are in degrees")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="transition probability for an occupation pattern")
    _add_interferometer(p)
    _add_states(p)
    p.add_argument("--pattern", type=_pattern, required=True, help="input:output, e.g. 1111:1111")
    p.add_argument("--engine", choices=("permanent", "oracle"), default="permanent")

    p = sub.add_parser("exchange-table", help="CSV of exchange contributions per permutation")
    _add_interferometer(p)
    _add_states(p)
    p.add_argument("--pattern", type=_pattern, default=OccupationPattern((1, 1, 1, 1), (1, 1, 1, 1)), help="input:output, default 1111:1111")
    p.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("hom", help="phase-dependent HOM coincidence probability")
    p.add_argument("--chi", type=_float, required=True, help="quitter phase")
    p.add_argument("--r2", type=_float, required=True, help="squared overlap modulus in [0, 1]")

    p = sub.add_parser("phases", help="overlap moduli and collective phases")
    _add_states(p)
    p.add_argument("--cycle", help="1-based photon indices, e.g. 1,2,3 or 1,2,3,4")

    p = sub.add_parser("sweep", help="chi-averaged fourfold probabilities versus theta")
    p.add_argument("--chi-policy", type=_policy, default=ChiPolicy(), help="uniform, locked, fixed:X or window:LO:HI")
    p.add_argument("--points", type=int, default=9, help="theta points across the measurement range")
    p.add_argument("--config", help="experiment or source config (JSON/TOML)")
    p.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("experiment-simulate", help="synthetic count log as JSONL")
    p.add_argument("--config", help="experiment config (JSON/TOML)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--shots", type=_float, help="override shots per point")
    p.add_argument("--sweeps", type=int, help="override number of sweeps")
    p.add_argument("--noiseless", action="store_true", help="expected counts instead of Poisson draws")
    p.add_argument("--out", required=True, help="JSONL count log to write")

    p = sub.add_parser("experiment-analyze", help="fit fourfold visibilities from a count log")
    p.add_argument("log", help="JSONL count log")
    p.add_argument("--postselect-chi", type=_window, help="lo:hi (or !lo:hi for the complement)")
    p.add_argument("--lambda", dest="lam", type=_float, help="squeezing parameter for background scaling")
    p.add_argument("--report", help="write the fit report JSON here")
    p.add_argument("--csv", help="write per-theta normalized signals here")

    p = sub.add_parser("predict", help="visibility predictions and the visibility(chi) curve")
    p.add_argument("--config", help="experiment config (JSON/TOML)")
    p.add_argument("--out", help="write the table CSV here instead of stdout")
    p.add_argument("--curve", help="write the visibility(chi) curve CSV here")
    p.add_argument("--points", type=int, default=181, help="chi samples on the curve")
    return parser


def _validate(parser, args):
    if args.degrees:
        for name in ("chi", "theta"):
            if getattr(args, name, None) is not None:
                setattr(args, name, math.radians(getattr(args, name)))
        w = getattr(args, "postselect_chi", None)
        if w is not None:
            args.postselect_chi = replace(w, lo=math.radians(w.lo), hi=math.radians(w.hi))
    cmd = args.command
    if cmd in ("prob", "exchange-table") and args.chi is None and args.paths is None and args.unitary is None:
        parser.error(f"{cmd} needs one of --chi, --paths or --unitary")
    if cmd == "hom" and not 0 <= args.r2 <= 1:
        parser.error("--r2 must lie in [0, 1]")
    if cmd == "phases" and args.cycle is not None:
        try:
            idx = [int(x) - 1 for x in args.cycle.split(",")]
        except ValueError:
            parser.error("--cycle takes comma-separated integers")
        if len(idx) not in (3, 4) or len(set(idx)) != len(idx) or min(idx) < 0:
            parser.error("--cycle needs three or four distinct 1-based indices")
        args.cycle = idx
    if cmd == "sweep" and args.points < 3:
        parser.error("--points must be at least 3")
    if cmd == "predict" and args.points < 2:
        parser.error("--points must be at least 2")
    if cmd == "experiment-simulate":
        if args.shots is not None and args.shots < 0:
            parser.error("--shots must be nonnegative")
        if args.sweeps is not None and args.sweeps < 1:
            parser.error("--sweeps must be positive")


def _read(loader, path):
    try:
        return loader(path)
    except FileNotFoundError:
        raise FileProblem(f"no such file: {path}") from None
    except (OSError, FormatError) as exc:
        raise FileProblem(str(exc)) from None


def _unitary(args):
    if args.unitary:
        return _read(load_unitary, args.unitary)
    chi = args.chi if args.chi is not None else chi_from_paths(args.paths)
    return quitter(chi)


def _states(args, n: int):
    if args.states:
        return _read(load_states, args.states)
    if n != 4:
        raise DistinterfError("default experiment states describe four photons; pass --states")
    return experiment_gram(args.theta, ideal=not getattr(args, "gaussian", False))


def _experiment_config(path) -> ExperimentConfig:
    if not path:
        return ExperimentConfig()
    data = _read(load_structured, path)
    if not isinstance(data, dict):
        raise FileProblem(f"{path}: config must be an object")
    try:
        if "source" in data or "chi_policy" in data or "seed" in data:
            return ExperimentConfig.from_dict(data)
        return ExperimentConfig(source=SourceConfig.from_dict(data))
    except (TypeError, KeyError) as exc:
        raise FileProblem(f"{path}: {exc}") from None


def _emit(text: str, path, out):
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise FileProblem(str(exc)) from None
    else:
        out.write(text)


def _csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _overlap_expr(perm) -> str:
    factors = [f"S{j + 1}{p + 1}" for j, p in enumerate(perm) if p != j]
    return "*".join(factors) if factors else "1"


def cmd_prob(args, out):
    u = _unitary(args)
    occ = args.pattern
    s = _states(args, occ.n)
    if args.engine == "oracle":
        p = fock_probability(u, ports_from_occupation(occ.r), s, occ.s)
    else:
        p = transition_probability(u, occ, s)
    out.write(f"{p!r}\n")


def cmd_exchange_table(args, out):
    u = _unitary(args)
    occ = args.pattern
    terms = exchange_decomposition(u, occ, _states(args, occ.n))
    rows = []
    for t in terms:
        c = t.coefficient
        rows.append([t.cycle, repr(float(c.real)), repr(float(c.imag)), _overlap_expr(t.permutation), repr(float(t.value.real))])
    _emit(_csv(["cycle", "coefficient_re", "coefficient_im", "overlap_expr", "value"], rows), args.out, out)


def cmd_hom(args, out):
    out.write(f"{hom_probability(args.r2, args.chi)!r}\n")


def cmd_phases(args, out):
    s = _states(args, 4)
    g = np.asarray(s)
    n = g.shape[0]
    if args.cycle is not None:
        if max(args.cycle) >= n:
            raise DistinterfError(f"cycle index exceeds the {n} photons")
        fn = triad_phase if len(args.cycle) == 3 else four_particle_phase
        out.write(f"{fn(g, *args.cycle)!r}\n")
        return
    rows = []
    for i, j in combinations(range(n), 2):
        mod = float(abs(g[i, j]))
        phase = repr(float(np.angle(g[i, j]))) if mod > EDGE_TOL else "undefined"
        rows.append(["pair", f"{i + 1},{j + 1}", repr(mod), phase])
    for k, fn in ((3, triad_phase), (4, four_particle_phase)):
        for combo in combinations(range(n), k):
            # one representative per cycle up to rotation and reflection
            for rest in permutations(combo[1:]):
                if k == 4 and rest[0] > rest[-1]:
                    continue
                if k == 3 and rest != tuple(sorted(rest)):
                    continue
                cyc = (combo[0],) + rest
                try:
                    val = repr(fn(g, *cyc))
                except UndefinedPhase as exc:
                    val = f"undefined (edge {exc.edge[0] + 1},{exc.edge[1] + 1})"
                rows.append(["triad" if k == 3 else "four", ",".join(str(x + 1) for x in cyc), "", val])
    out.write(_csv(["kind", "photons", "modulus", "phase"], rows))


def cmd_sweep(args, out):
    cfg = _experiment_config(args.config)
    grid = np.linspace(-math.pi / 3, 7 * math.pi / 3, args.points)
    res = expected_fourfolds(cfg.source, args.chi_policy, grid)
    keys = ("ab_only", "total", "bg_AA", "bg_BB", "six_photon", "bg_subtracted")
    rows = [[repr(float(t))] + [repr(float(res[k][i])) for k in keys] for i, t in enumerate(grid)]
    _emit(_csv(("theta",) + keys, rows), args.out, out)


def cmd_simulate(args, out):
    cfg = _experiment_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.shots is not None:
        over["shots_per_point"] = args.shots
    if args.sweeps is not None:
        over["n_sweeps"] = args.sweeps
    if args.noiseless:
        over["noiseless"] = True
    cfg = replace(cfg, **over)
    records = simulate_sweep(cfg)
    try:
        write_log(args.out, records, cfg)
    except OSError as exc:
        raise FileProblem(str(exc)) from None
    out.write(f"wrote {len(records)} records to {args.out}\n")


def cmd_analyze(args, out):
    try:
        records, cfg = read_log(args.log)
    except FileNotFoundError:
        raise FileProblem(f"no such file: {args.log}") from None
    except (OSError, ValueError) as exc:
        raise FileProblem(str(exc)) from None
    lam = args.lam if args.lam is not None else (cfg.source.lam if cfg else None)
    res = analyze_fourfolds(records, args.postselect_chi, lam)
    report = res.to_dict()
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        _emit(text, args.report, out)
    out.write(
        f"total visibility {res.total.visibility:.4f} +/- {res.total.stderr:.4f}\n"
        f"bg-subtracted visibility {res.bg_subtracted.visibility:.4f} +/- {res.bg_subtracted.stderr:.4f}\n"
        f"records {res.n_records}\n"
    )
    if args.csv:
        rows = []
        for name, series in (("total", res.total_series), ("bg_subtracted", res.bg_subtracted_series)):
            for t, m, e in zip(series.theta, series.mean, series.stderr):
                rows.append([name, repr(float(t)), repr(float(m)), repr(float(e))])
        _emit(_csv(["channel", "theta", "mean", "stderr"], rows), args.csv, out)


def cmd_predict(args, out):
    cfg = _experiment_config(args.config)
    report = predict_visibilities(cfg, curve_points=args.points)
    _emit(report.table_csv(), args.out, out)
    if args.curve:
        _emit(report.curve_csv(), args.curve, out)


COMMANDS = {
    "prob": cmd_prob,
    "exchange-table": cmd_exchange_table,
    "hom": cmd_hom,
    "phases": cmd_phases,
    "sweep": cmd_sweep,
    "experiment-simulate": cmd_simulate,
    "experiment-analyze": cmd_analyze,
    "predict": cmd_predict,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except FileProblem as exc:
        err.write(f"error: {exc}\n")
        return EXIT_FILE
    except UndefinedPhase as exc:
        i, j = exc.edge
        err.write(f"error: phase undefined, overlap of photons {i + 1} and {j + 1} has modulus {exc.modulus:.3g}\n")
        return EXIT_DOMAIN
    except (DistinterfError, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
