"""Command-line driver: ``qplab <subcommand> [--config FILE] [--key value ...]``.

Exit codes: 0 on success, 2 on a configuration error (nothing is written),
3 on a numerical failure (the manifest names the error).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import FIELDS, ExperimentConfig, build_config, read_config_file
from .errors import ConfigError, QplabError
from .parallel import chunks, run_tasks
from .reports import SchemaError, dumps, report_merge, write_csv, write_json, write_manifest

log = logging.getLogger("qplab")

SUBCOMMANDS = ("lyapunov", "spectrum", "rellich", "resonance", "pregap", "zeros", "resultant",
               "verify", "merge")
_LISTS = {k for k, (p, _) in FIELDS.items() if p.__name__ in ("_ints", "_floats")}


class NotFound(QplabError):
    """A search (resonance, segment pair) came back empty."""


class VerifyFailure(QplabError):
    pass


# ---------------------------------------------------------------------------
# subcommands; each returns the list of files it wrote


def _energies(cfg: ExperimentConfig, pot):
    if cfg["E"]:
        return list(cfg["E"])
    h = 2 + pot.sup_norm
    return list(np.linspace(-h, h, cfg["energies"]))


def cmd_lyapunov(cfg: ExperimentConfig, out: Path):
    from .lyapunov import lyapunov_many

    pot, w = cfg.potential(), cfg.omega
    Es = _energies(cfg, pot)
    rows, curves = [], []
    for N in cfg.scales:
        parts = run_tasks(lambda r: lyapunov_many(pot, w, [Es[i] for i in r], N, cfg["y"],
                                                  cfg["grid"]), chunks(len(Es), 4), cfg.threads)
        ests = [e for p in parts for e in p]
        rows += [e.csv_row() for e in ests]
        curves.append((N, [e.value for e in ests]))
    files = [write_csv(out / "lyapunov.csv", ("E", "N", "y", "L", "spread"), rows)]
    if cfg["figures"]:
        from .plotting import plot_lyapunov

        N, L = curves[-1]
        floor = float(np.log(cfg["lambda"])) if cfg["potential"] == "amo" and cfg["lambda"] > 1 else None
        files.append(plot_lyapunov(Es, L, N, out / "lyapunov.png", floor))
    return files


def cmd_spectrum(cfg: ExperimentConfig, out: Path):
    from .gaps import gap_survival, spectrum_union

    pot, w = cfg.potential(), cfg.omega
    reps = run_tasks(lambda N: spectrum_union(pot, w, N, cfg["bc"], cfg["grid"],
                                              edge_filter=cfg["edge_filter"]),
                     cfg.scales, cfg.threads)
    files, rows, surv = [], [], []
    for rep in reps:
        files.append(write_json(out / f"spectrum_N{rep.N}.json", rep.to_dict()))
        rows += [(rep.N, "band", lo, hi) for lo, hi in rep.bands]
        rows += [(rep.N, "gap", lo, hi) for lo, hi in rep.gaps]
    for small, large in zip(reps, reps[1:]):
        for g, best, shrink in gap_survival(small, large, cfg["width"]):
            b = best or (float("nan"), float("nan"))
            surv.append((small.N, large.N, g[0], g[1], b[0], b[1], shrink))
    files.append(write_csv(out / "spectrum.csv", ("N", "kind", "lo", "hi"), rows))
    files.append(write_csv(out / "survival.csv", ("N_small", "N_large", "gap_lo", "gap_hi",
                                                  "kept_lo", "kept_hi", "shrink"), surv))
    if cfg["figures"]:
        from .plotting import plot_bands

        files.append(plot_bands(reps, out / "bands.png"))
    return files


def cmd_rellich(cfg: ExperimentConfig, out: Path):
    from .rellich import extract_segments, trace_graph

    pot, w = cfg.potential(), cfg.omega
    files = []
    for N in cfg.scales:
        g = trace_graph(pot, w, N, cfg["grid"])
        files.append(write_csv(out / f"rellich_N{N}.csv", ("x", "j", "E", "slope", "center"),
                               g.csv_rows()))
        segs = extract_segments(g, cfg["tau"], tuple(cfg["interval"]))
        files.append(write_json(out / f"segments_N{N}.json", {
            "N": N, "tau": cfg["tau"], "interval": cfg["interval"],
            "near_crossing_cells": int(g.near_crossing.sum()),
            "segments": [s.to_dict() for s in segs]}))
        if cfg["figures"]:
            from .plotting import plot_rellich

            files.append(plot_rellich(g, out / f"rellich_N{N}.png"))
    return files


def _resonance(cfg: ExperimentConfig):
    from .gaps import RegularPair, dichotomy_scan, find_resonance

    pot, w = cfg.potential(), cfg.omega
    verdict = dichotomy_scan(pot, w, tuple(cfg["interval"]), cfg["ell"], cfg["tau"],
                             grid_size=min(cfg["grid"], 512))
    if not isinstance(verdict, RegularPair):
        return verdict, None
    lo, hi = cfg["m_range"]
    return verdict, find_resonance(verdict.seg_pos, verdict.seg_neg, verdict.graph, lo, hi)


def cmd_resonance(cfg: ExperimentConfig, out: Path):
    from .gaps import RegularPair

    verdict, res = _resonance(cfg)
    doc = {"interval": cfg["interval"], "ell": cfg["ell"], "verdict": type(verdict).__name__}
    if isinstance(verdict, RegularPair):
        doc["common"] = list(verdict.common)
        doc["segments"] = [verdict.seg_pos.to_dict(), verdict.seg_neg.to_dict()]
        doc["scale"] = verdict.graph.N
        doc["resonance"] = res.to_dict() if res is not None else None
    else:
        doc["detail"] = getattr(verdict, "reason", None) or list(getattr(verdict, "interval", []))
    return [write_json(out / "resonance.json", doc)]


def cmd_pregap(cfg: ExperimentConfig, out: Path):
    from .gaps import (
        GapReport,
        build_pregap,
        certify_pregap,
        complex_zero_sequence,
        conjugate_fraction,
        density_drop,
        spectrum_union,
    )

    pot, w = cfg.potential(), cfg.omega
    verdict, res = _resonance(cfg)
    if res is None:
        raise NotFound(f"no resonance from the dichotomy scan ({type(verdict).__name__})")
    N_bar = max(4 * res.scale, abs(res.m) + res.scale + 4)
    pg = build_pregap(pot, w, res, N_bar)
    free, qs, core = certify_pregap(pot, w, pg)
    E = 0.5 * (pg.interval[0] + pg.interval[1])
    N = cfg.scales[0]
    seq = complex_zero_sequence(pot, w, E, N, pg.x_max, range(-cfg["k_max"], cfg["k_max"] + 1),
                                cfg["r"])
    drop = density_drop(pot, w, E, N, 3 * N, (tuple(cfg["annulus"]), tuple(cfg["narrow"])))
    bands = spectrum_union(pot, w, N_bar, "dirichlet", cfg["grid"], edge_filter=True)
    rep = GapReport(N_bar, "dirichlet", bands.hull, bands.bands, bands.gaps,
                    resonances=[res.to_dict()], pregaps=[pg.to_dict()],
                    zero_sequences=[[{"k": s.k, "count": s.count, "zeros": s.zeros} for s in seq]],
                    meta={"certified": free, "scales": qs, "core": list(core),
                          "probe_E": E, "conjugate_fraction": conjugate_fraction(seq),
                          "density_drop": drop.__dict__, "zero_scale": N})
    files = [write_json(out / f"gapreport_N{N_bar}.json", rep.to_dict())]
    rows = [(s.k, s.count, x, y) for s in seq for x, y in (s.zeros or ((float("nan"),) * 2,))]
    files.append(write_csv(out / "zero_sequence.csv", ("k", "count", "x", "y"), rows))
    if cfg["figures"]:
        from .plotting import plot_bands

        files.append(plot_bands([rep], out / "pregap.png"))
    return files


def cmd_zeros(cfg: ExperimentConfig, out: Path):
    from .zerocount import annulus_density

    pot, w = cfg.potential(), cfg.omega
    R1, R2 = cfg["annulus"]
    Es = list(cfg["E"]) or [0.3]
    tasks = [(N, E) for N in cfg.scales for E in Es]

    def one(t):
        N, E = t
        dens, res = annulus_density(pot, w, E, N, R1, R2, locate=True)
        zs = sorted(res.zeros, key=lambda z: (np.angle(z), abs(z)))
        return {"E": E, "N": N, "R1": R1, "R2": R2, "count": res.count, "density": dens,
                "zeros": [[z.real, z.imag] for z in zs]}

    docs = run_tasks(one, tasks, cfg.threads)
    files = [write_json(out / "zeros.json", docs)]
    if cfg["figures"]:
        from .plotting import plot_zeros

        last = docs[-1]
        files.append(plot_zeros([complex(a, b) for a, b in last["zeros"]], R1, R2,
                                out / "zeros.png"))
    return files


def cmd_resultant(cfg: ExperimentConfig, out: Path):
    from .resultant import zero_separation_experiment

    pot, w = cfg.potential(), cfg.omega
    E = (list(cfg["E"]) or [0.3])[0]
    l1, l2 = cfg["l"]
    dists = run_tasks(lambda t: zero_separation_experiment(pot, w, E, l1, l2, t), cfg["t"],
                      cfg.threads)
    rows = [(E, l1, l2, t, d) for t, d in zip(cfg["t"], dists)]
    return [write_csv(out / "resultant.csv", ("E", "l1", "l2", "t", "distance"), rows)]


def cmd_verify(cfg: ExperimentConfig, out: Path):
    from .verify import run_verify

    checks = run_verify(cfg["seed"], cfg.threads)
    path = write_csv(out / "verify.csv", ("check", "value", "limit", "status"),
                     [c.row() for c in checks])
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise VerifyFailure("failed checks: " + ", ".join(failed))
    return [path]


HANDLERS = {
    "lyapunov": cmd_lyapunov,
    "spectrum": cmd_spectrum,
    "rellich": cmd_rellich,
    "resonance": cmd_resonance,
    "pregap": cmd_pregap,
    "zeros": cmd_zeros,
    "resultant": cmd_resultant,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# entry points


def run(subcommand: str, cfg: ExperimentConfig) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files, status, error = [], "ok", None
    try:
        files = HANDLERS[subcommand](cfg, out)
    except (QplabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        status, error = "error", type(exc).__name__
        files = sorted(p for p in out.iterdir() if p.name not in ("manifest.json", "timing.txt"))
        print(f"qplab {subcommand}: {error}: {exc}", file=sys.stderr)
    write_manifest(out, subcommand, cfg.record(), files, status, error,
                   time.perf_counter() - t0, cfg.threads)
    return 0 if status == "ok" else 3


def run_merge(directory, out=None) -> int:
    try:
        doc = report_merge(directory)
    except (SchemaError, OSError) as exc:
        print(f"qplab merge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    target = Path(out or directory) / "genealogy.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps(doc), encoding="utf-8")
    return 0


def _parser():
    p = argparse.ArgumentParser(prog="qplab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        if name == "merge":
            sp.add_argument("directory")
            sp.add_argument("--out", default=None)
            continue
        sp.add_argument("--config", default=None, help="key = value file; flags override it")
        for key in FIELDS:
            flag = "--" + key.replace("_", "-")
            if key in _LISTS:
                sp.add_argument(flag, dest=key, nargs="+", default=None)
            elif key in ("figures", "edge_filter"):
                sp.add_argument(flag, dest=key, nargs="?", const="true", default=None)
            else:
                sp.add_argument(flag, dest=key, default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.subcommand == "merge":
        return run_merge(args.directory, args.out)
    ns = vars(args)
    overrides = {}
    for key in FIELDS:
        v = ns.get(key)
        if v is not None:
            overrides[key] = " ".join(v) if isinstance(v, list) else v
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, overrides)
    except ConfigError as exc:
        print(f"qplab: config error: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg)


if __name__ == "__main__":
    sys.exit(main())
