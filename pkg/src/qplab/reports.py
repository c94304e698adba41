"""CSV/JSON emission, run manifests and the gap-genealogy merge."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION
from .errors import QplabError

EMPTY = "empty"  # stands in for an infinite distance


class SchemaError(QplabError):
    pass


def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, inf encoded as the tag EMPTY."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return EMPTY
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def fmt(v) -> str:
    """Shortest round-trip text for a CSV cell."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return EMPTY if math.isinf(v) else repr(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_manifest(out, subcommand, config_record, files, status="ok", error=None,
                   wall_time=None, threads=None) -> Path:
    """manifest.json plus a timing.txt sidecar.

    Wall time goes to the sidecar so that manifest.json stays byte-identical
    between repeated runs; the manifest names the sidecar.
    """
    out = Path(out)
    man = {
        "schema": SCHEMA_VERSION,
        "code_version": __version__,
        "subcommand": subcommand,
        "config": config_record,
        "files": sorted(Path(f).name for f in files),
        "status": status,
        "error": error,
        "timing": "timing.txt",
    }
    if wall_time is not None:
        (out / "timing.txt").write_text(f"wall_time_s {wall_time:.3f}\n"
                                        f"threads {threads}\n",
                                        encoding="utf-8")
    return write_json(out / "manifest.json", man)


# ---------------------------------------------------------------------------
# genealogy


def _load_reports(directory):
    reps = []
    for p in sorted(Path(directory).glob("*.json")):
        if p.name in ("manifest.json", "genealogy.json"):
            continue
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{p.name}: not valid JSON ({exc})") from exc
        if not isinstance(d, dict) or d.get("kind") != "gap_report":
            continue
        if d.get("schema") != SCHEMA_VERSION:
            raise SchemaError(f"{p.name}: schema {d.get('schema')!r}, expected {SCHEMA_VERSION}")
        for key in ("N", "gaps", "pregaps"):
            if key not in d:
                raise SchemaError(f"{p.name}: missing {key!r}")
        reps.append((p.name, d))
    return reps


def _intervals(d):
    """Pre-gap intervals of a report, or its gaps when it has none."""
    if d["pregaps"]:
        return [tuple(pg["interval"]) for pg in d["pregaps"]], "pregap"
    return [tuple(g) for g in d["gaps"]], "gap"


def report_merge(directory) -> dict:
    """Link intervals across scales by overlap, smallest scale first.

    Each chain whose last link sits at the previous scale takes the first
    unclaimed interval overlapping that link; unclaimed intervals start new
    chains.  A chain survives when it reaches the largest scale present.
    """
    reps = _load_reports(directory)
    if not reps:
        raise SchemaError(f"no gap reports in {directory}")
    reps.sort(key=lambda r: (int(r[1]["N"]), r[0]))
    scales = sorted({int(d["N"]) for _, d in reps})
    chains = []
    prev_scale = None
    for N in scales:
        links = []
        for name, d in reps:
            if int(d["N"]) != N:
                continue
            ivs, kind = _intervals(d)
            links += [{"N": N, "interval": list(iv), "kind": kind, "file": name} for iv in ivs]
        used = set()
        for ch in chains:
            last = ch[-1]
            if last["N"] != prev_scale:
                continue
            a, b = last["interval"]
            for i, ln in enumerate(links):
                c, dd = ln["interval"]
                if min(b, dd) > max(a, c) and i not in used:
                    ch.append(ln)
                    used.add(i)
                    break
        chains += [[ln] for i, ln in enumerate(links) if i not in used]
        prev_scale = N
    top = scales[-1]
    return {
        "kind": "genealogy",
        "schema": SCHEMA_VERSION,
        "scales": scales,
        "chains": [{"links": ch, "length": len(ch), "survives": ch[-1]["N"] == top}
                   for ch in chains],
    }
