"""Experiment configuration: ``key = value`` files with command-line overrides."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .model import Potential, constant, make_amo, parse_omega

SCHEMA_VERSION = "1"


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    out = []
    for v in str(text).replace(",", " ").split():
        f = float(v)
        if f != int(f):
            raise ValueError(f"{v} is not an integer")
        out.append(int(f))
    return out


def _bool(text):
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default).  Defaults are strings so that files, flags and
# defaults all go through the same parser.
FIELDS = {
    "potential": (str, "amo"),
    "lambda": (float, "3.0"),
    "c": (float, "0.0"),
    "rho0": (float, "0.5"),
    "omega": (str, "golden"),
    "N": (_ints, "50"),
    "grid": (int, "1024"),
    "bc": (str, "dirichlet"),
    "E": (_floats, ""),
    "energies": (int, "20"),
    "y": (float, "0.0"),
    "tau": (float, "1e-3"),
    "r0": (float, "1e-6"),
    "r": (float, "1e-2"),
    "tol": (float, "1e-8"),
    "annulus": (_floats, "0.99 1.01"),
    "narrow": (_floats, "0.9999 1.0001"),
    "interval": (_floats, "-1.3 1.3"),
    "ell": (int, "1"),
    "m_range": (_ints, "1 50"),
    "m2_range": (_ints, "200 400"),
    "k_max": (int, "40"),
    "t": (_ints, "0 50 200"),
    "l": (_ints, "20 20"),
    "width": (float, "0.05"),
    "edge_filter": (_bool, "true"),
    "seed": (int, "0"),
    "threads": (int, ""),
    "out": (str, "qplab-out"),
    "figures": (_bool, "false"),
}

# positive tunables; lambda, c and y may take any real value
_POSITIVE = ("grid", "energies", "tau", "r0", "r", "rho0", "width", "ell", "k_max")


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def threads(self) -> int:
        return self.values["threads"]

    @property
    def omega(self) -> float:
        return parse_omega(self.values["omega"])

    @property
    def scales(self) -> list[int]:
        return self.values["N"]

    def potential(self) -> Potential:
        kind = self.values["potential"]
        if kind == "amo":
            return make_amo(self.values["lambda"], self.values["rho0"])
        return constant(self.values["c"], self.values["rho0"])

    def record(self) -> dict:
        """Config as written to the manifest; the thread count is left out on purpose."""
        d = {k: v for k, v in asdict(self)["values"].items() if k not in ("threads", "out")}
        return dict(sorted(d.items()))


def read_config_file(path) -> dict:
    """Raw ``key = value`` pairs; '#' starts a comment, blank lines are skipped."""
    raw = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = val
    return raw


def default_threads() -> int:
    env = os.environ.get("QPLAB_THREADS", "").strip()
    if not env:
        return 1
    try:
        n = int(env)
    except ValueError as exc:
        raise ConfigError(f"QPLAB_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError("QPLAB_THREADS must be at least 1")
    return n


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file, then flag overrides (flags win); validated."""
    raw = {k: d for k, (_, d) in FIELDS.items()}
    raw.update(file_values or {})
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    vals = {}
    for key, text in raw.items():
        parse = FIELDS[key][0]
        if key == "threads" and text == "":
            vals[key] = default_threads()
            continue
        try:
            vals[key] = parse(text) if isinstance(text, str) else text
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc
    _validate(vals)
    return ExperimentConfig(vals)


def _validate(v):
    if v["bc"] not in ("dirichlet", "periodic"):
        raise ConfigError("bc must be 'dirichlet' or 'periodic'")
    if v["potential"] not in ("amo", "constant"):
        raise ConfigError("potential must be 'amo' or 'constant'")
    try:
        parse_omega(v["omega"])
    except ValueError as exc:
        raise ConfigError(f"bad omega: {exc}") from exc
    for key in _POSITIVE:
        if not v[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if v["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    for key in ("lambda", "c", "y"):
        if not math.isfinite(v[key]):
            raise ConfigError(f"{key} must be finite")
    if not v["N"] or any(n < 1 for n in v["N"]):
        raise ConfigError("N must list positive scales")
    if v["N"] != sorted(v["N"]):
        raise ConfigError("scales N must be sorted ascending")
    for key in ("annulus", "narrow", "interval"):
        if len(v[key]) != 2 or not v[key][0] < v[key][1]:
            raise ConfigError(f"{key} must be two increasing numbers")
    for key in ("m_range", "m2_range"):
        if len(v[key]) != 2 or not 1 <= v[key][0] <= v[key][1]:
            raise ConfigError(f"{key} must be 'lo hi' with 1 <= lo <= hi")
    if len(v["l"]) != 2 or not v["l"][0] >= v["l"][1] >= 1:
        raise ConfigError("l must be 'l1 l2' with l1 >= l2 >= 1")
    if any(t < 0 for t in v["t"]):
        raise ConfigError("t values must be nonnegative")
    if v["annulus"][0] <= 0:
        raise ConfigError("annulus radii must be positive")
