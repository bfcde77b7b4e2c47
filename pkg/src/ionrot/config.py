"""Flat ``section.key = value unit`` run configurations.

Example::

    command = sweep
    ion1.mass = 40 u
    ion2.mass = 40 u
    trap.frequency = 1.41 MHz
    protocol.theta_f = 1 pi
    protocol.t_f = 1, 1.5, 2, 3 us
    protocol.n_free = 0, 1, 2, 3, 4

Physical values need a unit suffix; counts, flags and the dimensionless
ansatz coefficients do not take one.  Lists are comma separated and share
the trailing unit.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

from .units import UNITS

__all__ = ["ConfigError", "Diagnostic", "RunConfig", "parse_config", "load_config", "COMMANDS", "FIELDS"]

COMMANDS = ("design-nm", "design-direct", "verify", "doublewell", "ratio", "sweep")

_TWO_PI = 2.0 * math.pi


def _si(dim):
    return 1.0 / UNITS.factor(dim)


# suffix -> factor taking the number to internal units, per dimension
UNIT_TABLE = {
    "mass": {"u": 1.0, "amu": 1.0, "kg": _si("mass")},
    "length": {"um": 1.0, "nm": 1e-3, "mm": 1e3, "m": 1e6},
    "time": {"us": 1.0, "ns": 1e-3, "ms": 1e3, "s": 1e6},
    # trap frequencies are quoted as omega / 2 pi
    "frequency": {"Hz": _TWO_PI * 1e-6, "kHz": _TWO_PI * 1e-3, "MHz": _TWO_PI, "rad/s": 1e-6, "rad/us": 1.0},
    "angular-frequency": {"rad/s": 1e-6, "1/s": 1e-6, "s^-1": 1e-6, "rad/us": 1.0},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0, "pi": math.pi},
    "spring-constant": {"N/m": _si("spring-constant"), "pN/m": 1e-12 * _si("spring-constant"),
                        "amu/us^2": 1.0},
    "quartic-coefficient": {"N/m^3": _si("quartic-coefficient"), "mN/m^3": 1e-3 * _si("quartic-coefficient")},
}

# key -> (kind, dimension); kind in {num, nums, int, ints, str, bool, floats}
FIELDS = {
    "command": ("str", None),
    "ion1.mass": ("num", "mass"),
    "ion2.mass": ("num", "mass"),
    "trap.frequency": ("num", "frequency"),
    "trap.spring_constant": ("num", "spring-constant"),
    "doublewell.curvature": ("num", "spring-constant"),
    "doublewell.beta": ("num", "quartic-coefficient"),
    "doublewell.branch": ("str", None),
    "protocol.theta_f": ("num", "angle"),
    "protocol.t_f": ("nums", "time"),
    "protocol.n_free": ("ints", None),
    "protocol.coefficients": ("floats", None),
    "optimizer.restarts": ("int", None),
    "optimizer.max_iter": ("int", None),
    "optimizer.step": ("float", None),
    "sim.n1": ("int", None),
    "sim.n2": ("int", None),
    "sim.half_width": ("float", None),
    "sim.n_steps": ("int", None),
    "sim.samples": ("int", None),
    "ratio.r": ("num", "length"),
    "ratio.theta_dot": ("num", "angular-frequency"),
    "output.samples": ("int", None),
    "sweep.verify": ("bool", None),
    "seed": ("int", None),
}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.field}: {self.message}"


@dataclass
class RunConfig:
    """Parsed configuration; ``values`` holds internal-unit numbers keyed by field."""

    values: dict
    text: str
    diagnostics: list = field(default_factory=list)

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def command(self) -> str:
        return self.values.get("command", "")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _parse_value(key: str, raw: str):
    kind, dim = FIELDS[key]
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "bool":
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"expected a boolean, got {raw!r}")
        return low in ("true", "yes", "1")
    if kind in ("int", "ints"):
        parts = [p.strip() for p in raw.split(",")]
        if not all(re.fullmatch(r"[-+]?\d+", p) for p in parts):
            raise ValueError(f"expected integer(s) without unit, got {raw!r}")
        vals = [int(p) for p in parts]
        return vals[0] if kind == "int" else vals
    if kind in ("float", "floats"):
        parts = [p.strip() for p in raw.split(",")]
        if not all(re.fullmatch(_NUMBER, p) for p in parts):
            raise ValueError(f"expected dimensionless number(s), got {raw!r}")
        vals = [float(p) for p in parts]
        return vals[0] if kind == "float" else vals
    # physical quantity: numbers then one unit suffix
    m = re.fullmatch(rf"((?:{_NUMBER}\s*,\s*)*{_NUMBER})\s*(\S+)?", raw)
    if not m:
        raise ValueError(f"cannot parse {raw!r}")
    unit = m.group(2)
    if unit is None:
        raise ValueError(f"missing unit suffix (one of {', '.join(UNIT_TABLE[dim])})")
    if unit not in UNIT_TABLE[dim]:
        raise ValueError(f"unit {unit!r} is not a {dim} unit (one of {', '.join(UNIT_TABLE[dim])})")
    scale = UNIT_TABLE[dim][unit]
    vals = [float(p) * scale for p in m.group(1).split(",")]
    if kind == "num":
        if len(vals) != 1:
            raise ValueError("expected a single value")
        return vals[0]
    return vals


def parse_config(text: str) -> RunConfig:
    """Parse config text; field-level problems are collected, not raised."""
    values, diags = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            diags.append(Diagnostic("error", f"line {lineno}", "expected 'key = value'"))
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            diags.append(Diagnostic("error", key, "unknown field"))
            continue
        if key in values:
            diags.append(Diagnostic("error", key, "given more than once"))
            continue
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            diags.append(Diagnostic("error", key, str(exc)))
    return RunConfig(values, text, diags)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
