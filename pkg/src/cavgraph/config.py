"""INI run configuration with unit-suffixed values.

Frequencies are written in Hz (ordinary, not angular) with an optional
Hz/kHz/MHz/GHz suffix and are converted to rad/s on load. Times take
s/ms/us/ns suffixes and are stored in seconds. Unknown sections or keys are
rejected.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError

FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}

# kind: "freq" (stored rad/s), "time" (s), "float", "int", "bool", "str", "floats", "ints"
SCHEMA: dict[str, dict[str, str]] = {
    "cavity": {
        "kappa": "freq", "omega_z": "freq", "delta_c": "freq", "stark_shift": "freq",
        "atom_count": "int", "q": "freq", "mode_count": "int", "g": "freq", "gamma": "freq",
        "delta": "freq", "eta": "float", "peak_stark_shift": "freq", "n_photons": "float",
        "n_input": "float", "chi": "freq",
    },
    "dynamics": {
        "chi": "freq", "derive_chi": "bool", "q": "freq", "tau": "time", "modes": "int",
        "squeeze_strength": "floats", "delta_minus": "freq", "kappa": "freq",
    },
    "noise": {
        "inverse_zeta2_max": "float", "photon_shot_noise": "float", "coupling_variation": "float",
        "interaction_strength_noise": "float", "cavity_photon_loss": "float",
        "free_space_scattering": "float", "contrast": "float", "beta": "float",
        "chi_fluctuation": "float", "dissipation": "bool", "detection_noise": "float",
    },
    "graph": {"path": "str", "preset": "str", "reference_angle_deg": "float"},
    "sampling": {"n_trials": "int", "seed": "int", "phi_step_deg": "float"},
    "imaging": {
        "r": "float", "g": "float", "a0": "float", "a2": "float",
        "atom_numbers": "floats", "n_trials": "int",
    },
    "oracle": {"atoms": "ints", "lambda_t": "floats", "chi_over_q": "float", "q": "freq"},
}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_UNIT_RE = re.compile(rf"^\s*({_NUM})\s*([A-Za-zµ]*)\s*$")


def _parse_number(text: str, units: dict[str, float] | None, where: str) -> float:
    m = _UNIT_RE.match(text)
    if not m:
        raise InputError(f"{where}: cannot parse {text!r} as a number")
    value, unit = float(m.group(1)), m.group(2)
    if unit:
        if units is None:
            raise InputError(f"{where}: dimensionless value takes no unit, got {unit!r}")
        key = unit.lower() if unit != "µs" else unit
        if key not in units:
            raise InputError(f"{where}: unknown unit {unit!r} (allowed: {', '.join(units)})")
        value *= units[key]
    return value


def parse_value(kind: str, text: str, where: str = "value"):
    text = text.strip()
    if kind == "freq":
        return 2.0 * math.pi * _parse_number(text, FREQ_UNITS, where)
    if kind == "time":
        return _parse_number(text, TIME_UNITS, where)
    if kind == "float":
        return _parse_number(text, None, where)
    if kind == "int":
        v = _parse_number(text, None, where)
        if v != int(v):
            raise InputError(f"{where}: expected an integer, got {text!r}")
        return int(v)
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise InputError(f"{where}: expected a boolean, got {text!r}")
    if kind == "str":
        return text
    if kind in ("floats", "ints"):
        parts = [p for p in re.split(r"[,\s]+", text) if p]
        if not parts:
            raise InputError(f"{where}: empty list")
        return [parse_value(kind[:-1], p, where) for p in parts]
    raise AssertionError(kind)


def format_value(kind: str, value) -> str:
    """Canonical text form; parse_value(kind, format_value(kind, v)) == v."""
    if kind == "freq":
        return f"{value / (2.0 * math.pi)!r} Hz"
    if kind == "time":
        return f"{value!r} s"
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "str":
        return str(value)
    if kind in ("floats", "ints"):
        return ", ".join(format_value(kind[:-1], v) for v in value)
    raise AssertionError(kind)


@dataclass
class RunConfig:
    sections: dict[str, dict] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default=None):
        return self.section(section).get(key, default)

    def require(self, section: str, keys) -> dict:
        sec = self.section(section)
        missing = [k for k in keys if k not in sec]
        if missing:
            raise InputError(f"[{section}] missing required key(s): {', '.join(missing)}")
        return sec

    def resolve_path(self, text: str) -> Path:
        p = Path(text)
        return p if p.is_absolute() else self.base_dir / p

    def to_text(self) -> str:
        out = []
        for name in SCHEMA:
            sec = self.sections.get(name)
            if not sec:
                continue
            out.append(f"[{name}]")
            for key, kind in SCHEMA[name].items():
                if key in sec:
                    out.append(f"{key} = {format_value(kind, sec[key])}")
            out.append("")
        return "\n".join(out)


def parse_config(text: str, base_dir=None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise InputError(f"config syntax error: {exc.message if hasattr(exc, 'message') else exc}", line=line) from None
    sections: dict[str, dict] = {}
    for name in cp.sections():
        if name not in SCHEMA:
            raise InputError(f"unknown config section [{name}] (allowed: {', '.join(SCHEMA)})")
        keys = SCHEMA[name]
        sec = {}
        for key, raw in cp.items(name):
            if key not in keys:
                raise InputError(f"unknown key {key!r} in [{name}]")
            sec[key] = parse_value(keys[key], raw, f"[{name}] {key}")
        sections[name] = sec
    return RunConfig(sections, Path(base_dir) if base_dir is not None else Path.cwd())


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, base_dir=p.parent)
