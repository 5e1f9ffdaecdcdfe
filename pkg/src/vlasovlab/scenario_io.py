"""Scenario files: INI text with sections [grid] [advection] [model] [initial] [run] [norms].

``parse_config`` validates the text into a ``ScenarioConfig`` (plain typed
values, comparable); ``build_scenario`` turns that into a ``Scenario``;
``emit_config`` writes the canonical form (every key, fixed order, shortest
round-trip float repr), so ``parse(emit(cfg)) == cfg`` holds bit for bit.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigurationError, MissingKeyError, RangeViolationError, UnknownKeyError
from .grid import UNIT_MOMENT, MomentSpec, build_grid, load_field
from .models import FORCE_KINDS, AdvectionField, ForceModel, bump, sinusoidal_force
from .solver import NORM_KINDS, Scenario

REQUIRED = object()
INITIAL_KINDS = ("gaussian_perturbed", "file", "product")
PSI_KINDS = ("unit", "bump", "neg_bump", "velocity")
X_PROFILES = ("const", "cos", "bump", "indicator")
V_PROFILES = ("gaussian", "bump", "phi")


def _pow2(v):
    return v > 0 and (v & (v - 1)) == 0


def _pos(v):
    return v > 0


@dataclass(frozen=True)
class Key:
    type: type
    default: Any = REQUIRED
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""
    choices: tuple = ()


SCHEMA: dict[str, dict[str, Key]] = {
    "grid": {
        "nx": Key(int, check=_pow2, rule="must be a power of two"),
        "nv": Key(int, check=_pow2, rule="must be a power of two"),
        "v_cut": Key(float, check=_pos, rule="must be positive"),
    },
    "advection": {
        "kind": Key(str, choices=("classical", "relativistic")),
        "c": Key(float, 1.0, _pos, "must be positive"),
    },
    "model": {
        "kind": Key(str, choices=FORCE_KINDS),
        "sign": Key(int, 1, lambda s: s in (1, -1), "must be 1 or -1"),
        "shift": Key(float, 0.0),
        "psi": Key(str, "unit", choices=PSI_KINDS),
        "amplitude": Key(float, 1.0),
        "mode": Key(int, 1, _pos, "must be positive"),
    },
    "initial": {
        "kind": Key(str, choices=INITIAL_KINDS),
        "path": Key(str, ""),
        "eps": Key(float, 0.1),
        "mode": Key(int, 1, _pos, "must be positive"),
        "vth": Key(float, 1.0, _pos, "must be positive"),
        "drift": Key(float, 0.0),
        "scale": Key(float, 1.0),
        "x_profile": Key(str, "cos", choices=X_PROFILES),
        "x_center": Key(float, 0.5),
        "x_width": Key(float, 0.25, lambda w: 0 < w <= 0.5, "must lie in (0, 0.5]"),
        "v_profile": Key(str, "gaussian", choices=V_PROFILES),
        "v_center": Key(float, 0.0),
        "v_width": Key(float, 1.0, _pos, "must be positive"),
    },
    "run": {
        "T": Key(float, check=_pos, rule="must be positive"),
        "dt": Key(float, 1e-3, _pos, "must be positive"),
        "picard_tol": Key(float, 1e-8, _pos, "must be positive"),
        "picard_max": Key(int, 25, lambda n: n >= 1, "must be >= 1"),
        "output_cadence": Key(int, 10, lambda n: n >= 1, "must be >= 1"),
        "r": Key(float, 0.0, lambda r: r >= 0, "must be >= 0"),
        "ratio_gate": Key(float, None, lambda g: 0 < g < 1, "must lie in (0, 1)"),
        "limited": Key(bool, True),
    },
    "norms": {
        "requests": Key(tuple, ()),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario values: ``sections[name][key]`` with every default filled."""
    sections: tuple
    base_dir: str = "."

    def __getitem__(self, name: str) -> dict:
        return dict(dict(self.sections)[name])

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.sections == other.sections

    def __hash__(self):
        return hash(self.sections)


# --------------------------------------------------------------- parsing

def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _parse_norms(text: str) -> tuple:
    out = []
    for item in (p.strip() for p in text.replace("\n", ",").split(",")):
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise RangeViolationError(f"norms.requests entry {item!r} must read kind:k:r")
        kind = parts[0].strip()
        if kind not in NORM_KINDS:
            raise RangeViolationError(
                f"norms.requests kind {kind!r} must be one of {', '.join(NORM_KINDS)}")
        try:
            k, r = _number(parts[1].strip()), _number(parts[2].strip())
        except ValueError:
            raise RangeViolationError(f"norms.requests entry {item!r}: k and r must be numbers")
        if kind in ("sobolev", "winf") and (not isinstance(k, int) or k < 0):
            raise RangeViolationError(f"norms.requests entry {item!r}: k must be an integer >= 0")
        if not math.isfinite(float(k)) or not math.isfinite(float(r)) or r < 0:
            raise RangeViolationError(f"norms.requests entry {item!r}: r must be finite and >= 0")
        out.append((kind, k, r))
    return tuple(out)


def _convert(section: str, key: str, spec: Key, text: str):
    name = f"{section}.{key}"
    text = text.strip()
    if spec.type is tuple:
        return _parse_norms(text)
    try:
        if spec.type is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            value = low in ("true", "1", "yes")
        elif spec.type is int:
            value = int(text)
        elif spec.type is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = text
    except ValueError:
        raise RangeViolationError(f"{name} must be a finite {spec.type.__name__} (got {text!r})")
    if spec.choices and value not in spec.choices:
        raise RangeViolationError(f"{name} must be one of {', '.join(spec.choices)} (got {value!r})")
    if spec.check is not None and not spec.check(value):
        raise RangeViolationError(f"{name} {spec.rule} (got {value!r})")
    return value


def parse_config_text(text: str, base_dir: str = ".") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise RangeViolationError(f"malformed scenario file: {exc}".splitlines()[0])
    for section in cp.sections():
        if section not in SCHEMA:
            raise UnknownKeyError(f"unknown section [{section}]; expected one of "
                                  f"{', '.join('[' + s + ']' for s in SCHEMA)}")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise UnknownKeyError(f"unknown key {section}.{key}")
    sections = []
    for section, keys in SCHEMA.items():
        values = []
        for key, spec in keys.items():
            if cp.has_option(section, key):
                value = _convert(section, key, spec, cp[section][key])
            elif spec.default is REQUIRED:
                raise MissingKeyError(f"missing required key {section}.{key}")
            else:
                value = spec.default
            values.append((key, value))
        sections.append((section, tuple(values)))
    cfg = ScenarioConfig(tuple(sections), base_dir)
    if cfg["initial"]["kind"] == "file" and not cfg["initial"]["path"]:
        raise MissingKeyError("missing required key initial.path (needed when initial.kind = file)")
    return cfg


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path.parent))


# ---------------------------------------------------------------- emitting

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(f"{k}:{_fmt(a)}:{_fmt(b)}" for k, a, b in value)
    return str(value)


def emit_config(cfg: ScenarioConfig) -> str:
    lines = []
    for section, values in cfg.sections:
        lines.append(f"[{section}]")
        for key, value in values:
            if value is None:
                continue
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)


def write_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(emit_config(cfg))


# ---------------------------------------------------------------- building

def _psi(name: str) -> MomentSpec:
    if name == "unit":
        return UNIT_MOMENT
    if name == "bump":
        return MomentSpec(lambda v: bump(v), r0=0.0, name="bump")
    if name == "neg_bump":
        return MomentSpec(lambda v: -bump(v), r0=0.0, name="-bump")
    return MomentSpec(lambda v: np.asarray(v, dtype=float), r0=1.0, name="v")


def _x_profile(ini: dict) -> Callable:
    kind, c, w = ini["x_profile"], ini["x_center"], ini["x_width"]
    if kind == "const":
        return lambda x: np.ones_like(x)
    if kind == "cos":
        return lambda x: 1 + ini["eps"] * np.cos(2 * np.pi * ini["mode"] * x)
    d = lambda x: (x - c + 0.5) % 1.0 - 0.5  # periodic offset from the centre
    if kind == "bump":
        return lambda x: bump(d(x), 0.0, w)
    return lambda x: (np.abs(d(x)) < w).astype(float)


def _v_profile(ini: dict) -> Callable:
    kind, c, w = ini["v_profile"], ini["v_center"], ini["v_width"]
    if kind == "gaussian":
        return lambda v: np.exp(-((v - c) / w) ** 2 / 2) / (math.sqrt(2 * math.pi) * w)
    if kind == "bump":
        return lambda v: bump(v, c, w)
    from .counterexamples import phi_profile
    return lambda v: phi_profile((v - c) / (2 * w))


def _initial(cfg: ScenarioConfig, grid):
    ini = cfg["initial"]
    if ini["kind"] == "file":
        path = ini["path"]
        if not os.path.isabs(path):
            path = os.path.join(cfg.base_dir, path)
        f = load_field(path)
        if f.grid != grid:
            raise RangeViolationError(
                f"initial.path grid {f.grid.nx}x{f.grid.nv} (v_cut {f.grid.v_cut}) does not match "
                f"[grid] {grid.nx}x{grid.nv} (v_cut {grid.v_cut})")
        return f.with_values(f.values, 0.0)
    if ini["kind"] == "gaussian_perturbed":
        vth, u = ini["vth"], ini["drift"]
        return grid.sample(lambda x, v: (1 + ini["eps"] * np.cos(2 * np.pi * ini["mode"] * x))
                           * np.exp(-((v - u) / vth) ** 2 / 2) / (math.sqrt(2 * math.pi) * vth))
    X, V = _x_profile(ini), _v_profile(ini)
    return grid.sample(lambda x, v: ini["scale"] * X(x) * V(v))


def build_scenario(cfg: ScenarioConfig, name: str = "scenario") -> Scenario:
    try:
        g = cfg["grid"]
        grid = build_grid(g["nx"], g["nv"], g["v_cut"])
        adv = cfg["advection"]
        advection = AdvectionField(adv["kind"], adv["c"])
        m = cfg["model"]
        specs = [_psi(m["psi"])] if m["kind"] in ("poisson", "moment_force") else []
        external = sinusoidal_force(m["amplitude"], m["mode"]) if m["kind"] == "external" else None
        model = ForceModel(m["kind"], sign=m["sign"], shift=m["shift"], moment_specs=specs,
                           external=external)
        f0 = _initial(cfg, grid)
        run = cfg["run"]
        return Scenario(grid, advection, model, f0, run["T"], dt=run["dt"],
                        picard_tol=run["picard_tol"], picard_max=run["picard_max"],
                        norm_requests=list(cfg["norms"]["requests"]),
                        output_cadence=run["output_cadence"], r=run["r"],
                        ratio_gate=run["ratio_gate"], name=name, limited=run["limited"])
    except (MissingKeyError, UnknownKeyError, RangeViolationError):
        raise
    except ConfigurationError as exc:
        raise RangeViolationError(str(exc)) from exc


def parse_scenario(path) -> Scenario:
    """Read, validate and build a scenario file."""
    return build_scenario(parse_config(path), Path(path).stem)
