"""Run configuration: a small line-oriented ``key = value`` format.

::

    # comments start with '#'
    preset = chemo_two_bumps
    nx = 800
    velocity_mode = volpert_literal

    [problem]            # instead of a preset
    domain = -2.5, 2.5
    potential = exp_half # zero | exp_half | exp_half_weights
    law = atan(10)       # identity | atan(k) | -atan(k)
    bumps = 1 0.7 10; 1 -0.7 10
    equilibrium = two_speed_chemo(10)   # optional; smooth_continuous(k)

    [study]
    grids = 200, 400, 800, 1600
    eps = 0.1, 1e-2, 1e-3, 1e-10
    steps = 100

Keys before any header (or under ``[run]``) configure the run itself.
Unknown keys and sections are errors.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional, Tuple

from .grid import VelocityGrid
from .kinetic import EquilibriumModel
from .macro import VELOCITY_MODES, VelocityLaw
from .models import ProblemPreset, gaussian_bumps, preset, preset_names
from .potential import CLOSURES, PointyPotential

# macro_limit: the eps -> 0 limit of the kinetic scheme (node-centred, c = vmax, kinetic dt)
SCHEMES = ("macro", "macro_limit", "kinetic_lie", "kinetic_strang")
ENV_OUTPUT = "AGGREKIN_OUTPUT"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ProblemSpec:
    domain: Tuple[float, float]
    potential: str
    law: str
    bumps: Tuple[Tuple[float, float, float], ...]
    equilibrium: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    preset: Optional[str] = None
    problem: Optional[ProblemSpec] = None
    nx: int = 800
    horizon: Optional[float] = None
    snapshot_every: float = 0.02
    velocity_mode: str = "volpert_literal"
    acknowledge_wrong_velocity: bool = False
    scheme: Optional[str] = None
    eps: Optional[float] = None
    nv: Optional[int] = None
    vmax: Optional[float] = None
    closure: str = "free_space"
    output_dir: str = "aggrekin_out"
    dump_f: bool = False
    deterministic: bool = True
    study_grids: Tuple[int, ...] = (200, 400, 800, 1600)
    study_eps: Tuple[float, ...] = (0.1, 1e-2, 1e-3, 1e-10)
    study_steps: int = 100

    def resolved(self) -> Dict[str, object]:
        """Flat ``name -> value`` view used for ``meta.txt``."""
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out


_RUN_KEYS = {
    "preset": str,
    "nx": int,
    "horizon": float,
    "snapshot_every": float,
    "velocity_mode": str,
    "acknowledge_wrong_velocity": bool,
    "scheme": str,
    "eps": float,
    "nv": int,
    "vmax": float,
    "closure": str,
    "output_dir": str,
    "dump_f": bool,
    "deterministic": bool,
}
_PROBLEM_KEYS = ("domain", "potential", "law", "bumps", "equilibrium")
_STUDY_KEYS = {"grids": "study_grids", "eps": "study_eps", "steps": "study_steps"}

_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_LAW = re.compile(r"^(-?)atan\(\s*([^)]+)\s*\)$")
_EQUILIBRIUM = re.compile(r"^(two_speed_chemo|smooth_continuous)\(\s*([^)]+)\s*\)$")


def _to_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _convert(kind, text: str):
    if kind is bool:
        return _to_bool(text)
    return kind(text)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; errors carry the offending line number."""
    run: Dict[str, object] = {}
    problem: Dict[str, str] = {}
    study: Dict[str, object] = {}
    lines: Dict[str, int] = {}
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1).lower()
            if section not in ("run", "problem", "study"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        where = f"{section}.{key}"
        if where in lines:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {lines[where]})")
        lines[where] = lineno
        try:
            if section == "run":
                if key not in _RUN_KEYS:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
                run[key] = _convert(_RUN_KEYS[key], value)
            elif section == "problem":
                if key not in _PROBLEM_KEYS:
                    raise ConfigError(f"line {lineno}: unknown key {key!r} in [problem]")
                problem[key] = value
            else:
                if key not in _STUDY_KEYS:
                    raise ConfigError(f"line {lineno}: unknown key {key!r} in [study]")
                if key == "grids":
                    study["study_grids"] = tuple(int(float(v)) for v in _floats(value))
                elif key == "eps":
                    study["study_eps"] = _floats(value)
                else:
                    study["study_steps"] = int(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    spec = _problem_spec(problem, lines) if problem else None
    cfg = RunConfig(problem=spec, **run, **study)
    return validate(cfg)


def _problem_spec(problem: Dict[str, str], lines: Dict[str, int]) -> ProblemSpec:
    def line_of(key):
        return lines.get(f"problem.{key}", "?")

    for key in ("potential", "law", "bumps"):
        if key not in problem:
            raise ConfigError(f"[problem]: missing required key {key!r}")
    try:
        domain = _floats(problem.get("domain", "-2.5, 2.5"))
    except ValueError:
        raise ConfigError(f"line {line_of('domain')}: domain must be two numbers") from None
    if len(domain) != 2 or not domain[0] < domain[1]:
        raise ConfigError(f"line {line_of('domain')}: domain must be 'left, right' with left < right")
    bumps = []
    for chunk in problem["bumps"].split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            amp, center, k = _floats(chunk)
        except ValueError:
            raise ConfigError(
                f"line {line_of('bumps')}: each bump is 'amplitude center k', got {chunk!r}"
            ) from None
        if amp < 0 or k <= 0:
            raise ConfigError(f"line {line_of('bumps')}: bumps need amplitude >= 0 and k > 0")
        bumps.append((amp, center, k))
    if not bumps:
        raise ConfigError(f"line {line_of('bumps')}: no bumps given")
    spec = ProblemSpec(tuple(domain), problem["potential"], problem["law"], tuple(bumps),
                       problem.get("equilibrium"))
    # fail early on unparseable components
    try:
        _make_potential(spec.potential)
        _make_law(spec.law)
        if spec.equilibrium is not None:
            _make_equilibrium(spec.equilibrium)
    except ConfigError as exc:
        raise ConfigError(f"[problem]: {exc}") from None
    return spec


def _make_potential(text: str) -> PointyPotential:
    if text == "zero":
        return PointyPotential.zero()
    if text == "exp_half":
        return PointyPotential.exp_half()
    if text == "exp_half_weights":
        return PointyPotential.exp_half(self_consistent=False)
    raise ConfigError(f"unknown potential {text!r} (zero, exp_half, exp_half_weights)")


def _make_law(text: str) -> VelocityLaw:
    if text == "identity":
        return VelocityLaw.identity()
    m = _LAW.match(text.replace(" ", ""))
    if m:
        k = float(m.group(2))
        if k <= 0:
            raise ConfigError("atan(k) needs k > 0")
        return VelocityLaw.arctan(k, -1.0 if m.group(1) else 1.0)
    raise ConfigError(f"unknown law {text!r} (identity, atan(k), -atan(k))")


def _make_equilibrium(text: str) -> Tuple[str, float]:
    m = _EQUILIBRIUM.match(text.replace(" ", ""))
    if not m:
        raise ConfigError(f"unknown equilibrium {text!r} (two_speed_chemo(k), smooth_continuous(k))")
    return m.group(1), float(m.group(2))


def validate(cfg: RunConfig) -> RunConfig:
    if (cfg.preset is None) == (cfg.problem is None):
        raise ConfigError("give exactly one of 'preset' or a [problem] block")
    base = None
    if cfg.preset is not None:
        if cfg.preset not in preset_names():
            raise ConfigError(f"unknown preset {cfg.preset!r}; valid names: {', '.join(preset_names())}")
        base = preset(cfg.preset)
    if cfg.nx < 3:
        raise ConfigError("nx must be >= 3")
    if cfg.horizon is not None and cfg.horizon < 0:
        raise ConfigError("horizon must be >= 0")
    if not cfg.snapshot_every > 0:
        raise ConfigError("snapshot_every must be positive")
    if cfg.velocity_mode not in VELOCITY_MODES:
        raise ConfigError(f"velocity_mode must be one of {', '.join(VELOCITY_MODES)}")
    if cfg.velocity_mode == "naive" and not cfg.acknowledge_wrong_velocity:
        raise ConfigError("velocity_mode = naive reproduces a wrong discretisation; "
                          "set acknowledge_wrong_velocity = true to run it anyway")
    if cfg.closure not in CLOSURES:
        raise ConfigError(f"closure must be one of {', '.join(CLOSURES)}")
    if cfg.scheme is not None and cfg.scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)}")
    scheme = cfg.scheme or (base.scheme if base else "macro")
    if scheme != "macro":
        if scheme.startswith("kinetic"):
            eps = cfg.eps if cfg.eps is not None else (base.eps if base else None)
            if eps is None:
                raise ConfigError("eps required for kinetic schemes")
            if not eps > 0:
                raise ConfigError("eps must be positive")
        has_eq = (base is not None and base.equilibrium is not None) or (
            cfg.problem is not None and cfg.problem.equilibrium is not None)
        if cfg.velocity_mode == "naive":
            raise ConfigError("velocity_mode = naive is only defined for the macro scheme")
        if not has_eq:
            raise ConfigError(f"scheme {scheme} needs an equilibrium (use a kinetic preset "
                              "or set 'equilibrium' in [problem])")
    if cfg.nv is not None and cfg.nv < 1:
        raise ConfigError("nv must be >= 1")
    if cfg.vmax is not None and not cfg.vmax > 0:
        raise ConfigError("vmax must be positive")
    if not cfg.deterministic:
        raise ConfigError("deterministic = false is not supported: every run is deterministic")
    if any(n < 3 for n in cfg.study_grids):
        raise ConfigError("study grids must have nx >= 3")
    if cfg.study_steps < 1:
        raise ConfigError("study steps must be >= 1")
    if any(not e > 0 for e in cfg.study_eps):
        raise ConfigError("study eps values must be positive")
    return cfg


def output_dir(cfg: RunConfig) -> str:
    return os.environ.get(ENV_OUTPUT) or cfg.output_dir


def build_problem(cfg: RunConfig) -> ProblemPreset:
    """The preset, or a preset-like object built from ``[problem]``, with run overrides applied."""
    if cfg.preset is not None:
        base = preset(cfg.preset)
    else:
        spec = cfg.problem
        eq = vg = None
        if spec.equilibrium is not None:
            kind, k = _make_equilibrium(spec.equilibrium)
            vm = cfg.vmax or 1.0
            if kind == "two_speed_chemo":
                eq, vg = EquilibriumModel.two_speed_chemo(k), VelocityGrid.two(vm)
            else:
                eq, vg = EquilibriumModel.smooth_continuous(vm, k), VelocityGrid(vm, cfg.nv or 32)
        base = ProblemPreset("custom", _make_potential(spec.potential), _make_law(spec.law),
                             gaussian_bumps(spec.bumps), 2.0, domain=spec.domain,
                             equilibrium=eq, vgrid=vg)
    changes = {"nx": cfg.nx, "snapshot_every": cfg.snapshot_every}
    if cfg.horizon is not None:
        changes["horizon"] = cfg.horizon
    if cfg.scheme is not None:
        changes["scheme"] = cfg.scheme
    if cfg.eps is not None:
        changes["eps"] = cfg.eps
    if base.vgrid is not None and (cfg.nv is not None or cfg.vmax is not None):
        vm = cfg.vmax or base.vgrid.vmax
        if not base.vgrid.two_speed and cfg.vmax is not None and cfg.preset is not None:
            raise ConfigError(f"vmax is fixed by preset {cfg.preset!r}")
        if base.vgrid.two_speed:
            changes["vgrid"] = VelocityGrid.two(vm)
        else:
            changes["vgrid"] = VelocityGrid(vm, cfg.nv or base.vgrid.nv)
    return replace(base, **changes)
