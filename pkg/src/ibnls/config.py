"""Run configuration: a TOML file with one table per section.

Example::

    scenario = "conserve"

    [grid]
    dimension = 1
    points = 512
    half_width = 20.0

    [model]
    b = 0.3
    nu = 1.0

    [init]
    type = "gaussian"
    amplitude = 0.4
    width = 0.5

    [time]
    dt0 = 1e-4
    t_end = 0.5

    [output]
    csv = "out/conserve.csv"

Dotted keys (``grid.points = 512``) are equivalent to tables. Relative paths
resolve against the working directory. Every problem in
a file is collected and reported together through :class:`ConfigInvalid`.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigInvalid
from .fields import ENERGY_VARIANTS, STANDARD, ModelParams
from .grid import GridSpec

SCENARIOS = ("conserve", "virial-check", "cutoff-audit", "inequality-audit", "blowup", "riccati", "sweep")
INIT_TYPES = ("gaussian", "ring", "custom-checkpoint")


@dataclass(frozen=True)
class InitConfig:
    type: str = "gaussian"
    amplitude: Optional[float] = 1.0
    width: float = 1.0
    center: tuple = ()
    momentum: tuple = ()
    radius: float = 0.0  # ring radius
    energy_target: Optional[float] = None  # bisect the amplitude so E = -|energy_target|
    checkpoint: Optional[str] = None
    target_nu: Optional[float] = None  # nu used by the amplitude search (default: model.nu)


@dataclass(frozen=True)
class TimeConfig:
    dt0: float = 1e-4
    t_end: float = 1.0
    dt_floor: float = 1e-10
    cfl: float = 0.5
    adaptive: bool = False
    tail_limit: float = 1e-4


@dataclass(frozen=True)
class CutoffConfig:
    R: tuple = (8.0,)
    k: int = 8


@dataclass(frozen=True)
class OutputConfig:
    csv: Optional[str] = None
    checkpoint: Optional[str] = None
    cadence: int = 100
    checkpoint_every: int = 0


@dataclass(frozen=True)
class Thresholds:
    growth: float = 10.0
    delta_fit: float = 0.3
    fit_residual: float = 0.1
    mass_drift: float = 1e-9
    energy_drift: float = 1e-6
    order_ratio: tuple = (3.5, 4.5)
    virial_residual: float = 1e-3
    nu0_tolerance: float = 1e-6
    riccati_rel: float = 0.01


@dataclass(frozen=True)
class VirialConfig:
    delta: float = 1e-5
    oversample: int = 8
    calibrate: bool = True
    fd_residual: Optional[bool] = None  # default: on for virial-check only


@dataclass(frozen=True)
class AuditConfig:
    seed: int = 0
    corpus: int = 50
    b_values: tuple = (0.3, 1.0, 2.0)
    dimensions: tuple = (1, 3, 5)
    radial_points: int = 8000
    radial_r_max: float = 12.0


@dataclass(frozen=True)
class RiccatiConfig:
    c: tuple = ()
    y0: tuple = ()
    random_cases: int = 10
    seed: int = 0


@dataclass(frozen=True)
class SweepConfig:
    amplitudes: tuple = ()
    b: tuple = ()
    nu: tuple = ()
    scenario: str = "blowup"


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    grid: GridSpec
    model: ModelParams
    init: InitConfig = field(default_factory=InitConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    virial: VirialConfig = field(default_factory=VirialConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)
    riccati: RiccatiConfig = field(default_factory=RiccatiConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    source: Optional[str] = None

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    @property
    def epsilon(self) -> float:
        """The regularization actually used (``h/2`` when not overridden)."""
        return self.model.epsilon if self.model.epsilon is not None else 0.5 * self.grid.spacing


# scenarios that never evolve a field and so need no grid/model/time tables
_STATIC = ("cutoff-audit", "inequality-audit", "riccati")


class _Reader:
    """Pulls typed values out of nested dicts, recording every violation."""

    def __init__(self, data: dict):
        self.data = data
        self.errors: list[str] = []
        self.used: set[str] = set()

    def _lookup(self, key):
        node = self.data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return False, None
            node = node[part]
        return True, node

    def get(self, key, kind, default=..., required=False):
        found, val = self._lookup(key)
        self.used.add(key)
        if not found:
            if required:
                self.errors.append(f"missing required key '{key}'")
            return None if default is ... else default
        try:
            return _coerce(val, kind)
        except (TypeError, ValueError):
            self.errors.append(f"'{key}' must be {kind if isinstance(kind, str) else kind.__name__} (got {val!r})")
            return None if default is ... else default

    def check(self, ok, message):
        if not ok:
            self.errors.append(message)

    def unknown_keys(self):
        out = []

        def walk(node, prefix):
            for k, v in node.items():
                key = f"{prefix}{k}"
                if isinstance(v, dict) and not any(u == key for u in self.used):
                    walk(v, key + ".")
                elif key not in self.used:
                    out.append(key)

        walk(self.data, "")
        return out


def _coerce(val, kind):
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise TypeError
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise TypeError
        return val
    if kind is bool:
        if not isinstance(val, bool):
            raise TypeError
        return val
    if kind is str:
        if not isinstance(val, str):
            raise TypeError
        return val
    if kind == "floats":
        if isinstance(val, (int, float)) and not isinstance(val, bool):
            return (float(val),)
        if not isinstance(val, list):
            raise TypeError
        return tuple(_coerce(v, float) for v in val)
    if kind == "ints":
        if isinstance(val, int) and not isinstance(val, bool):
            return (val,)
        if not isinstance(val, list):
            raise TypeError
        return tuple(_coerce(v, int) for v in val)
    raise ValueError(kind)


def _writable(path: str) -> bool:
    # missing directories are created on write, so test the nearest existing ancestor
    target = Path(path).resolve()
    if target.is_dir():
        return False
    parent = target.parent
    while not parent.exists():
        parent = parent.parent
    return parent.is_dir() and os.access(parent, os.W_OK)


def config_from_dict(data: dict, source: Optional[str] = None) -> RunConfig:
    """Validate a parsed mapping; raise :class:`ConfigInvalid` listing every violation."""
    rd = _Reader(data)
    scenario = rd.get("scenario", str, required=True)
    if scenario is not None and scenario not in SCENARIOS:
        rd.errors.append(f"scenario must be one of {SCENARIOS} (got {scenario!r})")
    static = scenario in _STATIC

    dim = rd.get("grid.dimension", int, 1, required=not static)
    points = rd.get("grid.points", int, 64, required=not static)
    half = rd.get("grid.half_width", float, 20.0, required=not static)
    grid = GridSpec(dim if dim is not None else 1, points if points is not None else 64,
                    half if half is not None else 20.0)
    rd.errors.extend(grid.violations())

    b = rd.get("model.b", float, 0.3, required=scenario not in ("cutoff-audit", "riccati", "sweep"))
    nu = rd.get("model.nu", float, 0.0)
    eps = rd.get("model.epsilon", float, None)
    focusing = rd.get("model.focusing", bool, True)
    pscale = rd.get("model.potential_scale", float, 1.0)
    evar = rd.get("model.energy_variant", str, STANDARD)
    model = None
    try:
        model = ModelParams(grid.dimension, b if b is not None else 0.3, nu, eps, focusing, pscale, evar)
    except ConfigInvalid as exc:
        rd.errors.extend(exc.violations)

    init = InitConfig(
        type=rd.get("init.type", str, "gaussian"),
        amplitude=rd.get("init.amplitude", float, 1.0),
        width=rd.get("init.width", float, 1.0),
        center=rd.get("init.center", "floats", ()),
        momentum=rd.get("init.momentum", "floats", ()),
        radius=rd.get("init.radius", float, 0.0),
        energy_target=rd.get("init.energy_target", float, None),
        checkpoint=rd.get("init.checkpoint", str, None),
        target_nu=rd.get("init.target_nu", float, None),
    )
    rd.check(init.type in INIT_TYPES, f"init.type must be one of {INIT_TYPES} (got {init.type!r})")
    rd.check(init.width > 0, f"init.width must be > 0 (got {init.width})")
    for name in ("center", "momentum"):
        vec = getattr(init, name)
        rd.check(len(vec) in (0, grid.dimension),
                 f"init.{name} must have {grid.dimension} entries (got {len(vec)})")
    if init.target_nu is not None:
        rd.check(init.target_nu >= 0, f"init.target_nu must be >= 0 (got {init.target_nu})")
        rd.check(init.energy_target is not None, "init.target_nu needs init.energy_target")
    if init.type == "custom-checkpoint":
        rd.check(init.checkpoint is not None, "init.type = 'custom-checkpoint' needs init.checkpoint")

    needs_time = not static and scenario != "sweep"
    time = TimeConfig(
        dt0=rd.get("time.dt0", float, 1e-4, required=needs_time),
        t_end=rd.get("time.t_end", float, 1.0, required=needs_time or scenario == "sweep"),
        dt_floor=rd.get("time.dt_floor", float, 1e-10),
        cfl=rd.get("time.cfl", float, 0.5),
        adaptive=rd.get("time.adaptive", bool, scenario in ("blowup", "sweep")),
        tail_limit=rd.get("time.tail_limit", float, 1e-4),
    )
    for name in ("dt0", "t_end", "dt_floor", "cfl", "tail_limit"):
        val = getattr(time, name)
        rd.check(val is not None and val > 0 and math.isfinite(val), f"time.{name} must be > 0 (got {val})")
    if time.dt0 and time.dt_floor and time.dt0 > 0:
        rd.check(time.dt_floor <= time.dt0, f"time.dt_floor ({time.dt_floor}) exceeds time.dt0 ({time.dt0})")

    cut = CutoffConfig(R=rd.get("cutoff.R", "floats", (8.0,)), k=rd.get("cutoff.k", int, 8))
    rd.check(len(cut.R) > 0 and all(r > 0 for r in cut.R), f"cutoff.R must be positive radii (got {cut.R})")

    out = OutputConfig(
        csv=rd.get("output.csv", str, None),
        checkpoint=rd.get("output.checkpoint", str, None),
        cadence=rd.get("output.cadence", int, 100),
        checkpoint_every=rd.get("output.checkpoint_every", int, 0),
    )
    rd.check(out.cadence >= 1, f"output.cadence must be >= 1 (got {out.cadence})")
    rd.check(out.checkpoint_every >= 0, f"output.checkpoint_every must be >= 0 (got {out.checkpoint_every})")
    for key in ("csv", "checkpoint"):
        p = getattr(out, key)
        if p is not None:
            rd.check(_writable(p), f"output.{key} is not writable: {p}")

    d = Thresholds()
    th = Thresholds(
        growth=rd.get("thresholds.growth", float, d.growth),
        delta_fit=rd.get("thresholds.delta_fit", float, d.delta_fit),
        fit_residual=rd.get("thresholds.fit_residual", float, d.fit_residual),
        mass_drift=rd.get("thresholds.mass_drift", float, d.mass_drift),
        energy_drift=rd.get("thresholds.energy_drift", float, d.energy_drift),
        order_ratio=rd.get("thresholds.order_ratio", "floats", d.order_ratio),
        virial_residual=rd.get("thresholds.virial_residual", float, d.virial_residual),
        nu0_tolerance=rd.get("thresholds.nu0_tolerance", float, d.nu0_tolerance),
        riccati_rel=rd.get("thresholds.riccati_rel", float, d.riccati_rel),
    )
    rd.check(len(th.order_ratio) == 2 and th.order_ratio[0] < th.order_ratio[1],
             f"thresholds.order_ratio must be [low, high] (got {list(th.order_ratio)})")

    dv = VirialConfig()
    vir = VirialConfig(
        delta=rd.get("virial.delta", float, dv.delta),
        oversample=rd.get("virial.oversample", int, dv.oversample),
        calibrate=rd.get("virial.calibrate", bool, dv.calibrate),
        fd_residual=rd.get("virial.fd_residual", bool, None),
    )
    rd.check(vir.delta > 0, f"virial.delta must be > 0 (got {vir.delta})")
    os_ = vir.oversample
    rd.check(os_ >= 1 and (os_ & (os_ - 1)) == 0, f"virial.oversample must be a power of two (got {os_})")

    da = AuditConfig()
    aud = AuditConfig(
        seed=rd.get("audit.seed", int, da.seed),
        corpus=rd.get("audit.corpus", int, da.corpus),
        b_values=rd.get("audit.b_values", "floats", da.b_values),
        dimensions=rd.get("audit.dimensions", "ints", da.dimensions),
        radial_points=rd.get("audit.radial_points", int, da.radial_points),
        radial_r_max=rd.get("audit.radial_r_max", float, da.radial_r_max),
    )
    rd.check(aud.corpus >= 1, f"audit.corpus must be >= 1 (got {aud.corpus})")

    ric = RiccatiConfig(
        c=rd.get("riccati.c", "floats", ()),
        y0=rd.get("riccati.y0", "floats", ()),
        random_cases=rd.get("riccati.random_cases", int, 10),
        seed=rd.get("riccati.seed", int, 0),
    )
    rd.check(len(ric.c) == len(ric.y0), "riccati.c and riccati.y0 must have the same length")
    rd.check(all(v > 0 for v in ric.c + ric.y0), "riccati.c and riccati.y0 must be > 0")

    sw = SweepConfig(
        amplitudes=rd.get("sweep.amplitudes", "floats", ()),
        b=rd.get("sweep.b", "floats", ()),
        nu=rd.get("sweep.nu", "floats", ()),
        scenario=rd.get("sweep.scenario", str, "blowup"),
    )
    if scenario == "sweep":
        rd.check(len(sw.amplitudes) > 0, "sweep.amplitudes must list at least one amplitude")
        rd.check(sw.scenario in ("blowup", "conserve"), f"sweep.scenario must be blowup or conserve (got {sw.scenario!r})")

    for key in rd.unknown_keys():
        rd.errors.append(f"unknown key '{key}'")
    if rd.errors:
        raise ConfigInvalid(rd.errors)

    return RunConfig(scenario, grid, model, init, time, cut, out, th, vir, aud, ric, sw, source)


def parse_config(path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid([f"config file not found: {path}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid([f"{path}: {exc}"]) from None
    return config_from_dict(data, source=str(path))


__all__ = [
    "SCENARIOS", "INIT_TYPES", "InitConfig", "TimeConfig", "CutoffConfig", "OutputConfig", "Thresholds",
    "VirialConfig", "AuditConfig", "RiccatiConfig", "SweepConfig", "RunConfig", "config_from_dict",
    "parse_config",
]
