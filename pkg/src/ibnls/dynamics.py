"""
Mass, energy and the split-step integrator.

The flow ``i u_t = Δ²u - ν Δu - w |u|^q u`` splits into two exactly solvable
pieces:

* linear:    ``u_hat <- exp(-i dt (|k|^4 + ν|k|^2)) u_hat``
* nonlinear: ``u <- u exp(i dt w |u|^q)``   (``|u|`` is invariant pointwise)

and one Strang step is ``linear(dt/2) ∘ nonlinear(dt) ∘ linear(dt/2)`` with the
2/3 dealiasing filter applied once, right after the nonlinear sub-flow.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DtFloorReached, NonFiniteField
from .fields import (
    ModelParams,
    grad_norm_sq,
    l2_norm_sq,
    lap_norm_sq,
    potential_integral,
    singular_weight,
    sup_norm,
)
from .grid import PHYSICAL, SPECTRAL, ComplexField, Grid

log = logging.getLogger(__name__)

T_END = "TEnd"
DT_FLOOR = "DtFloorReached"
NON_FINITE = "NonFiniteField"
RESOLUTION = "ResolutionInsufficient"
HALT_REASONS = (T_END, DT_FLOOR, NON_FINITE, RESOLUTION)


def mass(u: ComplexField) -> float:
    return l2_norm_sq(u)


def quadratic_energy(u: ComplexField, params: ModelParams) -> float:
    return lap_norm_sq(u) + params.nu * grad_norm_sq(u)


def energy(u: ComplexField, params: ModelParams) -> float:
    """``‖Δu‖² + ν‖∇u‖² - c ∫ w |u|^p`` for the configured energy variant."""
    pot = potential_integral(u, params) if params.potential_scale != 0 else 0.0
    coef = params.nonlinear_sign * params.potential_scale * params.potential_coefficient
    return quadratic_energy(u, params) - coef * pot


def linear_multiplier(grid: Grid, params: ModelParams, dt: float) -> np.ndarray:
    return np.exp(-1j * dt * (grid.k4 + params.nu * grid.k2))


def linear_half_step(u: ComplexField, dt: float, params: ModelParams) -> ComplexField:
    """Exact linear flow over ``dt`` (callers pass ``dt/2`` inside a Strang step)."""
    uh = u.spectral().values * linear_multiplier(u.grid, params, dt)
    out = ComplexField(u.grid, uh, SPECTRAL)
    return out if u.space == SPECTRAL else out.physical()


def nonlinear_phase(u_values: np.ndarray, weight: np.ndarray, params: ModelParams) -> np.ndarray:
    """Pointwise rate ``w |u|^q`` (signed and scaled per ``params``)."""
    with np.errstate(over="raise", invalid="raise"):
        try:
            rate = weight * np.abs(u_values) ** params.q
        except FloatingPointError as exc:
            raise NonFiniteField(f"overflow in |u|^q: {exc}") from None
    return params.nonlinear_sign * params.potential_scale * rate


def nonlinear_step(u: ComplexField, dt: float, params: ModelParams, weight=None) -> ComplexField:
    u = u.physical()
    w = singular_weight(u.grid, params) if weight is None else weight
    rate = nonlinear_phase(u.values, w, params)
    out = u.values * np.exp(1j * dt * rate)
    if not np.all(np.isfinite(out)):
        raise NonFiniteField("non-finite values after nonlinear sub-flow")
    return ComplexField(u.grid, out, PHYSICAL)


@dataclass
class SimState:
    t: float
    u: ComplexField
    dt: float
    params: ModelParams
    step: int = 0
    last_tail_fraction: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.t, self.u.copy(), self.dt, self.params, self.step, self.last_tail_fraction)


class Stepper:
    """Strang stepper with the weight and linear multipliers cached per ``dt``."""

    def __init__(self, grid: Grid, params: ModelParams, dealias: bool = True):
        self.grid = grid
        self.params = params
        self.dealias = dealias
        self.weight = singular_weight(grid, params)
        self._dt = None
        self._half = None

    def _half_multiplier(self, dt):
        if dt != self._dt:
            self._dt = dt
            self._half = linear_multiplier(self.grid, self.params, 0.5 * dt)
        return self._half

    def step_values(self, u: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
        """One Strang step on physical values; returns ``(u_new, tail_fraction)``."""
        half = self._half_multiplier(dt)
        v = np.fft.ifftn(np.fft.fftn(u) * half)
        rate = nonlinear_phase(v, self.weight, self.params)
        v = v * np.exp(1j * dt * rate)
        vh = np.fft.fftn(v)
        frac = 0.0
        if self.dealias:
            mask = self.grid.dealias_mask
            power = np.abs(vh) ** 2
            total = power.sum()
            frac = float(power[~mask].sum() / total) if total > 0 else 0.0
            vh = np.where(mask, vh, 0.0)
        out = np.fft.ifftn(vh * half)
        if not np.all(np.isfinite(out)):
            raise NonFiniteField(f"non-finite field after step of size {dt:g}")
        return out, frac

    def step(self, state: SimState, dt: float) -> SimState:
        vals, frac = self.step_values(state.u.physical().values, dt)
        return SimState(state.t + dt, ComplexField(self.grid, vals), state.dt, state.params,
                        state.step + 1, frac)


def strang_step(state: SimState, dt: float, dealias: bool = True) -> SimState:
    return Stepper(state.u.grid, state.params, dealias).step(state, dt)


def adapt_dt(u: ComplexField, params: ModelParams, dt0: float, dt_floor: float, cfl: float = 0.5,
             weight=None, include_linear: bool = False) -> float:
    """``min(dt0, cfl / (sup w|u|^q [+ k_max^4 + ν k_max^2]))``.

    The linear terms are off by default: the linear sub-flow is exact, so
    they only pin ``dt`` to the grid (see the README for why). Raises
    :class:`DtFloorReached` when the result drops below ``dt_floor``.
    """
    grid = u.grid
    w = singular_weight(grid, params) if weight is None else weight
    bound = float(np.max(np.abs(nonlinear_phase(u.physical().values, w, params))))
    if include_linear:
        km = grid.k_max
        bound += km ** 4 + params.nu * km ** 2
    dt = dt0 if bound == 0 else min(dt0, cfl / bound)
    if dt < dt_floor:
        raise DtFloorReached(dt, dt_floor)
    return dt


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------


@dataclass
class EvolveConfig:
    dt0: float
    t_end: float
    adaptive: bool = False
    dt_floor: float = 1e-10
    cfl: float = 0.5
    cfl_linear: bool = False
    cadence: int = 100
    tail_limit: float = 1e-4
    dealias: bool = True
    checkpoint_every: int = 0  # in steps; 0 disables
    checkpoint_path: Optional[str] = None
    max_steps: int = 50_000_000


@dataclass
class SimSeries:
    t: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    lap_norm: list = field(default_factory=list)
    sup_norm: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    halt_reason: Optional[str] = None
    final_state: Optional[SimState] = None
    steps: int = 0

    def append(self, state: SimState, dt: float, hooks=None):
        u, p = state.u, state.params
        self.t.append(state.t)
        self.dt.append(dt)
        self.mass.append(mass(u))
        self.energy.append(energy(u, p))
        self.grad_norm.append(np.sqrt(grad_norm_sq(u)))
        self.lap_norm.append(np.sqrt(lap_norm_sq(u)))
        self.sup_norm.append(sup_norm(u))
        for name, fn in (hooks or {}).items():
            val = fn(state)
            if isinstance(val, dict):
                for k2, v in val.items():
                    self.extra.setdefault(k2, []).append(v)
            else:
                self.extra.setdefault(name, []).append(val)

    def arrays(self) -> dict:
        out = {k: np.asarray(getattr(self, k)) for k in
               ("t", "dt", "mass", "energy", "grad_norm", "lap_norm", "sup_norm")}
        out.update({k: np.asarray(v) for k, v in self.extra.items()})
        return out

    def __len__(self):
        return len(self.t)


def boundary_ratio(u: ComplexField) -> float:
    """Largest ``|u|`` on the box faces relative to ``‖u‖_∞``."""
    a = np.abs(u.physical().values)
    top = a.max()
    if top == 0:
        return 0.0
    face = max(float(np.take(a, 0, axis=ax).max()) for ax in range(a.ndim))
    return face / float(top)


def evolve(u0: ComplexField, params: ModelParams, cfg: EvolveConfig,
           hooks: Optional[dict[str, Callable[[SimState], object]]] = None,
           t0: float = 0.0) -> SimSeries:
    """Integrate from ``u0`` until ``t_end`` or a halt condition.

    ``hooks`` maps a column name to ``f(state)``; each is evaluated at every
    recorded sample (the first state, every ``cadence`` steps, and the last).
    """
    from .checkpoint import save_checkpoint

    grid = u0.grid
    stepper = Stepper(grid, params, cfg.dealias)
    state = SimState(t0, u0.physical().copy(), cfg.dt0, params)
    series = SimSeries()
    br = boundary_ratio(state.u)
    if br > 1e-10:
        warnings.warn(f"initial data reaches {br:.2e} of its sup on the box boundary; "
                      "enlarge half_width", RuntimeWarning, stacklevel=2)
    series.append(state, cfg.dt0, hooks)
    reason = None
    dt = cfg.dt0
    while reason is None:
        remaining = cfg.t_end - state.t
        if remaining <= 1e-12 * max(1.0, abs(cfg.t_end)):
            reason = T_END
            break
        if state.step >= cfg.max_steps:
            reason = T_END
            log.warning("max_steps reached before t_end")
            break
        if cfg.adaptive:
            try:
                dt = adapt_dt(state.u, params, cfg.dt0, cfg.dt_floor, cfg.cfl,
                              weight=stepper.weight, include_linear=cfg.cfl_linear)
            except DtFloorReached as exc:
                dt = exc.dt
                reason = DT_FLOOR
                break
            except NonFiniteField:
                reason = NON_FINITE
                break
        dt_step = min(dt, remaining)
        try:
            new = stepper.step(state, dt_step)
        except NonFiniteField:
            reason = NON_FINITE
            break
        new.dt = dt_step
        state = new
        if state.last_tail_fraction > cfg.tail_limit:
            reason = RESOLUTION
        if cfg.checkpoint_every and cfg.checkpoint_path and state.step % cfg.checkpoint_every == 0:
            save_checkpoint(cfg.checkpoint_path, state.u, state.t, dt_step)
        if reason is None and state.step % cfg.cadence == 0:
            series.append(state, dt_step, hooks)
    if series.t[-1] != state.t and reason != NON_FINITE:
        series.append(state, dt, hooks)
    series.halt_reason = reason
    series.final_state = state
    series.steps = state.step
    if reason == T_END:
        br = boundary_ratio(state.u)
        if br > 1e-10:
            warnings.warn(f"final state reaches {br:.2e} of its sup on the box boundary",
                          RuntimeWarning, stacklevel=2)
    return series
