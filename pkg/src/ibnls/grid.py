"""
Periodic tensor-product grids and Fourier machinery.

The box is ``[-L, L)^N`` with ``M`` points per axis, so the origin is a grid
point. Transforms follow the numpy convention: the forward transform is
unnormalized and the inverse carries ``1/M^N``. With spacing ``h = 2L/M``
the discrete Parseval identity reads

    h^N * sum |u|^2 = (h^N / M^N) * sum |u_hat|^2

and every norm in the package is defined against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ConfigInvalid, OrderUnsupported

PHYSICAL = "physical"
SPECTRAL = "spectral"


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    points: int
    half_width: float

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    def violations(self) -> list[str]:
        out = []
        if self.dimension not in (1, 2, 3):
            out.append(f"grid.dimension must be 1, 2 or 3 (got {self.dimension})")
        M = self.points
        if not isinstance(M, (int, np.integer)) or M < 8 or (M & (M - 1)) != 0:
            out.append(f"grid.points must be a power of two >= 8 (got {M})")
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            out.append(f"grid.half_width must be positive (got {self.half_width})")
        return out

    def validate(self) -> "GridSpec":
        bad = self.violations()
        if bad:
            raise ConfigInvalid(bad)
        return self


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Coordinates, frequencies and symbol arrays for a validated ``GridSpec``.

    Per-axis arrays are 1-D; ``mesh`` holds the broadcast coordinate arrays
    and ``kmesh`` the broadcast frequency arrays (all of shape ``(M,)*N``).
    """

    spec: GridSpec
    x: tuple
    k: tuple
    mesh: tuple = field(repr=False)
    kmesh: tuple = field(repr=False)
    r: np.ndarray = field(repr=False)
    k2: np.ndarray = field(repr=False)
    k4: np.ndarray = field(repr=False)
    dealias_mask: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.spec.dimension

    @property
    def M(self) -> int:
        return self.spec.points

    @property
    def L(self) -> float:
        return self.spec.half_width

    @property
    def h(self) -> float:
        return self.spec.spacing

    @property
    def shape(self) -> tuple:
        return (self.M,) * self.N

    @property
    def cell_volume(self) -> float:
        return self.h ** self.N

    @property
    def k_max(self) -> float:
        """Nyquist frequency ``M*pi/(2L)``."""
        return self.M * np.pi / (2.0 * self.L)

    def integrate(self, values):
        """Lattice Riemann sum ``h^N * sum(values)`` (complex input stays complex)."""
        total = np.sum(values) * self.cell_volume
        return complex(total) if np.iscomplexobj(total) else float(total)

    def field(self, values, space=PHYSICAL) -> "ComplexField":
        return ComplexField(self, np.asarray(values, dtype=complex), space)


def build_grid(spec: GridSpec) -> Grid:
    spec.validate()
    N, M, L = spec.dimension, spec.points, spec.half_width
    h = spec.spacing
    x1 = -L + h * np.arange(M)
    k1 = 2.0 * np.pi * np.fft.fftfreq(M, d=h)
    # report the Nyquist frequency as positive; odd derivatives zero it anyway
    k1[M // 2] = abs(k1[M // 2])
    x = tuple(_frozen(x1) for _ in range(N))
    k = tuple(_frozen(k1) for _ in range(N))
    mesh = tuple(_frozen(a) for a in np.meshgrid(*x, indexing="ij"))
    kmesh = tuple(_frozen(a) for a in np.meshgrid(*k, indexing="ij"))
    r = np.sqrt(sum(a * a for a in mesh))
    k2 = sum(a * a for a in kmesh)
    cut = (2.0 / 3.0) * (M * np.pi / (2.0 * L))
    keep = np.ones((M,) * N, dtype=bool)
    for a in kmesh:
        keep &= np.abs(a) <= cut
    return Grid(
        spec=spec,
        x=x,
        k=k,
        mesh=mesh,
        kmesh=kmesh,
        r=_frozen(r),
        k2=_frozen(k2),
        k4=_frozen(k2 * k2),
        dealias_mask=_frozen(keep),
    )


@dataclass
class ComplexField:
    """Complex samples on a grid, tagged with the space they live in."""

    grid: Grid
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")
        if self.space not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"unknown space {self.space!r}")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def physical(self) -> "ComplexField":
        return self if self.space == PHYSICAL else inverse_transform(self)

    def spectral(self) -> "ComplexField":
        return self if self.space == SPECTRAL else forward_transform(self)

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), self.space)


@lru_cache(maxsize=32)
def _cached_grid(spec: GridSpec) -> Grid:
    return build_grid(spec)


def refine(f: ComplexField, factor: int) -> ComplexField:
    """Trigonometric interpolant of ``f`` sampled on a grid ``factor`` (a power of two) times finer.

    The coarse nodes are a subset of the fine ones. The Nyquist mode is kept
    at ``+k_max`` to match the grid's frequency convention.
    """
    factor = int(factor)
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"refinement factor must be a power of two (got {factor})")
    g = f.grid
    if factor == 1:
        return f.physical()
    M, N = g.M, g.N
    fine = _cached_grid(GridSpec(N, factor * M, g.L))
    Mf = factor * M
    idx = np.fft.fftfreq(M, d=1.0 / M).astype(int)
    idx[M // 2] = M // 2
    idx = idx % Mf
    out = np.zeros((Mf,) * N, dtype=complex)
    out[np.ix_(*([idx] * N))] = f.spectral().values * factor ** N
    return ComplexField(fine, out, SPECTRAL).physical()


def forward_transform(f: ComplexField) -> ComplexField:
    if f.space == SPECTRAL:
        raise ValueError("field is already spectral")
    return ComplexField(f.grid, np.fft.fftn(f.values), SPECTRAL)


def inverse_transform(f: ComplexField) -> ComplexField:
    if f.space == PHYSICAL:
        raise ValueError("field is already physical")
    return ComplexField(f.grid, np.fft.ifftn(f.values), PHYSICAL)


def derivative_symbol(grid: Grid, order: Sequence[int]) -> np.ndarray:
    """Multiplier ``prod_j (i k_j)^{a_j}`` with the Nyquist row cosine-only for odd ``a_j``."""
    order = tuple(int(a) for a in order)
    if len(order) != grid.N:
        raise ValueError(f"multi-index {order} does not match dimension {grid.N}")
    if any(a < 0 for a in order):
        raise ValueError(f"negative derivative order {order}")
    if sum(order) > 4:
        raise OrderUnsupported(f"|order| = {sum(order)} > 4")
    sym = np.ones(grid.shape, dtype=complex)
    M = grid.M
    for axis, a in enumerate(order):
        if a == 0:
            continue
        k1 = (1j * grid.k[axis]) ** a
        if a % 2 == 1:
            k1 = k1.copy()
            k1[M // 2] = 0.0
        shape = [1] * grid.N
        shape[axis] = M
        sym = sym * k1.reshape(shape)
    return sym


def apply_derivative(f: ComplexField, order: Sequence[int]) -> ComplexField:
    """Spectral partial derivative; the result lives in the same space as ``f``."""
    sym = derivative_symbol(f.grid, order)
    if f.space == SPECTRAL:
        return ComplexField(f.grid, f.values * sym, SPECTRAL)
    return ComplexField(f.grid, np.fft.ifftn(np.fft.fftn(f.values) * sym), PHYSICAL)


def dealias(f: ComplexField) -> tuple[ComplexField, float]:
    """Zero every mode with some ``|k_j| > (2/3) k_max``.

    Returns the filtered spectral field and the fraction of L2 mass removed.
    """
    if f.space != SPECTRAL:
        raise ValueError("dealias expects a spectral field")
    mask = f.grid.dealias_mask
    power = np.abs(f.values) ** 2
    total = float(power.sum())
    removed = float(power[~mask].sum())
    frac = removed / total if total > 0 else 0.0
    return ComplexField(f.grid, np.where(mask, f.values, 0.0), SPECTRAL), frac
