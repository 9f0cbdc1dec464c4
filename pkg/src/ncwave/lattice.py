"""Discrete 1+1 dimensional spacetime: grids, grid functions, region masks.

Coordinates are ``(t, x)`` with light speed 1 and metric signature (+, -).
Arrays are indexed ``[time, space, component]``.

Two cone rules are available for :func:`causal_cone`:

``"stencil"``
    The domain of influence of explicit three-point schemes: a seed at level
    ``i`` reaches ``ceil(dt/dx)`` cells per level (one cell on every grid that
    satisfies the CFL bound).  Green operators built on this lattice have
    support *exactly* inside this cone, so support checks can demand zeros.
``"continuum"``
    The inequality ``|x_k - x_l| <= t_j - t_i`` on node coordinates, boundary
    included.  On grids with ``dt == dx`` both rules coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridMismatchError",
    "SpacetimeGrid",
    "GridFunction",
    "RegionMask",
    "make_grid",
    "inner_product",
    "norm",
    "causal_cone",
    "mask_sup_norm",
    "support_mask",
]

_CFL_SLACK = 1e-12


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SpacetimeGrid:
    n_time: int
    n_space: int
    dt: float
    dx: float
    t0: float = 0.0
    x0: float = 0.0
    components: int = 1

    def __post_init__(self):
        if self.n_time < 3 or self.n_space < 3:
            raise ValueError(f"grid needs at least 3x3 points, got {self.n_time}x{self.n_space}")
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if not (self.dt > 0 and self.dx > 0):
            raise ValueError("dt and dx must be positive")
        if self.dt / self.dx > 1 + _CFL_SLACK:
            raise ValueError(f"CFL violation: dt/dx = {self.dt / self.dx:.6g} > 1")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_time, self.n_space, self.components)

    @property
    def cell(self) -> float:
        return self.dt * self.dx

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_time)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n_space)

    @property
    def courant(self) -> float:
        return self.dt / self.dx

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.t, self.x, indexing="ij")

    def time_index(self, t: float) -> int:
        """Nearest time level to ``t``."""
        j = int(round((t - self.t0) / self.dt))
        if not 0 <= j < self.n_time:
            raise ValueError(f"time {t} outside the grid")
        return j

    def space_index(self, x: float) -> int:
        k = int(round((x - self.x0) / self.dx))
        if not 0 <= k < self.n_space:
            raise ValueError(f"position {x} outside the grid")
        return k

    def with_components(self, n: int) -> "SpacetimeGrid":
        return SpacetimeGrid(self.n_time, self.n_space, self.dt, self.dx, self.t0, self.x0, n)

    def refined(self, factor: int = 2) -> "SpacetimeGrid":
        """Same rectangle, spacings divided by ``factor``."""
        return SpacetimeGrid(
            (self.n_time - 1) * factor + 1,
            (self.n_space - 1) * factor + 1,
            self.dt / factor,
            self.dx / factor,
            self.t0,
            self.x0,
            self.components,
        )

    def padded(self, cells: int = 1) -> "SpacetimeGrid":
        return SpacetimeGrid(
            self.n_time + 2 * cells,
            self.n_space + 2 * cells,
            self.dt,
            self.dx,
            self.t0 - cells * self.dt,
            self.x0 - cells * self.dx,
            self.components,
        )

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape, dtype=complex))

    def metadata(self) -> dict:
        return {
            "n_time": self.n_time,
            "n_space": self.n_space,
            "dt": self.dt,
            "dx": self.dx,
            "t0": self.t0,
            "x0": self.x0,
            "components": self.components,
        }


def make_grid(n_time, n_space, dt, dx, t0=0.0, x0=0.0, N=1) -> SpacetimeGrid:
    return SpacetimeGrid(int(n_time), int(n_space), float(dt), float(dx), float(t0), float(x0), int(N))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex N-component field sampled on every grid point (read-only)."""

    grid: SpacetimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.ndim == 2 and self.grid.components == 1:
            vals = vals[..., None]
        if vals.shape != self.grid.shape:
            raise ValueError(f"values have shape {vals.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", _frozen(vals))

    # arithmetic ---------------------------------------------------------
    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatchError("grid functions live on different grids")
            return other.values
        return NotImplemented

    def __add__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return GridFunction(self.grid, self.values + v)

    def __sub__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return GridFunction(self.grid, self.values - v)

    def __mul__(self, c):
        if isinstance(c, (int, float, complex, np.number)):
            return GridFunction(self.grid, self.values * c)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def conj(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.conj())

    def time_reversed(self) -> "GridFunction":
        return GridFunction(self.grid, self.values[::-1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def is_zero(self) -> bool:
        return not np.any(self.values)


@dataclass(frozen=True, eq=False)
class RegionMask:
    grid: SpacetimeGrid
    flags: np.ndarray = field(repr=False)

    def __post_init__(self):
        flags = np.array(self.flags, dtype=bool)
        if flags.shape != (self.grid.n_time, self.grid.n_space):
            raise ValueError("mask shape does not match grid")
        object.__setattr__(self, "flags", _frozen(flags))

    @classmethod
    def empty(cls, grid):
        return cls(grid, np.zeros((grid.n_time, grid.n_space), bool))

    @classmethod
    def full(cls, grid):
        return cls(grid, np.ones((grid.n_time, grid.n_space), bool))

    @classmethod
    def box(cls, grid, t_range, x_range):
        """Closed coordinate box ``t_range x x_range``."""
        T, X = grid.mesh()
        eps = 1e-9 * min(grid.dt, grid.dx)
        flags = (
            (T >= t_range[0] - eps)
            & (T <= t_range[1] + eps)
            & (X >= x_range[0] - eps)
            & (X <= x_range[1] + eps)
        )
        return cls(grid, flags)

    def _check(self, other):
        if other.grid != self.grid:
            raise GridMismatchError("masks live on different grids")

    def __or__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.flags | other.flags)

    def __and__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.flags & other.flags)

    def __invert__(self):
        return RegionMask(self.grid, ~self.flags)

    def any(self) -> bool:
        return bool(self.flags.any())

    def count(self) -> int:
        return int(self.flags.sum())

    def dilate(self, cells: int = 1) -> "RegionMask":
        """Square (Chebyshev) dilation by ``cells`` lattice steps."""
        out = self.flags.copy()
        for _ in range(cells):
            grown = out.copy()
            grown[1:] |= out[:-1]
            grown[:-1] |= out[1:]
            g2 = grown.copy()
            g2[:, 1:] |= grown[:, :-1]
            g2[:, :-1] |= grown[:, 1:]
            out = g2
        return RegionMask(self.grid, out)

    def is_monotone(self, direction: str = "future", rule: str = "stencil") -> bool:
        """True when the mask contains the causal cone of each of its points."""
        return bool(np.array_equal(causal_cone(self, direction, rule).flags, self.flags))

    def time_extent(self) -> tuple[int, int] | None:
        rows = np.flatnonzero(self.flags.any(axis=1))
        if rows.size == 0:
            return None
        return int(rows[0]), int(rows[-1])

    def space_extent(self) -> tuple[int, int] | None:
        cols = np.flatnonzero(self.flags.any(axis=0))
        if cols.size == 0:
            return None
        return int(cols[0]), int(cols[-1])


def _same_grid(*objs):
    g = objs[0].grid
    for o in objs[1:]:
        if o.grid != g:
            raise GridMismatchError("objects live on different grids")
    return g


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    """Rectangle-rule L2 pairing, antilinear in the first slot."""
    grid = _same_grid(f, g)
    return complex(np.vdot(f.values, g.values) * grid.cell)


def norm(f: GridFunction, region: RegionMask | None = None) -> float:
    vals = f.values if region is None else f.values[region.flags]
    return float(np.sqrt(np.sum(np.abs(vals) ** 2) * f.grid.cell))


def support_mask(f: GridFunction, tol: float = 0.0) -> RegionMask:
    return RegionMask(f.grid, np.any(np.abs(f.values) > tol, axis=-1))


def _row_distance(flags: np.ndarray) -> np.ndarray:
    """Per row, index distance to the nearest flagged column (inf if none)."""
    n_t, n_s = flags.shape
    idx = np.arange(n_s, dtype=float)
    left = np.where(flags, idx, -np.inf)
    left = np.maximum.accumulate(left, axis=1)
    right = np.where(flags, idx, np.inf)
    right = np.minimum.accumulate(right[:, ::-1], axis=1)[:, ::-1]
    return np.minimum(idx - left, right - idx)


def _future_cone_flags(seed: np.ndarray, grid: SpacetimeGrid, rule: str) -> np.ndarray:
    n_t = seed.shape[0]
    dist = _row_distance(seed)
    level = np.arange(n_t, dtype=float)[:, None]
    if rule == "stencil":
        reach = math.ceil(grid.dt / grid.dx - _CFL_SLACK)
        # levels needed to reach each column from row i, plus i itself
        arrival = np.ceil(dist / reach) + level
        earliest = np.minimum.accumulate(arrival, axis=0)
        return earliest <= level
    if rule == "continuum":
        t = grid.dt * level
        arrival = dist * grid.dx + t
        earliest = np.minimum.accumulate(arrival, axis=0)
        return earliest <= t + 1e-9 * grid.dx
    raise ValueError(f"unknown cone rule {rule!r}")


def causal_cone(seed: RegionMask, direction: str = "future", rule: str = "stencil") -> RegionMask:
    """Lattice causal future (``"future"``) or past (``"past"``) of ``seed``."""
    if direction not in ("future", "past"):
        raise ValueError("direction must be 'future' or 'past'")
    flags = seed.flags if direction == "future" else seed.flags[::-1]
    out = _future_cone_flags(flags, seed.grid, rule)
    if direction == "past":
        out = out[::-1]
    return RegionMask(seed.grid, out)


def mask_sup_norm(f: GridFunction, region: RegionMask) -> float:
    _same_grid(f, region)
    if not region.any():
        return 0.0
    return float(np.max(np.abs(f.values[region.flags])))
