"""Finite-difference normally hyperbolic and Dirac-type operators.

Every operator is stored as a star-shaped stencil: a dict mapping the offset
``(a, b)`` (time, space) to an ``N x N`` coefficient field broadcastable to
``(n_time, n_space, N, N)``.  ``(D f)[j, k] = sum C[a, b][j, k] @ f[j+a, k+b]``.

Output rows/columns within the stencil reach of the grid edge are filled
with zeros; :func:`interior_mask` tells which points carry the operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .lattice import GridFunction, GridMismatchError, RegionMask, SpacetimeGrid

__all__ = [
    "Stencil",
    "NormallyHyperbolicSpec",
    "DiracPairSpec",
    "OperatorSpec",
    "GAMMA0",
    "GAMMA1",
    "wave_operator",
    "apply_D",
    "apply_D_adjoint",
    "compose_pair",
    "interior_mask",
    "stencil_of",
]

# gamma^0 = sigma_3, gamma^1 = i sigma_2: gamma0 hermitian, gamma1 antihermitian
GAMMA0 = np.array([[1, 0], [0, -1]], dtype=complex)
GAMMA1 = np.array([[0, 1], [-1, 0]], dtype=complex)


def _as_field(value, grid: SpacetimeGrid, N: int) -> np.ndarray | None:
    """Coefficient -> array broadcastable to (n_t, n_s, N, N), or None if zero."""
    if value is None:
        return None
    if callable(value):
        T, X = grid.mesh()
        value = value(T, X)
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        arr = arr * np.eye(N)
    if arr.shape == (N, N):
        arr = arr[None, None]
    elif arr.shape == (grid.n_time, grid.n_space) and N == 1:
        arr = arr[..., None, None]
    if arr.ndim != 4 or arr.shape[-2:] != (N, N):
        raise ValueError(f"coefficient shape {arr.shape} incompatible with N={N}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficient field has non-finite samples")
    if not np.any(arr):
        return None
    return arr


def _mv(C: np.ndarray, v: np.ndarray) -> np.ndarray:
    if C.shape[-1] == 1:
        return C[..., 0] * v
    return np.einsum("...ab,...b->...a", C, v)


@dataclass(frozen=True, eq=False)
class Stencil:
    grid: SpacetimeGrid
    coeffs: dict = field(repr=False)

    @property
    def reach_t(self) -> int:
        return max(abs(a) for a, _ in self.coeffs)

    @property
    def reach_x(self) -> int:
        return max(abs(b) for _, b in self.coeffs)

    def rows(self, C: np.ndarray, j) -> np.ndarray:
        return C[j] if C.shape[0] > 1 else C[0]

    def apply(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        rt, rx = self.reach_t, self.reach_x
        out = np.zeros(g.shape, dtype=complex)
        core = out[rt : g.n_time - rt, rx : g.n_space - rx]
        for (a, b), C in self.coeffs.items():
            Cs = C
            if C.shape[0] > 1:
                Cs = Cs[rt : g.n_time - rt]
            if C.shape[1] > 1:
                Cs = Cs[:, rx : g.n_space - rx]
            shifted = values[rt + a : g.n_time - rt + a, rx + b : g.n_space - rx + b]
            core += _mv(Cs, shifted)
        return out

    def adjoint(self) -> "Stencil":
        """Transposed-conjugate stencil w.r.t. the plain lattice pairing."""
        out = {}
        for (a, b), C in self.coeffs.items():
            CH = np.conj(np.swapaxes(C, -1, -2))
            # C'[-a,-b][j, k] = C[a, b][j-a, k-b]^H
            if CH.shape[0] > 1:
                CH = _shift(CH, a, axis=0)
            if CH.shape[1] > 1:
                CH = _shift(CH, b, axis=1)
            out[(-a, -b)] = CH
        return Stencil(self.grid, out)


def _shift(arr: np.ndarray, s: int, axis: int) -> np.ndarray:
    """out[i] = arr[i - s], edge-replicated where out of range."""
    n = arr.shape[axis]
    idx = np.clip(np.arange(n) - s, 0, n - 1)
    return np.take(arr, idx, axis=axis)


@dataclass(frozen=True, eq=False)
class NormallyHyperbolicSpec:
    """``d_t^2 - d_x^2 + U0 d_t + U1 d_x + V`` acting on N-component fields."""

    grid: SpacetimeGrid
    U0: np.ndarray | None = field(default=None, repr=False)
    U1: np.ndarray | None = field(default=None, repr=False)
    V: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        N = self.grid.components
        for name in ("U0", "U1", "V"):
            object.__setattr__(self, name, _as_field(getattr(self, name), self.grid, N))

    @property
    def N(self) -> int:
        return self.grid.components

    @property
    def is_symmetric(self) -> bool:
        if self.U0 is not None or self.U1 is not None:
            return False
        if self.V is None:
            return True
        return bool(np.array_equal(self.V, np.conj(np.swapaxes(self.V, -1, -2))))

    @property
    def is_time_symmetric(self) -> bool:
        """Invariant under t -> -t (needs U0 = 0 and t-even U1, V)."""
        if self.U0 is not None:
            return False
        for C in (self.U1, self.V):
            if C is not None and C.shape[0] > 1 and not np.array_equal(C, C[::-1]):
                return False
        return True


@dataclass(frozen=True, eq=False)
class DiracPairSpec:
    """``D = orientation * (-i gamma^mu d_mu) + m``.

    The companion ``D' = i gamma^mu d_mu + m`` has the opposite orientation;
    with the shipped gammas ``D'D = DD' = box + m^2``.
    """

    grid: SpacetimeGrid
    mass: float = 0.0
    gamma0: np.ndarray = field(default_factory=lambda: GAMMA0.copy(), repr=False)
    gamma1: np.ndarray = field(default_factory=lambda: GAMMA1.copy(), repr=False)
    orientation: int = 1

    def __post_init__(self):
        if self.grid.components != 2:
            raise ValueError("Dirac pair needs a 2-component grid")
        g0 = np.asarray(self.gamma0, dtype=complex)
        g1 = np.asarray(self.gamma1, dtype=complex)
        I = np.eye(2)
        if not (
            np.array_equal(g0 @ g0, I)
            and np.array_equal(g1 @ g1, -I)
            and np.array_equal(g0 @ g1 + g1 @ g0, np.zeros((2, 2)))
        ):
            raise ValueError("gamma matrices violate the Clifford relations")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        object.__setattr__(self, "gamma0", g0)
        object.__setattr__(self, "gamma1", g1)

    @property
    def N(self) -> int:
        return 2

    def companion(self) -> "DiracPairSpec":
        return DiracPairSpec(self.grid, self.mass, self.gamma0, self.gamma1, -self.orientation)


OperatorSpec = Union[NormallyHyperbolicSpec, DiracPairSpec]


def wave_operator(grid: SpacetimeGrid, mass: float = 0.0) -> NormallyHyperbolicSpec:
    """Klein-Gordon operator ``box + m^2`` on the grid's component count."""
    V = mass**2 if mass else None
    return NormallyHyperbolicSpec(grid, V=V)


def _nh_stencil(spec: NormallyHyperbolicSpec, spacing: int = 1) -> Stencil:
    g, N = spec.grid, spec.N
    ht, hx = spacing * g.dt, spacing * g.dx
    I = np.eye(N, dtype=complex)[None, None]
    s = spacing
    c = {
        (s, 0): I / ht**2,
        (-s, 0): I / ht**2,
        (0, s): -I / hx**2,
        (0, -s): -I / hx**2,
        (0, 0): (-2.0 / ht**2 + 2.0 / hx**2) * I,
    }
    if spec.U0 is not None:
        c[(s, 0)] = c[(s, 0)] + spec.U0 / (2 * ht)
        c[(-s, 0)] = c[(-s, 0)] - spec.U0 / (2 * ht)
    if spec.U1 is not None:
        c[(0, s)] = c[(0, s)] + spec.U1 / (2 * hx)
        c[(0, -s)] = c[(0, -s)] - spec.U1 / (2 * hx)
    if spec.V is not None:
        c[(0, 0)] = c[(0, 0)] + spec.V
    return Stencil(g, c)


def _dirac_stencil(spec: DiracPairSpec) -> Stencil:
    g = spec.grid
    o = spec.orientation
    g0 = spec.gamma0[None, None]
    g1 = spec.gamma1[None, None]
    return Stencil(
        g,
        {
            (1, 0): -1j * o * g0 / (2 * g.dt),
            (-1, 0): 1j * o * g0 / (2 * g.dt),
            (0, 1): -1j * o * g1 / (2 * g.dx),
            (0, -1): 1j * o * g1 / (2 * g.dx),
            (0, 0): spec.mass * np.eye(2, dtype=complex)[None, None],
        },
    )


def stencil_of(spec: OperatorSpec) -> Stencil:
    if isinstance(spec, NormallyHyperbolicSpec):
        return _nh_stencil(spec)
    if isinstance(spec, DiracPairSpec):
        return _dirac_stencil(spec)
    raise TypeError(f"not an operator spec: {type(spec).__name__}")


def squared_dirac_spec(spec: DiracPairSpec, grid: SpacetimeGrid | None = None) -> NormallyHyperbolicSpec:
    """The normally hyperbolic ``D D'`` (continuum form ``box + m^2``)."""
    grid = spec.grid if grid is None else grid
    return NormallyHyperbolicSpec(grid, V=spec.mass**2 if spec.mass else None)


def squared_dirac_stencil(spec: DiracPairSpec, grid: SpacetimeGrid | None = None) -> Stencil:
    """Exact lattice product ``D_h D'_h``: the d'Alembertian on doubled spacing."""
    return _nh_stencil(squared_dirac_spec(spec, grid), spacing=2)


def _check_grid(spec, f: GridFunction):
    if f.grid != spec.grid:
        raise GridMismatchError("grid function and operator live on different grids")


def apply_D(spec: OperatorSpec, f: GridFunction) -> GridFunction:
    _check_grid(spec, f)
    return GridFunction(spec.grid, stencil_of(spec).apply(f.values))


def apply_D_adjoint(spec: OperatorSpec, f: GridFunction) -> GridFunction:
    _check_grid(spec, f)
    return GridFunction(spec.grid, stencil_of(spec).adjoint().apply(f.values))


def compose_pair(spec: DiracPairSpec, f: GridFunction) -> GridFunction:
    """``D'(D f)`` with the lattice first-order stencils."""
    return apply_D(spec.companion(), apply_D(spec, f))


def interior_mask(spec: OperatorSpec, depth: int = 1) -> RegionMask:
    """Points where ``depth`` successive stencil applications are all defined."""
    g = spec.grid
    flags = np.zeros((g.n_time, g.n_space), bool)
    d = depth
    flags[d : g.n_time - d, d : g.n_space - d] = True
    return RegionMask(g, flags)
