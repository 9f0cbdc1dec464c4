"""Compactly supported kernel potentials ``(W f)(x) = sum_y w(x, y) f(y) dt dx``.

Three concrete variants share a small interface (``apply``, ``adjoint``,
``box``): finite-rank sums of pairs, dense matrices over a box ``K``
(ndarray or scipy.sparse), and the factorized Moyal approximant.

Moyal kernel
------------
With ``theta = theta0 [[0, 1], [-1, 0]]`` and the Euclidean dot product,
``a * h (x) = sum_y w(x, y) h(y)`` with

    w(x, y) = int dp a(x - theta p) exp(2 pi i p.(x - y)).

On the lattice the ``p`` integral is restricted to the Brillouin zone
``|p0| <= 1/(2 dt)``, ``|p1| <= 1/(2 dx)``; then ``theta0 = 0`` gives back
``a(x) f(x)`` exactly.  For a separable bump ``a = A psi_t(t) psi_x(x)``
the kernel factorizes into two one-dimensional integrals

    I_x(x, s0) = int dp0 psi_x(x + theta0 p0) exp(2 pi i p0 s0)
    I_t(t, s1) = int dp1 psi_t(t - theta0 p1) exp(2 pi i p1 s1)

with ``s = x - y``, which are evaluated by Gauss-Legendre quadrature on the
part of the zone where the bump is nonzero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import GridFunction, GridMismatchError, RegionMask, SpacetimeGrid, support_mask

__all__ = [
    "BumpProfile",
    "PlateauCutoff",
    "FiniteRankKernel",
    "DenseKernel",
    "MoyalKernel",
    "UnresolvedQuadratureError",
    "bump",
    "smooth_step",
    "apply_W",
    "adjoint_W",
    "moyal_kernel",
    "pointwise_kernel",
    "box_of",
]


class UnresolvedQuadratureError(RuntimeError):
    pass


# int_{-1}^{1} exp(-1/(1-s^2)) ds
BUMP_INTEGRAL = 0.44399381616807943


def bump(s) -> np.ndarray:
    """``exp(-1/(1-s^2))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    out = np.zeros_like(s)
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_step(u) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    """``A psi((t - tc)/rt) psi((x - xc)/rx)``; ``A`` scalar or N-vector."""

    center: tuple[float, float]
    radii: tuple[float, float]
    amplitude: complex | tuple = 1.0

    def __post_init__(self):
        if min(self.radii) <= 0:
            raise ValueError("bump radii must be positive")

    @classmethod
    def unit(cls, center, radii, weight: complex = 1.0) -> "BumpProfile":
        """Bump whose spacetime integral equals ``weight``."""
        amp = weight / (BUMP_INTEGRAL**2 * radii[0] * radii[1])
        return cls(tuple(center), tuple(radii), amp)

    def profile_t(self, t) -> np.ndarray:
        return bump((np.asarray(t) - self.center[0]) / self.radii[0])

    def profile_x(self, x) -> np.ndarray:
        return bump((np.asarray(x) - self.center[1]) / self.radii[1])

    def amplitude_vector(self, N: int) -> np.ndarray:
        A = np.asarray(self.amplitude, dtype=complex)
        if A.ndim == 0:
            return np.full(N, A.item())
        if A.shape != (N,):
            raise ValueError(f"amplitude has shape {A.shape}, need ({N},)")
        return A

    def sample(self, grid: SpacetimeGrid) -> GridFunction:
        prof = self.profile_t(grid.t)[:, None] * self.profile_x(grid.x)[None, :]
        return GridFunction(grid, prof[..., None] * self.amplitude_vector(grid.components))

    def box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        (tc, xc), (rt, rx) = self.center, self.radii
        return (tc - rt, tc + rt), (xc - rx, xc + rx)

    def scaled(self, c: complex) -> "BumpProfile":
        A = np.asarray(self.amplitude, dtype=complex) * c
        amp = A.item() if A.ndim == 0 else tuple(A.tolist())
        return BumpProfile(self.center, self.radii, amp)


@dataclass(frozen=True)
class PlateauCutoff:
    """Smooth box cutoff: 1 on ``|t-tc| <= Lt, |x-xc| <= Lx``, 0 beyond ``L + band``."""

    center: tuple[float, float]
    half_widths: tuple[float, float]
    band: tuple[float, float]

    def _axis(self, s, c, L, b):
        return smooth_step((L + b - np.abs(np.asarray(s) - c)) / b)

    def profile_t(self, t):
        return self._axis(t, self.center[0], self.half_widths[0], self.band[0])

    def profile_x(self, x):
        return self._axis(x, self.center[1], self.half_widths[1], self.band[1])

    def box(self):
        (tc, xc), (Lt, Lx), (bt, bx) = self.center, self.half_widths, self.band
        return (tc - Lt - bt, tc + Lt + bt), (xc - Lx - bx, xc + Lx + bx)


# -- boxes -----------------------------------------------------------------

@dataclass(frozen=True)
class IndexBox:
    """Half-open index ranges ``[j0, j1) x [k0, k1)``."""

    j0: int
    j1: int
    k0: int
    k1: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.j1 - self.j0, self.k1 - self.k0)

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.j0, self.j1), slice(self.k0, self.k1)

    def mask(self, grid: SpacetimeGrid) -> RegionMask:
        flags = np.zeros((grid.n_time, grid.n_space), bool)
        flags[self.slices] = True
        return RegionMask(grid, flags)

    def check_interior(self, grid: SpacetimeGrid, margin: int = 1):
        if (self.j0 < margin or self.k0 < margin or self.j1 > grid.n_time - margin
                or self.k1 > grid.n_space - margin or self.j0 >= self.j1 or self.k0 >= self.k1):
            raise ValueError(f"kernel box {self} not strictly inside the grid")


def box_of(grid: SpacetimeGrid, t_range, x_range) -> IndexBox:
    """Index box of grid points inside a closed coordinate box."""
    eps = 1e-9 * min(grid.dt, grid.dx)
    jt = np.flatnonzero((grid.t >= t_range[0] - eps) & (grid.t <= t_range[1] + eps))
    kx = np.flatnonzero((grid.x >= x_range[0] - eps) & (grid.x <= x_range[1] + eps))
    if jt.size == 0 or kx.size == 0:
        raise ValueError("coordinate box contains no grid points")
    return IndexBox(int(jt[0]), int(jt[-1]) + 1, int(kx[0]), int(kx[-1]) + 1)


def _support_box(fs: Sequence[GridFunction]) -> IndexBox | None:
    m = None
    for f in fs:
        s = support_mask(f)
        m = s if m is None else m | s
    if m is None or not m.any():
        return None
    (j0, j1), (k0, k1) = m.time_extent(), m.space_extent()
    return IndexBox(j0, j1 + 1, k0, k1 + 1)


# -- kernels -----------------------------------------------------------------

class KernelPotential:
    grid: SpacetimeGrid

    def apply(self, f: GridFunction) -> GridFunction:
        raise NotImplementedError

    def adjoint(self) -> "KernelPotential":
        raise NotImplementedError

    def support(self) -> RegionMask:
        """The declared compact support ``K`` as a mask (empty for W = 0)."""
        raise NotImplementedError

    def _check(self, f: GridFunction):
        if f.grid != self.grid:
            raise GridMismatchError("kernel and function live on different grids")

    def __call__(self, f: GridFunction) -> GridFunction:
        return self.apply(f)


@dataclass(frozen=True, eq=False)
class FiniteRankKernel(KernelPotential):
    """``W f = sum_i <w1_i, f> w2_i``."""

    grid: SpacetimeGrid
    pairs: tuple = ()

    def __post_init__(self):
        pairs = tuple((w1, w2) for w1, w2 in self.pairs)
        for w1, w2 in pairs:
            if w1.grid != self.grid or w2.grid != self.grid:
                raise GridMismatchError("kernel pair lives on a different grid")
        object.__setattr__(self, "pairs", pairs)

    @property
    def rank(self) -> int:
        return len(self.pairs)

    def apply(self, f):
        self._check(f)
        out = np.zeros(self.grid.shape, dtype=complex)
        cell = self.grid.cell
        for w1, w2 in self.pairs:
            c = np.vdot(w1.values, f.values) * cell
            if c != 0:
                out += c * w2.values
        return GridFunction(self.grid, out)

    def adjoint(self):
        return FiniteRankKernel(self.grid, tuple((w2, w1) for w1, w2 in self.pairs))

    def box(self) -> IndexBox | None:
        return _support_box([w for p in self.pairs for w in p])

    def support(self):
        b = self.box()
        return RegionMask.empty(self.grid) if b is None else b.mask(self.grid)

    def is_symmetric(self) -> bool:
        return all(np.array_equal(w1.values, w2.values) for w1, w2 in self.pairs)

    def scaled(self, c: complex) -> "FiniteRankKernel":
        return FiniteRankKernel(self.grid, tuple((w1, w2 * c) for w1, w2 in self.pairs))

    def to_dense(self, box: IndexBox | None = None) -> "DenseKernel":
        box = box or self.box()
        if box is None:
            raise ValueError("zero kernel has no support box")
        n = box.shape[0] * box.shape[1] * self.grid.components
        mat = np.zeros((n, n), dtype=complex)
        sl = box.slices
        for w1, w2 in self.pairs:
            mat += np.outer(w2.values[sl].ravel(), w1.values[sl].ravel().conj())
        return DenseKernel(self.grid, box, mat)


@dataclass(frozen=True, eq=False)
class DenseKernel(KernelPotential):
    """Sampled kernel over ``K x K``; rows and columns flatten ``(j, k, A)``."""

    grid: SpacetimeGrid
    box_: IndexBox
    matrix: object = field(repr=False)

    def __post_init__(self):
        n = self.box_.shape[0] * self.box_.shape[1] * self.grid.components
        if self.matrix.shape != (n, n):
            raise ValueError(f"kernel matrix {self.matrix.shape} does not match box size {n}")
        self.box_.check_interior(self.grid)

    def box(self):
        return self.box_

    def support(self):
        return self.box_.mask(self.grid)

    def apply(self, f):
        self._check(f)
        sl = self.box_.slices
        v = f.values[sl].reshape(-1)
        out = np.zeros(self.grid.shape, dtype=complex)
        out[sl] = (self.matrix @ v).reshape(f.values[sl].shape) * self.grid.cell
        return GridFunction(self.grid, out)

    def adjoint(self):
        return DenseKernel(self.grid, self.box_, self.matrix.conj().T)

    def is_symmetric(self) -> bool:
        d = self.matrix - self.matrix.conj().T
        return (abs(d).max() if sp.issparse(d) else np.abs(d).max(initial=0)) == 0

    def scaled(self, c: complex) -> "DenseKernel":
        return DenseKernel(self.grid, self.box_, self.matrix * c)


# -- Moyal -----------------------------------------------------------------

@lru_cache(maxsize=32)
def _gl_nodes(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gl_integral(lo, hi, envelope, phase_rate, n):
    """``int_lo^hi envelope(p) exp(2 pi i p s) dp`` for a vector of rates ``s``.

    ``lo``, ``hi`` are arrays (one interval per row); returns (rows, len(s)).
    """
    u, wts = _gl_nodes(n)
    half = 0.5 * (hi - lo)[:, None]
    mid = 0.5 * (hi + lo)[:, None]
    p = mid + half * u[None, :]  # (rows, n)
    env = envelope(p) * wts[None, :] * half
    return np.einsum("rn,rns->rs", env, np.exp(2j * np.pi * p[:, :, None] * phase_rate[None, None, :]))


def _resolved_integral(lo, hi, envelope, rates, rtol, n0=48, n_max=4096):
    # phase span decides the starting order
    span = float(np.max(hi - lo, initial=0.0) * np.max(np.abs(rates), initial=0.0))
    n = min(max(n0, int(8 + 2.0 * np.pi * span)), max(n_max // 2, 1))
    prev = _gl_integral(lo, hi, envelope, rates, n)
    while True:
        n2 = 2 * n
        cur = _gl_integral(lo, hi, envelope, rates, n2)
        scale = np.max(np.abs(cur), initial=0.0)
        if scale == 0 or np.max(np.abs(cur - prev)) <= rtol * scale:
            return cur
        if n2 >= n_max:
            raise UnresolvedQuadratureError(
                f"momentum quadrature not resolved with {n2} nodes "
                f"(relative change {np.max(np.abs(cur - prev)) / scale:.2e})"
            )
        n, prev = n2, cur


def _axis_factor(coords, centre, radius, theta, sign, zone, diffs, rtol):
    """Table ``I[r, d] = int_{|p|<=zone} psi((c_r + sign*theta*p - centre)/radius) e^{2 pi i p diffs_d} dp``."""
    coords = np.asarray(coords, dtype=float)
    # p-range where the bump argument is inside (-1, 1)
    a = (centre - radius - coords) / (sign * theta)
    b = (centre + radius - coords) / (sign * theta)
    lo = np.maximum(np.minimum(a, b), -zone)
    hi = np.minimum(np.maximum(a, b), zone)
    empty = hi <= lo
    lo = np.where(empty, 0.0, lo)
    hi = np.where(empty, 0.0, hi)

    def env(p):
        return bump((coords[:, None] + sign * theta * p - centre) / radius)

    out = _resolved_integral(lo, hi, env, np.asarray(diffs, dtype=float), rtol)
    out[empty] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class MoyalKernel(KernelPotential):
    """Cutoff Moyal approximant ``chi(x) w_a(x, y) chi(y)`` for separable bumps ``a``.

    Applied matrix-free; ``to_dense`` assembles the full matrix (small boxes only).
    """

    grid: SpacetimeGrid
    bumps: tuple
    theta0: float
    cutoff: PlateauCutoff
    rtol: float = 1e-9
    conjugate: bool = False
    _tables: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.theta0 == 0:
            raise ValueError("theta0 = 0: use pointwise_kernel")
        b = box_of(self.grid, *self.cutoff.box())
        b.check_interior(self.grid)
        object.__setattr__(self, "box_", b)
        object.__setattr__(self, "bumps", tuple(self.bumps))
        if self._tables is None:
            object.__setattr__(self, "_tables", self._build())

    def _build(self):
        g, b = self.grid, self.box_
        t = g.t[b.j0 : b.j1]
        x = g.x[b.k0 : b.k1]
        nt, nx = len(t), len(x)
        chi = self.cutoff.profile_t(t)[:, None] * self.cutoff.profile_x(x)[None, :]
        dt_diffs = g.dt * np.arange(-(nt - 1), nt)
        dx_diffs = g.dx * np.arange(-(nx - 1), nx)
        jj = np.arange(nt)
        kk = np.arange(nx)
        tables = []
        for bp in self.bumps:
            # I_x over (x_k, t_j - t_l), I_t over (t_j, x_k - x_m)
            Ix = _axis_factor(x, bp.center[1], bp.radii[1], self.theta0, 1.0,
                              0.5 / g.dt, dt_diffs, self.rtol)
            It = _axis_factor(t, bp.center[0], bp.radii[0], self.theta0, -1.0,
                              0.5 / g.dx, dx_diffs, self.rtol)
            Tx = Ix[:, (jj[:, None] - jj[None, :]) + nt - 1]  # (k, j, l)
            Tt = It[:, (kk[:, None] - kk[None, :]) + nx - 1]  # (j, k, m)
            tables.append((bp.amplitude_vector(g.components), Tx, Tt))
        return [chi, tables]

    def box(self):
        return self.box_

    def support(self):
        return self.box_.mask(self.grid)

    def apply(self, f):
        self._check(f)
        sl = self.box_.slices
        chi, tables = self._tables
        gvals = f.values[sl] * chi[..., None] * self.grid.cell
        out_box = np.zeros_like(gvals)
        for A, Tx, Tt in tables:
            if not self.conjugate:
                # out[j,k] = A sum_l Tx[k,j,l] sum_m Tt[j,k,m] g[l,m]
                H = np.einsum("jkm,lmc->jklc", Tt, gvals, optimize=True)
                out_box += A * np.einsum("kjl,jklc->jkc", Tx, H, optimize=True)
            else:
                # adjoint kernel conj(w(y, x)): out[j,k] = conj(A) sum_{l,m} conj(Tt[l,m,k] Tx[m,l,j]) g[l,m]
                out_box += A.conj() * np.einsum(
                    "lmk,mlj,lmc->jkc", Tt.conj(), Tx.conj(), gvals, optimize=True
                )
        out = np.zeros(self.grid.shape, dtype=complex)
        out[sl] = out_box * chi[..., None]
        return GridFunction(self.grid, out)

    def adjoint(self):
        return MoyalKernel(self.grid, self.bumps, self.theta0, self.cutoff, self.rtol,
                           not self.conjugate, self._tables)

    def scaled(self, c: complex) -> "MoyalKernel":
        return MoyalKernel(self.grid, tuple(bp.scaled(c) for bp in self.bumps), self.theta0,
                           self.cutoff, self.rtol, self.conjugate)

    def kernel_matrix(self) -> np.ndarray:
        """Scalar kernel ``w[(j,k), (l,m)]`` over the box (without the cell weight)."""
        chi, tables = self._tables
        nt, nx = chi.shape
        w = np.zeros((nt, nx, nt, nx), dtype=complex)
        for A, Tx, Tt in tables:
            if A.size > 1 and not np.all(A == A[0]):
                raise ValueError("kernel_matrix needs a component-independent amplitude")
            w += A[0] * np.einsum("kjl,jkm->jklm", Tx, Tt)
        w *= chi[:, :, None, None] * chi[None, None, :, :]
        w = w.reshape(nt * nx, nt * nx)
        return w.conj().T if self.conjugate else w

    def to_dense(self) -> DenseKernel:
        w = self.kernel_matrix()
        N = self.grid.components
        mat = np.kron(w, np.eye(N)) if N > 1 else w
        return DenseKernel(self.grid, self.box_, mat)


# -- public operations ---------------------------------------------------------

def apply_W(W: KernelPotential, f: GridFunction) -> GridFunction:
    return W.apply(f)


def adjoint_W(W: KernelPotential) -> KernelPotential:
    return W.adjoint()


def moyal_kernel(a, theta0: float, cutoff: PlateauCutoff, grid: SpacetimeGrid, rtol: float = 1e-9) -> MoyalKernel:
    """Cutoff Moyal approximant of ``f -> a * f``; ``a`` is a BumpProfile or a list of them."""
    bumps = (a,) if isinstance(a, BumpProfile) else tuple(a)
    return MoyalKernel(grid, bumps, float(theta0), cutoff, rtol)


def pointwise_kernel(a: GridFunction, box: IndexBox | None = None) -> DenseKernel:
    """Diagonal kernel with weight ``a / (dt dx)``, so that ``W f = a f``."""
    g = a.grid
    box = box or _support_box([a])
    if box is None:
        # zero potential: any interior one-point box carries an all-zero diagonal
        box = IndexBox(1, 2, 1, 2)
    diag = a.values[box.slices].reshape(-1) / g.cell
    return DenseKernel(g, box, sp.diags(diag, format="csr"))
