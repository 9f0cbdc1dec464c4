"""Retarded and advanced Green operators by causal marching.

The retarded solution of ``D u = f`` starts from zero data below the source
and solves the stencil equation at level ``j`` for the newest level
``j + s`` (``s`` the time reach).  Spatial edge columns are held at zero;
the marching equations therefore hold at *every* interior point, so the
identities ``D R f = f`` are exact up to rounding.  Whether the lattice
result also approximates the continuum (no edge reflections) is the job of
the boundary check, which uses the continuum cone of ``supp f``.

Dirac operators are inverted through the squared operator:
``R_D f = D'_h R_{D_h D'_h} f``, where ``D_h D'_h`` is the d'Alembertian on
doubled spacing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffops import (
    DiracPairSpec,
    NormallyHyperbolicSpec,
    OperatorSpec,
    Stencil,
    _mv,
    squared_dirac_stencil,
    stencil_of,
)
from .lattice import GridFunction, GridMismatchError, RegionMask, causal_cone, support_mask

__all__ = [
    "BoundaryContaminationError",
    "GreenOperator",
    "march",
    "apply_retarded",
    "apply_advanced",
    "apply_R",
    "dirac_green",
    "dirac_green_direct",
    "check_boundary",
]

RETARDED = "retarded"
ADVANCED = "advanced"


class BoundaryContaminationError(ValueError):
    pass


def _normalize(direction: str) -> str:
    d = {"+": RETARDED, "retarded": RETARDED, "future": RETARDED,
         "-": ADVANCED, "advanced": ADVANCED, "past": ADVANCED}.get(direction)
    if d is None:
        raise ValueError(f"unknown direction {direction!r}")
    return d


def opposite(direction: str) -> str:
    return ADVANCED if _normalize(direction) == RETARDED else RETARDED


def _row(C: np.ndarray, j: int, cols: slice) -> np.ndarray:
    Cj = C[j] if C.shape[0] > 1 else C[0]
    return Cj[cols] if Cj.shape[0] > 1 else Cj


def march(stencil: Stencil, source: np.ndarray | None, direction: str,
          init: np.ndarray | None = None, start: int | None = None) -> np.ndarray:
    """Solve ``stencil u = source`` causally with zero data at the start edge.

    Retarded: rows ``0..2s-1`` vanish, the equation at row ``j`` fixes row
    ``j+s``.  Advanced is the mirror image.  ``source`` rows outside the
    equation range must be zero.  With ``init``/``start`` the march continues
    from the rows already present in ``init``, using equations from row
    ``start`` onward (downward for advanced).
    """
    g = stencil.grid
    s, rx = stencil.reach_t, stencil.reach_x
    direction = _normalize(direction)
    for (a, b) in stencil.coeffs:
        if abs(a) == s and b != 0:
            raise ValueError("marching needs a single coefficient on the extreme time rows")
    if source is None:
        source = np.zeros(g.shape, dtype=complex)
    elif np.any(source[:s]) or np.any(source[g.n_time - s :]):
        raise ValueError("source must vanish on the first and last stencil rows")
    lead_off = (s, 0) if direction == RETARDED else (-s, 0)
    lead = stencil.coeffs[lead_off]
    inv_lead = np.linalg.inv(lead)
    others = [(ab, C) for ab, C in stencil.coeffs.items() if ab != lead_off]
    u = np.zeros(g.shape, dtype=complex) if init is None else np.array(init, dtype=complex)
    cols = slice(rx, g.n_space - rx)
    if direction == RETARDED:
        rows = range(s if start is None else start, g.n_time - s)
    else:
        rows = range(g.n_time - s - 1 if start is None else start, s - 1, -1)
    scalar = g.components == 1
    for j in rows:
        rhs = source[j, cols].copy()
        if not np.any(rhs) and not np.any(u[j]) and not np.any(u[j - s]) and not np.any(u[j + s]):
            continue
        for (a, b), C in others:
            Cj = _row(C, j, cols)
            v = u[j + a, rx + b : g.n_space - rx + b]
            if scalar:
                rhs -= Cj[..., 0] * v
            else:
                rhs -= _mv(Cj, v)
        L = _row(inv_lead, j, cols)
        u[j + lead_off[0], cols] = L[..., 0] * rhs if scalar else _mv(L, rhs)
    return u


SUPPORT_RTOL = 1e-12


def check_boundary(f: GridFunction, direction: str | None = None, margin: int = 2,
                   rtol: float = SUPPORT_RTOL) -> None:
    """Raise if the continuum cone of the significant support of ``f`` reaches the spatial edge.

    Significant means ``|f| > rtol * max |f|``: lattice solutions leak
    exponentially small precursors ahead of the light cone, which must not
    count as support here.
    """
    seed = support_mask(f, rtol * f.sup_norm())
    if not seed.any():
        return
    dirs = ["future", "past"] if direction is None else [
        "future" if _normalize(direction) == RETARDED else "past"
    ]
    n_s = f.grid.n_space
    for d in dirs:
        cone = causal_cone(seed, d, rule="continuum").flags
        if cone[:, :margin].any() or cone[:, n_s - margin :].any():
            raise BoundaryContaminationError(
                f"{d} cone of the source reaches the spatial boundary within the time window"
            )


@dataclass(frozen=True, eq=False)
class GreenOperator:
    """Free Green operators ``R^+`` (retarded) and ``R^-`` (advanced) of ``spec``.

    ``check`` enables the boundary-contamination precondition on every call.
    """

    spec: OperatorSpec
    check: bool = True
    margin: int = 2

    @property
    def grid(self):
        return self.spec.grid

    def _prepare(self, f: GridFunction, direction: str) -> str:
        if f.grid != self.grid:
            raise GridMismatchError("source lives on a different grid")
        direction = _normalize(direction)
        if self.check:
            check_boundary(f, direction, self.margin)
        return direction

    def apply(self, f: GridFunction, direction: str) -> GridFunction:
        direction = self._prepare(f, direction)
        if f.is_zero():
            return self.grid.zeros()
        if isinstance(self.spec, DiracPairSpec):
            return _dirac_green_values(self.spec, direction, f)
        return GridFunction(self.grid, march(stencil_of(self.spec), f.values, direction))

    def retarded(self, f: GridFunction) -> GridFunction:
        return self.apply(f, RETARDED)

    def advanced(self, f: GridFunction) -> GridFunction:
        return self.apply(f, ADVANCED)

    def causal(self, f: GridFunction) -> GridFunction:
        """``R f = R^+ f - R^- f``."""
        return self.retarded(f) - self.advanced(f)

    def adjoint(self, g: GridFunction, direction: str, check: bool | None = None) -> GridFunction:
        """Lattice adjoint of ``R^{direction}``: the opposite-direction march of ``D^H``.

        Exact on the lattice (edge columns included) for ``g`` vanishing on the
        outer stencil rows, so the boundary check can be switched off here.
        """
        if g.grid != self.grid:
            raise GridMismatchError("source lives on a different grid")
        direction = opposite(direction)
        if self.check if check is None else check:
            check_boundary(g, direction, self.margin)
        st = stencil_of(self.spec).adjoint()
        return GridFunction(self.grid, march(st, g.values, direction))


def _dirac_green_values(spec: DiracPairSpec, direction: str, f: GridFunction) -> GridFunction:
    g = spec.grid
    pg = g.padded(1)
    src = np.zeros(pg.shape, dtype=complex)
    src[1:-1, 1:-1] = f.values
    wide = squared_dirac_stencil(spec, pg)
    # zero rows: the wide stencil needs two extra rows of data beyond the source rows
    if np.any(f.values[:1]) or np.any(f.values[-1:]):
        raise ValueError("source must vanish on the first and last time rows")
    v = march(wide, src, direction)
    comp = DiracPairSpec(pg, spec.mass, spec.gamma0, spec.gamma1, -spec.orientation)
    out = stencil_of(comp).apply(v)
    return GridFunction(g, out[1:-1, 1:-1])


def apply_retarded(G: GreenOperator, f: GridFunction) -> GridFunction:
    return G.retarded(f)


def apply_advanced(G: GreenOperator, f: GridFunction) -> GridFunction:
    return G.advanced(f)


def apply_R(G: GreenOperator, f: GridFunction) -> GridFunction:
    return G.causal(f)


def dirac_green(pair: DiracPairSpec, direction: str, f: GridFunction, check: bool = True) -> GridFunction:
    """``R^{+/-}_D f = D' R^{+/-}_{DD'} f`` for the Dirac pair."""
    return GreenOperator(pair, check=check).apply(f, direction)


def dirac_green_direct(pair: DiracPairSpec, direction: str, f: GridFunction) -> GridFunction:
    """First-order leapfrog inverse of ``D_h``; equals :func:`dirac_green` in the bulk."""
    return GridFunction(pair.grid, march(stencil_of(pair), f.values, direction))
