"""Cauchy data on a time slice and the two ill-posedness constructions.

For the second-order leapfrog the data ``(u0, u1) = (f|_S, centred d_t f|_S)``
together with the equation on ``S`` fix the two neighbouring rows, so the
lattice Cauchy problem is solved *exactly* (round trip to rounding error).
First-order Dirac data ``u = f|_S`` fixes only one row; the next row comes
from a second-order Taylor step, so the round trip holds to O(dt^3).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .born import coupling_matrix, pole_scan
from .diffops import DiracPairSpec, NormallyHyperbolicSpec, OperatorSpec, apply_D, interior_mask, stencil_of, _mv
from .green import GreenOperator, check_boundary, march
from .kernels import BumpProfile, FiniteRankKernel
from .lattice import (
    GridFunction,
    RegionMask,
    SpacetimeGrid,
    causal_cone,
    inner_product,
    norm,
    support_mask,
)
from .diffops import wave_operator

__all__ = [
    "CauchyData",
    "Witness",
    "IllposednessCertificate",
    "free_solution_from_data",
    "extract_data",
    "double_cone",
    "nonuniqueness_witness",
    "nonexistence_probe",
    "data_norm",
]


@dataclass(frozen=True, eq=False)
class CauchyData:
    """Data on the slice ``j_sigma``; ``u1`` is None for spinor (first-order) data."""

    j_sigma: int
    u0: np.ndarray = field(repr=False)
    u1: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        u0 = np.array(self.u0, dtype=complex)
        if u0.ndim == 1:
            u0 = u0[:, None]
        object.__setattr__(self, "u0", u0)
        if self.u1 is not None:
            u1 = np.array(self.u1, dtype=complex)
            if u1.ndim == 1:
                u1 = u1[:, None]
            if u1.shape != u0.shape:
                raise ValueError("u0 and u1 shapes differ")
            object.__setattr__(self, "u1", u1)
        for a in (self.u0, self.u1):
            if a is not None and not np.all(np.isfinite(a)):
                raise ValueError("Cauchy data must be finite")

    @property
    def spinor(self) -> bool:
        return self.u1 is None

    def is_zero(self) -> bool:
        return not np.any(self.u0) and (self.u1 is None or not np.any(self.u1))

    def __sub__(self, other: "CauchyData") -> "CauchyData":
        if other.j_sigma != self.j_sigma or other.spinor != self.spinor:
            raise ValueError("data live on different slices or have different kinds")
        u1 = None if self.spinor else self.u1 - other.u1
        return CauchyData(self.j_sigma, self.u0 - other.u0, u1)


def data_norm(data: CauchyData, dx: float) -> float:
    """L2 norm of the data along the slice (both parts for second-order data)."""
    s = np.sum(np.abs(data.u0) ** 2)
    if data.u1 is not None:
        s += np.sum(np.abs(data.u1) ** 2)
    return float(np.sqrt(s * dx))


def data_sup(data: CauchyData) -> float:
    m = np.max(np.abs(data.u0), initial=0.0)
    if data.u1 is not None:
        m = max(m, np.max(np.abs(data.u1), initial=0.0))
    return float(m)


def extract_data(f: GridFunction, j_sigma: int, spinor: bool = False) -> CauchyData:
    g = f.grid
    if not 1 <= j_sigma <= g.n_time - 2:
        raise ValueError("Cauchy slice must have a row above and below")
    if spinor:
        return CauchyData(j_sigma, f.values[j_sigma].copy())
    u1 = (f.values[j_sigma + 1] - f.values[j_sigma - 1]) / (2 * g.dt)
    return CauchyData(j_sigma, f.values[j_sigma].copy(), u1)


def _dx(v: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    return out


def _dxx(v: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    return out


def _check_data_boundary(grid: SpacetimeGrid, data: CauchyData, margin: int = 2):
    seed = np.zeros(grid.shape, dtype=complex)
    seed[data.j_sigma] = np.abs(data.u0)
    if data.u1 is not None:
        seed[data.j_sigma] += np.abs(data.u1)
    check_boundary(GridFunction(grid, seed), None, margin)


def free_solution_from_data(spec: OperatorSpec, data: CauchyData, check: bool = True) -> GridFunction:
    """Free solution ``f0[u]`` with Cauchy data ``u`` on row ``data.j_sigma``."""
    g = spec.grid
    j = data.j_sigma
    if not 1 <= j <= g.n_time - 2:
        raise ValueError("Cauchy slice must have a row above and below")
    if data.u0.shape != (g.n_space, g.components):
        raise ValueError("data shape does not match the grid")
    if check:
        _check_data_boundary(g, data)
    if data.is_zero():
        return g.zeros()
    st = stencil_of(spec)
    u = np.zeros(g.shape, dtype=complex)
    u[j] = data.u0
    cols = slice(1, g.n_space - 1)
    if isinstance(spec, DiracPairSpec):
        if not data.spinor:
            raise ValueError("Dirac data is a single spinor row")
        # Taylor step: d_t f = -g0 g1 d_x f - i m g0 f,  d_t^2 f = d_x^2 f - m^2 f
        v = data.u0
        g0, g1, m = spec.gamma0, spec.gamma1, spec.mass
        o = spec.orientation
        ft = -(np.einsum("ab,kb->ka", g0 @ g1, _dx(v, g.dx))) - 1j * o * m * (v @ g0.T)
        ftt = _dxx(v, g.dx) - m**2 * v
        u[j + 1, cols] = (v + g.dt * ft + 0.5 * g.dt**2 * ftt)[cols]
        u = march(st, None, "retarded", init=u, start=j + 1)
        u = march(st, None, "advanced", init=u, start=j)
        return GridFunction(g, u)
    if data.spinor:
        raise ValueError("second-order operators need (u0, u1) data")
    # C+ f[j+1] + C- f[j-1] + rest = 0 with f[j+1] - f[j-1] = 2 dt u1
    Cp, Cm = st.coeffs[(1, 0)], st.coeffs[(-1, 0)]
    rest = np.zeros_like(data.u0)
    for (a, b), C in st.coeffs.items():
        if a != 0:
            continue
        Cj = C[j] if C.shape[0] > 1 else C[0]
        Cj = Cj[cols] if Cj.shape[0] > 1 else Cj
        rest[cols] += _mv(Cj, data.u0[1 + b : g.n_space - 1 + b])
    Cpj = (Cp[j] if Cp.shape[0] > 1 else Cp[0])
    Cmj = (Cm[j] if Cm.shape[0] > 1 else Cm[0])
    Cpj = Cpj[cols] if Cpj.shape[0] > 1 else np.broadcast_to(Cpj, (g.n_space - 2,) + Cpj.shape[1:])
    Cmj = Cmj[cols] if Cmj.shape[0] > 1 else np.broadcast_to(Cmj, (g.n_space - 2,) + Cmj.shape[1:])
    Dd = 2 * g.dt * data.u1[cols]
    rhs = -rest[cols] - _mv(0.5 * (Cpj - Cmj), Dd)
    S = np.linalg.solve(0.5 * (Cpj + Cmj), rhs[..., None])[..., 0]
    u[j + 1, cols] = 0.5 * (S + Dd)
    u[j - 1, cols] = 0.5 * (S - Dd)
    u = march(st, None, "retarded", init=u, start=j + 1)
    u = march(st, None, "advanced", init=u, start=j - 1)
    return GridFunction(g, u)


def double_cone(grid: SpacetimeGrid, j_sigma: int, x_interval: tuple[float, float]) -> RegionMask:
    """Domain of dependence of the interval on the slice: ``|x - c| + |t - t_S| <= L``."""
    c = 0.5 * (x_interval[0] + x_interval[1])
    L = 0.5 * (x_interval[1] - x_interval[0])
    T, X = grid.mesh()
    ts = grid.t[j_sigma]
    return RegionMask(grid, np.abs(X - c) + np.abs(T - ts) <= L + 1e-9 * grid.dx)


def _spacelike(a: RegionMask, b: RegionMask) -> bool:
    cone = causal_cone(a, "future", "continuum") | causal_cone(a, "past", "continuum")
    return not (cone & b).any()


# -- non-uniqueness ------------------------------------------------------------

@dataclass
class Witness:
    lam: complex
    f_lambda: GridFunction = field(repr=False)
    pairing: complex
    data_sup: float
    residual: float
    sup_ratio: float
    construction_gap: float
    pole_gap: float
    spacelike: bool

    def summary(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "pairing": [self.pairing.real, self.pairing.imag],
            "data_sup": self.data_sup,
            "residual": self.residual,
            "sup_ratio": self.sup_ratio,
            "construction_gap": self.construction_gap,
            "pole_gap": self.pole_gap,
            "spacelike": self.spacelike,
        }


def nonuniqueness_witness(G: GreenOperator, w1: GridFunction, w2: GridFunction, j_sigma: int,
                          threshold: float = 1e-10) -> Witness:
    """Nonzero solution of ``(D + lam W) f = 0`` with vanishing data on the slice.

    ``W h = <w1, h> w2``.  The solution is ``f = f0[u] - R^+ w2`` with ``u``
    the data of ``R w2``; it equals ``-R^- w2`` and needs
    ``lam = -1 / <w1, R^- w2>``.
    """
    spec = G.spec
    if isinstance(spec, DiracPairSpec):
        raise TypeError("witness construction uses second-order data")
    s2 = support_mask(w2)
    if not s2.any():
        raise ValueError("w2 vanishes")
    if s2.time_extent()[1] >= j_sigma:
        raise ValueError("supp w2 must lie strictly below the Cauchy slice")
    Rp = G.retarded(w2)
    Rm = G.advanced(w2)
    pairing = inner_product(w1, Rm)
    if abs(pairing) < threshold:
        raise ValueError(f"<w1, R^- w2> = {abs(pairing):.3e} below threshold; witness ill-conditioned")
    lam = -1.0 / pairing
    u = extract_data(Rp - Rm, j_sigma)
    f0 = free_solution_from_data(spec, u)
    f_lam = f0 - Rp
    W = FiniteRankKernel(G.grid, ((w1, w2),))
    r = apply_D(spec, f_lam) + W.apply(f_lam) * lam
    m = interior_mask(spec, 1).flags
    residual = float(np.max(np.abs(r.values[m])))
    d = extract_data(f_lam, j_sigma)
    rm_sup = Rm.sup_norm()
    M = coupling_matrix(G, W, "advanced")
    return Witness(
        lam=complex(lam),
        f_lambda=f_lam,
        pairing=complex(pairing),
        data_sup=data_sup(d),
        residual=residual,
        sup_ratio=f_lam.sup_norm() / rm_sup,
        construction_gap=(f_lam + Rm).sup_norm() / rm_sup,
        pole_gap=float(abs(1 + lam * M[0, 0])),
        spacelike=_spacelike(support_mask(w1), s2),
    )


# -- non-existence -------------------------------------------------------------

@dataclass
class IllposednessCertificate:
    c1: complex
    rw2_norm: float
    lam: complex
    residual_curve: list = field(default_factory=list)
    control_curve: list = field(default_factory=list)
    exhaustive_curve: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    inconclusive: bool = False
    reason: str = ""

    @property
    def c0(self) -> float:
        return min(r for _, r in self.residual_curve) if self.residual_curve else 0.0

    @property
    def variation(self) -> float:
        v = [r for _, r in self.residual_curve]
        if not v or min(v) == 0:
            return np.inf
        return (max(v) - min(v)) / min(v)

    def to_dict(self) -> dict:
        return {
            "c1": [self.c1.real, self.c1.imag],
            "rw2_norm": self.rw2_norm,
            "lambda": [complex(self.lam).real, complex(self.lam).imag],
            "residual_curve": [[lvl, r] for lvl, r in self.residual_curve],
            "control_curve": [[lvl, r] for lvl, r in self.control_curve],
            "exhaustive_curve": [[lvl, r] for lvl, r in self.exhaustive_curve],
            "coefficients": [[lvl, [a.real, a.imag], [b.real, b.imag]] for lvl, a, b in self.coefficients],
            "c0": self.c0,
            "variation": self.variation if np.isfinite(self.variation) else None,
            "inconclusive": self.inconclusive,
            "reason": self.reason,
        }


def _bump_inside(bp: BumpProfile, cone: RegionMask, grid: SpacetimeGrid) -> bool:
    s = support_mask(bp.sample(grid))
    return not (s & ~cone).any()


def _probe_level(grid, mass, w1p, w2p, u0, u1, t_sigma, lam):
    spec = wave_operator(grid, mass)
    G = GreenOperator(spec)
    j = grid.time_index(t_sigma)
    w1 = w1p.sample(grid)
    w2 = w2p.sample(grid)
    x = grid.x
    d0 = u0(x)
    d1 = np.zeros_like(x) if u1 is None else u1(x)
    data = CauchyData(j, d0, d1)
    f0 = free_solution_from_data(spec, data)
    Rp, Rm = G.retarded(w2), G.advanced(w2)
    W = FiniteRankKernel(grid, ((w1, w2),))
    m = interior_mask(spec, 1).flags
    w_cell = np.sqrt(grid.cell)
    w_line = np.sqrt(grid.dx)

    def eq_res(f, lam_):
        r = apply_D(spec, f) + W.apply(f) * lam_
        return r.values[m].ravel() * w_cell

    def data_vec(f):
        d = extract_data(f, j)
        return np.concatenate([d.u0.ravel(), d.u1.ravel()]) * w_line

    target = np.concatenate([data.u0.ravel(), data.u1.ravel()]) * w_line

    def solve(cols, lam_):
        # minimise || [eq(f0) + sum a_i eq(c_i); data(f0) - u + sum a_i data(c_i)] ||
        A = np.stack([np.concatenate([eq_res(c, lam_), data_vec(c)]) for c in cols], axis=1)
        b = np.concatenate([eq_res(f0, lam_), data_vec(f0) - target])
        coef, *_ = np.linalg.lstsq(A, -b, rcond=None)
        return float(np.linalg.norm(A @ coef + b)), coef

    res, coef = solve([Rp, Rm], lam)
    ctrl, _ = solve([Rp, Rm], 0.0)
    # zero-data solution of D phi = w2 completes the family
    phi = Rp - free_solution_from_data(spec, extract_data(Rp, j))
    exh, _ = solve([Rp, Rm, phi], lam)
    c1 = inner_product(w1, f0)
    rw2 = norm(Rp - Rm)
    return res, ctrl, exh, coef, c1, rw2


def nonexistence_probe(grid: SpacetimeGrid, mass: float, w1: BumpProfile, w2: BumpProfile,
                       u0: Callable[[np.ndarray], np.ndarray], t_sigma: float, lam: complex,
                       levels=(0, 1, 2), u1: Callable | None = None,
                       cones: tuple[tuple[float, float], tuple[float, float]] | None = None,
                       threshold: float = 1e-12) -> IllposednessCertificate:
    """Least-squares search for a solution with prescribed data, over refinements.

    Candidates are ``f0[u] + alpha R^+ w2 + beta R^- w2``; the minimal combined
    residual (equation plus data mismatch) per level forms the residual curve.
    ``exhaustive_curve`` adds the zero-data solution of ``D phi = w2``.
    ``cones`` gives the base intervals of the two double cones on the slice;
    when set the geometry preconditions are checked on the coarsest grid.
    """
    g0 = grid.with_components(1)
    if cones is not None:
        j = g0.time_index(t_sigma)
        O1 = double_cone(g0, j, cones[0])
        O2 = double_cone(g0, j, cones[1])
        if (O1 & O2).any() or not _spacelike(O1, O2):
            raise ValueError("double cones are not spacelike separated")
        if not _bump_inside(w1, O1, g0) or not _bump_inside(w2, O2, g0):
            raise ValueError("kernel bumps must lie inside their double cones")
        base = np.abs(u0(g0.x)) > 0
        xs = g0.x[base]
        if xs.size and (xs.min() < cones[0][0] or xs.max() > cones[0][1]):
            raise ValueError("data must be supported in the base of the first double cone")
    cert = IllposednessCertificate(0j, 0.0, complex(lam))
    for lvl in levels:
        g = g0.refined(2**lvl) if lvl else g0
        res, ctrl, exh, coef, c1, rw2 = _probe_level(g, mass, w1, w2, u0, u1, t_sigma, lam)
        if lvl == levels[0]:
            cert.c1, cert.rw2_norm = complex(c1), rw2
        cert.residual_curve.append((lvl, res))
        cert.control_curve.append((lvl, ctrl))
        cert.exhaustive_curve.append((lvl, exh))
        cert.coefficients.append((lvl, complex(coef[0]), complex(coef[1])))
    if abs(cert.c1) <= threshold:
        cert.inconclusive, cert.reason = True, "c1 = <w1, f0[u]> vanishes"
    elif cert.rw2_norm <= threshold:
        cert.inconclusive, cert.reason = True, "R w2 vanishes"
    elif lam == 0:
        cert.inconclusive, cert.reason = True, "lambda = 0"
    return cert
