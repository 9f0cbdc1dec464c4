"""Perturbed Green operators of ``D + lam W``.

Two routes:

* the Born series ``sum_k (-lam R W)^k R f``, valid while ``|lam| rho(R W) < 1``;
* for finite-rank ``W`` the exact resolvent, a small ``r x r`` linear solve that
  continues the series meromorphically in ``lam``.  Its poles are the zeros of
  ``det(I + lam M)`` with ``M_ij = <w1_i, R w2_j>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffops import apply_D, interior_mask
from .green import ADVANCED, RETARDED, GreenOperator, _normalize
from .kernels import FiniteRankKernel, KernelPotential
from .lattice import GridFunction, RegionMask, inner_product, norm

__all__ = [
    "SeriesDivergenceError",
    "PoleError",
    "NormConvergenceError",
    "PerturbedGreen",
    "SeriesInfo",
    "NormEstimator",
    "NormEstimate",
    "apply_perturbed",
    "finite_rank_resolvent",
    "series_terms",
    "estimate_operator_norm",
    "coupling_matrix",
    "pole_scan",
    "perturbed_residual",
    "SAFETY",
]

SAFETY = 0.95


class SeriesDivergenceError(ArithmeticError):
    pass


class PoleError(ArithmeticError):
    pass


class NormConvergenceError(RuntimeError):
    pass


@dataclass
class SeriesInfo:
    term_norms: list[float] = field(default_factory=list)
    orders: int = 0
    converged: bool = False

    def ratios(self) -> np.ndarray:
        t = np.asarray(self.term_norms)
        with np.errstate(divide="ignore", invalid="ignore"):
            return t[1:] / t[:-1]


def _rw2_cache(G: GreenOperator, W: FiniteRankKernel, direction: str, cache: dict) -> list[GridFunction]:
    key = (id(G), id(W), direction)
    if key not in cache:
        cache[key] = [G.apply(w2, direction) for _, w2 in W.pairs]
    return cache[key]


def _make_RW(G: GreenOperator, W: KernelPotential, direction: str, cache: dict | None = None):
    """``u -> R^dir (W u)`` with cached ``R w2_i`` for finite rank."""
    if isinstance(W, FiniteRankKernel):
        cache = {} if cache is None else cache
        rw2 = _rw2_cache(G, W, direction, cache)
        w1s = [w1 for w1, _ in W.pairs]
        grid = G.grid

        def RW(u: GridFunction) -> GridFunction:
            out = np.zeros(grid.shape, dtype=complex)
            for w1, r in zip(w1s, rw2):
                c = inner_product(w1, u)
                if c != 0:
                    out += c * r.values
            return GridFunction(grid, out)

        return RW
    return lambda u: G.apply(W.apply(u), direction)


def series_terms(G: GreenOperator, W: KernelPotential, direction: str, lam: complex,
                 f: GridFunction, M: int = 64, tol: float = 1e-14, cache: dict | None = None):
    """Partial Born sum and its term norms; no radius enforcement.

    Stops early once a term drops below ``tol`` times the accumulated sup norm.
    """
    direction = _normalize(direction)
    RW = _make_RW(G, W, direction, cache)
    term = G.apply(f, direction)
    total = term
    info = SeriesInfo([term.sup_norm()])
    for k in range(1, M + 1):
        if lam == 0:
            info.converged = True
            break
        term = RW(term) * (-lam)
        total = total + term
        tn = term.sup_norm()
        info.term_norms.append(tn)
        info.orders = k
        if tn <= tol * max(total.sup_norm(), 1e-300):
            info.converged = True
            break
        if not np.isfinite(tn) or tn > 1e150:
            break
    return total, info


@dataclass(frozen=True)
class NormEstimator:
    """Power-iteration settings on the time slab ``t_slab``."""

    t_slab: tuple[float, float]
    max_iter: int = 400
    tol: float = 1e-10
    seed: int = 0


@dataclass(frozen=True)
class NormEstimate:
    sigma: float
    rho: float
    iterations: int
    gap: float


def _slab_mask(G: GreenOperator, slab) -> RegionMask:
    g = G.grid
    T = g.t
    eps = 1e-9 * g.dt
    flags = np.zeros((g.n_time, g.n_space), bool)
    flags[(T >= slab[0] - eps) & (T <= slab[1] + eps), :] = True
    return RegionMask(g, flags)


def _restrict(u: GridFunction, m: RegionMask) -> GridFunction:
    return GridFunction(u.grid, u.values * m.flags[..., None])


def estimate_operator_norm(E: NormEstimator, G: GreenOperator, W: KernelPotential,
                           direction: str, strict: bool = False) -> NormEstimate:
    """Largest singular value of ``P R W P`` on the slab, and spectral radius of ``R W``.

    With ``strict`` a non-converged iteration raises; otherwise ``gap`` reports
    the last relative change.
    """
    direction = _normalize(direction)
    g = G.grid
    P = _slab_mask(G, E.t_slab)
    K = W.support()
    if K.any() and not np.all(P.flags[K.flags]):
        raise ValueError("slab must contain the kernel support")
    rng = np.random.default_rng(E.seed)
    v0 = rng.standard_normal(g.shape) * (K.flags[..., None] if K.any() else 1.0)
    v = GridFunction(g, v0)
    RW = _make_RW(G, W, direction)
    Wa = W.adjoint()

    # spectral radius: plain power iteration
    rho, rho_prev, gap, it_r = 0.0, np.inf, np.inf, 0
    x = v / max(norm(v), 1e-300)
    for it_r in range(1, E.max_iter + 1):
        y = RW(x)
        ny = norm(y)
        if ny == 0:
            rho, gap = 0.0, 0.0
            break
        rho = ny
        gap = abs(rho - rho_prev) / rho
        x = y / ny
        if gap < E.tol:
            break
        rho_prev = rho
    gap_r = gap

    # singular value: power iteration on B^H B, B = P R W P
    sigma, s_prev, gap, it_s = 0.0, np.inf, np.inf, 0
    x = _restrict(v, P)
    x = x / max(norm(x), 1e-300)
    for it_s in range(1, E.max_iter + 1):
        y = _restrict(RW(_restrict(x, P)), P)
        if y.is_zero():
            sigma, gap = 0.0, 0.0
            break
        z = _restrict(Wa.apply(G.adjoint(y, direction, check=False)), P)
        nz = norm(z)
        s = np.sqrt(nz)
        gap = abs(s - s_prev) / s
        sigma = s
        x = z / nz
        if gap < E.tol:
            break
        s_prev = s
    worst = max(gap, gap_r)
    if strict and worst > E.tol:
        raise NormConvergenceError(f"power iteration stalled, last relative gap {worst:.3e}")
    return NormEstimate(float(sigma), float(rho), max(it_r, it_s), float(worst))


@dataclass(eq=False)
class PerturbedGreen:
    """``R^{+/-}_lam`` for ``D + lam W``.

    ``method`` is ``"series"`` (radius enforced with the 0.95 safety factor)
    or ``"exact"`` (finite-rank resolvent).  ``rho`` may be supplied to skip
    the power iteration.
    """

    base: GreenOperator
    W: KernelPotential
    lam: complex
    M: int = 64
    method: str = "series"
    rho: dict | float | None = None
    tol: float = 1e-14
    slab: tuple[float, float] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.method not in ("series", "exact"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "exact" and not isinstance(self.W, FiniteRankKernel):
            raise TypeError("exact method needs a finite-rank kernel")
        if isinstance(self.rho, (int, float)):
            self.rho = {RETARDED: float(self.rho), ADVANCED: float(self.rho)}
        elif self.rho is None:
            self.rho = {}

    @property
    def grid(self):
        return self.base.grid

    def spectral_radius(self, direction: str) -> float:
        direction = _normalize(direction)
        if direction not in self.rho:
            if isinstance(self.W, FiniteRankKernel):
                M = coupling_matrix(self.base, self.W, direction, self._cache)
                r = float(np.max(np.abs(np.linalg.eigvals(M)), initial=0.0))
            else:
                g = self.grid
                slab = self.slab or (g.t[1], g.t[-2])
                r = estimate_operator_norm(NormEstimator(slab), self.base, self.W, direction).rho
            self.rho[direction] = r
        return self.rho[direction]

    def apply(self, direction: str, f: GridFunction, info: bool = False):
        direction = _normalize(direction)
        if self.method == "exact":
            u = finite_rank_resolvent(self.base, self.W, direction, self.lam, f, self._cache)
            return (u, None) if info else u
        if self.lam != 0:
            r = self.spectral_radius(direction)
            if abs(self.lam) * r >= SAFETY:
                raise SeriesDivergenceError(
                    f"|lambda| * rho = {abs(self.lam) * r:.4g} outside the series regime (< {SAFETY})"
                )
        u, si = series_terms(self.base, self.W, direction, self.lam, f, self.M, self.tol, self._cache)
        return (u, si) if info else u

    def retarded(self, f):
        return self.apply(RETARDED, f)

    def advanced(self, f):
        return self.apply(ADVANCED, f)

    def causal(self, f):
        return self.retarded(f) - self.advanced(f)


def apply_perturbed(P: PerturbedGreen, direction: str, f: GridFunction) -> GridFunction:
    return P.apply(direction, f)


def coupling_matrix(G: GreenOperator, W: FiniteRankKernel, direction: str, cache: dict | None = None) -> np.ndarray:
    """``M_ij = <w1_i, R w2_j>``."""
    direction = _normalize(direction)
    rw2 = _rw2_cache(G, W, direction, {} if cache is None else cache)
    r = W.rank
    M = np.zeros((r, r), dtype=complex)
    for i, (w1, _) in enumerate(W.pairs):
        for j in range(r):
            M[i, j] = inner_product(w1, rw2[j])
    return M


def finite_rank_resolvent(G: GreenOperator, W: FiniteRankKernel, direction: str, lam: complex,
                          f: GridFunction, cache: dict | None = None, cond_max: float = 1e13) -> GridFunction:
    """Exact ``R_lam f = R f - lam sum_i c_i R w2_i`` with ``(I + lam M) c = b``."""
    direction = _normalize(direction)
    cache = {} if cache is None else cache
    Rf = G.apply(f, direction)
    if lam == 0 or W.rank == 0:
        return Rf
    rw2 = _rw2_cache(G, W, direction, cache)
    M = coupling_matrix(G, W, direction, cache)
    A = np.eye(W.rank) + lam * M
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > cond_max:
        raise PoleError(f"lambda = {lam} is (numerically) a pole: det = {np.linalg.det(A):.3e}")
    b = np.array([inner_product(w1, Rf) for w1, _ in W.pairs])
    c = np.linalg.solve(A, b)
    out = Rf.values.copy()
    for ci, r in zip(c, rw2):
        out -= lam * ci * r.values
    return GridFunction(G.grid, out)


def _det_and_logderiv(M: np.ndarray, lam: complex):
    A = np.eye(M.shape[0]) + lam * M
    d = np.linalg.det(A)
    try:
        ld = np.trace(np.linalg.solve(A, M))
    except np.linalg.LinAlgError:
        ld = np.inf
    return d, ld


def pole_scan(G: GreenOperator, W: FiniteRankKernel, direction: str, lambda_grid,
              newton_tol: float = 1e-14, max_newton: int = 60):
    """Zeros of ``det(I + lam M)`` near minima of ``|det|`` on a real or complex lambda grid.

    Returns ``(poles, det_values)``; poles are refined by Newton's method on the
    determinant and deduplicated.
    """
    M = coupling_matrix(G, W, direction)
    lg = np.asarray(lambda_grid, dtype=complex)
    dets = np.array([np.linalg.det(np.eye(M.shape[0]) + l * M) for l in lg.ravel()]).reshape(lg.shape)
    if W.rank == 0 or not np.any(M):
        return [], dets
    a = np.abs(dets)
    cand = []
    if lg.ndim == 1:
        for i in range(len(lg)):
            left = a[i - 1] if i > 0 else np.inf
            right = a[i + 1] if i + 1 < len(lg) else np.inf
            if a[i] <= left and a[i] <= right and (i > 0 or i + 1 < len(lg)):
                if 0 < i < len(lg) - 1:
                    cand.append(lg[i])
    else:
        pad = np.pad(a, 1, constant_values=np.inf)
        core = pad[1:-1, 1:-1]
        is_min = (core <= pad[:-2, 1:-1]) & (core <= pad[2:, 1:-1]) & (core <= pad[1:-1, :-2]) & (core <= pad[1:-1, 2:])
        edge = np.zeros_like(is_min)
        edge[[0, -1], :] = True
        edge[:, [0, -1]] = True
        cand = list(lg[is_min & ~edge])
    poles: list[complex] = []
    scale = max(np.abs(M).max(), 1e-300)
    for lam in cand:
        z = complex(lam)
        for _ in range(max_newton):
            d, ld = _det_and_logderiv(M, z)
            if d == 0 or not np.isfinite(ld):
                break
            step = 1.0 / ld
            z -= step
            if abs(step) <= newton_tol * max(abs(z), 1.0):
                break
        if abs(np.linalg.det(np.eye(M.shape[0]) + z * M)) > 1e-8:
            continue
        if all(abs(z - p) > 1e-9 * max(abs(z), 1.0 / scale) for p in poles):
            poles.append(z)
    poles.sort(key=lambda z: (z.real, z.imag))
    return poles, dets


def perturbed_residual(G: GreenOperator, W: KernelPotential, lam: complex,
                       u: GridFunction, f: GridFunction | None = None) -> float:
    """``max |(D + lam W) u - f|`` over interior points, relative to ``max |f|`` when f is given."""
    r = apply_D(G.spec, u) + W.apply(u) * lam
    m = interior_mask(G.spec, 1).flags
    if f is not None:
        r = r - f
        scale = f.sup_norm() or 1.0
    else:
        scale = 1.0
    return float(np.max(np.abs(r.values[m]), initial=0.0) / scale)
