"""Moller operators and the scattering map ``s = Omega_+ Omega_-^{-1}``.

Free and interacting solutions are matched below and above the interaction
region with smooth time cutoffs ``chi_-`` (1 in the past) and ``chi_+``
(1 in the future).  Writing ``R = R^+ - R^-``:

* ``R(-D(chi_- f0)) = f0`` for any free ``f0``; the interacting solution
  matching ``f0`` in the past is ``R^+_lam h - R^- h`` with ``h = -D(chi_- f0)``.
* ``R(D(chi_+ f)) = f + lam R^- W f`` for an interacting ``f``: the free
  solution matching ``f`` in the future.

All four maps (and their time mirrors) are exact on the lattice.  The
composition gives ``s f0 = f0 - lam R W f_lam``, i.e. the Born form of the
scattering map is ``1 + (R^- - R^+) W sum_k lam^{k+1} (-R^+ W)^k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .born import SAFETY, PerturbedGreen, SeriesDivergenceError, _make_RW
from .diffops import DiracPairSpec, apply_D, interior_mask
from .green import GreenOperator
from .kernels import KernelPotential, bump, smooth_step
from .lattice import GridFunction, norm
from .cauchy import CauchyData, free_solution_from_data

__all__ = [
    "ScatteringConfig",
    "ScatteringReport",
    "moller_plus",
    "moller_minus",
    "moller_plus_inverse",
    "moller_minus_inverse",
    "scattering_apply",
    "scattering_inverse",
    "scattering_series",
    "derivative_at_zero",
    "free_residual",
    "solution_basis",
    "scattering_report",
]


@dataclass(eq=False)
class ScatteringConfig:
    """Cauchy times ``tau_minus < K < tau_plus`` and the cutoff bands next to them.

    The lower band is ``[tau_minus - delta_minus, tau_minus]``, the upper band
    ``[tau_plus, tau_plus + delta_plus]``; deltas default to 10 time steps.
    ``method`` selects the perturbed Green operator ("series" or "exact").
    """

    base: GreenOperator
    W: KernelPotential
    tau_minus: float
    tau_plus: float
    delta_minus: float | None = None
    delta_plus: float | None = None
    M: int = 64
    method: str = "series"
    rho: float | None = None
    _pg: dict = field(default_factory=dict, repr=False)
    _rho: dict = field(default_factory=dict, repr=False)
    _rw_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        g = self.base.grid
        if self.delta_minus is None:
            self.delta_minus = 10 * g.dt
        if self.delta_plus is None:
            self.delta_plus = 10 * g.dt
        if not self.tau_minus < self.tau_plus:
            raise ValueError("need tau_minus < tau_plus")
        K = self.W.support()
        if K.any():
            j0, j1 = K.time_extent()
            if not (self.tau_minus < g.t[j0] and g.t[j1] < self.tau_plus):
                raise ValueError("kernel support must lie strictly between the Cauchy times")
        lo = self.tau_minus - self.delta_minus
        hi = self.tau_plus + self.delta_plus
        if lo < g.t[2] or hi > g.t[-3]:
            raise ValueError("cutoff bands must lie inside the grid")

    @property
    def grid(self):
        return self.base.grid

    @property
    def spec(self):
        return self.base.spec

    def chi_minus(self) -> np.ndarray:
        t = self.grid.t
        return 1.0 - smooth_step((t - (self.tau_minus - self.delta_minus)) / self.delta_minus)

    def chi_plus(self) -> np.ndarray:
        t = self.grid.t
        return smooth_step((t - self.tau_plus) / self.delta_plus)

    def perturbed(self, lam: complex) -> PerturbedGreen:
        key = complex(lam)
        if key not in self._pg:
            # spectral radii and cached R w2 are shared across lambda values
            rho = self._rho if self.rho is None else self.rho
            self._pg[key] = PerturbedGreen(self.base, self.W, lam, self.M, self.method,
                                           rho=rho, _cache=self._rw_cache)
        return self._pg[key]


def _cut(f: GridFunction, chi: np.ndarray) -> GridFunction:
    return GridFunction(f.grid, f.values * chi[:, None, None])


def moller_plus(cfg: ScatteringConfig, lam: complex, f_lam: GridFunction) -> GridFunction:
    """Free solution agreeing with the interacting ``f_lam`` above the upper band."""
    h = apply_D(cfg.spec, _cut(f_lam, cfg.chi_plus()))
    return cfg.base.causal(h)


def moller_minus(cfg: ScatteringConfig, lam: complex, f_lam: GridFunction) -> GridFunction:
    """Free solution agreeing with ``f_lam`` below the lower band."""
    h = apply_D(cfg.spec, _cut(f_lam, cfg.chi_minus())) * -1
    return cfg.base.causal(h)


def moller_minus_inverse(cfg: ScatteringConfig, lam: complex, f0: GridFunction) -> GridFunction:
    """Interacting solution agreeing with the free ``f0`` below the lower band."""
    h = apply_D(cfg.spec, _cut(f0, cfg.chi_minus())) * -1
    if lam == 0:
        return cfg.base.causal(h)
    return cfg.perturbed(lam).retarded(h) - cfg.base.advanced(h)


def moller_plus_inverse(cfg: ScatteringConfig, lam: complex, f0: GridFunction) -> GridFunction:
    """Interacting solution agreeing with ``f0`` above the upper band."""
    h = apply_D(cfg.spec, _cut(f0, cfg.chi_plus()))
    if lam == 0:
        return cfg.base.causal(h)
    return cfg.base.retarded(h) - cfg.perturbed(lam).advanced(h)


def scattering_apply(cfg: ScatteringConfig, lam: complex, f0: GridFunction) -> GridFunction:
    return moller_plus(cfg, lam, moller_minus_inverse(cfg, lam, f0))


def scattering_inverse(cfg: ScatteringConfig, lam: complex, f0: GridFunction) -> GridFunction:
    """Time-mirrored composition ``Omega_- Omega_+^{-1}``."""
    return moller_minus(cfg, lam, moller_plus_inverse(cfg, lam, f0))


def scattering_series(cfg: ScatteringConfig, lam: complex, f0: GridFunction, M: int | None = None,
                      tol: float = 1e-14, enforce: bool = True, info: list | None = None) -> GridFunction:
    """``f0 + (R^- - R^+) W sum_{k<=M} lam^{k+1} (-R^+ W)^k f0``.

    Terms stop early once below ``tol`` relative to the accumulated sum.  Term
    norms are appended to ``info`` when given.
    """
    M = cfg.M if M is None else M
    if lam == 0:
        return f0
    G = cfg.base
    if enforce:
        rho = cfg.perturbed(lam).spectral_radius("retarded")
        if abs(lam) * rho >= SAFETY:
            raise SeriesDivergenceError(f"|lambda| * rho = {abs(lam) * rho:.4g} outside the series regime")
    RW = _make_RW(G, cfg.W, "retarded", cfg.perturbed(lam)._cache)
    v = f0
    S = f0 * lam
    for k in range(1, M + 1):
        v = RW(v) * -1
        term = v * lam ** (k + 1)
        S = S + term
        tn = term.sup_norm()
        if info is not None:
            info.append(tn)
        if tn <= tol * max(S.sup_norm(), 1e-300):
            break
    WS = cfg.W.apply(S)
    return f0 + G.advanced(WS) - G.retarded(WS)


def derivative_at_zero(cfg: ScatteringConfig, f0: GridFunction) -> GridFunction:
    """``d/dlam (s_lam f0)`` at 0: ``(R^- - R^+) W f0``."""
    Wf = cfg.W.apply(f0)
    if Wf.is_zero():
        return cfg.grid.zeros()
    return cfg.base.advanced(Wf) - cfg.base.retarded(Wf)


def free_residual(spec, f: GridFunction) -> float:
    m = interior_mask(spec, 1).flags
    return float(np.max(np.abs(apply_D(spec, f).values[m]), initial=0.0))


def _random_profile(rng, x, n_bumps, centre_range, radius_range):
    out = np.zeros_like(x, dtype=complex)
    for _ in range(n_bumps):
        c = rng.uniform(*centre_range)
        r = rng.uniform(*radius_range)
        out += (rng.standard_normal() + 1j * rng.standard_normal()) * bump((x - c) / r)
    return out


def solution_basis(spec, t_sigma: float, n: int = 20, seed: int = 0,
                   centre_range=(-0.3, 0.3), radius_range=(0.08, 0.15), n_bumps: int = 2,
                   real: bool = False) -> list[GridFunction]:
    """Free solutions launched from seeded random bump data on the slice ``t_sigma``."""
    g = spec.grid
    rng = np.random.default_rng(seed)
    j = g.time_index(t_sigma)
    x = g.x
    out = []
    for _ in range(n):
        comps0 = [_random_profile(rng, x, n_bumps, centre_range, radius_range) for _ in range(g.components)]
        u0 = np.stack(comps0, axis=-1)
        if real:
            u0 = u0.real.astype(complex)
        if isinstance(spec, DiracPairSpec):
            data = CauchyData(j, u0)
        else:
            comps1 = [_random_profile(rng, x, n_bumps, centre_range, radius_range) for _ in range(g.components)]
            u1 = np.stack(comps1, axis=-1)
            if real:
                u1 = u1.real.astype(complex)
            data = CauchyData(j, u0, u1)
        out.append(free_solution_from_data(spec, data))
    return out


@dataclass
class ScatteringReport:
    lam: complex
    n_basis: int
    moller_vs_series: float
    inverse_defect: float
    free_residual: float
    derivative_curve: list = field(default_factory=list)
    form_defect: float | None = None
    samples: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "lambda": [complex(self.lam).real, complex(self.lam).imag],
            "n_basis": self.n_basis,
            "moller_vs_series": self.moller_vs_series,
            "inverse_defect": self.inverse_defect,
            "free_residual": self.free_residual,
            "derivative_curve": [[l, e] for l, e in self.derivative_curve],
            "form_defect": self.form_defect,
        }


def scattering_report(cfg: ScatteringConfig, lam: complex, basis: list[GridFunction]) -> ScatteringReport:
    """Moller/series agreement, mirrored inversion and free residual over a basis (relative sup norms)."""
    dev = inv = res = 0.0
    samples = []
    for f0 in basis:
        s1 = scattering_apply(cfg, lam, f0)
        s2 = scattering_series(cfg, lam, f0)
        back = scattering_inverse(cfg, lam, s1)
        scale = f0.sup_norm()
        dev = max(dev, (s1 - s2).sup_norm() / scale)
        inv = max(inv, (back - f0).sup_norm() / scale)
        res = max(res, free_residual(cfg.spec, s1) / scale)
        samples.append(s1)
    return ScatteringReport(lam, len(basis), dev, inv, res, samples=samples)
