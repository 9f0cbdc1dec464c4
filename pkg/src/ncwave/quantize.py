"""One-particle data of the quantized field: pairings, Bogoliubov check, derivations.

A free solution ``f0`` is represented by a test function ``f`` with
``R f = f0``; the cutoff trick gives ``f = -D(chi_- f0)``.  Pairings of
solutions are then ``<f, g0>`` (CCR) or ``i <f, gamma0 g0>`` (CAR).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diffops import DiracPairSpec, apply_D
from .green import GreenOperator
from .kernels import BumpProfile, KernelPotential, PlateauCutoff, moyal_kernel, pointwise_kernel
from .lattice import GridFunction, inner_product, norm
from .scattering import ScatteringConfig, _cut, scattering_apply

__all__ = [
    "PairingForm",
    "DerivationProbe",
    "pairing",
    "solution_pairing",
    "test_function",
    "bogoliubov_defect",
    "derivation",
    "derivation_commutator",
    "approximant_convergence",
    "ccr_form",
    "car_form",
]


@dataclass(frozen=True)
class PairingForm:
    """``kind`` is "CCR" (``<f, R h>``) or "CAR" (``sign * i <f, gamma0 R h>``)."""

    kind: str
    gamma0: np.ndarray | None = None
    sign: int = 1

    def __post_init__(self):
        if self.kind not in ("CCR", "CAR"):
            raise ValueError("pairing kind must be CCR or CAR")
        if self.kind == "CAR" and self.gamma0 is None:
            raise ValueError("CAR pairing needs gamma0")


def ccr_form() -> PairingForm:
    return PairingForm("CCR")


def car_form(spec: DiracPairSpec) -> PairingForm:
    # with R = R^+ - R^- and these gammas, i<f, g0 R f> is <= 0; the sign makes it positive
    return PairingForm("CAR", spec.gamma0, sign=-1)


def _gamma(form: PairingForm, v: GridFunction) -> GridFunction:
    return GridFunction(v.grid, np.einsum("ab,tsb->tsa", form.gamma0, v.values))


def _pair_values(form: PairingForm, f: GridFunction, g0: GridFunction) -> complex:
    if form.kind == "CCR":
        return inner_product(f, g0)
    return form.sign * 1j * inner_product(f, _gamma(form, g0))


def pairing(form: PairingForm, f: GridFunction, h: GridFunction, G: GreenOperator) -> complex:
    """Pairing of two test functions through the causal propagator ``R = R^+ - R^-``."""
    return _pair_values(form, f, G.causal(h))


def test_function(cfg: ScatteringConfig, f0: GridFunction) -> GridFunction:
    """``f = -D(chi_- f0)``, so that ``R f = f0``."""
    return apply_D(cfg.spec, _cut(f0, cfg.chi_minus())) * -1


def solution_pairing(form: PairingForm, cfg: ScatteringConfig, f0: GridFunction, g0: GridFunction) -> complex:
    return _pair_values(form, test_function(cfg, f0), g0)


def bogoliubov_defect(cfg: ScatteringConfig, lam: complex, form: PairingForm,
                      basis: Sequence[GridFunction], relative: bool = True) -> float:
    """Max over basis pairs of ``|pair(s f, s g) - pair(f, g)|``.

    Relative to the largest pairing before scattering unless ``relative`` is False.
    """
    images = [scattering_apply(cfg, lam, f0) for f0 in basis]
    tests = [test_function(cfg, f0) for f0 in basis]
    tests_s = [test_function(cfg, s) for s in images]
    worst = scale = 0.0
    for i in range(len(basis)):
        for j in range(len(basis)):
            before = _pair_values(form, tests[i], basis[j])
            after = _pair_values(form, tests_s[i], images[j])
            worst = max(worst, abs(after - before))
            scale = max(scale, abs(before))
    if relative:
        return worst / scale if scale else worst
    return worst


# -- derivations ----------------------------------------------------------------

@dataclass(eq=False)
class DerivationProbe:
    """``d_a f0 = (R^- - R^+) V_a f0`` with ``V_a`` pointwise or a Moyal approximant.

    ``a`` is a BumpProfile (or list of them); pointwise potentials sample it
    on the grid, Moyal ones use ``theta0`` and ``cutoff``.
    """

    base: GreenOperator
    a: object
    builder: str = "pointwise"
    theta0: float = 0.0
    cutoff: PlateauCutoff | None = None
    W: KernelPotential | None = field(default=None)

    def __post_init__(self):
        if self.W is not None:
            return
        bumps = (self.a,) if isinstance(self.a, BumpProfile) else tuple(self.a)
        g = self.base.grid
        if self.builder == "pointwise":
            vals = sum((bp.sample(g).values for bp in bumps), np.zeros(g.shape, dtype=complex))
            self.W = pointwise_kernel(GridFunction(g, vals))
        elif self.builder == "moyal":
            if self.cutoff is None:
                raise ValueError("Moyal builder needs a cutoff")
            self.W = moyal_kernel(bumps, self.theta0, self.cutoff, g)
        else:
            raise ValueError(f"unknown builder {self.builder!r}")


def derivation(probe: DerivationProbe, f0: GridFunction) -> GridFunction:
    Vf = probe.W.apply(f0)
    if Vf.is_zero():
        return f0.grid.zeros()
    G = probe.base
    return G.advanced(Vf) - G.retarded(Vf)


def derivation_commutator(p1: DerivationProbe, p2: DerivationProbe, basis: Sequence[GridFunction]) -> float:
    """Max over the basis of ``||d1 d2 f0 - d2 d1 f0||`` (L2 over the grid)."""
    if p1.builder != p2.builder:
        raise ValueError("both probes must use the same builder")
    worst = 0.0
    for f0 in basis:
        c = derivation(p1, derivation(p2, f0)) - derivation(p2, derivation(p1, f0))
        worst = max(worst, norm(c))
    return worst


def approximant_convergence(base: GreenOperator, a, theta0: float, cutoffs: Sequence[PlateauCutoff],
                            basis: Sequence[GridFunction], builder: str = "moyal") -> np.ndarray:
    """Table ``[k, i] = ||R W_{k+1} f_i - R W_k f_i||`` over successive cutoffs."""
    outs = []
    for cut in cutoffs:
        if builder == "moyal":
            probe = DerivationProbe(base, a, "moyal", theta0, cut)
        else:
            bumps = (a,) if isinstance(a, BumpProfile) else tuple(a)
            g = base.grid
            chi = cut.profile_t(g.t)[:, None] * cut.profile_x(g.x)[None, :]
            vals = sum((bp.sample(g).values for bp in bumps), np.zeros(g.shape, dtype=complex))
            probe = DerivationProbe(base, a, "pointwise",
                                    W=pointwise_kernel(GridFunction(g, vals * chi[..., None] ** 2)))
        outs.append([derivation(probe, f0) for f0 in basis])
    table = np.zeros((len(cutoffs) - 1, len(basis)))
    for k in range(len(cutoffs) - 1):
        for i in range(len(basis)):
            table[k, i] = norm(outs[k + 1][i] - outs[k][i])
    return table
