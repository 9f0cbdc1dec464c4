"""Moyal-product potentials as cut-off kernels.

W h = a * h (Moyal product) is non-local in time.  We cut it off with
plateau functions of growing size and watch the induced derivations settle,
then compare commutators of two derivations against the pointwise case.
"""
import numpy as np

from ncwave import BumpProfile, GreenOperator, PlateauCutoff, make_grid, wave_operator
from ncwave.quantize import DerivationProbe, approximant_convergence, derivation_commutator
from ncwave.scattering import solution_basis

g = make_grid(201, 351, 0.01, 0.02, -1.0, -3.5)
G = GreenOperator(wave_operator(g, 1.0))
basis = solution_basis(G.spec, 0.0, n=2, seed=3, radius_range=(0.3, 0.45))

a = BumpProfile((0.0, 0.0), (0.3, 0.3), 1.0)
cuts = [PlateauCutoff((0.0, 0.0), (h, h), (0.2, 0.2)) for h in (0.25, 0.4, 0.55, 0.7)]
tab = approximant_convergence(G, a, 0.1, cuts, basis)
print("successive differences per cutoff level:\n", np.array2string(tab, precision=3))
print("ratios:", np.round(tab[:-1] / tab[1:], 2).tolist())

a1 = BumpProfile((0.0, -0.3), (0.2, 0.2), 1.0)
a2 = BumpProfile((0.0, 0.3), (0.2, 0.2), 1.0)
cut = PlateauCutoff((0.0, 0.0), (0.7, 0.7), (0.2, 0.2))
cp = derivation_commutator(DerivationProbe(G, a1), DerivationProbe(G, a2), basis)
cm = derivation_commutator(DerivationProbe(G, a1, "moyal", 0.1, cut), DerivationProbe(G, a2, "moyal", 0.1, cut), basis)
print(f"commutator norm: pointwise {cp:.4e}, Moyal {cm:.4e}")
