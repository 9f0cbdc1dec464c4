"""Born series for a rank-one kernel, and where it stops converging.

A rank-one kernel W f = <w1, f> w2 makes the perturbed retarded Green
operator explicit: its only pole in lambda sits at -1/<w1, R+ w2>.  We
watch the Born term norms shrink inside that radius and grow outside it,
then let pole_scan find the pole from the determinant alone.
"""
import numpy as np

from ncwave import BumpProfile, FiniteRankKernel, GreenOperator, make_grid, wave_operator
from ncwave.born import coupling_matrix, pole_scan, series_terms

g = make_grid(101, 201, 0.01, 0.02, -0.5, -2.0)
G = GreenOperator(wave_operator(g, 1.0))

w1 = BumpProfile.unit((0.15, 0.05), (0.1, 0.15)).sample(g)
w2 = BumpProfile.unit((-0.15, 0.0), (0.1, 0.15)).sample(g)
W = FiniteRankKernel(g, ((w1, w2),))

M = coupling_matrix(G, W, "retarded")[0, 0]
lam_star = -1.0 / M
print(f"<w1, R+ w2> = {M:.6g}, predicted pole at lambda* = {lam_star:.6g}")

f = BumpProfile((-0.3, 0.1), (0.05, 0.08), 1.0).sample(g)
for frac in (0.5, 0.9, 1.1):
    _, info = series_terms(G, W, "retarded", frac * lam_star, f, M=40, tol=0.0)
    t = np.array(info.term_norms)
    print(f"|lambda| = {frac:.1f}|lambda*|: term ratio {t[-1] / t[-2]:.4f}, last term {t[-1]:.3e}")

grid = np.linspace(-2 * abs(lam_star), 2 * abs(lam_star), 401)
poles, _ = pole_scan(G, W, "retarded", grid)
print("poles found by scanning det(1 + lambda M):", np.round(np.real(poles), 10))
print("error against the closed form:", abs(poles[0] - lam_star))
