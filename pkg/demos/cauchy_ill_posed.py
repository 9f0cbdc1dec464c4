"""The Cauchy problem with a non-local kernel is not well posed.

If w1 lies in the causal past of w2 and both sit above the Cauchy slice,
u = R- w2 has zero data on the slice and solves (D + lambda W) u = 0 at the
special coupling lambda = -1/<w1, R- w2>.  So zero data does not force a
zero solution.
"""
from ncwave import BumpProfile, GreenOperator, make_grid, wave_operator
from ncwave.cauchy import nonuniqueness_witness

g = make_grid(101, 201, 0.01, 0.02, -0.5, -2.0)
G = GreenOperator(wave_operator(g, 1.0))

w2 = BumpProfile((-0.1, 0.0), (0.1, 0.15), 1.0).sample(g)
w1 = BumpProfile((-0.35, 0.05), (0.1, 0.15), 1.0).sample(g)
wit = nonuniqueness_witness(G, w1, w2, g.time_index(0.0))

print(f"coupling lambda         {complex(wit.lam):.6g}")
print(f"data on the slice       {wit.data_sup:.2e}")
print(f"equation residual       {wit.residual:.2e}")
print(f"sup |u| / sup |R- w2|   {wit.sup_ratio:.3f}")
print(f"spacelike kernel pair   {wit.spacelike}")
