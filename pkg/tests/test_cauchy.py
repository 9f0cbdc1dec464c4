import numpy as np
import pytest
from scipy import integrate

from ncwave.cauchy import (CauchyData, data_norm, double_cone, extract_data, free_solution_from_data,
                           nonexistence_probe, nonuniqueness_witness)
from ncwave.diffops import DiracPairSpec, apply_D, interior_mask, wave_operator
from ncwave.green import GreenOperator
from ncwave.kernels import BumpProfile, bump
from ncwave.lattice import make_grid


def _free_res(spec, f):
    return np.max(np.abs(apply_D(spec, f).values[interior_mask(spec, 1).flags]))


def test_free_solution_and_exact_round_trip(G, grid):
    x = grid.x
    j = grid.time_index(0.0)
    d = CauchyData(j, bump((x - 0.2) / 0.3), 0.3 * bump((x + 0.1) / 0.2))
    f0 = free_solution_from_data(G.spec, d)
    assert _free_res(G.spec, f0) < 1e-10 * f0.sup_norm() / grid.dt**2
    e = extract_data(f0, j)
    assert np.max(np.abs(e.u0 - d.u0)) < 1e-14
    assert np.max(np.abs(e.u1 - d.u1)) < 1e-12
    assert data_norm(e - d, grid.dx) < 1e-12


def test_dalembert_formula_oracle():
    g = make_grid(201, 401, 0.0025, 0.005, -0.25, -1.0)
    spec = wave_operator(g, 0.0)
    j = g.time_index(0.0)
    u0 = lambda s: bump((s - 0.1) / 0.25)  # noqa: E731
    u1 = lambda s: 0.5 * bump((s + 0.1) / 0.2)  # noqa: E731
    f0 = free_solution_from_data(spec, CauchyData(j, u0(g.x), u1(g.x)))
    for t, x in ((0.2, 0.0), (0.25, 0.3), (-0.2, -0.1)):
        ref = 0.5 * (u0(x - t) + u0(x + t)) + 0.5 * np.sign(t) * integrate.quad(u1, x - abs(t), x + abs(t))[0]
        val = f0.values[g.time_index(t), g.space_index(x), 0].real
        assert abs(val - ref) < 1e-4


def test_dirac_data_solution(GD):
    g = GD.grid
    x = g.x
    u = np.zeros((g.n_space, 2), complex)
    u[:, 0] = bump(x / 0.3)
    u[:, 1] = 0.5j * bump((x - 0.1) / 0.3)
    F = free_solution_from_data(GD.spec, CauchyData(g.time_index(0.0), u))
    assert _free_res(GD.spec, F) < 1e-11 * F.sup_norm() / g.dt
    with pytest.raises(ValueError):
        free_solution_from_data(GD.spec, CauchyData(50, u, u))


def test_data_of_causal_solution_reproduces_it(G, grid):
    w2 = BumpProfile((-0.2, 0.3), (0.1, 0.15)).sample(grid)
    j = grid.time_index(0.0)
    Rw = G.causal(w2)
    f1 = free_solution_from_data(G.spec, extract_data(Rw, j))
    top = grid.time_index(-0.1) + 1
    assert np.max(np.abs((f1.values - Rw.values)[top:])) < 1e-11 * Rw.sup_norm()


def test_nonuniqueness_witness(G, grid):
    w2 = BumpProfile((-0.1, 0.0), (0.1, 0.15)).sample(grid)
    w1 = BumpProfile((-0.35, 0.05), (0.1, 0.15)).sample(grid)
    wit = nonuniqueness_witness(G, w1, w2, grid.time_index(0.0))
    assert wit.data_sup < 1e-12
    assert wit.residual < 1e-9
    assert wit.sup_ratio >= 0.1
    assert wit.construction_gap < 1e-12
    assert wit.pole_gap < 1e-12
    assert not wit.spacelike
    assert set(wit.summary()) >= {"lambda", "residual", "spacelike"}


def test_witness_preconditions(G, grid):
    w2 = BumpProfile((0.1, 0.0), (0.1, 0.15)).sample(grid)
    w1 = BumpProfile((-0.35, 0.05), (0.1, 0.15)).sample(grid)
    with pytest.raises(ValueError, match="below"):
        nonuniqueness_witness(G, w1, w2, grid.time_index(0.0))
    far = BumpProfile((-0.3, 1.2), (0.05, 0.05)).sample(grid)
    low = BumpProfile((-0.3, 0.0), (0.05, 0.05)).sample(grid)
    with pytest.raises(ValueError, match="threshold"):
        nonuniqueness_witness(G, far, low, grid.time_index(0.0))
    with pytest.raises(TypeError):
        nonuniqueness_witness(GreenOperator(DiracPairSpec(grid.with_components(2), 1.0)), w1, w2, 10)


def test_double_cone():
    g = make_grid(21, 41, 0.05, 0.05, -0.5, -1.0)
    m = double_cone(g, 10, (-0.2, 0.2))
    assert m.flags[10].sum() == 9 and m.flags[14].sum() == 1 and not m.flags[15].any()


PROBE = dict(w1=BumpProfile.unit((0.0, -0.6), (0.15, 0.15)), w2=BumpProfile.unit((0.0, 0.6), (0.15, 0.15)),
             t_sigma=0.0, lam=0.1, cones=((-1.0, -0.2), (0.2, 1.0)))


def test_nonexistence_probe(grid):
    u0 = lambda x: bump((x + 0.6) / 0.3)  # noqa: E731
    cert = nonexistence_probe(grid, 1.0, PROBE["w1"], PROBE["w2"], u0, 0.0, 0.1, levels=(0, 1),
                              cones=PROBE["cones"])
    assert not cert.inconclusive
    assert abs(cert.c1) > 1e-3 and cert.rw2_norm > 1e-3
    assert cert.c0 > 1e-5
    assert cert.variation < 0.2
    assert max(r for _, r in cert.control_curve) < 1e-10
    d = cert.to_dict()
    assert len(d["residual_curve"]) == 2


def test_probe_inconclusive_cases(grid):
    zero = lambda x: 0 * x  # noqa: E731
    cert = nonexistence_probe(grid, 1.0, PROBE["w1"], PROBE["w2"], zero, 0.0, 0.1, levels=(0,))
    assert cert.inconclusive and "c1" in cert.reason
    u0 = lambda x: bump((x + 0.6) / 0.3)  # noqa: E731
    cert = nonexistence_probe(grid, 1.0, PROBE["w1"], PROBE["w2"].scaled(0.0), u0, 0.0, 0.1, levels=(0,))
    assert cert.inconclusive and "w2" in cert.reason


def test_probe_geometry_checked(grid):
    u0 = lambda x: bump((x + 0.6) / 0.3)  # noqa: E731
    with pytest.raises(ValueError):
        nonexistence_probe(grid, 1.0, PROBE["w1"], PROBE["w2"], u0, 0.0, 0.1, levels=(0,),
                           cones=((-1.0, 0.1), (0.0, 1.0)))
    with pytest.raises(ValueError):
        nonexistence_probe(grid, 1.0, PROBE["w2"], PROBE["w1"], u0, 0.0, 0.1, levels=(0,), cones=PROBE["cones"])
