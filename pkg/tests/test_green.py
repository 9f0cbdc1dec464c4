import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from ncwave.diffops import DiracPairSpec, apply_D, interior_mask, wave_operator
from ncwave.green import (BoundaryContaminationError, GreenOperator, dirac_green, dirac_green_direct,
                          opposite)
from ncwave.kernels import BumpProfile, bump
from ncwave.lattice import GridFunction, causal_cone, inner_product, make_grid, mask_sup_norm, norm, support_mask


def _src(grid, centre=(0.0, 0.1), radii=(0.1, 0.15), amp=1.0):
    return BumpProfile(centre, radii, amp).sample(grid)


def _res(spec, u, f):
    m = interior_mask(spec, 1).flags
    return np.max(np.abs((apply_D(spec, u) - f).values[m])) / f.sup_norm()


@pytest.mark.parametrize("direction", ["retarded", "advanced"])
def test_green_identities_wave(G, direction):
    f = _src(G.grid, amp=1 - 2j)
    u = G.apply(f, direction)
    assert _res(G.spec, u, f) < 1e-11
    back = G.apply(apply_D(G.spec, f), direction)
    assert (back - f).sup_norm() < 1e-11 * f.sup_norm()


@pytest.mark.parametrize("direction", ["retarded", "advanced"])
def test_green_identities_dirac(GD, direction):
    f = _src(GD.grid, amp=(1.0, 0.5j))
    u = GD.apply(f, direction)
    assert _res(GD.spec, u, f) < 1e-11
    back = GD.apply(apply_D(GD.spec, f), direction)
    assert (back - f).sup_norm() < 1e-11 * f.sup_norm()


def test_dirac_squared_route_matches_direct_march(GD):
    f = _src(GD.grid, (0.05, -0.1), (0.08, 0.1), (1.0, -2.0j))
    for d in ("retarded", "advanced"):
        a = dirac_green(GD.spec, d, f)
        b = dirac_green_direct(GD.spec, d, f)
        assert (a - b).sup_norm() < 1e-12 * a.sup_norm()


@pytest.mark.parametrize("fixture", ["G", "GD"])
def test_exact_support_in_stencil_cone(fixture, request):
    Gx = request.getfixturevalue(fixture)
    amp = 1.0 if Gx.grid.components == 1 else (1.0, 1j)
    f = _src(Gx.grid, amp=amp)
    s = support_mask(f)
    for d, name in (("retarded", "future"), ("advanced", "past")):
        u = Gx.apply(f, d)
        assert mask_sup_norm(u, ~causal_cone(s, name).dilate(1)) == 0.0


def test_adjoint_relation_symmetric(G):
    f = _src(G.grid, (-0.2, 0.0), (0.1, 0.1), 1.0 + 0.5j)
    h = _src(G.grid, (0.2, 0.1), (0.1, 0.1), 2.0 - 1j)
    a = inner_product(h, G.retarded(f))
    b = inner_product(G.advanced(h), f)
    assert abs(a - b) < 1e-12 * abs(a)
    c = inner_product(G.adjoint(h, "retarded"), f)
    assert abs(a - c) < 1e-12 * abs(a)


def test_time_reversal(G):
    f = _src(G.grid, (0.04, 0.1), (0.1, 0.1), 1.0)
    fr = f.time_reversed()
    assert (G.advanced(f) - G.retarded(fr).time_reversed()).sup_norm() < 1e-12 * G.advanced(f).sup_norm()


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.1, 0.1), st.floats(-0.2, 0.2))
def test_linearity(a, b, t1, x1):
    g = make_grid(41, 81, 0.01, 0.02, -0.2, -0.8)
    G = GreenOperator(wave_operator(g, 1.0))
    f = _src(g, (0.0, 0.0), (0.05, 0.1))
    h = _src(g, (t1, x1), (0.05, 0.1))
    lhs = G.retarded(f * a + h * b)
    rhs = G.retarded(f) * a + G.retarded(h) * b
    assert (lhs - rhs).sup_norm() <= 1e-12 * (abs(a) + abs(b) + 1) * G.retarded(f).sup_norm() + 1e-300


def _oracle(kernel, src, t, x, t_lo):
    # u(t, x) = int_{s<t} int_{|y-x|<t-s} K(t-s, x-y) f(s, y) dy ds
    return integrate.dblquad(lambda y, s: kernel(t - s, x - y) * src(s, y), t_lo, t,
                             lambda s: x - (t - s), lambda s: x + (t - s), epsabs=1e-12, epsrel=1e-10)[0]


def test_dalembert_oracle():
    g = make_grid(161, 321, 0.0025, 0.005, -0.2, -0.8)
    G = GreenOperator(wave_operator(g, 0.0))
    bp = BumpProfile((0.0, 0.0), (0.1, 0.1), 1.0)
    u = G.retarded(bp.sample(g))
    src = lambda s, y: bump(s / 0.1) * bump(y / 0.1)  # noqa: E731
    for t, x in ((0.05, 0.0), (0.2, 0.1), (0.12, -0.1)):
        ref = _oracle(lambda a, b: 0.5, src, t, x, -0.1)
        val = u.values[g.time_index(t), g.space_index(x), 0].real
        assert abs(val - ref) < 1e-3 * abs(ref)


def test_klein_gordon_oracle():
    m = 3.0
    g = make_grid(161, 321, 0.0025, 0.005, -0.2, -0.8)
    G = GreenOperator(wave_operator(g, m))
    bp = BumpProfile((0.0, 0.0), (0.1, 0.1), 1.0)
    u = G.retarded(bp.sample(g))
    src = lambda s, y: bump(s / 0.1) * bump(y / 0.1)  # noqa: E731
    kern = lambda a, b: 0.5 * special.j0(m * np.sqrt(max(a * a - b * b, 0.0)))  # noqa: E731
    for t, x in ((0.15, 0.0), (0.18, 0.12)):
        ref = _oracle(kern, src, t, x, -0.1)
        val = u.values[g.time_index(t), g.space_index(x), 0].real
        assert abs(val - ref) < 1e-3 * abs(ref)


def test_boundary_contamination_detected():
    g = make_grid(41, 41, 0.01, 0.02, -0.2, -0.4)
    G = GreenOperator(wave_operator(g, 1.0))
    f = _src(g, (-0.17, 0.25), (0.02, 0.05))
    with pytest.raises(BoundaryContaminationError):
        G.retarded(f)
    G.advanced(f)  # past cone is short and stays inside


def test_grid_mismatch(G):
    other = make_grid(11, 11, 0.01, 0.02)
    with pytest.raises(ValueError):
        G.retarded(other.zeros())


def test_zero_source(G):
    assert G.retarded(G.grid.zeros()).is_zero()
    assert opposite("retarded") == "advanced"
