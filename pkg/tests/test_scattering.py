import numpy as np
import pytest

from ncwave.kernels import BumpProfile, FiniteRankKernel
from ncwave.lattice import norm
from ncwave.scattering import (ScatteringConfig, derivative_at_zero, free_residual, scattering_apply,
                               scattering_inverse, scattering_report, scattering_series, solution_basis)


@pytest.fixture(scope="module")
def setup(G):
    g = G.grid
    w1 = BumpProfile.unit((0.1, 0.05), (0.08, 0.15)).sample(g)
    w2 = BumpProfile.unit((-0.1, 0.0), (0.08, 0.15)).sample(g)
    W = FiniteRankKernel(g, ((w1, w2),))
    sc = ScatteringConfig(G, W, -0.2, 0.2)
    M = np.vdot(w1.values, G.retarded(w2).values) * g.cell
    basis = solution_basis(G.spec, -0.2, n=4, seed=0)
    return sc, w1, w2, M, basis


def test_rank_one_closed_form(setup, G):
    sc, w1, w2, M, basis = setup
    lam = 0.4 / abs(M)
    Rw2 = G.advanced(w2) - G.retarded(w2)
    for f0 in basis:
        c = np.vdot(w1.values, f0.values) * G.grid.cell
        ref = f0 + Rw2 * (lam * c / (1 + lam * M))
        s = scattering_apply(sc, lam, f0)
        assert (s - ref).sup_norm() < 1e-10 * f0.sup_norm()
        assert (scattering_series(sc, lam, f0) - ref).sup_norm() < 1e-10 * f0.sup_norm()


def test_report_and_inverse(setup):
    sc, _, _, M, basis = setup
    lam = -0.3 / abs(M)
    rep = scattering_report(sc, lam, basis)
    assert rep.moller_vs_series < 1e-10
    assert rep.inverse_defect < 1e-10
    assert rep.free_residual < 1e-9
    assert rep.to_dict()["n_basis"] == len(basis)
    back = scattering_apply(sc, lam, scattering_inverse(sc, lam, basis[0]))
    assert (back - basis[0]).sup_norm() < 1e-10 * basis[0].sup_norm()


def test_identity_at_zero(setup):
    sc, _, _, _, basis = setup
    for f0 in basis:
        assert (scattering_apply(sc, 0.0, f0) - f0).sup_norm() < 1e-12 * f0.sup_norm()


def test_derivative_is_first_order(setup):
    sc, _, _, M, basis = setup
    f0 = basis[1]
    d = derivative_at_zero(sc, f0)
    lams = np.array([1e-2, 5e-3, 2.5e-3]) / abs(M)
    errs = [norm((scattering_apply(sc, l, f0) - f0) / l - d) for l in lams]
    slope = np.polyfit(np.log(lams), np.log(errs), 1)[0]
    assert abs(slope - 1.0) < 0.05


def test_series_divergence_guard(setup):
    from ncwave.born import SeriesDivergenceError

    sc, _, _, M, basis = setup
    with pytest.raises(SeriesDivergenceError):
        scattering_series(sc, 2.0 / abs(M), basis[0])


def test_images_are_free(setup, G):
    sc, _, _, M, basis = setup
    for f0 in basis:
        assert free_residual(G.spec, f0) < 1e-9 * f0.sup_norm()


def test_config_validation(G):
    g = G.grid
    w = BumpProfile.unit((0.0, 0.0), (0.1, 0.1)).sample(g)
    W = FiniteRankKernel(g, ((w, w),))
    with pytest.raises(ValueError):
        ScatteringConfig(G, W, 0.2, -0.2)
    with pytest.raises(ValueError, match="between"):
        ScatteringConfig(G, W, -0.05, 0.2)
    with pytest.raises(ValueError, match="inside"):
        ScatteringConfig(G, W, -0.45, 0.2)


def test_basis_deterministic(G):
    a = solution_basis(G.spec, -0.2, n=2, seed=5)
    b = solution_basis(G.spec, -0.2, n=2, seed=5)
    c = solution_basis(G.spec, -0.2, n=2, seed=6)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert not np.array_equal(a[0].values, c[0].values)
    r = solution_basis(G.spec, -0.2, n=1, seed=5, real=True)[0]
    assert np.max(np.abs(r.values.imag)) < 1e-12 * r.sup_norm()
