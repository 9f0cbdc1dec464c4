import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncwave.born import (NormConvergenceError, NormEstimator, PerturbedGreen, PoleError, SeriesDivergenceError,
                         coupling_matrix, estimate_operator_norm, finite_rank_resolvent, perturbed_residual,
                         pole_scan, series_terms)
from ncwave.diffops import interior_mask
from ncwave.kernels import BumpProfile, FiniteRankKernel
from ncwave.lattice import causal_cone, inner_product, mask_sup_norm, support_mask


@pytest.fixture(scope="module")
def rank_one(G):
    g = G.grid
    w1 = BumpProfile((0.15, 0.05), (0.1, 0.15), 1.0).sample(g)
    w2 = BumpProfile((-0.15, 0.0), (0.1, 0.15), 1.0).sample(g)
    W = FiniteRankKernel(g, ((w1, w2),))
    M = coupling_matrix(G, W, "retarded")[0, 0]
    return W.scaled(1.0 / abs(M))


def _f(G, c=(-0.3, -0.1), r=(0.08, 0.1), amp=1.0):
    return BumpProfile(c, r, amp).sample(G.grid)


def test_rank_one_closed_form(G, rank_one):
    W = rank_one
    (w1, w2), = W.pairs
    f = _f(G)
    Rf, Rw2 = G.retarded(f), G.retarded(w2)
    M = inner_product(w1, Rw2)
    for lam in (0.3, -0.4 + 0.2j, 2.5):
        ref = Rf - Rw2 * (lam * inner_product(w1, Rf) / (1 + lam * M))
        got = finite_rank_resolvent(G, W, "retarded", lam, f)
        assert (got - ref).sup_norm() < 1e-12 * ref.sup_norm()
        assert perturbed_residual(G, W, lam, got, f) < 1e-11


def test_series_matches_exact_inside_radius(G, rank_one):
    f = _f(G, amp=1 - 1j)
    for lam in (0.2, -0.5, 0.3j):
        s = PerturbedGreen(G, rank_one, lam).retarded(f)
        e = PerturbedGreen(G, rank_one, lam, method="exact").retarded(f)
        assert (s - e).sup_norm() < 1e-10 * e.sup_norm()


def test_term_ratio_tracks_radius(G, rank_one):
    _, info = series_terms(G, rank_one, "retarded", 0.6, _f(G), M=20, tol=0.0)
    assert np.allclose(info.ratios()[2:], 0.6, rtol=1e-10)
    assert not info.converged


def test_series_regime_enforced(G, rank_one):
    with pytest.raises(SeriesDivergenceError):
        PerturbedGreen(G, rank_one, 0.96).retarded(_f(G))


def test_pole_raises(G, rank_one):
    M = coupling_matrix(G, rank_one, "retarded")[0, 0]
    with pytest.raises(PoleError):
        finite_rank_resolvent(G, rank_one, "retarded", -1 / M, _f(G))


def test_rank_one_pole_scan(G, rank_one):
    M = coupling_matrix(G, rank_one, "retarded")[0, 0]
    poles, dets = pole_scan(G, rank_one, "retarded", np.linspace(-3, 3, 301) + 0.0137)
    assert len(poles) == 1 and abs(poles[0] - (-1 / M)) < 1e-10
    assert dets.shape == (301,)


def test_rank_two_poles_are_inverse_eigenvalues(G):
    g = G.grid
    up1 = BumpProfile((0.15, 0.05), (0.1, 0.15), 1.0).sample(g)
    up2 = BumpProfile((0.2, -0.2), (0.08, 0.1), 0.7).sample(g)
    lo1 = BumpProfile((-0.15, 0.0), (0.1, 0.15), 1.0).sample(g)
    lo2 = BumpProfile((-0.2, -0.25), (0.08, 0.1), 1.3).sample(g)
    W = FiniteRankKernel(g, ((up1, lo1), (up2, lo2)))
    M = coupling_matrix(G, W, "retarded")
    W = W.scaled(1.0 / np.abs(M).max())
    mu = np.linalg.eigvals(coupling_matrix(G, W, "retarded"))
    expected = -1 / mu
    span = 1.5 * np.abs(expected).max()
    re = np.linspace(-span, span, 241)
    im = np.linspace(-span / 2, span / 2, 121) + 1e-3
    poles, _ = pole_scan(G, W, "retarded", re[None, :] + 1j * im[:, None])
    assert len(poles) == 2
    for e in expected:
        assert min(abs(p - e) for p in poles) < 1e-8 * abs(e)


def test_zero_kernel_has_no_poles(G):
    z = G.grid.zeros()
    W = FiniteRankKernel(G.grid, ((z, z),))
    poles, dets = pole_scan(G, W, "retarded", np.linspace(-2, 2, 11))
    assert poles == [] and np.allclose(dets, 1)


def test_dense_kernel_series_matches_finite_rank(G, rank_one):
    D = rank_one.to_dense()
    f = _f(G)
    a = PerturbedGreen(G, rank_one, 0.4, rho=1.0).retarded(f)
    b = PerturbedGreen(G, D, 0.4, rho=1.0).retarded(f)
    assert (a - b).sup_norm() < 1e-11 * a.sup_norm()


@given(st.floats(-0.35, 0.35), st.floats(-0.4, 0.4), st.sampled_from(["retarded", "advanced"]),
       st.sampled_from(["series", "exact"]))
def test_support_properties(G, rank_one, t, x, direction, method):
    f = _f(G, (t, x), (0.05, 0.08))
    K = rank_one.support()
    name = "future" if direction == "retarded" else "past"
    u = PerturbedGreen(G, rank_one, 0.5, method=method).apply(direction, f)
    base = G.apply(f, direction)
    sf = support_mask(f)
    assert mask_sup_norm(u, ~causal_cone(sf | K, name).dilate(1)) == 0.0
    assert mask_sup_norm(u - base, ~causal_cone(K, name).dilate(1)) == 0.0
    if not (causal_cone(sf, name).dilate(1) & K).any():
        assert np.array_equal(u.values, base.values)


def test_adjoint_relation_symmetric_kernel(G):
    g = G.grid
    w = BumpProfile((0.0, 0.0), (0.15, 0.2), 1.0).sample(g)
    W = FiniteRankKernel(g, ((w, w),))
    rho = abs(coupling_matrix(G, W, "retarded")[0, 0])
    P = PerturbedGreen(G, W, 0.5 / rho)
    rng = np.random.default_rng(5)
    for _ in range(5):
        f = _f(G, (rng.uniform(-0.3, 0), rng.uniform(-0.3, 0.3)), (0.05, 0.08), complex(*rng.standard_normal(2)))
        h = _f(G, (rng.uniform(0, 0.3), rng.uniform(-0.3, 0.3)), (0.05, 0.08), complex(*rng.standard_normal(2)))
        a = inner_product(h, P.retarded(f))
        b = inner_product(P.advanced(h), f)
        assert abs(a - b) < 1e-10 * max(abs(a), 1e-300) + 1e-300


def test_norm_estimates(G, rank_one):
    est = estimate_operator_norm(NormEstimator((-0.45, 0.45)), G, rank_one, "retarded")
    assert abs(est.rho - 1.0) < 1e-8
    assert est.sigma >= est.rho * (1 - 1e-8)
    with pytest.raises(NormConvergenceError):
        estimate_operator_norm(NormEstimator((-0.45, 0.45), max_iter=1, tol=1e-16), G, rank_one, "retarded",
                               strict=True)
    with pytest.raises(ValueError):
        estimate_operator_norm(NormEstimator((0.0, 0.1)), G, rank_one, "retarded")


def test_dirac_perturbed_identity(GD):
    g = GD.grid
    w = BumpProfile((0.0, 0.0), (0.1, 0.15), (1.0, 0.5)).sample(g)
    v = BumpProfile((-0.2, 0.0), (0.1, 0.15), (0.3, 1.0)).sample(g)
    W = FiniteRankKernel(g, ((w, v),))
    rho = abs(coupling_matrix(GD, W, "retarded")[0, 0])
    f = BumpProfile((-0.3, 0.1), (0.06, 0.1), (1.0, -1j)).sample(g)
    u = PerturbedGreen(GD, W, 0.5 / rho).retarded(f)
    assert perturbed_residual(GD, W, 0.5 / rho, u, f) < 1e-10
    assert interior_mask(GD.spec).count() > 0
