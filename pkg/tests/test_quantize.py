import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncwave.diffops import DiracPairSpec
from ncwave.experiments import _radius
from ncwave.green import ADVANCED, RETARDED, GreenOperator
from ncwave.kernels import BumpProfile, FiniteRankKernel, PlateauCutoff
from ncwave.lattice import GridFunction, make_grid
from ncwave.quantize import (DerivationProbe, PairingForm, approximant_convergence, bogoliubov_defect, car_form,
                             ccr_form, derivation, derivation_commutator, pairing, solution_pairing)
from ncwave.scattering import ScatteringConfig, solution_basis

centres = st.tuples(st.floats(-0.2, 0.2), st.floats(-0.5, 0.5))


def _src(g, c, amp):
    return BumpProfile(c, (0.08, 0.12), amp).sample(g)


@given(centres, centres)
def test_ccr_pairing_antihermitian(G, c1, c2):
    f = _src(G.grid, c1, 1.0 + 0.5j)
    h = _src(G.grid, c2, -0.3 + 1.0j)
    form = ccr_form()
    a, b = pairing(form, f, h, G), pairing(form, h, f, G)
    assert abs(a + np.conj(b)) < 1e-12 * max(abs(a), 1e-3)
    assert abs(pairing(form, f, f, G).real) < 1e-12


@given(centres, centres)
def test_car_pairing_hermitian_positive(GD, c1, c2):
    form = car_form(GD.spec)
    f = _src(GD.grid, c1, (1.0, 0.5j))
    h = _src(GD.grid, c2, (0.2, -1.0))
    a, b = pairing(form, f, h, GD), pairing(form, h, f, GD)
    assert abs(a - np.conj(b)) < 1e-12 * max(abs(a), 1e-3)
    p = pairing(form, f, f, GD)
    assert abs(p.imag) < 1e-12 * abs(p) and p.real > 0


def test_form_validation():
    with pytest.raises(ValueError):
        PairingForm("XYZ")
    with pytest.raises(ValueError):
        PairingForm("CAR")


@pytest.fixture(scope="module")
def wave_setup(G):
    g = G.grid
    w1 = BumpProfile.unit((0.1, 0.05), (0.08, 0.15)).sample(g)
    w2 = BumpProfile.unit((-0.1, 0.0), (0.08, 0.15)).sample(g)
    basis = solution_basis(G.spec, -0.2, n=4, seed=1, real=True)
    return w1, w2, basis


def _rho(G, W):
    return max(_radius(G, W, RETARDED), _radius(G, W, ADVANCED))


def test_solution_pairing_matches_symplectic_form(G, wave_setup):
    # on free solutions the pairing is the conserved symplectic form
    _, _, basis = wave_setup
    g = G.grid
    W = FiniteRankKernel(g, ())
    a = ScatteringConfig(G, W, -0.2, 0.2)
    b = ScatteringConfig(G, W, -0.1, 0.2)
    for f0 in basis[:2]:
        for g0 in basis[2:]:
            p, q = solution_pairing(ccr_form(), a, f0, g0), solution_pairing(ccr_form(), b, f0, g0)
            assert abs(p - q) < 1e-10 * abs(p)


def test_bogoliubov_symmetric_vs_not(G, wave_setup):
    w1, w2, basis = wave_setup
    Ws, Wn = FiniteRankKernel(G.grid, ((w1, w1),)), FiniteRankKernel(G.grid, ((w1, w2),))
    sym = ScatteringConfig(G, Ws, -0.2, 0.2)
    non = ScatteringConfig(G, Wn, -0.2, 0.2)
    assert bogoliubov_defect(sym, 0.5 / _rho(G, Ws), ccr_form(), basis) < 1e-9
    assert bogoliubov_defect(non, 0.5 / _rho(G, Wn), ccr_form(), basis) > 1e-3
    assert bogoliubov_defect(non, 0.0, ccr_form(), basis) < 1e-12


def test_bogoliubov_dirac():
    # the coarse Dirac lattice disperses widely; give it room in x
    g = make_grid(101, 301, 0.01, 0.02, -0.5, -3.0).with_components(2)
    GD = GreenOperator(DiracPairSpec(g, 1.0))
    w = BumpProfile((0.0, 0.0), (0.1, 0.15), (1.0, 0.5)).sample(g)
    gw = GridFunction(g, np.einsum("ab,tsb->tsa", GD.spec.gamma0, w.values))
    basis = solution_basis(GD.spec, -0.2, n=3, seed=2)
    Ws, Wn = FiniteRankKernel(g, ((w, gw),)), FiniteRankKernel(g, ((w, w),))
    form = car_form(GD.spec)
    sym = ScatteringConfig(GD, Ws, -0.2, 0.2)
    non = ScatteringConfig(GD, Wn, -0.2, 0.2)
    assert bogoliubov_defect(sym, 0.5 / _rho(GD, Ws), form, basis) < 1e-9
    assert bogoliubov_defect(non, 0.5 / _rho(GD, Wn), form, basis) > 1e-3


def test_pointwise_derivations_commute(G, wave_setup):
    _, _, basis = wave_setup
    a1 = BumpProfile((0.0, -0.3), (0.2, 0.2), 1.0)
    a2 = BumpProfile((0.0, 0.3), (0.2, 0.2), 1.0)
    p1, p2 = DerivationProbe(G, a1), DerivationProbe(G, a2)
    size = max(derivation(p1, derivation(p2, f)).sup_norm() for f in basis)
    assert derivation_commutator(p1, p2, basis) > 0.0
    assert size > 0
    with pytest.raises(ValueError):
        derivation_commutator(p1, DerivationProbe(G, a1, "moyal", 0.1, PlateauCutoff((0, 0), (0.3, 0.3), (0.1, 0.1))),
                              basis)
    with pytest.raises(ValueError):
        DerivationProbe(G, a1, "moyal", 0.1)
    with pytest.raises(ValueError):
        DerivationProbe(G, a1, "other")


def test_approximant_convergence_pointwise(G, wave_setup):
    _, _, basis = wave_setup
    a = BumpProfile((0.0, 0.0), (0.2, 0.2), 1.0)
    cuts = [PlateauCutoff((0.0, 0.0), (h, h), (0.1, 0.1)) for h in (0.15, 0.3, 0.35)]
    tab = approximant_convergence(G, a, 0.0, cuts, basis[:2], builder="pointwise")
    assert tab.shape == (2, 2)
    # the last two cutoffs are both 1 on the support of a
    assert np.all(tab[0] > 0) and np.all(tab[1] < 1e-13 * tab[0])
