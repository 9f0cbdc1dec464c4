"""Green operators, Born series and scattering for wave equations with non-local kernel potentials."""
from .lattice import (GridFunction, RegionMask, SpacetimeGrid, causal_cone, inner_product, make_grid,
                      mask_sup_norm, norm, support_mask)
from .diffops import (DiracPairSpec, NormallyHyperbolicSpec, Stencil, apply_D, interior_mask, stencil_of,
                      wave_operator)
from .green import ADVANCED, RETARDED, BoundaryContaminationError, GreenOperator, dirac_green
from .kernels import (BumpProfile, DenseKernel, FiniteRankKernel, MoyalKernel, PlateauCutoff, moyal_kernel,
                      pointwise_kernel)
from .born import (PerturbedGreen, PoleError, SeriesDivergenceError, coupling_matrix, estimate_operator_norm,
                   finite_rank_resolvent, pole_scan)
from .cauchy import CauchyData, free_solution_from_data, nonexistence_probe, nonuniqueness_witness
from .scattering import ScatteringConfig, scattering_apply, scattering_series, solution_basis
from .quantize import bogoliubov_defect, car_form, ccr_form, derivation_commutator

__version__ = "0.1.0"
