"""Spectra of spheres with many small handles.

A numpy/scipy library that places antipodally symmetric families of small
handles on the round sphere, represents the glued surfaces as metric
manifolds with a non-local coupling term, computes their Laplace spectra
with P1 finite elements, and compares them against the closed-form limit
operator whose odd spectral sector is shifted by the handle density.
"""

from .capacity import Condenser, capacity_exact, capacity_fem
from .eigen import (EigenResult, harmonic_extension, lowest_eigenpairs,
                    parity_scores, principal_angles, resolvent_values)
from .fem import (AssembledForms, GluedMetric, MeasureSpec, RoundMetric,
                  assemble, dirichlet_energy, solve_resolvent)
from .geometry import (HandleGeometry, HandleProfile, SpherePoint, antipodal,
                       geodesic_distance, profile_validate)
from .harness import (SweepConfig, SweepReport, epsilon_schedule, fit_shift,
                      gamma_check, radii_from_scaling, run_sweep)
from .limit import (LimitSpectrum, coupling_shift, euler_solve,
                    galerkin_limit_check, limit_spectrum, parity_decompose,
                    real_sph_harm)
from .mesh import (SphereMesh, build_mesh, fill_holes, glue_boundary,
                   icosphere, pairing_check)
from .packing import Packing, build_packing, cap_volume, count_bound
from .relaxed_form import (RelaxedManifold, from_handles, relaxed_energy,
                           representation_check)

__version__ = "1.0.0"

__all__ = [
    "AssembledForms", "Condenser", "EigenResult", "GluedMetric",
    "HandleGeometry", "HandleProfile", "LimitSpectrum", "MeasureSpec",
    "Packing", "RelaxedManifold", "RoundMetric", "SpherePoint",
    "SphereMesh", "SweepConfig", "SweepReport", "antipodal", "assemble",
    "build_mesh", "build_packing", "cap_volume", "capacity_exact",
    "capacity_fem", "count_bound", "coupling_shift", "dirichlet_energy",
    "epsilon_schedule", "euler_solve", "fill_holes", "fit_shift",
    "from_handles", "galerkin_limit_check", "gamma_check",
    "geodesic_distance", "glue_boundary", "harmonic_extension",
    "icosphere", "limit_spectrum", "lowest_eigenpairs", "pairing_check",
    "parity_decompose", "parity_scores", "principal_angles",
    "profile_validate", "radii_from_scaling", "real_sph_harm",
    "relaxed_energy", "representation_check", "resolvent_values",
    "run_sweep", "solve_resolvent",
]
