"""Relaxed manifolds: a metric manifold with a measure-preserving
involution and a coupling measure, and their quadratic energies.

The energy of a function u at coupling density mu is

    E(u) = D(u) + integral of (u - u o T)^2 dmu + lam * |u|^2 - 2 <f, u>,

where D is the Dirichlet energy of the (glued) metric.  The measure may
be a multiple of the volume, a density on the attachment circles, or the
"infinite" measure concentrated on those circles, which turns the
coupling term into the hard constraint u = u o T there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .geometry import HandleGeometry, HandleProfile, SpherePoint, \
    geodesic_distance
from .fem import AssembledForms, GluedMetric, MeasureSpec
from .mesh import SphereMesh, glue_boundary


class ContractError(ValueError):
    pass


@dataclass
class RelaxedManifold:
    """(manifold, metric, involution, measure): here the manifold is the
    sphere with handle annuli, the involution is the antipodal map and
    the measure is a :class:`MeasureSpec`."""

    handles: list = field(default_factory=list)
    measure: MeasureSpec = field(default_factory=MeasureSpec.infinite)
    dimension: int = 2

    def __post_init__(self):
        if self.dimension != 2:
            raise ContractError("only surface manifolds are meshed")
        self._check_disjoint()

    def _check_disjoint(self):
        pts = [h.center.coords for h in self.handles]
        pts += [-p for p in pts]
        radii = [h.R_hole for h in self.handles] * 2
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = geodesic_distance(SpherePoint(pts[i]), SpherePoint(pts[j]))
                if d <= radii[i] + radii[j]:
                    raise ContractError(
                        "attachment caps overlap or touch "
                        f"(separation {d:.3g})")

    @property
    def metric(self) -> GluedMetric:
        return GluedMetric(self.handles)


def from_handles(centers, profile: HandleProfile,
                 measure: MeasureSpec | None = None,
                 convention: str = "section3") -> RelaxedManifold:
    """Build the relaxed manifold for a family of handles placed at the
    antipodal pairs of ``centers`` (a Packing or an array of unit points),
    all sharing one profile."""
    pts = getattr(centers, "centers", centers)
    handles = [HandleGeometry(profile=profile,
                              center=SpherePoint(np.asarray(c, dtype=float)),
                              cylinder_scale_convention=convention)
               for c in np.atleast_2d(pts)]
    if measure is None:
        measure = MeasureSpec.infinite()
    return RelaxedManifold(handles=handles, measure=measure)


def _coupling_violation(forms: AssembledForms, u):
    """Max mismatch |u - u o T| over the attachment circles."""
    mesh = forms.mesh
    if mesh is None or not mesh.boundary_loops:
        return 0.0
    idx = np.concatenate([lp.vertices for lp in mesh.boundary_loops])
    return float(np.abs(u[idx] - u[mesh.pairing[idx]]).max())


def relaxed_energy(u, forms: AssembledForms, lam: float = 0.0,
                   f=None) -> float:
    """Energy of ``u`` under the assembled forms.  For the infinite
    coupling measure the value is +inf unless u = u o T on every
    attachment circle (up to rounding in the nodal values)."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != forms.n_full:
        raise ContractError("function length does not match the vertex count")
    value = float(u @ (forms.stiffness @ u))
    if forms.measure is not None \
            and forms.measure.kind == "infinite_on_boundary":
        scale = max(1.0, float(np.abs(u).max()))
        if _coupling_violation(forms, u) > 1e-12 * scale:
            return float("inf")
    elif forms.coupling is not None:
        value += float(u @ (forms.coupling @ u))
    if lam:
        value += lam * float(u @ (forms.mass @ u))
    if f is not None:
        f = np.asarray(f, dtype=float)
        value -= 2.0 * float(u @ (forms.mass @ f))
    return value


def representation_check(mesh: SphereMesh, metric=None, trials: int = 20,
                         seed: int = 0) -> dict:
    """Dirichlet energies agree between the holed mesh with the gluing
    constraint and the quotient (glued) mesh, function by function.

    The quotient mesh identifies paired boundary vertices, so its dof
    space is exactly the constrained subspace; the energies are assembled
    independently (per-element scatter with merged indices) and compared
    on random functions.  Returns max relative mismatch and a verdict.
    """
    if metric is None:
        metric = GluedMetric([])
    forms = fem.assemble(mesh, metric, MeasureSpec.infinite())
    glued, proj = glue_boundary(mesh)
    glued_forms = fem.assemble(mesh, metric, dof_map=proj)
    rng = np.random.default_rng(seed)
    worst = 0.0
    n_glued = glued_forms.n_full
    for _ in range(trials):
        v = rng.standard_normal(n_glued)
        u = v[proj]                       # constrained lift to the holed mesh
        e_holed = relaxed_energy(u, forms)
        e_glued = float(v @ (glued_forms.stiffness @ v))
        scale = max(abs(e_holed), abs(e_glued), 1e-300)
        worst = max(worst, abs(e_holed - e_glued) / scale)
    return {"trials": trials,
            "max_relative_mismatch": worst,
            "glued_vertices": n_glued,
            "valid": bool(worst <= 1e-10)}
