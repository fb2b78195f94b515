"""Capacity of spherical condensers: closed-form radial oracle and a
finite-element minimizer on a structured polar annulus mesh.

cap(r, R) = inf { Dirichlet energy : u = 1 on the inner circle of
geodesic radius r, u = 0 on the outer circle of radius R }.  The radial
reduction gives cap = c_d / int_r^R sin(t)^(1-d) dt with c_d the area of
S^(d-1); for d = 2 this is 2*pi / log(tan(R/2)/tan(r/2)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from . import fem
from .fem import RoundMetric
from .mesh import SphereMesh, _angles_about, _ring_points, _tangent_frame, \
    _orient_outward, _zip_rings
from .packing import sphere_area


class ContractError(ValueError):
    pass


@dataclass
class Condenser:
    inner_radius: float
    outer_radius: float
    d: int = 2

    def __post_init__(self):
        if not (0.0 < self.inner_radius < self.outer_radius
                <= np.pi / 2 + 1e-15):
            raise ContractError(
                "need 0 < inner_radius < outer_radius <= pi/2")
        if self.d < 2:
            raise ContractError("dimension must be >= 2")


def capacity_exact(c: Condenser) -> float:
    r, R, d = c.inner_radius, c.outer_radius, c.d
    if d == 2:
        return 2.0 * np.pi / np.log(np.tan(R / 2.0) / np.tan(r / 2.0))
    integral, _ = scipy.integrate.quad(lambda t: np.sin(t) ** (1 - d), r, R)
    return sphere_area(d - 1) / integral


def _annulus_mesh(r: float, R: float, resolution: float) -> SphereMesh:
    """Structured polar triangulation of the band r <= theta <= R around
    the north pole, geometrically graded toward the inner circle."""
    growth = 1.0 + resolution / max(r, resolution)
    growth = min(max(growth, 1.05), 2.0)
    radii = [r]
    while True:
        th = radii[-1]
        step = min(th * (growth - 1.0), resolution)
        if th + step >= R:
            break
        radii.append(th + step)
    radii.append(R)
    c = np.array([0.0, 0.0, 1.0])
    e1, e2 = _tangent_frame(c)
    counts = []
    for k, th in enumerate(radii):
        gap = (radii[k + 1] - radii[k]) if k + 1 < len(radii) \
            else (radii[k] - radii[k - 1])
        n = int(np.ceil(2.0 * np.pi * np.sin(th) / gap))
        n = max(12, n if not counts
                else int(np.clip(n, (counts[-1] + 1) // 2, 2 * counts[-1])))
        counts.append(n)
    pts, ring_ids = [], []
    total = 0
    for k, (th, n) in enumerate(zip(radii, counts)):
        pts.append(_ring_points(c, e1, e2, th, n, offset=0.5 * (k % 2)))
        ring_ids.append(np.arange(total, total + n, dtype=np.int64))
        total += n
    verts = np.vstack(pts)
    tris = []
    for a_ids, b_ids in zip(ring_ids[:-1], ring_ids[1:]):
        ang_a = _angles_about(c, e1, e2, verts[a_ids])
        ang_b = _angles_about(c, e1, e2, verts[b_ids])
        tris.extend(_zip_rings(ang_a, a_ids, ang_b, b_ids))
    tris = _orient_outward(verts, np.asarray(tris, dtype=np.int64))
    mesh = SphereMesh(vertices=verts, triangles=tris,
                      pairing=np.arange(len(verts)))
    mesh._inner_ring = ring_ids[0]
    mesh._outer_ring = ring_ids[-1]
    return mesh


def capacity_fem(c: Condenser, resolution: float | None = None) -> float:
    """Dirichlet energy of the P1 condenser potential on a graded polar
    mesh; Galerkin, so the value bounds capacity_exact from above."""
    if c.d != 2:
        raise ContractError("the finite-element path is two-dimensional")
    r, R = c.inner_radius, c.outer_radius
    if resolution is None:
        resolution = r / 4.0
    if resolution <= 0:
        raise ContractError("resolution must be positive")
    mesh = _annulus_mesh(r, R, resolution)
    forms = fem.assemble(mesh, RoundMetric())
    K = forms.stiffness.tocsr()
    n = mesh.n_vertices
    u = np.zeros(n)
    u[mesh._inner_ring] = 1.0
    fixed = np.zeros(n, dtype=bool)
    fixed[mesh._inner_ring] = True
    fixed[mesh._outer_ring] = True
    free = np.where(~fixed)[0]
    if len(free):
        import scipy.sparse.linalg as spla
        Kff = K[free][:, free].tocsc()
        rhs = -np.asarray(K[free][:, np.where(fixed)[0]]
                          @ u[np.where(fixed)[0]]).ravel()
        u[free] = spla.spsolve(Kff, rhs)
    return float(u @ (K @ u))
