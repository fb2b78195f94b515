"""P1 finite elements on sphere meshes under a piecewise Lipschitz metric.

Each triangle is assembled in its own gnomonic chart (tangent plane at the
centroid direction) with one-point quadrature of the metric, which is all
the regularity of a piecewise continuous metric supports; the mesh is
built so that no triangle straddles an attachment circle.

The non-local coupling of the relaxed formulation enters either as a
sparse penalty matrix built from the antipodal vertex pairing or, for the
"infinite" coupling measure, as an exact identification of paired
boundary degrees of freedom (constraint reduction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import cylinder_metric_at


class AssemblyError(ValueError):
    pass


class ContractError(ValueError):
    pass


def _angles_to(points, center):
    """Geodesic distances from unit ``points`` (n,3) to unit ``center``,
    stable for small separations."""
    c = np.cross(points, center[None, :])
    s = np.linalg.norm(c, axis=1)
    d = points @ center
    return np.arctan2(s, d)


class RoundMetric:
    """The standard metric of S^2 (identity form on tangent planes)."""

    handles = ()

    def ambient_forms(self, points):
        n = len(points)
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()


class GluedMetric:
    """Round metric away from the attachment annuli, pull-back of the
    cylinder metric inside them (in geodesic polar form around each
    handle center)."""

    def __init__(self, handles):
        self.handles = list(handles)

    def ambient_forms(self, points):
        points = np.asarray(points, dtype=float)
        Q = np.broadcast_to(np.eye(3), (len(points), 3, 3)).copy()
        for h in self.handles:
            prof = h.profile
            cyl = cylinder_metric_at(0.5, prof, h.cylinder_scale_convention)
            for c in (h.center.coords, -h.center.coords):
                theta = _angles_to(points, c)
                if np.any(theta < h.r_hole * (1 - 1e-9)):
                    raise AssemblyError("evaluation point inside a deleted cap")
                mask = theta <= h.R_hole
                if not np.any(mask):
                    continue
                th = np.clip(theta[mask], h.r_hole, h.R_hole)
                p = points[mask]
                e_t = c[None, :] - (p @ c)[:, None] * p
                e_t /= np.linalg.norm(e_t, axis=1, keepdims=True)
                e_w = np.cross(p, e_t)
                g_tt = cyl.radial * (np.cos(th) / prof.slope) ** 2
                g_ww = cyl.angular / np.sin(th) ** 2
                Q[mask] = (g_tt[:, None, None]
                           * np.einsum("ni,nj->nij", e_t, e_t)
                           + g_ww[:, None, None]
                           * np.einsum("ni,nj->nij", e_w, e_w))
        return Q


def check_no_straddle(mesh, metric):
    """No triangle may have vertices strictly on both sides of an
    attachment circle; the metric jumps there."""
    for h in getattr(metric, "handles", ()):
        for c in (h.center.coords, -h.center.coords):
            theta = _angles_to(mesh.vertices, c)
            R = h.R_hole
            tol = max(1e-12, 1e-7 * R)
            tv = theta[mesh.triangles]
            bad = np.where((tv.min(axis=1) < R - tol)
                           & (tv.max(axis=1) > R + tol))[0]
            if len(bad):
                raise AssemblyError(
                    f"triangle {bad[0]} straddles the attachment circle "
                    f"R = {R:.6g}")


@dataclass
class MeasureSpec:
    """Coupling measure of the relaxed manifold.

    kind: 'infinite_on_boundary', 'boundary_density' or 'volume_density';
    kappa is the density for the two finite kinds.
    """

    kind: str
    kappa: float = 0.0

    def __post_init__(self):
        kinds = ("infinite_on_boundary", "boundary_density", "volume_density")
        if self.kind not in kinds:
            raise ContractError(f"unknown measure kind {self.kind!r}")
        if self.kind == "infinite_on_boundary":
            if self.kappa:
                raise ContractError("the infinite measure carries no kappa")
        elif self.kappa < 0:
            raise ContractError("kappa must be nonnegative")

    @staticmethod
    def infinite():
        return MeasureSpec(kind="infinite_on_boundary")


@dataclass
class AssembledForms:
    stiffness: sp.csr_matrix          # K, full vertex space
    mass: sp.csr_matrix               # B
    coupling: sp.csr_matrix | None    # C (None = zero)
    reduction: np.ndarray | None      # full index -> reduced index
    n_reduced: int
    mesh: object = None
    measure: MeasureSpec | None = None

    @property
    def n_full(self):
        return self.stiffness.shape[0]

    def restriction(self) -> sp.csr_matrix:
        """Sparse R with u_full = R @ u_reduced."""
        if self.reduction is None:
            return sp.identity(self.n_full, format="csr")
        rows = np.arange(self.n_full)
        return sp.csr_matrix(
            (np.ones(self.n_full), (rows, self.reduction)),
            shape=(self.n_full, self.n_reduced))

    def reduced(self):
        R = self.restriction()
        K = (R.T @ self.stiffness @ R).tocsr()
        B = (R.T @ self.mass @ R).tocsr()
        C = (R.T @ self.coupling @ R).tocsr() if self.coupling is not None \
            else sp.csr_matrix(K.shape)
        return K, B, C


def _triangle_charts(mesh, metric):
    """Per-triangle chart data: 2D vertex coords, metric matrix, density."""
    v = mesh.vertices
    t = mesh.triangles
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    nhat = p0 + p1 + p2
    nhat /= np.linalg.norm(nhat, axis=1, keepdims=True)
    ref = np.where(np.abs(nhat[:, 2:3]) < 0.9,
                   np.array([0.0, 0.0, 1.0])[None, :],
                   np.array([1.0, 0.0, 0.0])[None, :])
    e1 = ref - np.einsum("ni,ni->n", ref, nhat)[:, None] * nhat
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(nhat, e1)

    def chart(p):
        q = p / np.einsum("ni,ni->n", p, nhat)[:, None]
        return np.stack([np.einsum("ni,ni->n", q, e1),
                         np.einsum("ni,ni->n", q, e2)], axis=1)

    u = np.stack([chart(p0), chart(p1), chart(p2)], axis=1)  # (m,3,2)
    Q = metric.ambient_forms(nhat)                            # (m,3,3)
    E = np.stack([e1, e2], axis=2)                            # (m,3,2)
    G = np.einsum("nik,nij,njl->nkl", E, Q, E)                # (m,2,2)
    detG = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    if np.any(detG <= 0):
        raise AssemblyError("metric not positive definite at a centroid")
    return u, G, np.sqrt(detG)


def _element_matrices(u, G, dens):
    """P1 stiffness and consistent mass element matrices (m,3,3)."""
    d1 = u[:, 1] - u[:, 0]
    d2 = u[:, 2] - u[:, 0]
    jac = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(jac)
    # gradients of barycentric functions in chart coordinates
    inv = np.empty((len(u), 2, 2))
    inv[:, 0, 0] = d2[:, 1]
    inv[:, 0, 1] = -d2[:, 0]
    inv[:, 1, 0] = -d1[:, 1]
    inv[:, 1, 1] = d1[:, 0]
    inv /= jac[:, None, None]
    grads = np.empty((len(u), 3, 2))
    grads[:, 1] = inv[:, 0]
    grads[:, 2] = inv[:, 1]
    grads[:, 0] = -inv[:, 0] - inv[:, 1]
    Ginv = np.empty_like(G)
    detG = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    Ginv[:, 0, 0] = G[:, 1, 1]
    Ginv[:, 1, 1] = G[:, 0, 0]
    Ginv[:, 0, 1] = -G[:, 0, 1]
    Ginv[:, 1, 0] = -G[:, 1, 0]
    Ginv /= detG[:, None, None]
    w = area * dens
    Ke = np.einsum("n,nik,nkl,njl->nij", w, grads, Ginv, grads)
    Me = (w / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    return Ke, Me


def _scatter(mesh, Ee, dof=None):
    t = mesh.triangles if dof is None else dof[mesh.triangles]
    n = (mesh.n_vertices if dof is None else int(dof.max()) + 1)
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    A = sp.coo_matrix((Ee.ravel(), (rows, cols)), shape=(n, n))
    return A.tocsr()


def _pairing_matrix(mesh):
    n = mesh.n_vertices
    return sp.csr_matrix((np.ones(n), (np.arange(n), mesh.pairing)),
                         shape=(n, n))


def _loop_weights(mesh, metric):
    """Lumped (trapezoidal) arc-length weights of the boundary loops under
    the given metric."""
    w = np.zeros(mesh.n_vertices)
    for lp in mesh.boundary_loops:
        cyc = lp.vertices
        a = mesh.vertices[cyc]
        b = mesh.vertices[np.roll(cyc, -1)]
        mid = a + b
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        # chord midpoints fall marginally inside the circle; push them back
        # onto the loop so the metric is evaluated on the boundary itself
        c = lp.center / np.linalg.norm(lp.center)
        u = mid - (mid @ c)[:, None] * c
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        mid = np.cos(lp.radius) * c + np.sin(lp.radius) * u
        Q = metric.ambient_forms(mid)
        chord = b - a
        lengths = np.sqrt(np.einsum("ni,nij,nj->n", chord, Q, chord))
        w[cyc] += 0.5 * (lengths + np.roll(lengths, 1))
    return w


def assemble(mesh, metric, measure: MeasureSpec | None = None,
             dof_map: np.ndarray | None = None) -> AssembledForms:
    """Assemble stiffness, mass and coupling for the given metric field.

    ``dof_map`` merges vertices before scattering (used to assemble on the
    glued quotient mesh); it cannot be combined with a coupling measure.
    """
    check_no_straddle(mesh, metric)
    u, G, dens = _triangle_charts(mesh, metric)
    Ke, Me = _element_matrices(u, G, dens)
    K = _scatter(mesh, Ke, dof_map)
    B = _scatter(mesh, Me, dof_map)
    C = None
    reduction = None
    n_red = K.shape[0]
    if dof_map is not None:
        if measure is not None:
            raise ContractError("dof_map and measure are mutually exclusive")
        return AssembledForms(stiffness=K, mass=B, coupling=None,
                              reduction=None, n_reduced=n_red, mesh=mesh)
    if measure is not None:
        if measure.kind == "infinite_on_boundary":
            # identify each boundary vertex with its antipodal partner
            n = mesh.n_vertices
            target = np.arange(n)
            boundary = np.concatenate(
                [lp.vertices for lp in mesh.boundary_loops]) \
                if mesh.boundary_loops else np.array([], dtype=np.int64)
            for vtx in boundary:
                a, b = int(vtx), int(mesh.pairing[vtx])
                lo, hi = min(a, b), max(a, b)
                target[hi] = lo
            keep = target == np.arange(n)
            remap = -np.ones(n, dtype=np.int64)
            remap[keep] = np.arange(keep.sum())
            reduction = remap[target]
            n_red = int(keep.sum())
        elif measure.kind == "volume_density":
            P = _pairing_matrix(mesh)
            D = sp.identity(mesh.n_vertices, format="csr") - P
            C = (measure.kappa * (D.T @ B @ D)).tocsr()
        elif measure.kind == "boundary_density":
            P = _pairing_matrix(mesh)
            D = sp.identity(mesh.n_vertices, format="csr") - P
            W = sp.diags(_loop_weights(mesh, metric))
            C = (measure.kappa * (D.T @ W @ D)).tocsr()
    return AssembledForms(stiffness=K, mass=B, coupling=C,
                          reduction=reduction, n_reduced=n_red,
                          mesh=mesh, measure=measure)


def dirichlet_energy(forms: AssembledForms, u) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape[0] != forms.n_full:
        raise ContractError("function length does not match the vertex count")
    return float(u @ (forms.stiffness @ u))


def solve_resolvent(forms: AssembledForms, f, lam: float):
    """Minimizer of u'(K+C)u + lam*u'Bu - 2u'Bf over the reduced space;
    returned in the full vertex space."""
    if lam <= 0:
        raise ContractError("lambda must be positive")
    f = np.asarray(f, dtype=float)
    if f.shape[0] != forms.n_full:
        raise ContractError("right-hand side length mismatch")
    R = forms.restriction()
    K, B, C = forms.reduced()
    A = (K + C + lam * B).tocsc()
    rhs = R.T @ (forms.mass @ f)
    u_red = spla.spsolve(A, rhs)
    res = np.linalg.norm(A @ u_red - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if res > 1e-8:
        raise AssemblyError(f"resolvent solve did not converge: {res:.2e}")
    return R @ u_red


def total_volume(forms: AssembledForms) -> float:
    ones = np.ones(forms.n_full)
    return float(ones @ (forms.mass @ ones))


def export_coo(matrix, path):
    """Coordinate text format: row col value, 17 significant digits."""
    coo = matrix.tocoo()
    with open(path, "w") as f:
        f.write("format: 1\n")
        f.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, x in zip(coo.row, coo.col, coo.data):
            f.write(f"{r} {c} {x:.17g}\n")
