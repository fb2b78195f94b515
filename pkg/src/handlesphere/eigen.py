"""Generalized eigenproblems for the assembled forms and tools for
comparing discrete eigenvectors with limit eigenfunctions.

Eigenpairs of (K + C) u = lambda B u are computed on the reduced
(constrained) space with a shift-and-invert Lanczos iteration; proper
values of the resolvent at lam are sigma_i = 1 / (lam + lambda_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import fem
from .fem import AssembledForms, RoundMetric
from .mesh import fill_holes


class ContractError(ValueError):
    pass


@dataclass
class EigenResult:
    values: np.ndarray        # ascending
    vectors: np.ndarray       # (n_full, k), B-orthonormal
    residuals: np.ndarray     # ||(K+C)u - lambda B u|| / ||B u||
    lam: float | None = None  # resolvent parameter, if requested

    @property
    def resolvent_values(self):
        if self.lam is None:
            raise ContractError("no resolvent parameter was set")
        return 1.0 / (self.lam + self.values)


def lowest_eigenpairs(forms: AssembledForms, k: int, sigma: float = -0.5,
                      tol: float = 0.0, lam: float | None = None
                      ) -> EigenResult:
    """k smallest eigenpairs of (K + C) u = lambda B u on the reduced
    space, returned in the full vertex space and B-orthonormalized."""
    if k < 1:
        raise ContractError("k must be positive")
    R = forms.restriction()
    K, B, C = forms.reduced()
    A = (K + C).tocsc()
    if k >= A.shape[0] - 1:
        raise ContractError("k too large for the mesh")
    vals, vecs = spla.eigsh(A, k=k, M=B.tocsc(), sigma=sigma, which="LM",
                            tol=tol)
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    # B-orthonormalize (eigsh already returns M-orthonormal vectors, but
    # re-orthogonalize clusters for safety)
    G = vecs.T @ (B @ vecs)
    L = np.linalg.cholesky(G)
    vecs = sla.solve_triangular(L, vecs.T, lower=True).T
    res = np.empty(k)
    for i in range(k):
        u = vecs[:, i]
        r = A @ u - vals[i] * (B @ u)
        res[i] = np.linalg.norm(r) / max(np.linalg.norm(B @ u), 1e-300)
    full = R @ vecs
    return EigenResult(values=vals, vectors=full, residuals=res, lam=lam)


def resolvent_values(forms: AssembledForms, k: int, lam: float,
                     **kw) -> EigenResult:
    if lam <= 0:
        raise ContractError("lambda must be positive")
    out = lowest_eigenpairs(forms, k, **kw)
    out.lam = lam
    return out


def parity_scores(forms: AssembledForms, vectors) -> np.ndarray:
    """<u, u o T>_B / <u, u>_B per column: +1 for even, -1 for odd."""
    mesh = forms.mesh
    if mesh is None:
        raise ContractError("forms carry no mesh")
    V = np.atleast_2d(np.asarray(vectors, dtype=float).T).T
    if V.shape[0] != forms.n_full:
        raise ContractError("vector length mismatch")
    BV = forms.mass @ V
    flipped = V[mesh.pairing]
    num = np.einsum("ij,ij->j", flipped, BV)
    den = np.einsum("ij,ij->j", V, BV)
    return num / den


def harmonic_extension(mesh, u, forms_holed: AssembledForms | None = None):
    """Extend ``u`` from the holed mesh harmonically (round metric) across
    the filled caps.

    Returns (filled_mesh, v, c0_hat) where v lives on the filled mesh and
    c0_hat = |v|_H1(filled, round) / |u|_H1(holed, glued metric); the
    denominator's metric is taken from ``forms_holed`` when given, else
    round.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] != mesh.n_vertices:
        raise ContractError("function length does not match the vertex count")
    filled, centers = fill_holes(mesh)
    round_forms = fem.assemble(filled, RoundMetric())
    K = round_forms.stiffness
    v = np.concatenate([u, np.zeros(len(centers))])
    if len(centers):
        I = np.array(centers, dtype=np.int64)
        others = np.setdiff1d(np.arange(filled.n_vertices), I)
        KII = K[I][:, I].toarray()
        rhs = -np.asarray(K[I][:, others] @ v[others]).ravel()
        v[I] = np.linalg.solve(KII, rhs)
    num = float(v @ (K @ v)) + float(v @ (round_forms.mass @ v))
    if forms_holed is None:
        holed_forms = fem.assemble(mesh, RoundMetric())
    else:
        holed_forms = forms_holed
    den = float(u @ (holed_forms.stiffness @ u)) \
        + float(u @ (holed_forms.mass @ u))
    c0_hat = np.sqrt(num / den) if den > 0 else float("inf")
    return filled, v, c0_hat


def principal_angles(U, V, B) -> np.ndarray:
    """Principal angles (radians, ascending) between span(U) and span(V)
    in the B inner product."""
    U = np.atleast_2d(np.asarray(U, dtype=float).T).T
    V = np.atleast_2d(np.asarray(V, dtype=float).T).T

    def orthonormalize(X):
        G = X.T @ (B @ X)
        L = np.linalg.cholesky(G)
        return sla.solve_triangular(L, X.T, lower=True).T

    Uo = orthonormalize(U)
    Vo = orthonormalize(V)
    s = np.linalg.svd(Uo.T @ (B @ Vo), compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    return np.sort(np.arccos(s))
