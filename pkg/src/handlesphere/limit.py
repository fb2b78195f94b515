"""Limit operator on the round sphere with an antipodal coupling term.

The limit quadratic form is D(u) + s * integral over the odd part, so its
spectrum is l(l+1) on even-degree harmonics and l(l+1) + s on odd-degree
ones.  Two conventions for the shift s in terms of the handle-density
parameter alpha are supported:

  'form'  : s = 4 * alpha / 2**d   (shift of the quadratic form; default)
  'paper' : s =     alpha / 2**d   (shift printed by the Euler route)

Both are exposed so the two routes can be compared rather than silently
conflated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y


class ContractError(ValueError):
    pass


CONVENTIONS = ("form", "paper")


def coupling_shift(alpha: float, d: int = 2, convention: str = "form"
                   ) -> float:
    if convention not in CONVENTIONS:
        raise ContractError(f"unknown convention {convention!r}")
    if alpha < 0:
        raise ContractError("alpha must be nonnegative")
    s = alpha / 2.0 ** d
    return 4.0 * s if convention == "form" else s


def sphere_harmonic_count(ell: int, d: int = 2) -> int:
    """Dimension of degree-ell spherical harmonics on S^d."""
    if ell == 0:
        return 1
    from math import comb
    return comb(d + ell, d) - comb(d + ell - 2, d)


def real_sph_harm(ell: int, m: int, points) -> np.ndarray:
    """Real orthonormal spherical harmonics on S^2 at unit ``points``."""
    if abs(m) > ell:
        raise ContractError("|m| must not exceed ell")
    p = np.atleast_2d(np.asarray(points, dtype=float))
    theta = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
    phi = np.arctan2(p[:, 1], p[:, 0])
    y = sph_harm_y(ell, abs(m), theta, phi)
    if m == 0:
        out = y.real
    elif m > 0:
        out = np.sqrt(2.0) * (-1.0) ** m * y.real
    else:
        out = np.sqrt(2.0) * (-1.0) ** m * y.imag
    return out


def harmonic_basis(points, l_max: int):
    """Stacked real harmonics with degree/order bookkeeping.

    Returns (matrix (n, n_basis), degrees, orders)."""
    cols, degs, orders = [], [], []
    for ell in range(l_max + 1):
        for m in range(-ell, ell + 1):
            cols.append(real_sph_harm(ell, m, points))
            degs.append(ell)
            orders.append(m)
    return np.stack(cols, axis=1), np.array(degs), np.array(orders)


@dataclass
class LimitEntry:
    ell: int
    parity: str            # 'even' or 'odd'
    value: float
    multiplicity: int


@dataclass
class LimitSpectrum:
    alpha: float
    d: int
    convention: str
    entries: list = field(default_factory=list)

    def expanded(self, k: int | None = None) -> np.ndarray:
        vals = np.concatenate([[e.value] * e.multiplicity
                               for e in self.entries])
        vals = np.sort(vals)
        return vals if k is None else vals[:k]


def limit_spectrum(alpha: float, k: int = 20, d: int = 2,
                   convention: str = "form") -> LimitSpectrum:
    """Lowest eigenvalues (with multiplicity) of the limit operator."""
    s = coupling_shift(alpha, d, convention)
    entries = []
    ell = 0
    while True:
        lam = ell * (ell + 1.0) if d == 2 else ell * (ell + d - 1.0)
        shifted = lam + (s if ell % 2 else 0.0)
        entries.append(LimitEntry(ell=ell,
                                  parity="odd" if ell % 2 else "even",
                                  value=shifted,
                                  multiplicity=sphere_harmonic_count(ell, d)))
        # stop once the k smallest values can no longer change: every
        # later degree has lam >= current shifted value
        total = sum(e.multiplicity for e in entries)
        if total >= k and ell * (ell + 1.0) >= max(e.value
                                                   for e in entries):
            break
        ell += 1
        if ell > 1000:
            raise ContractError("k too large")
    entries.sort(key=lambda e: e.value)
    out, acc = [], 0
    for e in entries:
        out.append(e)
        acc += e.multiplicity
        if acc >= k:
            break
    return LimitSpectrum(alpha=alpha, d=d, convention=convention,
                         entries=out)


def parity_decompose(u, pairing) -> tuple:
    """Split nodal values into even/odd parts under the involution given
    by the vertex pairing: u = u_even + u_odd."""
    u = np.asarray(u, dtype=float)
    flipped = u[pairing]
    return 0.5 * (u + flipped), 0.5 * (u - flipped)


def euler_solve(coeffs: dict, lam: float, alpha: float, d: int = 2,
                convention: str = "form") -> dict:
    """Solve (limit operator + lam) u = f for harmonic coefficients
    ``coeffs`` of f keyed by (ell, m)."""
    if lam <= 0:
        raise ContractError("lambda must be positive")
    s = coupling_shift(alpha, d, convention)
    out = {}
    for (ell, m), c in coeffs.items():
        shift = s if ell % 2 else 0.0
        out[(ell, m)] = c / (ell * (ell + 1.0) + shift + lam)
    return out


def _quadrature_grid(n_theta: int, n_phi: int):
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P),
                    np.sin(T) * np.sin(P),
                    np.cos(T)], axis=-1).reshape(-1, 3)
    weights = np.repeat(w, n_phi) * (2.0 * np.pi / n_phi)
    return pts, weights


def galerkin_limit_check(alpha: float, l_max: int = 8, d: int = 2,
                         n_theta: int = 40, n_phi: int = 80) -> dict:
    """Independent spectral-Galerkin route to the limit spectrum.

    The mass and coupling matrices are assembled by quadrature over a
    Gauss-Legendre x uniform grid; the stiffness uses the analytic
    eigenvalues l(l+1).  Eigenvalues must match l(l+1) for even l and
    l(l+1) + 4*alpha/2**d for odd l.
    """
    if d != 2:
        raise ContractError("the quadrature route is for surfaces")
    pts, w = _quadrature_grid(n_theta, n_phi)
    Y, degs, _ = harmonic_basis(pts, l_max)
    Yt = Y * w[:, None]
    M = Y.T @ Yt
    diff = Y - harmonic_basis(-pts, l_max)[0]
    C = (alpha / 2.0 ** d) * (diff.T @ (diff * w[:, None]))
    lam_diag = degs * (degs + 1.0)
    K = 0.5 * (lam_diag[:, None] * M + M * lam_diag[None, :])
    import scipy.linalg as sla
    vals = sla.eigh(K + C, M, eigvals_only=True)
    expected = np.sort(lam_diag + np.where(degs % 2, 4.0 * alpha / 2.0 ** d,
                                           0.0))
    err = float(np.abs(np.sort(vals) - expected).max())
    return {"eigenvalues": np.sort(vals), "expected": expected,
            "max_abs_error": err, "l_max": l_max, "alpha": alpha}
