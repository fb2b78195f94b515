"""Greedy antipodally-closed eta-packings on S^2, cap volumes and the
packing count bound.

A packing here is a family {x_i} such that the symmetrized family
{x_i} u {-x_i} has pairwise geodesic distances >= 2*eta (so the eta-balls
are disjoint) and its 2*eta-balls cover the sphere (maximality of the
greedy construction).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy.integrate import quad

from .geometry import SpherePoint


class PackingError(ValueError):
    pass


def sphere_area(d: int) -> float:
    """Surface measure of the unit d-sphere S^d."""
    return 2.0 * pi ** ((d + 1) / 2.0) / gamma((d + 1) / 2.0)


def ball_volume_coefficient(d: int) -> float:
    """Euclidean volume of the unit ball in R^d (omega_d)."""
    return pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)


def cap_volume(eta: float, d: int = 2):
    """Geodesic-cap volume on S^d: Area(S^{d-1}) * int_0^eta sin^{d-1} t dt.

    Returns ``(exact, ratio_form)`` where ratio_form is the small-cap
    comparison volume omega_d * eta^d * (sin eta / eta)^{d-1}.
    """
    if eta <= 0.0:
        raise PackingError("cap radius must be positive")
    if eta > pi:
        raise PackingError("cap radius must be <= pi")
    if d == 2:
        exact = 2.0 * pi * (1.0 - np.cos(eta))
    else:
        val, _ = quad(lambda t: np.sin(t) ** (d - 1), 0.0, eta)
        exact = sphere_area(d - 1) * val
    ratio_form = (ball_volume_coefficient(d) * eta ** d
                  * (np.sin(eta) / eta) ** (d - 1))
    return exact, ratio_form


def count_bound(eta: float, d: int = 2) -> float:
    """Upper bound Vol(S^d) / Vol(B(eta)) on the size of an eta-packing."""
    if not 0.0 < eta < pi / 2:
        raise PackingError("count bound needs 0 < eta < pi/2")
    exact, _ = cap_volume(eta, d)
    return sphere_area(d) / exact


def fibonacci_sphere(n: int) -> np.ndarray:
    """n quasi-uniform points on S^2 (golden-spiral lattice)."""
    k = np.arange(n)
    z = 1.0 - (2.0 * k + 1.0) / n
    phi = k * pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True)
class Packing:
    eta: float
    centers: np.ndarray  # (n, 3) unit vectors
    seed: int

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    def symmetrized(self) -> np.ndarray:
        return np.vstack([self.centers, -self.centers])

    def min_pairwise_distance(self) -> float:
        fam = self.symmetrized()
        dots = np.clip(fam @ fam.T, -1.0, 1.0)
        np.fill_diagonal(dots, -1.0)
        return float(np.arccos(dots.max()))

    def cover_failure_rate(self, n_samples: int = 100000, rng=None) -> float:
        """Fraction of random sphere points farther than 2*eta from the
        symmetrized family (Monte Carlo check of the covering property)."""
        rng = np.random.default_rng(0 if rng is None else rng)
        pts = rng.normal(size=(n_samples, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        fam = self.symmetrized()
        best = np.abs(pts @ self.centers.T).max(axis=1)  # |dot| handles +-x_i
        del fam
        dist = np.arccos(np.clip(best, -1.0, 1.0))
        return float(np.mean(dist > 2.0 * self.eta))

    def save(self, path):
        with open(path, "w") as f:
            f.write("format: 1\n")
            f.write(f"eta: {self.eta!r}\n")
            f.write(f"seed: {self.seed}\n")
            for c in self.centers:
                f.write(" ".join(f"{x:.17g}" for x in c) + "\n")

    @staticmethod
    def load(path) -> "Packing":
        with open(path) as f:
            lines = [ln.strip() for ln in f if ln.strip()]
        assert lines[0].startswith("format:")
        eta = float(lines[1].split(":")[1])
        seed = int(lines[2].split(":")[1])
        centers = np.array([[float(x) for x in ln.split()] for ln in lines[3:]])
        return Packing(eta=eta, centers=centers, seed=seed)


def build_packing(eta: float, d: int = 2, seed: int = 0,
                  n_candidates: int | None = None) -> Packing:
    """Greedy maximal packing closed under the antipodal map.

    Candidates are a seeded shuffle of a Fibonacci lattice; a candidate is
    accepted iff its geodesic distance to every accepted center *and* every
    accepted antipode is >= 2*eta.  Maximality of the shuffled-lattice
    greedy gives the 2*eta covering property up to lattice spacing.
    """
    if d != 2:
        raise PackingError("packing construction is implemented on S^2 only")
    if not 0.0 < eta < pi / 2:
        raise PackingError("eta >= pi/2 cannot accommodate an antipodal pair")
    if n_candidates is None:
        n_candidates = max(10000, int(100.0 / eta ** 2))
    cands = fibonacci_sphere(n_candidates)
    rng = np.random.default_rng(seed)
    cands = cands[rng.permutation(n_candidates)]

    min_dot = np.cos(2.0 * eta)
    accepted: list[np.ndarray] = []
    acc = np.empty((0, 3))
    for c in cands:
        if len(accepted):
            dots = acc @ c
            # distance to antipodes: arccos(-dot) >= 2 eta <=> -dot <= cos
            if dots.max() > min_dot or (-dots).max() > min_dot:
                continue
        accepted.append(c)
        acc = np.asarray(accepted)
    return Packing(eta=eta, centers=acc.copy(), seed=seed)


def packing_points(packing: Packing):
    return [SpherePoint(c) for c in packing.centers]
