"""Sphere and cylinder metrics, the antipodal involution, handle profiles
and the attaching map.

Points on the unit sphere S^d sit in R^{d+1}.  Cylindrical coordinates
write x = (y, r*omega) with y^2 + r^2 = 1, omega a unit vector in R^d.
A handle is a cylinder [-1,1] x S^{d-1}(eps) attached along two antipodal
annuli; the attachment is described by a strictly increasing linear radial
profile r(t) on [0,1].  The resulting metric is only Lipschitz: it is the
round metric away from the attachment annuli and the pull-back of the
cylinder metric inside them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-12


class GeometryError(ValueError):
    pass


class ChartBreakdownError(GeometryError):
    """Cylindrical chart evaluated at r <= 0 or r >= 1."""


class DeletedRegionError(GeometryError):
    """Point lies inside an excised cap."""


def _as_unit(coords, tol=UNIT_TOL):
    p = np.asarray(coords, dtype=float)
    n = np.linalg.norm(p)
    if abs(n - 1.0) > tol:
        raise GeometryError(f"point is not on the unit sphere: |p| = {n!r}")
    return p


@dataclass(frozen=True)
class SpherePoint:
    """A point of S^d given by its unit coordinate vector in R^{d+1}."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_unit(self.coords))

    @property
    def d(self) -> int:
        return len(self.coords) - 1

    def cylindrical(self):
        """Return (y, r, omega) with coords = (y, r*omega), r >= 0."""
        y = float(self.coords[0])
        rest = self.coords[1:]
        r = float(np.linalg.norm(rest))
        omega = rest / r if r > 0 else np.zeros_like(rest)
        return y, r, omega


def antipodal(p: SpherePoint) -> SpherePoint:
    """The involution T(x) = -x; exact sign flip, no fixed point on S^d."""
    return SpherePoint(-p.coords)


def geodesic_distance(a, b) -> float:
    """Angle between two unit vectors, accurate also for nearby points."""
    a = np.asarray(getattr(a, "coords", a), dtype=float)
    b = np.asarray(getattr(b, "coords", b), dtype=float)
    # atan2 form is stable for both small and near-pi angles
    cross = np.linalg.norm(np.cross(a, b)) if len(a) == 3 else np.sqrt(
        max(0.0, np.dot(a, a) * np.dot(b, b) - np.dot(a, b) ** 2))
    return float(np.arctan2(cross, np.dot(a, b)))


@dataclass(frozen=True)
class MetricTensor:
    """Metric in a radial/angular block chart.

    ``radial`` multiplies dr^2 (or dy^2 on the cylinder), ``angular``
    multiplies the standard metric of S^{d-1}; ``density`` is sqrt(det g)
    in that chart.
    """

    radial: float
    angular: float
    density: float
    piece: str = "sphere"

    def matrix(self, d: int = 2) -> np.ndarray:
        g = np.diag([self.radial] + [self.angular] * (d - 1))
        return g


def sphere_metric_at(r: float, d: int = 2) -> MetricTensor:
    """Round metric of S^d in cylindrical coordinates (y, r*omega).

    ds^2 = (1 - r^2)^{-1} dr^2 + r^2 ds^2_{S^{d-1}}, valid for 0 < r < 1.
    """
    if not 0.0 < r < 1.0:
        raise ChartBreakdownError(f"cylindrical chart requires 0 < r < 1, got {r}")
    g_rr = 1.0 / (1.0 - r * r)
    density = r ** (d - 1) / np.sqrt(1.0 - r * r)
    return MetricTensor(radial=g_rr, angular=r * r, density=density)


@dataclass(frozen=True)
class HandleProfile:
    """Linear radial profile r(t) = delta1*eps*t + delta0*eps*(1-t).

    ``epsilon`` is the first slot of the profile pair; in sweep
    constructions it equals eps_h * eta_h.  ``theta`` is the thinness
    bound Theta >= 1; the slope clause uses ``lipschitz_bound`` D and is
    checked only on request (see :func:`profile_validate`).
    """

    epsilon: float
    theta: float
    delta0: float
    delta1: float
    lipschitz_bound: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise GeometryError("epsilon must lie in (0, 1)")
        if not 0.0 < self.delta0 < self.delta1 < 1.0:
            raise GeometryError("need 0 < delta0 < delta1 < 1")
        if self.theta < 1.0:
            raise GeometryError("theta must be >= 1")

    def r(self, t):
        t = np.asarray(t, dtype=float)
        val = self.delta1 * self.epsilon * t + self.delta0 * self.epsilon * (1.0 - t)
        return float(val) if val.ndim == 0 else val

    @property
    def slope(self) -> float:
        return (self.delta1 - self.delta0) * self.epsilon

    def inverse(self, rho):
        """t = r^{-1}(rho); the profile is strictly increasing."""
        return (np.asarray(rho, dtype=float) - self.delta0 * self.epsilon) / self.slope

    @property
    def r0(self) -> float:
        return self.delta0 * self.epsilon

    @property
    def r1(self) -> float:
        return self.delta1 * self.epsilon

    def comparability_bound(self) -> float:
        """Smallest Theta' such that Theta'^{-2} g <= g_h <= Theta'^2 g on the
        annulus, computed from the actual profile (not the declared theta).
        """
        return max(self.epsilon / self.r0, self.r1 / self.epsilon,
                   1.0 / self.slope, self.slope / np.sqrt(1.0 - self.r1 ** 2))


@dataclass(frozen=True)
class ProfileVerdict:
    member: bool
    clauses: dict


def profile_validate(profile: HandleProfile, strict_D_check: bool = False) -> ProfileVerdict:
    """Membership test for the bounded-thinness family F_Theta.

    Always checks eps/r(0) < Theta and r(1)/eps < Theta (for the linear
    profile these reduce to delta0 > 1/Theta and delta1 < Theta).  When
    ``strict_D_check`` is on, also requires D^{-1} < dr/dt < D and
    D / sqrt(1 - r(1)^2) < Theta.
    """
    eps, th = profile.epsilon, profile.theta
    clauses = {
        "eps_over_r0": eps / profile.r0,
        "r1_over_eps": profile.r1 / eps,
    }
    ok = clauses["eps_over_r0"] < th and clauses["r1_over_eps"] < th
    if strict_D_check:
        D = profile.lipschitz_bound
        clauses["slope"] = profile.slope
        clauses["D"] = D
        clauses["D_over_sqrt"] = D / np.sqrt(1.0 - profile.r1 ** 2) if D > 0 else np.inf
        ok = (ok and D > 0
              and 1.0 / D < profile.slope < D
              and clauses["D_over_sqrt"] < th)
    return ProfileVerdict(member=bool(ok), clauses=clauses)


# Cylinder conventions: 'section2' puts the scale on the angular block only,
# 'section3' (sweep construction) scales the whole product metric.
def cylinder_metric_at(y: float, profile: HandleProfile,
                       convention: str = "section3") -> MetricTensor:
    """Product metric of the handle cylinder [-1,1] x S^{d-1}(eps)."""
    if abs(y) > 1.0:
        raise GeometryError(f"cylinder coordinate |y| <= 1 required, got {y}")
    e2 = profile.epsilon ** 2
    if convention == "section2":
        return MetricTensor(radial=1.0, angular=e2,
                            density=profile.epsilon, piece="cylinder")
    if convention == "section3":
        return MetricTensor(radial=e2, angular=e2,
                            density=e2, piece="cylinder")
    raise GeometryError(f"unknown cylinder convention {convention!r}")


def attach_map(y: float, omega, profile: HandleProfile) -> SpherePoint:
    """phi(y, eps*omega) = (sgn(y) sqrt(1 - r(|y|)^2), sgn(y) r(|y|) omega).

    Defined on the cylinder minus its fixed circle {y = 0}.
    """
    if y == 0.0:
        raise GeometryError("y = 0 lies on Fix(T_H); the attaching map excludes it")
    if abs(y) > 1.0:
        raise GeometryError(f"|y| <= 1 required, got {y}")
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    s = np.sign(y)
    rho = profile.r(abs(y))
    coords = np.concatenate(([s * np.sqrt(1.0 - rho * rho)], s * rho * omega))
    return SpherePoint(coords)


@dataclass(frozen=True)
class HandleGeometry:
    """A handle profile together with its attachment location on S^d.

    The deleted caps have geodesic radius r_hole = arcsin r(0) around the
    center and its antipode; the attachment annuli extend to
    R_hole = arcsin r(1).
    """

    profile: HandleProfile
    center: SpherePoint
    cylinder_scale_convention: str = "section3"

    @property
    def r_hole(self) -> float:
        return float(np.arcsin(self.profile.r0))

    @property
    def R_hole(self) -> float:
        return float(np.arcsin(self.profile.r1))

    @property
    def antipode(self) -> SpherePoint:
        return antipodal(self.center)

    def __post_init__(self):
        if not 0.0 < self.r_hole < self.R_hole < np.pi / 2:
            raise GeometryError("need 0 < r_hole < R_hole < pi/2")
        # caps around center and antipode must not meet
        if 2.0 * self.r_hole >= np.pi:
            raise GeometryError("caps around center and antipode overlap")


def _colatitude(p_coords, center_coords):
    return geodesic_distance(p_coords, center_coords)


def handle_metric_polar(theta: float, handle: HandleGeometry) -> MetricTensor:
    """Pull-back of the cylinder metric in geodesic polar coordinates
    (theta, omega) centered at the handle center (or its antipode).

    With t = r^{-1}(sin theta):
        g_theta_theta = s^2 * (cos theta / r'(t))^2,
        g_omega_omega = s^2,
    where s is the cylinder angular scale of the chosen convention.
    """
    prof = handle.profile
    if not handle.r_hole <= theta <= handle.R_hole:
        raise GeometryError("polar radius outside the attachment annulus")
    cyl = cylinder_metric_at(0.5, prof, handle.cylinder_scale_convention)
    # chain rule through t(theta): r(t) = sin(theta) => dt/dtheta = cos/r'
    dt_dtheta = np.cos(theta) / prof.slope
    g_tt = cyl.radial * dt_dtheta ** 2
    g_ww = cyl.angular
    d = handle.center.d
    density = np.sqrt(g_tt) * g_ww ** ((d - 1) / 2.0)
    return MetricTensor(radial=g_tt, angular=g_ww, density=density,
                        piece="annulus")


def glued_metric_at(p: SpherePoint, handles) -> MetricTensor:
    """Piecewise metric of the relaxed manifold: round metric away from all
    attachment annuli, pulled-back cylinder metric inside them.

    The annulus piece is reported in geodesic polar coordinates around the
    relevant handle center; the sphere piece in the same polar chart (where
    the round metric is diag(1, sin^2 theta)).
    """
    for h in handles:
        for c in (h.center.coords, h.antipode.coords):
            theta = _colatitude(p.coords, c)
            if theta < h.r_hole:
                raise DeletedRegionError(
                    "point lies inside a deleted cap of radius "
                    f"{h.r_hole:.3g}")
            if theta <= h.R_hole:
                return handle_metric_polar(theta, h)
    # round metric in polar coordinates about an arbitrary axis
    # (rotationally invariant, so any center gives the same components)
    theta = _colatitude(p.coords, np.eye(len(p.coords))[0])
    g = MetricTensor(radial=1.0, angular=np.sin(theta) ** 2,
                     density=np.sin(theta) ** (p.d - 1), piece="sphere")
    return g


def ambient_quadratic_form(p_coords: np.ndarray, handles) -> np.ndarray:
    """Metric at p as a 3x3 quadratic form on ambient tangent vectors (d=2).

    For the round piece this is the identity restricted to the tangent
    plane; inside an attachment annulus it is
        a * e_theta e_theta^T + b * e_omega e_omega^T
    with a = g_theta_theta, b = g_omega_omega / sin^2 theta in the polar
    chart around the handle center.  Used by the FEM assembler.
    """
    p = np.asarray(p_coords, dtype=float)
    for h in handles:
        for c in (h.center.coords, h.antipode.coords):
            theta = _colatitude(p, c)
            if theta < h.r_hole * (1.0 - 1e-9):
                raise DeletedRegionError("point inside a deleted cap")
            if theta <= h.R_hole * (1.0 + 1e-12):
                g = handle_metric_polar(min(max(theta, h.r_hole), h.R_hole), h)
                e_t = c - np.dot(c, p) * p
                nt = np.linalg.norm(e_t)
                e_t = -e_t / nt  # increasing theta points away from center
                e_w = np.cross(p, e_t)
                return (g.radial * np.outer(e_t, e_t)
                        + (g.angular / np.sin(theta) ** 2) * np.outer(e_w, e_w))
    return np.eye(3)
