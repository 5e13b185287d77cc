"""Closed-form tangent-point geometry in n dimensions.

Everything here is exact vector algebra on flat numpy arrays: hyperplane
projections, the tangent point of a hemisphere seen from an outside point,
and the tangent point of a semi-ellipsoid with one radius along the normal
direction and one in-plane radius. Each solve reduces to the 2-plane
spanned by the normal direction and the center-relative query point, so
the formulas are dimension-free.

All functions are pure and stateless; they are safe to call concurrently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-9

# Below this fraction of |x_rel| the in-plane component counts as zero and
# no 2-plane basis exists; callers decide the fallback.
DEGENERATE_REL_TOL = 1e-12


class GeometryError(Exception):
    """Base class for geometric failures."""


class DimensionMismatchError(GeometryError):
    pass


class DegenerateDirectionError(GeometryError):
    """The query point is numerically parallel to the normal direction."""


class NotOutsideBallError(GeometryError):
    """The query point must lie strictly outside the ball (or ellipse)."""


class InfeasibleRadiusError(GeometryError):
    """No tangent point exists on the valid side; shrink the radius."""


class InfeasibleEllipseError(GeometryError):
    """No tangent point with positive height exists; shrink both axes."""


@dataclass(frozen=True)
class PlaneBasis:
    """Orthonormal basis of the 2-plane spanned by a point and a normal.

    ``u_hat`` is the normal direction, ``v_hat`` the normalized in-plane
    component of the point, and ``(x0, z0)`` are the point's coordinates in
    that basis, with ``x0 > 0`` by construction.
    """

    u_hat: np.ndarray
    v_hat: np.ndarray
    x0: float
    z0: float

    def reconstruct(self) -> np.ndarray:
        return self.x0 * self.v_hat + self.z0 * self.u_hat


@dataclass(frozen=True)
class TangentSolution:
    """A solved tangent point with its in-plane coordinates.

    ``in_plane_coords`` is the ``(x_k, z_k)`` pair in the plane basis of the
    instance, ``z_k`` being the height above the hyperplane through the
    center. ``halvings`` is filled in by iterative callers that shrink the
    radius; the solvers themselves always report zero.
    """

    k: np.ndarray
    radius_used: float
    halvings: int
    in_plane_coords: tuple[float, float]


def as_point(p, name: str = "point") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise DimensionMismatchError(f"{name} must be a 1-d vector of dimension >= 2, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has non-finite coordinates")
    return p


def as_unit_vector(u, name: str = "u") -> np.ndarray:
    u = as_point(u, name)
    n = float(np.linalg.norm(u))
    if abs(n - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{name} must have unit norm (got {n!r})")
    return u


def unit_vector(v) -> np.ndarray:
    """Normalize ``v`` to unit length."""
    v = as_point(v, "v")
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")


def project_onto_hyperplane(x_rel: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``x_rel`` onto the hyperplane with unit normal ``u``.

    Returns ``x_rel - <x_rel, u> u``; the result is orthogonal to ``u``.
    """
    x_rel = as_point(x_rel, "x_rel")
    u = as_unit_vector(u)
    _check_same_dim(x_rel, u)
    return x_rel - float(x_rel @ u) * u


def plane_basis(x_rel: np.ndarray, u: np.ndarray) -> PlaneBasis:
    """Build the 2-plane basis spanned by ``x_rel`` and the unit normal ``u``.

    Raises :class:`DegenerateDirectionError` when ``x_rel`` is numerically
    parallel to ``u`` (no in-plane component survives).
    """
    x_rel = as_point(x_rel, "x_rel")
    u = as_unit_vector(u)
    _check_same_dim(x_rel, u)
    z0 = float(x_rel @ u)
    in_plane = x_rel - z0 * u
    x0 = float(np.linalg.norm(in_plane))
    if x0 <= DEGENERATE_REL_TOL * float(np.linalg.norm(x_rel)):
        raise DegenerateDirectionError("x_rel is parallel to u; no in-plane direction exists")
    return PlaneBasis(u_hat=u, v_hat=in_plane / x0, x0=x0, z0=z0)


def feasibility_check(x_rel: np.ndarray, u: np.ndarray, radius: float) -> bool:
    """True iff the projection of ``x_rel`` onto the hyperplane has norm >= radius.

    This is the condition under which a tangent point on the upper
    hemisphere (height >= 0 along ``u``) exists.
    """
    return float(np.linalg.norm(project_onto_hyperplane(x_rel, u))) >= radius


def tangent_point_hemisphere(x, center, u, radius: float) -> TangentSolution:
    """Tangent point of the upper hemisphere of radius ``radius`` around ``center``.

    Among all points k with ``|k - center| = radius`` whose tangent line
    passes through ``x`` (``<k - center, x - k> = 0``), returns the one that
    maximizes the height ``<k - center, u>``, constrained to be >= 0.

    The solve happens in the 2-plane spanned by ``u`` and ``x - center``:
    with ``sin(a) = -<x_rel, u>/|x_rel|``, ``cos(b) = radius/|x_rel|`` and
    ``g = b - a``, the solution is
    ``k = center + radius*cos(g) * v_hat + radius*sin(g) * u``.

    Raises
    ------
    NotOutsideBallError
        when ``|x - center| <= radius``.
    DegenerateDirectionError
        when ``x - center`` is parallel to ``u``.
    InfeasibleRadiusError
        when the in-plane offset is smaller than ``radius`` (no tangent
        point with nonnegative height exists; retry with a smaller radius).
    """
    x = as_point(x, "x")
    center = as_point(center, "center")
    _check_same_dim(x, center)
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    x_rel = x - center
    dist = float(np.linalg.norm(x_rel))
    if dist <= radius:
        raise NotOutsideBallError(f"|x - center| = {dist!r} must exceed radius = {radius!r}")
    basis = plane_basis(x_rel, u)
    if basis.x0 < radius:
        raise InfeasibleRadiusError(
            f"in-plane offset {basis.x0!r} < radius {radius!r}; no valid tangent point"
        )

    sin_a = -basis.z0 / dist
    cos_a = math.sqrt(max(0.0, 1.0 - sin_a * sin_a))
    cos_b = radius / dist
    sin_b = math.sqrt(max(0.0, 1.0 - cos_b * cos_b))
    sin_g = sin_b * cos_a - cos_b * sin_a
    cos_g = cos_b * cos_a + sin_b * sin_a

    x_k = radius * cos_g
    z_k = radius * sin_g
    k = center + x_k * basis.v_hat + z_k * basis.u_hat
    return TangentSolution(k=k, radius_used=radius, halvings=0, in_plane_coords=(x_k, z_k))


def ellipse_tangent_candidates(
    x0: float, z0: float, height_radius: float, plane_radius: float
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Both tangent points of the ellipse ``x^2/S^2 + z^2/L^2 = 1`` from ``(x0, z0)``.

    ``height_radius`` is L (the semi-axis along z) and ``plane_radius`` is S
    (along x). The first returned pair takes the positive square root of the
    discriminant and therefore has the larger z; the second is the other
    root. A nonpositive discriminant is exactly the condition that
    ``(x0, z0)`` does not lie strictly outside the ellipse, so that case
    raises :class:`InfeasibleEllipseError` to signal the caller to shrink
    both axes.
    """
    L, S = float(height_radius), float(plane_radius)
    if L <= 0.0 or S <= 0.0:
        raise ValueError("ellipse radii must be positive")
    if x0 <= 0.0:
        raise ValueError("x0 must be positive (plane-basis convention)")
    disc = -(L * L) * (S * S) + (L * L) * (x0 * x0) + (S * S) * (z0 * z0)
    if disc <= 0.0:
        raise InfeasibleEllipseError(
            f"discriminant {disc!r} is not positive, the point does not lie "
            "strictly outside the ellipse; shrink the axes"
        )
    root = math.sqrt(disc)
    denom = (L * L) * (x0 * x0) + (S * S) * (z0 * z0)

    def solve(signed_root: float) -> tuple[float, float]:
        z_k = ((L * L) * (S * S) * z0 + (L * L) * x0 * signed_root) / denom
        x_k = (S * S) * ((L * L) - z0 * z_k) / ((L * L) * x0)
        return (x_k, z_k)

    return solve(root), solve(-root)


def tangent_point_semi_ellipsoid(x, center, u, height_radius: float, plane_radius: float) -> TangentSolution:
    """Tangent point of a semi-ellipsoid around ``center``, elongated along ``u``.

    In the 2-plane spanned by ``u`` and ``x - center`` the ellipsoid
    restricts to the ellipse with semi-axis ``height_radius`` along ``u``
    and ``plane_radius`` in plane. The solution is the tangent point with
    strictly positive height; the point is reconstructed as
    ``center + |x_k| * v_hat + z_k * u``.

    Raises :class:`InfeasibleEllipseError` when no tangent point with
    positive height exists, which signals the caller to shrink both axes.
    """
    x = as_point(x, "x")
    center = as_point(center, "center")
    _check_same_dim(x, center)
    basis = plane_basis(x - center, u)
    high, _low = ellipse_tangent_candidates(basis.x0, basis.z0, height_radius, plane_radius)
    x_k, z_k = high
    if z_k <= 0.0:
        # Happens when the in-plane offset is below the plane radius and the
        # point sits under the hyperplane: both tangent heights are negative.
        raise InfeasibleEllipseError("no tangent point with positive height; shrink the axes")
    k = center + abs(x_k) * basis.v_hat + z_k * basis.u_hat
    return TangentSolution(
        k=k, radius_used=float(height_radius), halvings=0, in_plane_coords=(x_k, z_k)
    )
