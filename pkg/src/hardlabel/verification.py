"""Independent brute-force oracles for the tangent-point optimality claims.

These routines never reuse the closed-form solver: they sample the tangent
set (or the full hemisphere surface) directly and reduce with deterministic
argmax/argmin, so they can vouch for the geometry module. They also make
the supporting constructions executable: line/hyperplane intersection,
cone membership, and the hemisphere samplers used by the property suite.

All sampling takes an explicit seed; there is no hidden global randomness.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import as_point, as_unit_vector

_SAMPLE_CHUNK = 200_000


class VerificationError(Exception):
    pass


class NoCrossingError(VerificationError):
    """The segment between the two points does not cross the hyperplane."""


class ParallelLineError(VerificationError):
    """The line through the two points is parallel to the hyperplane."""


class NoFeasibleSampleError(VerificationError):
    """Every sampled candidate violated the nonnegative-height constraint."""


class ZeroVectorError(VerificationError):
    pass


@dataclass(frozen=True)
class ConeSpec:
    """A cone given by apex, axis direction, and a cosine threshold.

    Membership of ``v`` means ``cos(v - apex, axis) >= cos_threshold``.
    """

    apex: np.ndarray
    axis: np.ndarray
    cos_threshold: float

    def __post_init__(self):
        object.__setattr__(self, "apex", as_point(self.apex, "apex"))
        object.__setattr__(self, "axis", as_point(self.axis, "axis"))
        if float(np.linalg.norm(self.axis)) == 0.0:
            raise ValueError("cone axis must be nonzero")
        if not -1.0 <= self.cos_threshold <= 1.0:
            raise ValueError("cos_threshold must lie in [-1, 1]")


@dataclass(frozen=True)
class BoundaryIntersection:
    y: np.ndarray
    lam: float


def intersect_line_hyperplane(x, k, u, h_origin) -> BoundaryIntersection:
    """Intersection of the segment from ``x`` to ``k`` with the hyperplane.

    The hyperplane passes through ``h_origin`` with unit normal ``u``.
    Solves ``y = lam*k + (1 - lam)*x`` with ``<y - h_origin, u> = 0`` and
    requires ``lam`` in [0, 1] (the segment actually crosses).
    """
    x = as_point(x, "x")
    k = as_point(k, "k")
    h_origin = as_point(h_origin, "h_origin")
    u = as_unit_vector(u)
    denom = float((k - x) @ u)
    if denom == 0.0:
        raise ParallelLineError("segment is parallel to the hyperplane")
    lam = float((h_origin - x) @ u) / denom
    if not -1e-12 <= lam <= 1.0 + 1e-12:
        raise NoCrossingError(f"segment does not cross the hyperplane (lambda = {lam!r})")
    return BoundaryIntersection(y=x + lam * (k - x), lam=lam)


def cone_membership(v, spec: ConeSpec) -> bool:
    v = as_point(v, "v")
    d = v - spec.apex
    dn = float(np.linalg.norm(d))
    if dn == 0.0:
        raise ZeroVectorError("v coincides with the cone apex")
    cos = float(d @ spec.axis) / (dn * float(np.linalg.norm(spec.axis)))
    return cos >= spec.cos_threshold


def _orthogonal_unit_samples(rng: np.random.Generator, axis: np.ndarray, count: int) -> np.ndarray:
    """Uniform unit vectors orthogonal to ``axis`` (unit), one per row."""
    n = axis.shape[0]
    w = rng.standard_normal((count, n))
    w -= np.outer(w @ axis, axis)
    norms = np.linalg.norm(w, axis=1)
    good = norms > 0
    return w[good] / norms[good, None]


def sample_tangent_set(x, center, u, radius, n_samples, rng_seed):
    """Sample the set of tangent points of the sphere seen from ``x``.

    Every tangent point can be written ``center + radius*(cos_b * xhat +
    sin_b * w)`` with ``cos_b = radius/|x - center|`` and ``w`` a unit
    vector orthogonal to ``xhat``; sampling ``w`` uniformly covers the
    whole tangent circle. Returns the sample matrix (rows are points).
    """
    x = as_point(x, "x")
    center = as_point(center, "center")
    u = as_unit_vector(u)
    x_rel = x - center
    dist = float(np.linalg.norm(x_rel))
    if dist <= radius:
        raise geometry.NotOutsideBallError("x must lie strictly outside the ball")
    xhat = x_rel / dist
    cos_b = radius / dist
    sin_b = np.sqrt(max(0.0, 1.0 - cos_b * cos_b))
    rng = np.random.default_rng(rng_seed)
    w = _orthogonal_unit_samples(rng, xhat, n_samples)
    return center + radius * (cos_b * xhat + sin_b * w)


def _cap_samples(rng: np.random.Generator, axis: np.ndarray, pivot: np.ndarray,
                 spread: float, count: int) -> np.ndarray:
    """Unit vectors orthogonal to ``axis``, concentrated around ``pivot``.

    Gaussian perturbations of scale ``spread`` re-normalized on the sphere;
    used by the coarse-to-fine search rounds.
    """
    n = axis.shape[0]
    w = pivot[None, :] + spread * rng.standard_normal((count, n))
    w -= np.outer(w @ axis, axis)
    norms = np.linalg.norm(w, axis=1)
    good = norms > 0
    return w[good] / norms[good, None]


def brute_force_tangent(x, center, u, radius, n_samples=100_000, rng_seed=0) -> np.ndarray:
    """Highest tangent point found by random search over the tangent circle.

    Maximizes ``<k - center, u>`` over sampled tangent points subject to a
    nonnegative height, with ties broken toward the lowest sample index.
    The first round samples the circle direction uniformly; later rounds
    concentrate around the incumbent with a geometrically shrinking spread.
    Plain uniform sampling alone cannot localize the maximizer in higher
    dimensions (cap coverage decays like ``n_samples**(-1/(n-2))``), and the
    height is a linear function of the sampled direction, so the sphere
    carries a single maximum and the refinement cannot get trapped.

    This is the independent check of the closed-form hemisphere solution;
    it never calls the closed-form code.
    """
    x = as_point(x, "x")
    center = as_point(center, "center")
    u = as_unit_vector(u)
    x_rel = x - center
    dist = float(np.linalg.norm(x_rel))
    if dist <= radius:
        raise geometry.NotOutsideBallError("x must lie strictly outside the ball")
    xhat = x_rel / dist
    cos_b = radius / dist
    sin_b = np.sqrt(max(0.0, 1.0 - cos_b * cos_b))
    rng = np.random.default_rng(rng_seed)

    rounds = max(1, min(20, int(n_samples) // 1500))
    per_round = max(1, int(n_samples) // rounds)
    best_height = -np.inf
    best_w = None
    spread = 1.0
    for _ in range(rounds):
        if best_w is None:
            w = _orthogonal_unit_samples(rng, xhat, per_round)
        else:
            w = _cap_samples(rng, xhat, best_w, spread, per_round)
        heights = cos_b * float(xhat @ u) + sin_b * (w @ u)
        valid = heights >= 0.0
        if np.any(valid):
            idx = int(np.argmax(np.where(valid, heights, -np.inf)))
            if heights[idx] > best_height:
                best_height = float(heights[idx])
                best_w = w[idx].copy()
        if best_w is not None:
            spread *= 0.7
    if best_w is None:
        raise NoFeasibleSampleError("no sampled tangent point had nonnegative height")
    return center + radius * (cos_b * xhat + sin_b * best_w)


def sample_hemisphere_surface(center, u, radius, n_samples, rng_seed) -> np.ndarray:
    """Uniform samples on the spherical surface with nonnegative height along ``u``."""
    center = as_point(center, "center")
    u = as_unit_vector(u)
    rng = np.random.default_rng(rng_seed)
    v = rng.standard_normal((int(n_samples), center.shape[0]))
    v /= np.linalg.norm(v, axis=1)[:, None]
    heights = v @ u
    v -= 2.0 * np.minimum(heights, 0.0)[:, None] * u  # mirror the lower half up
    return center + radius * v


def sample_solid_hemisphere(center, u, radius, n_samples, rng_seed) -> np.ndarray:
    """Uniform samples inside the half-ball with nonnegative height along ``u``."""
    surface = sample_hemisphere_surface(center, u, radius, n_samples, rng_seed)
    rng = np.random.default_rng((rng_seed, 1))
    n = center.shape[0]
    radii = rng.random(int(n_samples)) ** (1.0 / n)
    return center + radii[:, None] * (surface - center)


def _argmin_boundary_distance(x, center, u, candidates) -> np.ndarray:
    """Candidate whose hyperplane hit lies closest to ``x``; skips non-crossing rows."""
    denom = (candidates - x) @ u
    num = float((center - x) @ u)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = num / denom
    crossing = (denom != 0.0) & (lam >= -1e-12) & (lam <= 1.0 + 1e-12)
    if not np.any(crossing):
        raise NoFeasibleSampleError("no sampled point produced a boundary crossing")
    ys = x + lam[:, None] * (candidates - x)
    dists = np.linalg.norm(ys - x, axis=1)
    dists[~crossing] = np.inf
    return candidates[int(np.argmin(dists))].copy()


def brute_force_min_distance(x, center, u, radius, n_samples=100_000, rng_seed=0) -> np.ndarray:
    """Hemisphere-surface point whose boundary hit lies closest to ``x``.

    Random search over the upper hemisphere surface: each candidate is
    mapped through the line/hyperplane intersection (candidates whose
    segment never crosses are skipped) and the hit distance to ``x`` is
    minimized. A uniform round is followed by shrinking-cap refinement
    rounds around the incumbent, with a uniform slice kept in every round
    as restart protection. Agreement of this argmin with
    :func:`brute_force_tangent`'s argmax is the executable form of the
    optimality identity; neither calls the closed-form code.
    """
    x = as_point(x, "x")
    center = as_point(center, "center")
    u = as_unit_vector(u)
    rng = np.random.default_rng((rng_seed, 7))

    rounds = max(1, min(20, int(n_samples) // 1500))
    per_round = max(4, int(n_samples) // rounds)
    n = center.shape[0]
    best = None
    best_dist = np.inf
    spread = 1.0
    for _ in range(rounds):
        uniform = rng.standard_normal((per_round if best is None else per_round // 8, n))
        if best is not None:
            pivot = (best - center) / radius
            local = pivot[None, :] + spread * rng.standard_normal((per_round - uniform.shape[0], n))
            dirs = np.vstack([uniform, local])
        else:
            dirs = uniform
        norms = np.linalg.norm(dirs, axis=1)
        dirs = dirs[norms > 0] / norms[norms > 0, None]
        heights = dirs @ u
        dirs -= 2.0 * np.minimum(heights, 0.0)[:, None] * u  # mirror onto the upper half
        candidates = center + radius * dirs
        try:
            k = _argmin_boundary_distance(x, center, u, candidates)
        except NoFeasibleSampleError:
            k = None
        if k is not None:
            d = float(np.linalg.norm(intersect_line_hyperplane(x, k, u, center).y - x))
            if d < best_dist:
                best_dist = d
                best = k
        if best is not None:
            spread *= 0.7
    if best is None:
        raise NoFeasibleSampleError("no sampled point produced a boundary crossing")
    return best


def angular_distance(a, b, center) -> float:
    """Angle at ``center`` between the directions toward ``a`` and ``b``."""
    da = as_point(a) - as_point(center)
    db = as_point(b) - as_point(center)
    cos = float(da @ db) / (float(np.linalg.norm(da)) * float(np.linalg.norm(db)))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


# ---------------------------------------------------------------------------
# Property suite (also exposed through the CLI `verify` subcommand).
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def random_feasible_instance(rng: np.random.Generator, dim: int):
    """Random (x, center, u, radius) with x outside the ball and a feasible radius."""
    center = rng.normal(size=dim)
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    # Build x below the hyperplane with a comfortable in-plane offset.
    w = rng.normal(size=dim)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    in_plane = rng.uniform(1.0, 4.0)
    depth = rng.uniform(0.1, 2.0)
    x = center + in_plane * w - depth * u
    radius = rng.uniform(0.2, 0.95) * in_plane
    return x, center, u, radius


@dataclass
class PropertySuiteConfig:
    n_instances: int = 50
    n_samples: int = 100_000
    seed: int = 0
    dims: tuple[int, ...] = (2, 3, 5)
    results: list[CheckResult] = field(default_factory=list)


def run_property_suite(config: PropertySuiteConfig | None = None) -> list[CheckResult]:
    """Numerical witnesses for the optimality claims; returns one result per check."""
    cfg = config or PropertySuiteConfig()
    rng = np.random.default_rng(cfg.seed)
    results: list[CheckResult] = []

    # Closed form vs. both brute-force oracles.
    worst_max = 0.0
    worst_min = 0.0
    per_dim = max(1, cfg.n_instances // len(cfg.dims))
    for dim in cfg.dims:
        for i in range(per_dim):
            x, center, u, radius = random_feasible_instance(rng, dim)
            sol = geometry.tangent_point_hemisphere(x, center, u, radius)
            bf_max = brute_force_tangent(x, center, u, radius, cfg.n_samples, rng_seed=1000 + i)
            bf_min = brute_force_min_distance(x, center, u, radius, cfg.n_samples, rng_seed=2000 + i)
            worst_max = max(worst_max, angular_distance(sol.k, bf_max, center))
            worst_min = max(worst_min, angular_distance(sol.k, bf_min, center))
    results.append(
        CheckResult(
            "closed-form matches brute-force height maximizer",
            worst_max <= 1e-2,
            f"worst angular gap {worst_max:.2e}",
        )
    )
    results.append(
        CheckResult(
            "distance minimizer coincides with height maximizer",
            worst_min <= 2e-2,
            f"worst angular gap {worst_min:.2e}",
        )
    )

    # No interior point beats the closed-form optimum.
    interior_ok = True
    detail = ""
    for i in range(min(20, cfg.n_instances)):
        x, center, u, radius = random_feasible_instance(rng, 3)
        sol = geometry.tangent_point_hemisphere(x, center, u, radius)
        opt = float(np.linalg.norm(intersect_line_hyperplane(x, sol.k, u, center).y - x))
        interior = sample_solid_hemisphere(center, u, radius, 20_000, rng_seed=3000 + i)
        try:
            k = _argmin_boundary_distance(x, center, u, interior)
        except NoFeasibleSampleError:
            continue
        d = float(np.linalg.norm(intersect_line_hyperplane(x, k, u, center).y - x))
        if d < opt - 1e-6:
            interior_ok = False
            detail = f"interior point beat optimum by {opt - d:.2e}"
            break
    results.append(CheckResult("interior samples never beat the closed form", interior_ok, detail))

    # Raising a point along u shrinks lambda through a growing denominator.
    mono_ok = True
    for _ in range(200):
        x, center, u, radius = random_feasible_instance(rng, 4)
        sol = geometry.tangent_point_hemisphere(x, center, u, radius)
        lam0 = intersect_line_hyperplane(x, sol.k, u, center).lam
        lam1 = intersect_line_hyperplane(x, sol.k + 0.5 * radius * u, u, center).lam
        if not lam1 < lam0:
            mono_ok = False
            break
    results.append(CheckResult("lambda decreases as the target climbs along u", mono_ok))

    if config is not None:
        config.results = results
    return results
