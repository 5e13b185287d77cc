import numpy as np
import pytest

from hardlabel.oracles import diagonal_halfspace_spec


def random_feasible_instance(rng, dim):
    """Random (x, center, u, radius) with x outside the ball and the
    in-plane offset comfortably above the radius."""
    center = rng.normal(size=dim)
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    w = rng.normal(size=dim)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    in_plane = rng.uniform(1.0, 4.0)
    depth = rng.uniform(0.1, 2.0)
    x = center + in_plane * w - depth * u
    radius = rng.uniform(0.2, 0.95) * in_plane
    return x, center, u, radius


def offset_adversarial_point(x, w, margin, seed, sup_room=0.45):
    """Adversarial point at depth 1.5*margin past the boundary with a large
    in-plane offset, kept inside the unit box. Deliberately not aligned
    with the normal, so the initial binary search cannot land at the
    optimum by construction."""
    dim = x.shape[0]
    rng = np.random.default_rng((seed, 99))
    z = rng.standard_normal(dim)
    z -= (z @ w) * w
    z /= np.linalg.norm(z)
    depth = 1.5 * margin
    room = sup_room - depth / np.sqrt(dim)
    beta = min(2.0, room / np.max(np.abs(z)))
    p = x + depth * w + beta * z
    assert np.all(p >= 0.0) and np.all(p <= 1.0)
    return p


@pytest.fixture
def flat100():
    """100-dimensional halfspace oracle spec with unit margin at the center."""
    spec = diagonal_halfspace_spec(100, margin_at_center=1.0)
    x = np.full(100, 0.5)
    w = np.asarray(spec.params["w"])
    return spec, x, w
