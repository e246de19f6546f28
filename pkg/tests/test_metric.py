import numpy as np
import pytest

from hilbertia.domains import Ellipse, Polygon, clean_hull, square
from hilbertia.errors import (
    EmptyIntersection,
    NotConverged,
    NotInterior,
    NotOnBoundary,
)
from hilbertia.holonomy import embed_sl2
from hilbertia.metric import (
    FinslerSample,
    VolumeEstimate,
    busemann_function,
    busemann_volume,
    distance,
    distance_many,
    finsler_norm,
    finsler_sample,
    unit_ball_volume,
    unit_ball_volumes_many,
)
from hilbertia.projective import ProjPoint, act


def klein_distance(x, y):
    """Cayley-Klein closed form for the hyperbolic metric on the unit disk."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    num = 1.0 - x @ y
    den = np.sqrt((1.0 - x @ x) * (1.0 - y @ y))
    return float(np.arccosh(num / den))


def random_interior(rng, scale=0.95):
    r = scale * np.sqrt(rng.uniform(0.0, 1.0))
    th = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([r * np.cos(th), r * np.sin(th)])


def random_sl2(rng, spread=0.8):
    m = np.eye(2) + spread * rng.normal(size=(2, 2))
    d = np.linalg.det(m)
    while abs(d) < 0.2:
        m = np.eye(2) + spread * rng.normal(size=(2, 2))
        d = np.linalg.det(m)
    return m / np.sqrt(abs(d)) * (1.0 if d > 0 else 1.0)


# ---------------------------------------------------------------------------
# distance


def test_distance_examples_disk_and_square():
    want = np.arctanh(0.5)  # = 0.5 * log 3 = 0.5493061...
    assert distance(Ellipse.unit_disk(), (0.0, 0.0), (0.5, 0.0)) == pytest.approx(want, abs=1e-12)
    assert distance(square(), (0.0, 0.0), (0.5, 0.0)) == pytest.approx(want, abs=1e-12)


def test_disk_distance_matches_klein_closed_form():
    disk = Ellipse.unit_disk()
    rng = np.random.default_rng(17)
    for _ in range(100):
        x, y = random_interior(rng), random_interior(rng)
        assert distance(disk, x, y) == pytest.approx(klein_distance(x, y), abs=1e-9)


def test_distance_center_formula():
    disk = Ellipse.unit_disk()
    for r in (0.1, 0.5, 0.9, 0.99):
        assert distance(disk, (0.0, 0.0), (r, 0.0)) == pytest.approx(np.arctanh(r), abs=1e-10)


def test_distance_symmetry_and_identity():
    rng = np.random.default_rng(4)
    domains = [Ellipse.unit_disk(), square(), _pentagon()]
    for dom in domains:
        for _ in range(30):
            x = _random_in(dom, rng)
            y = _random_in(dom, rng)
            assert distance(dom, x, y) == pytest.approx(distance(dom, y, x), abs=1e-12)
        x = _random_in(dom, rng)
        assert distance(dom, x, x) == 0.0


def test_triangle_inequality():
    rng = np.random.default_rng(5)
    for dom in (Ellipse.unit_disk(), square(), _pentagon()):
        for _ in range(50):
            x, y, z = (_random_in(dom, rng) for _ in range(3))
            assert distance(dom, x, z) <= distance(dom, x, y) + distance(dom, y, z) + 1e-9


def test_points_on_a_chord_are_geodesic():
    rng = np.random.default_rng(6)
    for dom in (Ellipse.unit_disk(), square()):
        for _ in range(40):
            x, y = _random_in(dom, rng), _random_in(dom, rng)
            t = rng.uniform(0.05, 0.95)
            z = x + t * (y - x)
            lhs = distance(dom, x, z) + distance(dom, z, y)
            assert lhs == pytest.approx(distance(dom, x, y), abs=1e-10)


def test_distance_rejects_non_interior_points():
    disk = Ellipse.unit_disk()
    with pytest.raises(NotInterior):
        distance(disk, (0.0, 0.0), (1.5, 0.0))
    with pytest.raises(NotInterior):
        distance(disk, (1.0, 0.0), (0.0, 0.0))  # boundary point
    with pytest.raises(NotInterior):
        finsler_norm(square(), (1.0, 1.0), (1.0, 0.0))


def test_distance_many_matches_scalar_calls():
    dom = _pentagon()
    rng = np.random.default_rng(7)
    o = _random_in(dom, rng)
    pts = np.array([_random_in(dom, rng) for _ in range(25)])
    batch = distance_many(dom, o, pts)
    for i, p in enumerate(pts):
        assert batch[i] == pytest.approx(distance(dom, o, p), abs=1e-12)


def test_distance_blows_up_near_the_boundary():
    disk = Ellipse.unit_disk()
    d1 = distance(disk, (0.0, 0.0), (0.9, 0.0))
    d2 = distance(disk, (0.0, 0.0), (0.999, 0.0))
    assert d2 > d1 + 2.0


def test_projective_invariance_of_distance():
    # conic-preserving maps move the disk onto itself
    disk = Ellipse.unit_disk()
    rng = np.random.default_rng(8)
    for _ in range(25):
        g = embed_sl2(random_sl2(rng))
        x, y = random_interior(rng, 0.9), random_interior(rng, 0.9)
        gx = act(g, ProjPoint.affine(*x)).to_affine()
        gy = act(g, ProjPoint.affine(*y)).to_affine()
        assert distance(disk, gx, gy) == pytest.approx(distance(disk, x, y), abs=1e-9)


def test_affine_invariance_on_polygons():
    dom = _pentagon()
    a = np.array([[1.3, 0.4], [-0.2, 0.8]])
    b = np.array([0.3, -0.1])
    image = Polygon(dom.vertices @ a.T + b)
    rng = np.random.default_rng(9)
    for _ in range(25):
        x, y = _random_in(dom, rng), _random_in(dom, rng)
        assert distance(image, a @ x + b, a @ y + b) == pytest.approx(
            distance(dom, x, y), abs=1e-9
        )


# ---------------------------------------------------------------------------
# finsler norm


def test_finsler_examples():
    disk = Ellipse.unit_disk()
    assert finsler_norm(disk, (0.0, 0.0), (1.0, 0.0)) == pytest.approx(1.0, abs=1e-12)
    # at (0.5, 0) the forward gap is 0.5 and the backward gap 1.5
    assert finsler_norm(disk, (0.5, 0.0), (1.0, 0.0)) == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert finsler_norm(square(), (0.5, 0.0), (1.0, 0.0)) == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_finsler_homogeneity_and_reversibility():
    dom = square()
    rng = np.random.default_rng(10)
    for _ in range(30):
        x = _random_in(dom, rng)
        v = rng.normal(size=2)
        n = finsler_norm(dom, x, v)
        assert finsler_norm(dom, x, 2.5 * v) == pytest.approx(2.5 * n, rel=1e-12)
        assert finsler_norm(dom, x, -v) == pytest.approx(n, rel=1e-12)
    assert finsler_norm(dom, (0.2, 0.1), (0.0, 0.0)) == 0.0


def test_finsler_is_the_metric_derivative():
    rng = np.random.default_rng(11)
    for dom in (Ellipse.unit_disk(), _pentagon()):
        for _ in range(20):
            x = _random_in(dom, rng, margin=0.2)
            v = rng.normal(size=2)
            v /= np.linalg.norm(v)
            t = 1e-5
            fd = distance(dom, x, x + t * v) / t
            assert fd == pytest.approx(finsler_norm(dom, x, v), rel=1e-4)


def test_chord_length_integral_matches_distance():
    # Simpson integration of the norm along the straight chord
    dom = Ellipse.unit_disk()
    x = np.array([-0.31, 0.22])
    y = np.array([0.58, -0.4])
    n = 10001
    s = np.linspace(0.0, 1.0, n)
    pts = x[None, :] + s[:, None] * (y - x)[None, :]
    v = y - x
    s_minus, s_plus = dom.ray_params_many(pts, v[None, :])
    norms = 0.5 * (1.0 / s_plus[:, 0] + 1.0 / (-s_minus[:, 0]))
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    integral = (s[1] - s[0]) / 3.0 * float(w @ norms)
    assert integral == pytest.approx(distance(dom, x, y), abs=1e-6)


def test_finsler_transforms_with_the_projective_jacobian():
    disk = Ellipse.unit_disk()
    rng = np.random.default_rng(12)
    for _ in range(20):
        g = embed_sl2(random_sl2(rng))
        m = g.m
        x = random_interior(rng, 0.85)
        v = rng.normal(size=2)
        h = m @ np.array([x[0], x[1], 1.0])
        xp = h[:2] / h[2]
        # derivative of the affine action at x
        jac = (m[:2, :2] - xp[:, None] * m[2, :2][None, :]) / h[2]
        assert finsler_norm(disk, xp, jac @ v) == pytest.approx(
            finsler_norm(disk, x, v), rel=1e-9
        )


def test_finsler_sample_bundles_fields():
    disk = Ellipse.unit_disk()
    fs = finsler_sample(disk, (0.5, 0.0), (1.0, 0.0))
    assert isinstance(fs, FinslerSample)
    assert fs.x == (0.5, 0.0)
    assert fs.v == (1.0, 0.0)
    assert fs.norm == pytest.approx(4.0 / 3.0, abs=1e-12)


# ---------------------------------------------------------------------------
# unit balls


def test_unit_ball_volume_is_one_at_disk_center():
    assert unit_ball_volume(Ellipse.unit_disk(), (0.0, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_unit_ball_shrinks_toward_the_boundary():
    disk = Ellipse.unit_disk()
    vals = [unit_ball_volume(disk, (r, 0.0)) for r in (0.0, 0.4, 0.8)]
    assert vals[0] > vals[1] > vals[2]


def test_unit_ball_grows_with_the_domain():
    inner, outer = square(1.0), square(1.5)
    for x in [(0.0, 0.0), (0.3, -0.2), (0.7, 0.1)]:
        assert unit_ball_volume(inner, x) < unit_ball_volume(outer, x)


def test_unit_ball_rotation_invariance():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])  # square symmetry
    sq = square()
    for x in [(0.3, 0.1), (0.5, -0.4)]:
        x = np.asarray(x)
        assert unit_ball_volume(sq, rot @ x) == pytest.approx(
            unit_ball_volume(sq, x), abs=1e-9
        )
    disk = Ellipse.unit_disk()
    ang = 2.0 * np.pi * 37.0 / 512.0  # grid-congruent angle
    c, s = np.cos(ang), np.sin(ang)
    r2 = np.array([[c, -s], [s, c]])
    x = np.array([0.45, 0.2])
    assert unit_ball_volume(disk, r2 @ x) == pytest.approx(unit_ball_volume(disk, x), abs=1e-9)


def test_unit_ball_volumes_many_matches_scalar():
    dom = _pentagon()
    rng = np.random.default_rng(13)
    pts = np.array([_random_in(dom, rng) for _ in range(17)])
    batch = unit_ball_volumes_many(dom, pts, directions=512)
    for i, p in enumerate(pts):
        # scalar path adds kink nodes; agreement is quadrature-level
        assert batch[i] == pytest.approx(unit_ball_volume(dom, p, directions=512), rel=1e-3)


# ---------------------------------------------------------------------------
# busemann volume


def test_volume_of_small_disk_is_euclidean():
    disk = Ellipse.unit_disk()
    eps = 0.05
    est = busemann_volume(disk, Ellipse.circle((0.0, 0.0), eps), samples=65536)
    want = np.pi * eps * eps
    assert abs(est.value - want) < max(3.0 * est.std_error, 2e-4 * want + 1e-7)


def test_ideal_triangle_has_area_pi():
    disk = Ellipse.unit_disk()
    ang = np.array([0.5, 0.5 + 2.0 * np.pi / 3.0, 0.5 + 4.0 * np.pi / 3.0])
    tri = Polygon(np.stack([np.cos(ang), np.sin(ang)], axis=1))
    est = busemann_volume(disk, tri)
    assert est.value == pytest.approx(np.pi, rel=1e-4)


def test_volume_matches_tensor_quadrature_oracle():
    # square region well inside the disk: smooth integrand, spectral oracle
    disk = Ellipse.unit_disk()
    half, cx, cy = 0.4, 0.1, -0.05
    region = Polygon(
        [
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
        ]
    )
    nodes, weights = np.polynomial.legendre.leggauss(120)
    xs = cx + half * nodes
    ys = cy + half * nodes
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    dens = (1.0 - gx * gx - gy * gy) ** -1.5
    oracle = half * half * float(weights @ dens @ weights)
    est = busemann_volume(disk, region)
    assert est.value == pytest.approx(oracle, rel=1e-6)


def test_volume_is_monotone_in_the_region():
    disk = Ellipse.unit_disk()
    small = Polygon([[-0.3, -0.3], [0.3, -0.3], [0.3, 0.3], [-0.3, 0.3]])
    large = Polygon([[-0.6, -0.6], [0.6, -0.6], [0.6, 0.6], [-0.6, 0.6]])
    assert busemann_volume(disk, small).value < busemann_volume(disk, large).value


def test_volume_affine_invariance():
    # volumes are affine-invariant: push the whole picture through S x + c
    disk = Ellipse.unit_disk()
    region = Polygon([[-0.5, -0.2], [0.4, -0.3], [0.5, 0.4], [-0.3, 0.5]])
    s = np.array([[1.4, 0.3], [-0.1, 0.7]])
    c = np.array([0.2, -0.4])
    t = np.linalg.inv(np.block([[s, c[:, None]], [np.zeros((1, 2)), np.ones((1, 1))]]))
    conic = t.T @ np.diag([1.0, 1.0, -1.0]) @ t
    image_dom = Ellipse(conic)
    image_region = Polygon(region.vertices @ s.T + c)
    v0 = busemann_volume(disk, region).value
    v1 = busemann_volume(image_dom, image_region).value
    assert v1 == pytest.approx(v0, rel=1e-8)


def test_volume_is_deterministic():
    disk = Ellipse.unit_disk()
    reg = Ellipse.circle((0.1, 0.0), 0.3)
    a = busemann_volume(disk, reg, samples=4096)
    b = busemann_volume(disk, reg, samples=4096)
    assert a.value == b.value and a.std_error == b.std_error


def test_volume_error_shrinks_with_samples():
    disk = Ellipse.unit_disk()
    reg = Ellipse.circle((0.1, 0.0), 0.3)
    coarse = busemann_volume(disk, reg, samples=4096)
    fine = busemann_volume(disk, reg, samples=65536)
    ratio = coarse.std_error / fine.std_error
    assert 2.0 < ratio < 8.0  # nominal 4


def test_volume_empty_intersection_raises():
    disk = Ellipse.unit_disk()
    far = Polygon([[5.0, 5.0], [6.0, 5.0], [6.0, 6.0], [5.0, 6.0]])
    with pytest.raises(EmptyIntersection):
        busemann_volume(disk, far)


def test_volume_estimate_to_json():
    est = VolumeEstimate(3.14, 0.01, 4096)
    blob = est.to_json()
    assert blob == {"value": 3.14, "std_error": 0.01, "samples": 4096}


# ---------------------------------------------------------------------------
# busemann function


def test_busemann_on_ray_is_minus_arctanh():
    disk = Ellipse.unit_disk()
    o = (0.0, 0.0)
    xi = (1.0, 0.0)
    for r in (0.2, 0.5, 0.8):
        val = busemann_function(disk, o, (r, 0.0), xi)
        assert val == pytest.approx(-np.arctanh(r), abs=1e-6)


def test_busemann_vanishes_at_the_basepoint():
    disk = Ellipse.unit_disk()
    assert busemann_function(disk, (0.0, 0.0), (0.0, 0.0), (0.0, 1.0)) == pytest.approx(
        0.0, abs=1e-6
    )
    assert busemann_function(square(), (0.0, 0.0), (0.0, 0.0), (1.0, 0.25)) == pytest.approx(
        0.0, abs=1e-6
    )


def test_busemann_decreases_along_the_ray():
    disk = Ellipse.unit_disk()
    xi = (0.0, 1.0)
    vals = [busemann_function(disk, (0.0, 0.0), (0.0, y), xi) for y in (0.0, 0.3, 0.6)]
    assert vals[0] > vals[1] > vals[2]
    # moving distance d along the ray lowers the value by exactly d
    d = distance(disk, (0.0, 0.3), (0.0, 0.6))
    assert vals[1] - vals[2] == pytest.approx(d, abs=1e-6)


def test_busemann_cocycle():
    disk = Ellipse.unit_disk()
    rng = np.random.default_rng(14)
    xi = (np.cos(0.7), np.sin(0.7))
    for _ in range(15):
        o, y, z = (random_interior(rng, 0.7) for _ in range(3))
        lhs = busemann_function(disk, o, z, xi)
        rhs = busemann_function(disk, o, y, xi) + busemann_function(disk, y, z, xi)
        assert lhs == pytest.approx(rhs, abs=2e-4)


def test_busemann_rejects_off_boundary_targets():
    disk = Ellipse.unit_disk()
    with pytest.raises(NotOnBoundary):
        busemann_function(disk, (0.0, 0.0), (0.1, 0.0), (0.5, 0.0))
    with pytest.raises(NotOnBoundary):
        busemann_function(disk, (0.0, 0.0), (0.1, 0.0), (1.5, 0.0))


def test_busemann_flags_overlong_horizons():
    # the ray's gap to the boundary shrinks like e^{-2t}; far beyond the
    # float64 resolution the truncation check must refuse, not lie
    disk = Ellipse.unit_disk()
    with pytest.raises((NotConverged, NotInterior)):
        busemann_function(disk, (0.0, 0.0), (0.3, 0.2), (0.0, 1.0), horizon=40.0)


# ---------------------------------------------------------------------------
# helpers


def _pentagon():
    ang = np.linspace(0.0, 2.0 * np.pi, 5, endpoint=False) + 0.3
    r = np.array([1.0, 0.8, 1.1, 0.9, 1.0])
    return Polygon(clean_hull(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)))


def _random_in(dom, rng, margin=0.05):
    x0, y0, x1, y1 = dom.bbox()
    while True:
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        if dom.boundary_distance(p) > margin:
            return p
