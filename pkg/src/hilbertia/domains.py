"""Properly convex planar domains and their geometric primitives.

Two concrete variants: Ellipse (any conic of signature (2,1) bounded in the
affine chart) and Polygon (counterclockwise strictly convex vertex list).
OrbitHull is a Polygon remembering the word depth it was built from.  All
domains are immutable; every query is a pure function.
"""

import numpy as np
from scipy.spatial import ConvexHull

from .errors import (
    NotInterior,
    NotPositiveDefinite,
    OriginNotInterior,
    TooFewPoints,
)
from .projective import attracting_fixed_points

BOUNDARY_BAND = 1e-10

INTERIOR = "interior"
BOUNDARY = "boundary"
EXTERIOR = "exterior"


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


class Chord:
    """A maximal chord of the domain through x in a given direction.

    p_minus lies in direction -v from x, p_plus in direction +v; both are on
    the boundary and x is strictly between them.
    """

    __slots__ = ("p_minus", "p_plus", "x", "direction")

    def __init__(self, p_minus, p_plus, x, direction):
        self.p_minus = _frozen(p_minus)
        self.p_plus = _frozen(p_plus)
        self.x = _frozen(x)
        self.direction = _frozen(direction)

    def __repr__(self):
        return "Chord(p-=%s, p+=%s)" % (self.p_minus, self.p_plus)


class ConvexDomain:
    """Common interface of the domain variants."""

    # subclasses fill these in
    def contains(self, x):
        raise NotImplementedError

    def boundary_distance(self, x):
        raise NotImplementedError

    def chord(self, x, v):
        raise NotImplementedError

    def bbox(self):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError

    def translate(self, shift):
        raise NotImplementedError


class Ellipse(ConvexDomain):
    """Domain bounded by a conic of signature (2,1).

    The conic matrix C is stored so that interior points give h^T C h < 0 and
    the top-left 2x2 block is positive definite (that block definite is
    exactly boundedness in the chart z = 1).
    """

    def __init__(self, conic, dual_shift=None):
        c = np.asarray(conic, dtype=float).reshape(3, 3)
        c = 0.5 * (c + c.T)
        block = c[:2, :2]
        if np.trace(block) < 0:
            c = -c
            block = c[:2, :2]
        # positive definite block: both leading minors positive
        if block[0, 0] <= 0 or np.linalg.det(block) <= 0:
            raise NotPositiveDefinite("conic is not bounded in the affine chart")
        center = np.linalg.solve(block, -c[:2, 2])
        hc = np.append(center, 1.0)
        if hc @ c @ hc >= 0:
            raise NotPositiveDefinite("conic has empty interior")
        scale = np.max(np.abs(c))
        self.conic = _frozen(c / scale)
        self.center = _frozen(center)
        self.dual_shift = None if dual_shift is None else _frozen(dual_shift)
        self._block = self.conic[:2, :2]
        self._b = self.conic[:2, 2]
        self._c0 = self.conic[2, 2]

    @classmethod
    def unit_disk(cls):
        return cls(np.diag([1.0, 1.0, -1.0]))

    @classmethod
    def circle(cls, center, radius):
        cx, cy = center
        c = np.array([
            [1.0, 0.0, -cx],
            [0.0, 1.0, -cy],
            [-cx, -cy, cx * cx + cy * cy - radius * radius],
        ])
        return cls(c)

    @classmethod
    def axis_aligned(cls, center, rx, ry):
        cx, cy = center
        c = np.array([
            [1.0 / rx**2, 0.0, -cx / rx**2],
            [0.0, 1.0 / ry**2, -cy / ry**2],
            [-cx / rx**2, -cy / ry**2, cx**2 / rx**2 + cy**2 / ry**2 - 1.0],
        ])
        return cls(c)

    def value(self, x):
        """Conic evaluated at the affine point: negative inside."""
        x = np.asarray(x, dtype=float)
        return x @ self._block @ x + 2.0 * self._b @ x + self._c0

    def boundary_distance(self, x):
        """Approximate signed Euclidean distance to the boundary, > 0 inside.

        First-order estimate -value/|grad|; exact near the boundary, which is
        where callers need it.
        """
        x = np.asarray(x, dtype=float)
        v = self.value(x)
        g = 2.0 * (self._block @ x + self._b)
        ng = float(np.hypot(g[0], g[1]))
        if ng < 1e-300:
            # at the center: fall back to shortest semi-axis
            lam = np.linalg.eigvalsh(self._block)
            rho = -self.value(self.center)
            return float(np.sqrt(rho / lam[1]))
        return float(-v / ng)

    def contains(self, x):
        d = self.boundary_distance(x)
        if d > BOUNDARY_BAND:
            return INTERIOR
        if d < -BOUNDARY_BAND:
            return EXTERIOR
        return BOUNDARY

    def _ray_params(self, x, v):
        """Roots of the restricted quadratic along x + s v, s_minus < 0 < s_plus."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        a = v @ self._block @ v
        b = 2.0 * (v @ self._block @ x + self._b @ v)
        c = self.value(x)
        # interior point: c < 0, block pos def: a > 0, two real roots
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(disc)
        if b >= 0:
            q = -0.5 * (b + sq)
        else:
            q = -0.5 * (b - sq)
        r1 = q / a
        r2 = c / q
        return (min(r1, r2), max(r1, r2))

    def chord(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = float(np.hypot(v[0], v[1]))
        if nv == 0.0:
            raise ValueError("zero direction")
        if self.contains(x) != INTERIOR:
            raise NotInterior("chord basepoint must be interior")
        s_minus, s_plus = self._ray_params(x, v)
        return Chord(x + s_minus * v, x + s_plus * v, x, v / nv)

    def ray_params_many(self, xs, vs):
        """Vectorised (s_minus, s_plus) for stacked points (n,2) against
        directions (m,2); returns arrays of shape (n, m)."""
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(vs, dtype=float)
        a = np.einsum("md,de,me->m", vs, self._block, vs)[None, :]
        bx = xs @ self._block + self._b
        b = 2.0 * bx @ vs.T
        c = (np.einsum("nd,de,ne->n", xs, self._block, xs) + 2.0 * xs @ self._b + self._c0)[:, None]
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0, sq, -sq))
        r1 = q / a
        r2 = c / q
        return np.minimum(r1, r2), np.maximum(r1, r2)

    def bbox(self):
        block_inv = np.linalg.inv(self._block)
        rho = -self.value(self.center)
        dx = np.sqrt(rho * block_inv[0, 0])
        dy = np.sqrt(rho * block_inv[1, 1])
        cx, cy = self.center
        return (cx - dx, cy - dy, cx + dx, cy + dy)

    def boundary_points(self, n=256):
        """n points along the boundary, counterclockwise."""
        lam, vecs = np.linalg.eigh(self._block)
        rho = -self.value(self.center)
        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        circ = np.stack([np.cos(th) * np.sqrt(rho / lam[0]), np.sin(th) * np.sqrt(rho / lam[1])], axis=1)
        pts = circ @ vecs.T + self.center
        if np.linalg.det(vecs) < 0:
            pts = pts[::-1]
        return pts

    def translate(self, shift):
        s = np.asarray(shift, dtype=float)
        t = np.array([[1.0, 0.0, -s[0]], [0.0, 1.0, -s[1]], [0.0, 0.0, 1.0]])
        return Ellipse(t.T @ self.conic @ t)

    def to_json(self):
        obj = {"type": "ellipse", "conic": [float(v) for v in self.conic.reshape(9)]}
        if self.dual_shift is not None:
            obj["dual_shift"] = [float(v) for v in self.dual_shift]
        return obj

    def __repr__(self):
        return "Ellipse(center=%s)" % np.round(self.center, 6)


class Polygon(ConvexDomain):
    """Strictly convex polygon given by counterclockwise vertices."""

    def __init__(self, vertices, dual_shift=None):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("need at least 3 affine vertices")
        e = np.roll(v, -1, axis=0) - v
        lens = np.linalg.norm(e, axis=1)
        if np.any(lens == 0.0):
            raise ValueError("repeated vertices")
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        # strict convexity: each turn has positive sine beyond tolerance
        sines = cross / (lens * np.roll(lens, -1))
        if np.any(sines <= 1e-12):
            raise ValueError("vertices are not in strictly convex counterclockwise position")
        self.vertices = _frozen(v)
        self.dual_shift = None if dual_shift is None else _frozen(dual_shift)
        # inward unit normals and offsets: interior means n.x - c > 0 for all edges
        n = np.stack([-e[:, 1], e[:, 0]], axis=1) / lens[:, None]
        self._normals = _frozen(n)
        self._offsets = _frozen(np.einsum("ed,ed->e", n, v))

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.min(self._normals @ x - self._offsets))

    def boundary_distance_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.min(xs @ self._normals.T - self._offsets, axis=1)

    def contains(self, x):
        d = self.boundary_distance(x)
        if d > BOUNDARY_BAND:
            return INTERIOR
        if d < -BOUNDARY_BAND:
            return EXTERIOR
        return BOUNDARY

    def _ray_params(self, x, v):
        """Half-plane clipping of the line x + s v; for convex input this is
        equivalent to walking the edges with segment-parameter tests."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = self._normals @ v
        nx = self._normals @ x - self._offsets
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -nx / nv
        exiting = nv < -1e-14 * np.linalg.norm(v)
        entering = nv > 1e-14 * np.linalg.norm(v)
        s_plus = np.min(t[exiting])
        s_minus = np.max(t[entering])
        return float(s_minus), float(s_plus)

    def chord(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = float(np.hypot(v[0], v[1]))
        if nv == 0.0:
            raise ValueError("zero direction")
        if self.contains(x) != INTERIOR:
            raise NotInterior("chord basepoint must be interior")
        s_minus, s_plus = self._ray_params(x, v)
        return Chord(x + s_minus * v, x + s_plus * v, x, v / nv)

    def ray_params_many(self, xs, vs):
        """Vectorised (s_minus, s_plus), shapes (n, m) for (n,2) x (m,2)."""
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(vs, dtype=float)
        nv = vs @ self._normals.T                       # (m, e)
        nx = xs @ self._normals.T - self._offsets       # (n, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -nx[:, None, :] / nv[None, :, :]        # (n, m, e)
        vnorm = np.linalg.norm(vs, axis=1)[None, :, None]
        exiting = nv[None, :, :] < -1e-14 * vnorm
        entering = nv[None, :, :] > 1e-14 * vnorm
        s_plus = np.min(np.where(exiting, t, np.inf), axis=2)
        s_minus = np.max(np.where(entering, t, -np.inf), axis=2)
        return s_minus, s_plus

    def bbox(self):
        v = self.vertices
        return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())

    def boundary_points(self, n=256):
        """Points along the boundary, counterclockwise, spread by edge length."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        lens = np.linalg.norm(e, axis=1)
        total = lens.sum()
        out = []
        for i in range(len(v)):
            k = max(1, int(round(n * lens[i] / total)))
            ts = np.arange(k) / k
            out.append(v[i] + ts[:, None] * e[i])
        return np.concatenate(out, axis=0)

    def centroid(self):
        return self.vertices.mean(axis=0)

    def translate(self, shift):
        return Polygon(self.vertices + np.asarray(shift, dtype=float))

    def to_json(self):
        obj = {"type": "polygon", "vertices": [[float(a), float(b)] for a, b in self.vertices]}
        if self.dual_shift is not None:
            obj["dual_shift"] = [float(v) for v in self.dual_shift]
        return obj

    def __repr__(self):
        return "Polygon(%d vertices)" % len(self.vertices)


class OrbitHull(Polygon):
    """Convex hull of word fixed points; remembers the enumeration depth."""

    def __init__(self, vertices, depth, dual_shift=None):
        super().__init__(vertices, dual_shift=dual_shift)
        self.depth = int(depth)

    def translate(self, shift):
        return OrbitHull(self.vertices + np.asarray(shift, dtype=float), self.depth)

    def to_json(self):
        obj = super().to_json()
        obj["depth"] = self.depth
        return obj

    def __repr__(self):
        return "OrbitHull(%d vertices, depth %d)" % (len(self.vertices), self.depth)


def domain_from_json(obj):
    if obj["type"] == "ellipse":
        shift = obj.get("dual_shift")
        return Ellipse(np.asarray(obj["conic"], dtype=float).reshape(3, 3), dual_shift=shift)
    if obj["type"] == "polygon":
        shift = obj.get("dual_shift")
        if "depth" in obj:
            return OrbitHull(obj["vertices"], obj["depth"], dual_shift=shift)
        return Polygon(obj["vertices"], dual_shift=shift)
    raise ValueError("unknown domain type %r" % obj["type"])


def contains(domain, x):
    return domain.contains(x)


def chord_endpoints(domain, x, v):
    return domain.chord(x, v)


def square(half=1.0):
    return Polygon([[-half, -half], [half, -half], [half, half], [-half, half]])


def clean_hull(points, angle_tol=1e-9, cross_tol=1e-12):
    """Convex hull of a point cloud with near-duplicate merging.

    Vertices closer than angle_tol in angular order about the centroid are
    merged and turns with relative cross product below cross_tol dropped, so
    the result satisfies the strict-convexity invariant of Polygon.
    """
    pts = np.asarray(points, dtype=float)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if len(pts) < 3:
        raise TooFewPoints("fewer than 3 finite points")
    # cheap pre-dedup keeps ConvexHull robust on huge clouds of repeats
    uniq = np.unique(np.round(pts, 12), axis=0)
    if len(uniq) < 3:
        raise TooFewPoints("fewer than 3 distinct points")
    try:
        hull = ConvexHull(uniq)
    except Exception as exc:
        raise TooFewPoints("degenerate point cloud: %s" % exc) from None
    v = uniq[hull.vertices]  # counterclockwise
    center = v.mean(axis=0)
    ang = np.arctan2(v[:, 1] - center[1], v[:, 0] - center[0])
    keep = np.ones(len(v), dtype=bool)
    for i in range(len(v)):
        j = (i + 1) % len(v)
        if abs((ang[j] - ang[i] + np.pi) % (2.0 * np.pi) - np.pi) < angle_tol:
            keep[j] = False
    v = v[keep]
    # drop near-collinear turns until stable
    while len(v) >= 3:
        e = np.roll(v, -1, axis=0) - v
        lens = np.linalg.norm(e, axis=1)
        sines = (e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)) / (
            lens * np.roll(lens, -1)
        )
        bad = sines <= cross_tol
        if not bad.any():
            break
        # removing the vertex at the apex of the flattest turn
        worst = int(np.argmin(sines))
        v = np.delete(v, (worst + 1) % len(v), axis=0)
    if len(v) < 3:
        raise TooFewPoints("hull degenerated to fewer than 3 vertices")
    return v


def conic_fit_residual(points):
    """RMS residual of the best least-squares conic through a point set.

    Points are first translated to their centroid and scaled to RMS radius
    sqrt(2) so the readout does not depend on where or how large the figure
    is.  The conic coefficients are the unit singular vector minimising the
    algebraic residual; the return value is that smallest singular value
    divided by sqrt(n).  Exactly conical point sets give ~0, anything else a
    scale-free positive number.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 6:
        raise TooFewPoints("conic fit needs at least 6 planar points")
    center = pts.mean(axis=0)
    q = pts - center
    rms = np.sqrt(np.mean(np.sum(q * q, axis=1)))
    if rms < 1e-300:
        raise TooFewPoints("conic fit needs spread-out points")
    q = q * (np.sqrt(2.0) / rms)
    x, y = q[:, 0], q[:, 1]
    design = np.stack([x * x, 2.0 * x * y, y * y, 2.0 * x, 2.0 * y,
                       np.ones_like(x)], axis=1)
    svals = np.linalg.svd(design, compute_uv=False)
    return float(svals[-1] / np.sqrt(len(pts)))


def orbit_hull(rep, depth=8, seed=None):
    """Convex hull of attracting fixed points of all reduced words <= depth.

    Fixed points of hyperbolic words lie exactly on the boundary of the
    invariant domain, so the hull converges to it from inside.  The seed
    point is accepted for interface compatibility but the fixed-point
    strategy does not consume it.
    """
    from .holonomy import generator_matrices

    gens, labels = generator_matrices(rep)
    inverse_of = {0: 1, 1: 0, 2: 3, 3: 2}
    mats = []
    # level-by-level products over reduced words, tracking the leading letter
    level = {}
    for gi in range(4):
        level[gi] = gens[gi][None, :, :]
        mats.append(level[gi])
    for _ in range(1, depth):
        nxt = {}
        for gi in range(4):
            blocks = [level[lead] for lead in range(4) if inverse_of[gi] != lead]
            tails = np.concatenate(blocks, axis=0)
            prod = np.einsum("ab,nbc->nac", gens[gi], tails)
            nxt[gi] = prod
            mats.append(prod)
        level = nxt
    allmats = np.concatenate(mats, axis=0)
    # words in a unit-determinant group: pass the determinant algebraically,
    # the numerical one is noise once entries are large
    vecs, mask = attracting_fixed_points(allmats, det=1.0)
    vecs = vecs[mask]
    if len(vecs) < 3:
        raise TooFewPoints("too few hyperbolic words at this depth")
    # to the affine chart, guarding the line at infinity
    good = np.abs(vecs[:, 2]) > 1e-9 * np.max(np.abs(vecs), axis=1)
    pts = vecs[good, :2] / vecs[good, 2:3]
    verts = clean_hull(pts)
    return OrbitHull(verts, depth)


def polar_dual(domain):
    """Polar dual about the recorded basepoint.

    A fresh domain is recentred at its vertex centroid (ellipse center) and
    the shift recorded on the output, so dualising twice undoes the
    recentring and recovers the input.
    """
    if domain.dual_shift is not None:
        shift = np.asarray(domain.dual_shift, dtype=float)
        out = _polar_about_origin(domain)
        out = out.translate(shift)
        out.dual_shift = None
        return out
    if isinstance(domain, Ellipse):
        shift = np.asarray(domain.center, dtype=float)
    else:
        shift = domain.centroid()
    moved = domain.translate(-shift)
    if moved.boundary_distance(np.zeros(2)) <= BOUNDARY_BAND:
        raise OriginNotInterior("centroid recentring did not give an interior origin")
    out = _polar_about_origin(moved)
    out.dual_shift = _frozen(shift)
    return out


def _polar_about_origin(domain):
    if domain.boundary_distance(np.zeros(2)) <= BOUNDARY_BAND:
        raise OriginNotInterior("origin is not interior")
    if isinstance(domain, Ellipse):
        dual_conic = np.linalg.inv(domain.conic)
        return Ellipse(dual_conic)
    v = domain.vertices
    w = np.roll(v, -1, axis=0)
    # dual vertex n of the edge through v_i, v_{i+1}: n.v_i = n.v_{i+1} = 1
    det = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
    nx = (w[:, 1] - v[:, 1]) / det
    ny = (v[:, 0] - w[:, 0]) / det
    return Polygon(np.stack([nx, ny], axis=1))


def hausdorff_distance(dom_a, dom_b, samples=512):
    """Hausdorff distance between two convex domains via boundary sampling."""

    def boundary(dom):
        return dom.boundary_points(samples)

    def dist_to(dom, pts):
        if isinstance(dom, Polygon):
            d = -dom.boundary_distance_many(pts)
            inside = d < 0.0
            # outside points: true distance needs the segment, not the line
            out = np.zeros(len(pts))
            if np.any(~inside):
                out[~inside] = _points_to_polygon(pts[~inside], dom.vertices)
            return np.where(inside, 0.0, out)
        d = np.array([dom.boundary_distance(p) for p in pts])
        return np.maximum(-d, 0.0)

    a_pts = boundary(dom_a)
    b_pts = boundary(dom_b)
    return float(max(dist_to(dom_b, a_pts).max(), dist_to(dom_a, b_pts).max()))


def _points_to_polygon(pts, verts):
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a                                 # (E, 2)
    pa = pts[:, None, :] - a[None, :, :]      # (N, E, 2)
    ee = np.einsum("ed,ed->e", e, e)
    t = np.clip(np.einsum("ned,ed->ne", pa, e) / ee, 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * e[None, :, :]
    d = np.linalg.norm(pts[:, None, :] - proj, axis=2)
    return d.min(axis=1)
