"""Monge-Ampere boundary solve and the Blaschke metric of the radial graph.

The unique convex solution of

    det D^2 u = (-1/u)^4,   u = 0 on the boundary,   u < 0 inside,

turns the radial graph F(x) = (-1/u(x)) * (1, x) into a hyperbolic affine
sphere asymptotic to the cone over the domain.  The affine metric extracted
from that graph is an invariant of the domain sitting next to its Hilbert
metric: the two are bi-Lipschitz with a uniform constant, and on an ellipse
they coincide.  `solve_monge_ampere` produces the grid solution,
`blaschke_metric` reads the metric off the solved jet, and
`compare_hilbert_affine` measures the norm and volume ratios numerically.

The solver is a damped pointwise fixed-point iteration, all lattice nodes
stepped at once, on a uniform square lattice over the bounding box.  Stencil
legs that cross the boundary are cut at the true crossing point and carry
the value 0 there, so the Dirichlet condition is enforced on the curved
boundary and not on the nearest lattice site.
"""

import json

import numpy as np
from scipy.spatial import cKDTree

from .domains import ConvexDomain, Ellipse, Polygon
from .errors import (
    NonConvexDomain,
    NotConverged,
    NotPositiveDefinite,
    TooCloseToBoundary,
    TooFewPoints,
)
from .metric import DEFAULT_SEED, finsler_norm, unit_ball_volumes_many

MIN_RESOLUTION = 33
DEFAULT_SWEEP_CAP = 10_000
DEFAULT_OMEGA = 0.3

# mask codes
EXTERIOR_NODE = 0
INTERIOR_NODE = 1
BOUNDARY_NODE = 2

# value floor: interior u may never touch 0 during the iteration
_U_FLOOR = 1e-12
_SQRT2 = float(np.sqrt(2.0))

# sweeps between diagonal Jacobian refreshes
_REFRESH_EVERY = 50

# stencil legs in lattice units: E W N S NE SW NW SE
_LEGS = np.array(
    [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [-1, 1], [1, -1]],
    dtype=int,
)


def _lattice(domain, resolution):
    """Square node lattice covering the bounding box, one spacing both ways."""
    x0, y0, x1, y1 = domain.bbox()
    side = max(x1 - x0, y1 - y0)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    h = side / (resolution - 1)
    xs = cx - 0.5 * side + h * np.arange(resolution)
    ys = cy - 0.5 * side + h * np.arange(resolution)
    return xs, ys, h


def _interior_flags(domain, pts):
    if isinstance(domain, Ellipse):
        hom = np.column_stack([pts, np.ones(len(pts))])
        vals = np.einsum("ni,ij,nj->n", hom, domain.conic, hom)
        return vals < 0.0
    return domain.boundary_distance_many(pts) > 0.0


def _distance_field(domain, pts):
    """Euclidean distance to the boundary, valid at interior points.

    Polygons carry an exact half-plane distance; for ellipses the library
    closed form is only first order away from the boundary, so we measure
    against a dense boundary sample instead.
    """
    if isinstance(domain, Polygon):
        return domain.boundary_distance_many(pts)
    samples = domain.boundary_points(2048)
    return cKDTree(samples).query(pts)[0]


class _Stencil:
    """Cut-cell finite differences on the masked lattice.

    Each directional difference runs on two arms.  An arm toward an interior
    neighbour has full length h (or h sqrt(2) on a diagonal) and carries the
    neighbour value; an arm crossing the boundary is shortened to the true
    crossing point, at parameter theta in (0, 1] of the leg, and carries the
    value 0 there.  The unequal-arm second difference

        u'' ~ 2/(a+b) * ((V_b - u)/b + (V_a - u)/a)

    is exact on quadratics, which keeps the scheme consistent at cut nodes;
    a phantom-node ghost obtained by linear extrapolation is not (it
    misreads the curvature of a parabola by the factor (1+theta)/2), and
    that inconsistency pollutes the whole solve at first order.

    Within 2h of the boundary even a consistent polynomial difference is
    hopeless, because the equation forces the square-root profile
    u ~ -sqrt(2 d) there and the divided differences of a square root carry
    O(1) relative error at lattice distance from the wall.  Those nodes
    difference w = u^2 instead, which vanishes linearly at the wall and
    stays smooth across it, and assemble D^2 u through the exact identities
    u_i = -w_i / (2 s), u_ij = -w_ij / (2 s) + w_i w_j / (4 s^3), s = -u.
    On the disk w is a paraboloid, so the band equations are exact there and
    the sup-norm test over the deep nodes sees no boundary pollution at all.
    """

    def __init__(self, domain, resolution):
        xs, ys, h = _lattice(domain, resolution)
        n = resolution
        self.xs, self.ys, self.h = xs, ys, h
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        inter = _interior_flags(domain, pts).reshape(n, n)
        # bbox edge nodes can at most touch the boundary
        inter[0, :] = inter[-1, :] = inter[:, 0] = inter[:, -1] = False

        dist = np.zeros((n, n))
        if inter.any():
            dist[inter] = _distance_field(domain, pts.reshape(n, n, 2)[inter])

        theta = np.ones((8, n, n))
        if inter.any():
            idx = np.argwhere(inter)
            _, s_plus = domain.ray_params_many(
                pts.reshape(n, n, 2)[inter], h * _LEGS.astype(float)
            )
            s_plus = np.clip(s_plus, 1e-9, np.inf)
            # nodes hugging the boundary closer than 1e-6 of a leg give the
            # scheme nothing to work with; treat them as boundary nodes
            keep = s_plus.min(axis=1) >= 1e-6
            inter[idx[~keep][:, 0], idx[~keep][:, 1]] = False
            for k in range(8):
                theta[k][idx[keep][:, 0], idx[keep][:, 1]] = s_plus[keep, k]

        self.inter = inter
        self.dist = np.where(inter, dist, 0.0)
        self.neighbor_in = np.stack(
            [np.roll(inter, (-di, -dj), (0, 1)) for di, dj in _LEGS]
        )
        # arm length per leg in units of the leg vector: full toward an
        # interior neighbour, cut at the wall crossing otherwise
        self.arm = np.where(self.neighbor_in, 1.0, np.clip(theta, 1e-9, 1.0))
        # the square-root zone reaches a fixed fraction of the depth scale:
        # a lattice-proportional cut would park the seam in the singular
        # region at every resolution and its error would not refine cleanly
        deep = self.dist.max() if inter.any() else 0.0
        self.band = inter & (self.dist < max(2.0 * h, 0.3 * deep))

        # difference weights per leg pair; the unequal-arm formulas collapse
        # to fixed linear combinations of (v_plus, v_minus, centre)
        self._d2 = {}
        self._d1 = {}
        for kp, km, scale in ((0, 1, h), (2, 3, h), (4, 5, h * _SQRT2), (6, 7, h * _SQRT2)):
            a = self.arm[kp] * scale
            b = self.arm[km] * scale
            ap, am = 2.0 / (a * (a + b)), 2.0 / (b * (a + b))
            self._d2[kp] = (ap, am, ap + am)
            fp, fm = b / (a * (a + b)), -a / (b * (a + b))
            self._d1[kp] = (fp, fm, fp + fm)
        ring = np.zeros_like(inter)
        for di, dj in _LEGS:
            ring |= np.roll(inter, (-di, -dj), (0, 1))
        self.mask = np.where(
            inter, INTERIOR_NODE, np.where(ring, BOUNDARY_NODE, EXTERIOR_NODE)
        ).astype(np.int8)

    def _leg_values(self, u):
        out = []
        for k, (di, dj) in enumerate(_LEGS):
            rolled = np.roll(u, (-di, -dj), (0, 1))
            out.append(np.where(self.neighbor_in[k], rolled, 0.0))
        return out

    def _second(self, c, v, kp, km):
        ap, am, ac = self._d2[kp]
        return ap * v[kp] + am * v[km] - ac * c

    def _first(self, c, v, kp, km):
        fp, fm, fc = self._d1[kp]
        return fp * v[kp] + fm * v[km] - fc * c

    def gradient(self, u):
        v = self._leg_values(u)
        ux = self._first(u, v, 0, 1)
        uy = self._first(u, v, 2, 3)
        w, vw = u * u, [q * q for q in v]
        s = np.maximum(-u, _U_FLOOR)
        bx = -self._first(w, vw, 0, 1) / (2.0 * s)
        by = -self._first(w, vw, 2, 3) / (2.0 * s)
        return np.where(self.band, bx, ux), np.where(self.band, by, uy)

    def hessian(self, u):
        v = self._leg_values(u)
        uxx = self._second(u, v, 0, 1)
        uyy = self._second(u, v, 2, 3)
        # rotate the diagonal second differences back to the cross term
        uxy = 0.5 * (self._second(u, v, 4, 5) - self._second(u, v, 6, 7))
        # in the band, difference the smooth square instead
        w, vw = u * u, [q * q for q in v]
        wx = self._first(w, vw, 0, 1)
        wy = self._first(w, vw, 2, 3)
        wxx = self._second(w, vw, 0, 1)
        wyy = self._second(w, vw, 2, 3)
        wxy = 0.5 * (self._second(w, vw, 4, 5) - self._second(w, vw, 6, 7))
        s = np.maximum(-u, _U_FLOOR)
        inv2s = 0.5 / s
        inv4s3 = 0.25 / (s * s * s)
        bxx = -wxx * inv2s + wx * wx * inv4s3
        byy = -wyy * inv2s + wy * wy * inv4s3
        bxy = -wxy * inv2s + wx * wy * inv4s3
        return (
            np.where(self.band, bxx, uxx),
            np.where(self.band, byy, uyy),
            np.where(self.band, bxy, uxy),
        )

    def residual(self, u):
        uxx, uyy, uxy = self.hessian(u)
        safe = np.where(self.inter, u, -1.0)
        r = uxx * uyy - uxy * uxy - safe ** -4.0
        return np.where(self.inter, r, 0.0)

    def driving_residual(self, u):
        # Same residual with the determinant clamped to its monotone
        # extension det_M = max(l1,0) max(l2,0) + min(l1,0) + min(l2,0) over
        # the Hessian eigenvalues.  The plain product is blind to concavity:
        # a node that dips concave along both axes shows a large positive
        # determinant and the update would push it upward, away from the
        # convex solution; iterates starting from the distance cone do pass
        # through such states.  The clamp turns any concave direction into a
        # negative contribution, so the update always steers back toward
        # convexity.  At a convex iterate both forms agree exactly, so the
        # converged residual is the honest one.
        uxx, uyy, uxy = self.hessian(u)
        mean = 0.5 * (uxx + uyy)
        span = np.sqrt(0.25 * (uxx - uyy) ** 2 + uxy * uxy)
        lo, hi = mean - span, mean + span
        det_m = (
            np.maximum(lo, 0.0) * np.maximum(hi, 0.0)
            + np.minimum(lo, 0.0)
            + np.minimum(hi, 0.0)
        )
        safe = np.where(self.inter, u, -1.0)
        return np.where(self.inter, det_m - safe ** -4.0, 0.0)


class GridSolution:
    """Solved Monge-Ampere problem on a lattice.

    Holds the node coordinates, the interior/boundary/exterior mask, the
    value array u (zero outside the interior), the final residual in max
    norm over nodes at least 2h inside, and iteration diagnostics.
    """

    def __init__(self, domain, stencil, u, residual, sweeps, omega, history):
        self.domain = domain
        self.xs = stencil.xs
        self.ys = stencil.ys
        self.spacing = stencil.h
        self.mask = stencil.mask
        self.u = u
        self.residual = residual
        self.sweeps = sweeps
        self.omega = omega
        self.residual_history = tuple(history)
        self._st = stencil

    @property
    def resolution(self):
        return len(self.xs)

    @property
    def interior(self):
        return self._st.inter

    @property
    def boundary_depth(self):
        """Distance of every interior node to the domain boundary."""
        return self._st.dist

    def gradient_field(self):
        return self._st.gradient(self.u)

    def hessian_field(self):
        """Assembled (u_xx, u_yy, u_xy) arrays, meaningful on interior nodes."""
        return self._st.hessian(self.u)

    def residual_field(self):
        return self._st.residual(self.u)

    def to_bytes(self):
        header = {
            "resolution": int(self.resolution),
            "bbox": [
                float(self.xs[0]),
                float(self.ys[0]),
                float(self.xs[-1]),
                float(self.ys[-1]),
            ],
            "spacing": float(self.spacing),
            "residual": float(self.residual),
            "sweeps": int(self.sweeps),
            "omega": float(self.omega),
        }
        return json.dumps(header).encode() + b"\n" + self.u.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, domain, data):
        head, _, body = bytes(data).partition(b"\n")
        header = json.loads(head.decode())
        n = int(header["resolution"])
        st = _Stencil(domain, n)
        same = abs(st.h - header["spacing"]) <= 1e-9 * st.h and np.allclose(
            [st.xs[0], st.ys[0], st.xs[-1], st.ys[-1]], header["bbox"], atol=1e-9
        )
        if not same:
            raise ValueError("stored grid does not match this domain")
        u = np.frombuffer(body, dtype="<f8", count=n * n).reshape(n, n).copy()
        return cls(
            domain,
            st,
            u,
            float(header["residual"]),
            int(header["sweeps"]),
            float(header["omega"]),
            (),
        )


def _diag_jacobian(st, u):
    # Diagonal Jacobian estimate at the current iterate.  The true diagonal
    # is J = uyy * d(uxx)/du_C + uxx * d(uyy)/du_C + 4 u^-5, always negative
    # on a convex iterate.  The coefficients travel orders of magnitude on
    # the way from the distance cone to the solution (the cone has a
    # curvature spike on its ridge and u^-5 is enormous near the wall at the
    # start), so the estimate is assembled from the iterate itself and
    # refreshed periodically; between refreshes it stays frozen.
    #
    # Curvature coefficients are floored by the wall model u = -sqrt(2 d)
    # that the equation forces near the boundary (with u = -A d^a, matching
    # powers in det D^2 u = u^-4 gives a = 1/2): normal curvature
    # (2d)^(-3/2), tangential about (2d)^(-1/2).  The floor keeps J stiff
    # through transients where the assembled Hessian momentarily degenerates.
    #
    # The second-difference sensitivity to the centre value is -2/(ab) for
    # arms a and b, i.e. -2/h^2 between interior neighbours but much stiffer
    # on a cut axis.  Dropping the 1/arm growth leaves the boundary band
    # underdamped and the sweep locks into a chequerboard oscillation.
    h = st.h
    t = 2.0 * np.maximum(st.dist, 0.5 * h)
    curv = 0.5 * (t ** -1.5 + t ** -0.5)
    uxx, uyy, _ = st.hessian(u)
    cx = np.maximum(uyy, curv)
    cy = np.maximum(uxx, curv)
    sens_x = 2.0 / (st.arm[0] * st.arm[1])
    sens_y = 2.0 / (st.arm[2] * st.arm[3])
    # mass from the wall model, not from the iterate: the starting values in
    # the boundary band are tiny and their u^-5 would freeze the band solid
    return -(cx * sens_x + cy * sens_y) / (h * h) - 4.0 * t ** -2.5


def solve_monge_ampere(
    domain, resolution, tol=1e-5, max_sweeps=DEFAULT_SWEEP_CAP
):
    """Damped fixed-point solve of det D^2 u = (-1/u)^4 with u = 0 outside.

    Starts from u0 = minus the distance to the boundary and sweeps
    u <- u - omega * residual / J with omega = 0.3 and J a diagonal Jacobian
    estimate, every node at once.  J is frozen between periodic refreshes
    from the current iterate: the state travels orders of magnitude on its
    way from the cone to the solution, and a diagonal that never moves is
    either unstable at the end (too weak) or glacial (too stiff).  Steps are
    additionally limited to omega/30 of the current value so a stale
    diagonal cannot throw u across the sign constraint, and a sweep that
    raised the residual is rolled back and redone on a fresh diagonal.
    Convergence is declared when the residual max norm over interior nodes
    at least 2h from the boundary drops below tol.  A diverging attempt
    restarts from u0 with omega halved, at most three times; `max_sweeps`
    total sweeps without convergence raises NotConverged.
    """
    if not isinstance(domain, (Ellipse, Polygon)):
        raise NonConvexDomain(
            "solver handles ellipses and convex polygons; got %r" % type(domain).__name__
        )
    if resolution < MIN_RESOLUTION:
        raise ValueError("resolution must be at least %d" % MIN_RESOLUTION)

    st = _Stencil(domain, resolution)
    margin = st.inter & (st.dist >= 2.0 * st.h)
    if margin.sum() < 9:
        raise ValueError("grid too coarse: no nodes 2h inside the domain")

    u0 = np.where(st.inter, -np.maximum(st.dist, _U_FLOOR), 0.0)

    omega = DEFAULT_OMEGA
    u = u0.copy()
    J = np.where(st.inter, _diag_jacobian(st, u), -1.0)
    r = st.driving_residual(u)
    rmax = float(np.abs(r[margin]).max())
    history = [rmax]
    start = rmax
    sweeps = 0
    restarts = 0
    retries = 0
    while rmax >= tol:
        if sweeps >= max_sweeps:
            raise NotConverged(
                "residual %.3e after %d sweeps (tol %.1e)" % (rmax, sweeps, tol)
            )
        if sweeps % _REFRESH_EVERY == 0 and retries == 0:
            J = np.where(st.inter, _diag_jacobian(st, u), -1.0)
        u_before, r_before = u, r
        cap = (omega / (30.0 * (1 + retries))) * np.abs(u)
        step = np.clip(-omega * r / J, -cap, cap)
        u = np.where(st.inter, np.minimum(u + step, -_U_FLOOR), u)
        r = st.driving_residual(u)
        rnew = float(np.abs(r[margin]).max())
        # a sweep that raised the residual ran on a stale diagonal: roll it
        # back, refresh, and redo with a tighter cap; that keeps the history
        # monotone instead of hoping it comes out that way
        if (not np.isfinite(rnew) or rnew > rmax) and retries < 2:
            u, r = u_before, r_before
            J = np.where(st.inter, _diag_jacobian(st, u), -1.0)
            retries += 1
            continue
        retries = 0
        rmax = rnew
        history.append(rmax)
        sweeps += 1
        # the capped steps keep transients tame, so anything this large means
        # some value has been thrown against the floor and u^-4 exploded
        if not np.isfinite(rmax) or rmax > 1e12 * max(start, 1.0):
            if restarts >= 3:
                raise NotConverged(
                    "iteration diverged after %d restarts" % restarts
                )
            restarts += 1
            omega *= 0.5
            u = u0.copy()
            J = np.where(st.inter, _diag_jacobian(st, u), -1.0)
            r = st.driving_residual(u)
            rmax = float(np.abs(r[margin]).max())
            history = [rmax]
            start = rmax

    # converged iterates are convex, where the clamped and the plain
    # determinant agree; store the plain one
    rmax = float(np.abs(st.residual(u)[margin]).max())
    return GridSolution(domain, st, u, rmax, sweeps, omega, history)


class BlaschkeData:
    """Affine metric and affine normal at one lattice point."""

    def __init__(self, point, h_metric, xi):
        self.point = np.asarray(point, dtype=float)
        self.h_metric = np.asarray(h_metric, dtype=float)
        self.xi = np.asarray(xi, dtype=float)


def blaschke_from_jet(point, u, grad, hess, transversal_scale=1.0):
    """Affine metric of the radial graph from a second-order jet of u.

    Embeds F(x) = (-1/u) * (1, x, y), takes the radial direction as a
    provisional transversal xt = transversal_scale * F, and splits the second
    derivatives of F into tangential parts and ht_ij * xt (Cramer on the
    frame F_x, F_y, xt).  The pair (ht, xt) is then rescaled to the
    unimodular gauge: for (la * ht, xt / la) the split is unchanged, and an
    h-orthonormal tangent frame (Y1, Y2) has

        |det(Y1, Y2, xi)| = (det h)^(-1/2) |det(F_x, F_y, xt)| / la
                          = la^-2 (det ht)^(-1/2) |Dt|,

    so |det(Y1, Y2, xi)| = 1 forces la = |Dt|^(1/2) (det ht)^(-1/4).  Any
    rescaling of the provisional transversal cancels in the result.
    """
    x, y = float(point[0]), float(point[1])
    u = float(u)
    if u >= 0.0:
        raise ValueError("jet must have u < 0")
    ux, uy = float(grad[0]), float(grad[1])
    hess = np.asarray(hess, dtype=float)

    phi = -1.0 / u
    phi_x = ux / u ** 2
    phi_y = uy / u ** 2
    phi_xx = hess[0, 0] / u ** 2 - 2.0 * ux * ux / u ** 3
    phi_xy = hess[0, 1] / u ** 2 - 2.0 * ux * uy / u ** 3
    phi_yy = hess[1, 1] / u ** 2 - 2.0 * uy * uy / u ** 3

    e = np.array([1.0, x, y])
    ax = np.array([0.0, 1.0, 0.0])
    ay = np.array([0.0, 0.0, 1.0])
    F = phi * e
    Fx = phi_x * e + phi * ax
    Fy = phi_y * e + phi * ay
    Fxx = phi_xx * e + 2.0 * phi_x * ax
    Fxy = phi_xy * e + phi_x * ay + phi_y * ax
    Fyy = phi_yy * e + 2.0 * phi_y * ay

    xt = transversal_scale * F
    Dt = float(np.linalg.det(np.column_stack([Fx, Fy, xt])))
    if abs(Dt) < 1e-300:
        raise NotPositiveDefinite("degenerate frame on the radial graph")
    ht = np.empty((2, 2))
    ht[0, 0] = np.linalg.det(np.column_stack([Fx, Fy, Fxx])) / Dt
    ht[0, 1] = ht[1, 0] = np.linalg.det(np.column_stack([Fx, Fy, Fxy])) / Dt
    ht[1, 1] = np.linalg.det(np.column_stack([Fx, Fy, Fyy])) / Dt

    det_ht = ht[0, 0] * ht[1, 1] - ht[0, 1] ** 2
    if ht[0, 0] <= 0.0 or det_ht <= 0.0:
        raise NotPositiveDefinite("second fundamental form is not positive")

    la = np.sqrt(abs(Dt)) * det_ht ** -0.25
    return BlaschkeData(point, la * ht, xt / la)


def blaschke_metric(sol, p):
    """Affine metric at the lattice node nearest p, at least 3h inside."""
    p = np.asarray(p, dtype=float)
    h = sol.spacing
    if sol.domain.boundary_distance(p) < 3.0 * h:
        raise TooCloseToBoundary("need a point at least 3h inside the boundary")
    n = sol.resolution
    i = int(round((p[0] - sol.xs[0]) / h))
    j = int(round((p[1] - sol.ys[0]) / h))
    if not (1 <= i < n - 1 and 1 <= j < n - 1):
        raise TooCloseToBoundary("point falls off the lattice interior")
    if not sol.interior[i - 1 : i + 2, j - 1 : j + 2].all():
        raise TooCloseToBoundary("stencil at this node touches the boundary")
    u = sol.u
    grad = (
        (u[i + 1, j] - u[i - 1, j]) / (2.0 * h),
        (u[i, j + 1] - u[i, j - 1]) / (2.0 * h),
    )
    hxx = (u[i + 1, j] - 2.0 * u[i, j] + u[i - 1, j]) / h ** 2
    hyy = (u[i, j + 1] - 2.0 * u[i, j] + u[i, j - 1]) / h ** 2
    hxy = (
        u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]
    ) / (4.0 * h ** 2)
    return blaschke_from_jet(
        (sol.xs[i], sol.ys[j]),
        u[i, j],
        grad,
        np.array([[hxx, hxy], [hxy, hyy]]),
    )


class ComparisonReport:
    """Norm and volume ratios between the affine and Hilbert metrics."""

    def __init__(self, norm_ratios, volume_ratios):
        self.norm_ratios = np.asarray(norm_ratios, dtype=float)
        self.volume_ratios = np.asarray(volume_ratios, dtype=float)
        self.norm_ratio_min = float(self.norm_ratios.min())
        self.norm_ratio_max = float(self.norm_ratios.max())
        self.norm_ratio_mean = float(self.norm_ratios.mean())
        self.volume_ratio_min = float(self.volume_ratios.min())
        self.volume_ratio_max = float(self.volume_ratios.max())

    def to_json(self):
        return {
            "norm_ratio": {
                "min": self.norm_ratio_min,
                "max": self.norm_ratio_max,
                "mean": self.norm_ratio_mean,
                "samples": int(len(self.norm_ratios)),
            },
            "volume_ratio": {
                "min": self.volume_ratio_min,
                "max": self.volume_ratio_max,
                "rectangles": int(len(self.volume_ratios)),
            },
        }

    def to_csv(self):
        lines = ["quantity,min,max,mean"]
        lines.append(
            "norm_ratio,%.12g,%.12g,%.12g"
            % (self.norm_ratio_min, self.norm_ratio_max, self.norm_ratio_mean)
        )
        lines.append(
            "volume_ratio,%.12g,%.12g,%.12g"
            % (
                self.volume_ratio_min,
                self.volume_ratio_max,
                float(self.volume_ratios.mean()),
            )
        )
        return "\n".join(lines) + "\n"


def compare_hilbert_affine(domain, sol, samples, seed=DEFAULT_SEED):
    """Ratios of the affine to the Hilbert metric over random samples.

    Draws `samples` lattice nodes at least 3h inside with random directions
    and reports min/max/mean of |X|_h / |X|_F; the ratio must land in
    [1/10, 10] at every sample or the solve is declared unusable.  Volumes
    are compared on a nested family of concentric squares around the deepest
    node: affine volume integrates sqrt(det h), Hilbert volume integrates
    the reciprocal unit-ball area, both by node sums.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    h = sol.spacing
    deep = sol.interior & (sol.boundary_depth >= 3.0 * h)
    cand = np.argwhere(deep)
    if len(cand) < 9:
        raise TooFewPoints("no 3h-deep nodes to sample at this resolution")
    pick = cand[rng.choice(len(cand), size=samples, replace=len(cand) < samples)]
    angles = rng.uniform(0.0, 2.0 * np.pi, samples)

    uxx, uyy, uxy = sol.hessian_field()
    gx, gy = sol.gradient_field()
    norm_ratios = np.empty(samples)
    for k, (i, j) in enumerate(pick):
        bd = blaschke_from_jet(
            (sol.xs[i], sol.ys[j]),
            sol.u[i, j],
            (gx[i, j], gy[i, j]),
            np.array([[uxx[i, j], uxy[i, j]], [uxy[i, j], uyy[i, j]]]),
        )
        X = np.array([np.cos(angles[k]), np.sin(angles[k])])
        affine = float(np.sqrt(X @ bd.h_metric @ X))
        hilbert = finsler_norm(domain, (sol.xs[i], sol.ys[j]), X)
        norm_ratios[k] = affine / hilbert
    if norm_ratios.min() < 0.1 or norm_ratios.max() > 10.0:
        raise NotConverged(
            "affine/Hilbert norm ratio escaped [1/10, 10]: range %.3g..%.3g"
            % (norm_ratios.min(), norm_ratios.max())
        )

    # volume densities: sqrt(det h) collapses to (det D^2 u)^(1/4) / u^2 in
    # the unimodular gauge, since h = (det D^2 u)^(-1/4) * D^2 u / u^2
    detH = uxx * uyy - uxy * uxy
    ci, cj = np.unravel_index(np.argmax(sol.boundary_depth), sol.mask.shape)
    half = (sol.boundary_depth[ci, cj] - 3.0 * h) / np.sqrt(2.0)
    k0 = int(half / h)
    if k0 < 3:
        raise TooFewPoints("domain too shallow for volume rectangles")
    sl = np.s_[ci - k0 : ci + k0 + 1, cj - k0 : cj + k0 + 1]
    X, Y = np.meshgrid(sol.xs, sol.ys, indexing="ij")
    nodes = np.column_stack([X[sl].ravel(), Y[sl].ravel()])
    side = 2 * k0 + 1
    dens_h = (
        1.0 / unit_ball_volumes_many(domain, nodes, directions=128)
    ).reshape(side, side)
    with np.errstate(invalid="ignore"):
        dens_a = np.where(detH[sl] > 0.0, np.abs(detH[sl]) ** 0.25, np.nan)
    dens_a = dens_a / sol.u[sl] ** 2

    volume_ratios = []
    k = k0
    while k >= 3:
        box = np.s_[k0 - k : k0 + k + 1, k0 - k : k0 + k + 1]
        vol_a = float(np.nansum(dens_a[box]))
        vol_h = float(dens_h[box].sum())
        volume_ratios.append(vol_a / vol_h)
        k = int(k * 0.75)
    return ComparisonReport(norm_ratios, volume_ratios)
