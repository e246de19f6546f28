"""Points and maps of the real projective plane.

Points are stored as homogeneous 3-vectors, maps as 3x3 matrices with
determinant scaled to +-1.  The eigen-solve used throughout works on the
characteristic cubic in closed form (trigonometric branch for three real
roots) followed by one Newton polish step per root, which keeps it cheap
enough to run over millions of matrices in vectorised batches.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateImage, NonInvertible, NotHyperbolic

# Relative eigenvalue gap below which we refuse to call roots distinct.
GAP_TOL = 1e-8
# |det| this close to 1 is left untouched so normalisation is idempotent
# bit for bit.
_DET_TOL = 1e-12
_DET_FLOOR = 1e-14


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


class ProjPoint:
    """A point of RP^2 held as a homogeneous 3-vector.

    The canonical form scales the vector so its largest-magnitude coordinate
    equals +1 (ties broken toward positive coordinates, then lowest index),
    which makes canonicalisation idempotent and gives a well-defined
    representative for hashing and comparison.
    """

    __slots__ = ("h",)

    def __init__(self, h):
        h = np.asarray(h, dtype=float).reshape(3)
        if not np.all(np.isfinite(h)):
            raise ValueError("non-finite homogeneous coordinates")
        if np.max(np.abs(h)) == 0.0:
            raise ValueError("zero vector is not a projective point")
        self.h = _frozen(_canonical(h))

    @classmethod
    def affine(cls, x, y):
        """Point of the affine chart z = 1."""
        return cls((x, y, 1.0))

    def to_affine(self):
        """Coordinates in the chart z = 1; raises if on the line at infinity."""
        if abs(self.h[2]) < 1e-12:
            raise ValueError("point is (numerically) on the line at infinity")
        return np.array([self.h[0] / self.h[2], self.h[1] / self.h[2]])

    def close_to(self, other, tol=1e-9):
        return bool(np.max(np.abs(self.h - other.h)) <= tol)

    def to_json(self):
        return {"h": [float(v) for v in self.h]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["h"])

    def __repr__(self):
        return "ProjPoint(%.6g, %.6g, %.6g)" % tuple(self.h)

    def __eq__(self, other):
        return isinstance(other, ProjPoint) and self.close_to(other, 1e-12)

    def __hash__(self):
        return hash(tuple(np.round(self.h, 9)))


def _canonical(h):
    mags = np.abs(h)
    top = mags.max()
    # prefer a positive coordinate among those attaining the max
    best = None
    for i in range(3):
        if mags[i] == top:
            if h[i] > 0:
                best = i
                break
            if best is None:
                best = i
    pivot = h[best]
    if pivot == 1.0:
        return h
    return h / pivot


@dataclass(frozen=True)
class SpectralData:
    """Eigen data of a projective map.

    lambdas is sorted descending.  For kind 'positive-hyperbolic' the entries
    are the three distinct positive eigenvalues and fixed_points holds the
    (attracting, saddle, repelling) fixed points.  For kind 'other' lambdas
    holds real parts of the roots and fixed_points is None.
    """

    lambdas: tuple
    fixed_points: tuple
    kind: str


class ProjMap:
    """Projective transformation with |det| normalised to 1."""

    __slots__ = ("m", "det_sign")

    def __init__(self, m):
        m = np.asarray(m, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite matrix entries")
        d = float(np.linalg.det(m))
        if not np.isfinite(d) or abs(d) < _DET_FLOOR:
            raise NonInvertible("matrix determinant is numerically zero")
        ad = abs(d)
        if abs(ad - 1.0) > _DET_TOL:
            m = m / np.cbrt(ad)
        self.m = _frozen(m)
        self.det_sign = 1.0 if d > 0 else -1.0

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def _trusted(cls, m, det_sign):
        """Internal fast path for algebraically |det| = 1 results.

        Products and inverses of unit-determinant matrices have unit
        determinant exactly; recomputing it numerically loses all precision
        once the condition number nears 1/eps, so compositions skip the check.
        """
        obj = object.__new__(cls)
        object.__setattr__(obj, "m", _frozen(np.asarray(m, dtype=float)))
        object.__setattr__(obj, "det_sign", det_sign)
        return obj

    def __matmul__(self, other):
        return ProjMap._trusted(self.m @ other.m, self.det_sign * other.det_sign)

    def inverse(self):
        return ProjMap._trusted(np.linalg.inv(self.m), self.det_sign)

    def transpose(self):
        return ProjMap._trusted(self.m.T.copy(), self.det_sign)

    def power(self, k):
        if k == 0:
            return ProjMap.identity()
        base = self.m if k > 0 else np.linalg.inv(self.m)
        out = np.linalg.matrix_power(base, abs(k))
        return ProjMap._trusted(out, self.det_sign if k % 2 else abs(self.det_sign))

    def close_to(self, other, tol=1e-9):
        """Equality as projective maps: up to the residual +-1 scale."""
        d1 = float(np.max(np.abs(self.m - other.m)))
        d2 = float(np.max(np.abs(self.m + other.m)))
        return min(d1, d2) <= tol

    def to_json(self):
        return {"m": [float(v) for v in self.m.reshape(9)]}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["m"], dtype=float).reshape(3, 3))

    def __repr__(self):
        return "ProjMap(%s)" % np.array2string(self.m, precision=4, suppress_small=True)


def act(g, p):
    """Apply a projective map to a point, returning the canonical image."""
    y = g.m @ p.h
    if np.max(np.abs(y)) < 1e-280:
        raise DegenerateImage("image vector underflowed to zero")
    return ProjPoint(y)


def _char_coeffs(m):
    """Coefficients (a, b, c) of det(x I - m) = x^3 + a x^2 + b x + c."""
    tr = m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2]
    # sum of principal 2x2 minors
    b = (
        m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        + m[..., 0, 0] * m[..., 2, 2] - m[..., 0, 2] * m[..., 2, 0]
        + m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1]
    )
    det = (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )
    return -tr, b, -det


def _eig3_modest(a, b, c, shape):
    """Closed-form roots of x^3 + a x^2 + b x + c for well-scaled input:
    trigonometric branch for three real roots, Cardano otherwise, one Newton
    polish step on the real branch."""
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = -4.0 * p**3 - 27.0 * q * q

    three_real = disc > 0.0
    lam = np.empty(shape + (3,))

    # three real roots: trigonometric form (p < 0 is forced here)
    if np.any(three_real):
        pm = np.where(three_real, np.minimum(p, -1e-300), -1.0)
        r = np.sqrt(-pm / 3.0)
        cosphi = np.clip(3.0 * q / (2.0 * pm * r), -1.0, 1.0)
        phi = np.arccos(cosphi)
        for k in range(3):
            t = 2.0 * r * np.cos((phi + 2.0 * np.pi * k) / 3.0)
            lam[..., k] = np.where(three_real, t - a / 3.0, 0.0)

    # one real root: Cardano, complex pair contributes its real part twice
    rest = ~three_real
    if np.any(rest):
        half = -q / 2.0
        rad = np.sqrt(np.maximum(q * q / 4.0 + p**3 / 27.0, 0.0))
        t1 = np.cbrt(half + rad) + np.cbrt(half - rad)
        real_root = t1 - a / 3.0
        pair_real = -t1 / 2.0 - a / 3.0
        lam[..., 0] = np.where(rest, real_root, lam[..., 0])
        lam[..., 1] = np.where(rest, pair_real, lam[..., 1])
        lam[..., 2] = np.where(rest, pair_real, lam[..., 2])

    # one Newton polish step per root on the real branch
    if np.any(three_real):
        f = lam**3 + a[..., None] * lam**2 + b[..., None] * lam + c[..., None]
        fp = 3.0 * lam**2 + 2.0 * a[..., None] * lam + b[..., None]
        safe = np.abs(fp) > 1e-30
        lam = np.where(three_real[..., None] & safe, lam - f / np.where(safe, fp, 1.0), lam)

    lam = -np.sort(-lam, axis=-1)
    return lam, three_real


def _eig3_spread(t, s, d):
    """Roots of x^3 - t x^2 + s x - d for a dominant real root.

    The trigonometric form loses the small roots to cancellation once the
    eigenvalue spread nears 1/eps, so here the dominant root comes from
    Newton started at the trace and the other two from the deflated
    quadratic with coefficients sigma = (s - d/x)/x, pi = d/x, all of which
    stay relatively accurate at any spread.
    """
    x = t.copy()
    for _ in range(4):
        f = ((x - t) * x + s) * x - d
        fp = (3.0 * x - 2.0 * t) * x + s
        safe = np.abs(fp) > 1e-300
        x = np.where(safe, x - f / np.where(safe, fp, 1.0), x)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = (s - d / x) / x
        pi = d / x
    disc2 = sigma * sigma - 4.0 * pi
    ok = np.isfinite(x) & np.isfinite(sigma) & (disc2 > 0.0)
    sq = np.sqrt(np.maximum(disc2, 0.0))
    big = np.where(sigma >= 0.0, 0.5 * (sigma + sq), 0.5 * (sigma - sq))
    safe_big = np.abs(big) > 1e-300
    other = np.where(safe_big, pi / np.where(safe_big, big, 1.0), 0.5 * sigma)
    lam = np.stack([x, np.maximum(big, other), np.minimum(big, other)], axis=-1)
    lam = -np.sort(-lam, axis=-1)
    # complex pair: report real parts, flag not-three-real
    lam = np.where(ok[..., None], lam, np.stack(
        [x, 0.5 * sigma, 0.5 * sigma], axis=-1))
    return lam, ok


def _balance3(mats, sweeps=6):
    """Diagonal similarity with power-of-2 scales equalising row/column sums.

    Scaling by exact powers of two is free of rounding, so the balanced
    matrix has exactly the same characteristic polynomial while its entry
    magnitudes drop toward the spectral scale.  That directly shrinks the
    eps L^2 noise floor on the middle coefficient (L the entry scale), which
    is what limits the small eigenvalues of long group words.
    """
    m = np.array(mats, dtype=float, copy=True)
    for _ in range(sweeps):
        absm = np.abs(m)
        r = absm.sum(axis=-1)
        c = absm.sum(axis=-2)
        safe = (r > 0.0) & (c > 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.exp2(np.round(0.5 * (np.log2(c) - np.log2(r))))
        f = np.where(safe, f, 1.0)
        if np.all(f == 1.0):
            break
        m = m * f[..., :, None] / f[..., None, :]
    return m


def _eig3_batch(mats, det=None):
    """Eigenvalues of a (..., 3, 3) batch.

    Returns (lambdas, three_real) where lambdas is (..., 3) sorted descending
    and three_real flags matrices with three distinct-ish real roots.  For the
    complex branch lambdas carries real parts.  Well-scaled matrices use the
    closed-form trigonometric solver; matrices with a dominant eigenvalue
    (long geodesic words) switch to a deflation path that keeps the small
    eigenvalues relatively accurate.

    det, if given, is the algebraically known determinant (scalar or
    broadcastable array).  The numerically recomputed determinant of a matrix
    with entries of size L carries absolute error ~eps L^3, which for long
    group words swamps a determinant of 1; callers that know det = +-1 by
    construction must say so or the small eigenvalue comes back as noise.
    """
    a, b, c = _char_coeffs(_balance3(mats))
    t, s, d = -a, b, -c
    if det is not None:
        d = np.broadcast_to(np.asarray(det, dtype=float), d.shape)
        c = -d
    spread = (np.abs(t) > 1e3) | (np.abs(s) > 1e6)
    lam_m, real_m = _eig3_modest(a, b, c, mats.shape[:-2])
    if np.any(spread):
        lam_s, real_s = _eig3_spread(t, s, d)
        lam = np.where(spread[..., None], lam_s, lam_m)
        three_real = np.where(spread, real_s, real_m)
    else:
        lam, three_real = lam_m, real_m
    return lam, three_real


def _positive_hyperbolic_mask(lam, three_real):
    """Three distinct positive eigenvalues, with distinctness measured by
    pairwise ratio gaps (scale-free, so long words are not rejected just
    because their spectrum is spread out)."""
    positive = lam[..., 2] > 0.0
    safe1 = np.where(positive, lam[..., 1], 1.0)
    safe2 = np.where(positive, lam[..., 2], 1.0)
    gap01 = lam[..., 0] / safe1 - 1.0
    gap12 = lam[..., 1] / safe2 - 1.0
    return three_real & positive & (gap01 > GAP_TOL) & (gap12 > GAP_TOL)


def _eigvec_batch(mats, lam):
    """Null vectors of (mats - lam I) via row cross products, batched.

    mats is (..., 3, 3), lam is (...,).  Returns (..., 3) unnormalised
    eigenvectors; caller canonicalises.
    """
    n = mats - lam[..., None, None] * np.eye(3)
    r0, r1, r2 = n[..., 0, :], n[..., 1, :], n[..., 2, :]
    c01 = np.cross(r0, r1)
    c02 = np.cross(r0, r2)
    c12 = np.cross(r1, r2)
    cand = np.stack([c01, c02, c12], axis=-2)
    norms = np.linalg.norm(cand, axis=-1)
    best = np.argmax(norms, axis=-1)
    return np.take_along_axis(cand, best[..., None, None], axis=-2)[..., 0, :]


def classify(g, det=None):
    """Spectral classification of a projective map.

    Positive hyperbolic means three real positive eigenvalues with pairwise
    relative gaps above 1e-8.  Fixed points come back ordered (attracting,
    saddle, repelling) and each is a genuine fixed point of the map to 1e-9
    in canonical coordinates.  det, if given, is the algebraically known
    determinant; pass it for long group words where the recomputed one
    drowns in rounding (see _eig3_batch).
    """
    m = g.m[None, :, :]
    lam, three_real = _eig3_batch(m, det=det)
    lam = lam[0]
    if not _positive_hyperbolic_mask(lam[None, :], three_real)[0]:
        return SpectralData(tuple(float(v) for v in lam), None, "other")
    vecs = []
    for k in range(3):
        v = _eigvec_batch(m, np.array([lam[k]]))[0]
        vecs.append(ProjPoint(v))
    return SpectralData(tuple(float(v) for v in lam), tuple(vecs), "positive-hyperbolic")


def translation_length(g, det=None):
    """Hilbert translation length (1/2) log(lambda_1 / lambda_3).

    Raises NotHyperbolic unless the map is positive hyperbolic.  Pass det for
    maps whose determinant is known algebraically (group words).
    """
    sd = classify(g, det=det)
    if sd.kind != "positive-hyperbolic":
        raise NotHyperbolic("map is not positive hyperbolic")
    return 0.5 * float(np.log(sd.lambdas[0] / sd.lambdas[2]))


def log_middle_eigenvalue(g, det=None):
    """log lambda_2, the bare middle-eigenvalue invariant."""
    sd = classify(g, det=det)
    if sd.kind != "positive-hyperbolic":
        raise NotHyperbolic("map is not positive hyperbolic")
    return float(np.log(sd.lambdas[1]))


def middle_eigen_parameter(g, det=None):
    """The complementary conjugacy invariant, normalised as 3 log lambda_2.

    Both normalisations are in circulation; log_middle_eigenvalue gives the
    bare value.
    """
    return 3.0 * log_middle_eigenvalue(g, det=det)


def dual_map(g):
    """Inverse transpose, the action on the dual plane of lines."""
    return ProjMap(np.linalg.inv(g.m).T)


def attracting_fixed_points(mats, det=None):
    """Attracting fixed points for a (n, 3, 3) batch of matrices.

    Returns (points, mask): points is (n, 3) of unnormalised eigenvectors for
    the top eigenvalue, mask flags the rows that are positive hyperbolic.
    Rows with mask False carry garbage and must be ignored.  Pass det for
    matrices whose determinant is known algebraically (group words).
    """
    mats = np.asarray(mats, dtype=float)
    lam, three_real = _eig3_batch(mats, det=det)
    mask = _positive_hyperbolic_mask(lam, three_real)
    vecs = _eigvec_batch(mats, lam[..., 0])
    return vecs, mask


def batch_top_bottom_eigvals(mats, det=None):
    """(lambda_1, lambda_3, mask) for a batch; mask as above."""
    mats = np.asarray(mats, dtype=float)
    lam, three_real = _eig3_batch(mats, det=det)
    mask = _positive_hyperbolic_mask(lam, three_real)
    return lam[..., 0], lam[..., 2], mask
