"""Marked free-group representations into the projective group.

Fuchsian seeds are built in SL(2,R) from trace coordinates and pushed through
the symmetric-square embedding into the conic-preserving subgroup of SL(3,R),
which gives exact trace-length control: an SL(2) element with eigenvalues
(e^{l/2}, e^{-l/2}) maps to a projective map with eigenvalues (e^l, 1, e^{-l})
and Hilbert translation length l.  Twist and bulge deformations act through
one-parameter diagonal groups in a marked curve's eigenbasis.
"""

import warnings

import numpy as np

from .errors import NotHyperbolic, TooShort
from .projective import ProjMap, classify

_LETTERS = "aAbB"
_INV = {"a": "A", "A": "a", "b": "B", "B": "b"}


def reduce_word(s):
    out = []
    for ch in s:
        if ch not in _INV:
            raise ValueError("letters must be one of a, A, b, B")
        if out and out[-1] == _INV[ch]:
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


class Word:
    """Freely reduced word over {a, A, b, B}; construction rejects unreduced input."""

    __slots__ = ("letters",)

    def __init__(self, letters=""):
        for ch in letters:
            if ch not in _INV:
                raise ValueError("letters must be one of a, A, b, B")
        if reduce_word(letters) != letters:
            raise ValueError("word %r is not freely reduced" % letters)
        object.__setattr__(self, "letters", letters)

    def __setattr__(self, *a):
        raise AttributeError("Word is immutable")

    @classmethod
    def reduced(cls, letters):
        """Build a Word by freely reducing arbitrary input."""
        return cls(reduce_word(letters))

    def inverse(self):
        return Word("".join(_INV[ch] for ch in reversed(self.letters)))

    def concat(self, other):
        return Word.reduced(self.letters + other.letters)

    def cyclic_reduced(self):
        s = self.letters
        while len(s) >= 2 and s[0] == _INV[s[-1]]:
            s = s[1:-1]
        return Word(s)

    def __len__(self):
        return len(self.letters)

    def __eq__(self, other):
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def __repr__(self):
        return "Word(%r)" % self.letters


def _sym_square(m):
    """Symmetric square of a 2x2 matrix: the action on binary quadratics."""
    a, b = m[0]
    c, d = m[1]
    return np.array([
        [a * a, a * b, b * b],
        [2.0 * a * c, a * d + b * c, 2.0 * b * d],
        [c * c, c * d, d * d],
    ])


# change of quadratic-coefficient coordinates (p, q, r) -> (q, p - r, p + r)
# turning the discriminant form q^2 - 4pr into x^2 + y^2 - z^2, so embedded
# maps preserve the unit-disk conic diag(1, 1, -1) exactly
_L = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, -1.0], [1.0, 0.0, 1.0]])
_L_INV = np.array([[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [0.0, -0.5, 0.5]])


def embed_sl2(m2):
    """SL(2,R) -> SL(3,R) via the symmetric square, landing in SO(2,1)."""
    return ProjMap(_L @ _sym_square(np.asarray(m2, dtype=float)) @ _L_INV)


def _sl2_from_traces(x, y, z):
    """SL(2) pair (A, B) with tr A = x, tr B = y, tr AB = z, A diagonal.

    Normalises B to parameter form with balanced off-diagonal corners; the
    pair is unique up to conjugation and mirror for a regular character.
    Balancing matters: short-length characters give |ps - 1| in the hundreds,
    and squaring unbalanced entries in the embedding costs seven digits of
    eigenvalue accuracy downstream.
    """
    if abs(x) <= 2.0:
        raise ValueError("tr A must be hyperbolic (|x| > 2)")
    root = np.sqrt(x * x - 4.0)
    alpha = (x + root) / 2.0 if x > 0 else (x - root) / 2.0  # |alpha| > 1
    denom = alpha - 1.0 / alpha
    p = (z - y / alpha) / denom
    s = y - p
    corner = p * s - 1.0
    # conjugating by diag(mu, 1/mu) scales the corners toward each other and
    # commutes with the diagonal A, so the marked character is untouched
    mu2 = np.sqrt(abs(corner)) if abs(corner) > 1e-30 else 1.0
    a2 = np.array([[alpha, 0.0], [0.0, 1.0 / alpha]])
    b2 = np.array([[p, mu2], [corner / mu2, s]])
    return a2, b2


class HolonomyRep:
    """Marked two-generator representation.

    marking maps curve names to Words; the deformation log records every
    applied (curve, twist, bulge) triple in order.
    """

    __slots__ = ("gen_a", "gen_b", "topology", "marking", "log")

    def __init__(self, gen_a, gen_b, topology, marking, log=()):
        object.__setattr__(self, "gen_a", gen_a)
        object.__setattr__(self, "gen_b", gen_b)
        object.__setattr__(self, "topology", topology)
        object.__setattr__(self, "marking", dict(marking))
        object.__setattr__(self, "log", tuple(log))

    def __setattr__(self, *a):
        raise AttributeError("HolonomyRep is immutable")

    def to_json(self):
        return {
            "topology": self.topology,
            "a": self.gen_a.to_json()["m"],
            "b": self.gen_b.to_json()["m"],
            "marking": {k: w.letters for k, w in self.marking.items()},
            "log": [dict(entry) for entry in self.log],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            ProjMap(np.asarray(obj["a"], dtype=float).reshape(3, 3)),
            ProjMap(np.asarray(obj["b"], dtype=float).reshape(3, 3)),
            obj["topology"],
            {k: Word(v) for k, v in obj["marking"].items()},
            [dict(e) for e in obj.get("log", [])],
        )

    def __repr__(self):
        return "HolonomyRep(%s, %d deformations)" % (self.topology, len(self.log))


def generator_matrices(rep):
    """Matrices for the letters a, A, b, B in that order."""
    a = rep.gen_a.m
    b = rep.gen_b.m
    return [a, np.linalg.inv(a), b, np.linalg.inv(b)], _LETTERS


def evaluate(rep, w):
    """Holonomy of a word: the product of generator images in reading order."""
    mats = {
        "a": rep.gen_a,
        "A": rep.gen_a.inverse(),
        "b": rep.gen_b,
        "B": rep.gen_b.inverse(),
    }
    out = ProjMap.identity()
    for ch in w.letters:
        out = out @ mats[ch]
    return out


def _ping_pong_warning(rep):
    """Coarse discreteness heuristic: generator axis endpoints should stay
    apart on the boundary circle; near-collisions usually mean the chosen
    parameters are outside the discrete range."""
    pts = []
    for g in (rep.gen_a, rep.gen_b):
        sd = classify(g)
        if sd.kind != "positive-hyperbolic":
            return
        for fp in (sd.fixed_points[0], sd.fixed_points[2]):
            try:
                pts.append(fp.to_affine())
            except ValueError:
                return
    pts = np.asarray(pts)
    center = pts.mean(axis=0)
    ang = np.sort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    gaps = np.diff(np.append(ang, ang[0] + 2.0 * np.pi))
    if np.min(gaps) < 1e-3:
        warnings.warn("generator fixed points nearly collide; representation may be non-discrete")


def fuchsian_pants(l1, l2, l3):
    """Fuchsian holonomy of a hyperbolic pair of pants with boundary lengths
    (l1, l2, l3); marking: boundary1 = a, boundary2 = b, boundary3 = (ab)^-1.

    Trace coordinates (-2cosh(l1/2), -2cosh(l2/2), -2cosh(l3/2)) put the
    commutator trace above 2, the classical discreteness regime for a free
    two-generator Fuchsian group with disjoint axes.
    """
    if min(l1, l2, l3) <= 0:
        raise ValueError("boundary lengths must be positive")
    x = -2.0 * np.cosh(l1 / 2.0)
    y = -2.0 * np.cosh(l2 / 2.0)
    z = -2.0 * np.cosh(l3 / 2.0)
    a2, b2 = _sl2_from_traces(x, y, z)
    rep = HolonomyRep(
        embed_sl2(a2),
        embed_sl2(b2),
        "pants",
        {
            "boundary1": Word("a"),
            "boundary2": Word("b"),
            "boundary3": Word("BA"),
        },
    )
    _ping_pong_warning(rep)
    return rep


def fuchsian_punctured_torus(l_a, l_b):
    """Fuchsian holonomy of a once-punctured torus with core curve lengths
    (l_a, l_b); the commutator is parabolic (trace -2) so the cusp is complete.

    Short curves make the character equation unsolvable over the reals, so
    lengths below the floor are rejected.
    """
    if min(l_a, l_b) < 0.5:
        raise TooShort("curve lengths below 0.5 are outside the supported range")
    x = 2.0 * np.cosh(l_a / 2.0)
    y = 2.0 * np.cosh(l_b / 2.0)
    disc = (x * y) ** 2 - 4.0 * (x * x + y * y)
    if disc < 0:
        raise TooShort("no punctured-torus character with these lengths")
    z = (x * y - np.sqrt(disc)) / 2.0
    a2, b2 = _sl2_from_traces(x, y, z)
    rep = HolonomyRep(
        embed_sl2(a2),
        embed_sl2(b2),
        "punctured-torus",
        {"a": Word("a"), "b": Word("b")},
    )
    _ping_pong_warning(rep)
    return rep


def resolve_curve(rep, curve):
    """Accept a marking name, a Word, or a raw letter string."""
    if isinstance(curve, Word):
        return curve
    if curve in rep.marking:
        return rep.marking[curve]
    return Word(curve)


def marked_length(rep, curve):
    """Hilbert translation length of a marked curve.

    Generator images have determinant one, so the word's determinant is
    passed algebraically; without that, long words lose the small eigenvalue
    to rounding in the recomputed determinant.
    """
    from .projective import translation_length

    return translation_length(evaluate(rep, resolve_curve(rep, curve)), det=1.0)


class DeformationMatrices:
    """The twist and bulge matrices of a curve at given parameters.

    gamma_t = diag(e^t, 1, e^-t) and o_t = diag(e^{-t/3}, e^{2t/3}, e^{-t/3})
    expressed in the curve's eigenbasis; both commute with the curve's
    holonomy and have determinant 1.
    """

    __slots__ = ("gamma_t", "o_t", "basis")

    def __init__(self, gamma_t, o_t, basis):
        self.gamma_t = gamma_t
        self.o_t = o_t
        self.basis = basis


def _curve_eigenbasis(rep, curve):
    g = evaluate(rep, resolve_curve(rep, curve))
    sd = classify(g)
    if sd.kind != "positive-hyperbolic":
        raise NotHyperbolic("curve holonomy is not positive hyperbolic")
    attract, saddle, repel = (fp.h for fp in sd.fixed_points)
    basis = np.stack([attract, saddle, repel], axis=1)
    det = np.linalg.det(basis)
    # canonical fixed points for the outer columns; middle column soaks up
    # the determinant so the basis is exactly unimodular
    basis = basis.copy()
    basis[:, 1] = basis[:, 1] / det
    return basis


def deformation_matrices(rep, curve, t=0.0, s=0.0):
    basis = _curve_eigenbasis(rep, curve)
    inv = np.linalg.inv(basis)
    gamma = basis @ np.diag([np.exp(t), 1.0, np.exp(-t)]) @ inv
    o_mat = basis @ np.diag([np.exp(-s / 3.0), np.exp(2.0 * s / 3.0), np.exp(-s / 3.0)]) @ inv
    return DeformationMatrices(ProjMap(gamma), ProjMap(o_mat), basis)


def _deform(rep, curve, t, s):
    word = resolve_curve(rep, curve)
    entry = {"curve": getattr(curve, "letters", str(curve)), "twist": float(t), "bulge": float(s)}
    if t == 0.0 and s == 0.0:
        return HolonomyRep(rep.gen_a, rep.gen_b, rep.topology, rep.marking, rep.log + (entry,))
    dm = deformation_matrices(rep, curve, t, s)
    mover = dm.gamma_t @ dm.o_t  # same eigenbasis, so the order is immaterial
    letters = word.cyclic_reduced().letters
    core = set(letters)
    gen_a, gen_b = rep.gen_a, rep.gen_b
    if core <= {"a", "A"}:
        # the crossing generator is b
        gen_b = mover @ gen_b
    elif core <= {"b", "B"}:
        gen_a = mover @ gen_a
    elif core in ({"a", "b"}, {"A", "B"}) and len(letters) == 2:
        # waist curve ab (or its inverse): rewriting the crossing recipe in the
        # free basis (ab, b) gives a -> a * mover^-1, b -> mover * b, which
        # fixes the waist holonomy itself exactly
        gen_a = gen_a @ mover.inverse()
        gen_b = mover @ gen_b
    else:
        raise ValueError("deformation supports the marked curves a, b and the pants waist")
    out = HolonomyRep(gen_a, gen_b, rep.topology, rep.marking, rep.log + (entry,))
    _ping_pong_warning(out)
    return out


def twist_deform(rep, curve, t):
    """Earthquake along a marked curve: the crossing generator is replaced by
    gamma_t times itself (the curve's own length never changes)."""
    return _deform(rep, curve, float(t), 0.0)


def bulge_deform(rep, curve, s):
    """Bulge along a marked curve with the vertical one-parameter group o_s;
    s != 0 leaves the Fuchsian locus."""
    return _deform(rep, curve, 0.0, float(s))


def dual_structure(rep):
    """Inverse-transpose every generator: the holonomy of the dual domain.

    Word holonomies dualise coherently and keep their translation lengths, so
    the marked length spectrum is unchanged.
    """
    from .projective import dual_map

    return HolonomyRep(
        dual_map(rep.gen_a),
        dual_map(rep.gen_b),
        rep.topology,
        rep.marking,
        rep.log,
    )
