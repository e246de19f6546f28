import numpy as np
import pytest

from hilbertia.domains import conic_fit_residual, orbit_hull
from hilbertia.errors import NotHyperbolic, TooShort
from hilbertia.holonomy import (
    HolonomyRep,
    Word,
    bulge_deform,
    deformation_matrices,
    dual_structure,
    embed_sl2,
    evaluate,
    fuchsian_pants,
    fuchsian_punctured_torus,
    marked_length,
    reduce_word,
    resolve_curve,
    twist_deform,
)
from hilbertia.projective import ProjMap, classify, translation_length

J = np.diag([1.0, 1.0, -1.0])


def random_word(rng, maxlen, cyclic=False):
    letters = "aAbB"
    inv = {0: 1, 1: 0, 2: 3, 3: 2}
    n = int(rng.integers(1, maxlen + 1))
    w = [int(rng.integers(0, 4))]
    while len(w) < n:
        k = int(rng.integers(0, 4))
        if k != inv[w[-1]]:
            w.append(k)
    if cyclic and len(w) > 1 and w[0] == inv[w[-1]]:
        w.pop()
    return Word("".join(letters[k] for k in w))


def random_sl2(rng):
    while True:
        m = rng.normal(size=(2, 2))
        d = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(d) > 0.1:
            return m / np.sqrt(abs(d)) * np.sign(d)


# ---------------------------------------------------------------------------
# words


def test_reduce_word_cancels_adjacent_inverses():
    assert reduce_word("abBA") == ""
    assert reduce_word("aabBAA") == ""
    assert reduce_word("abAB") == "abAB"
    assert reduce_word("aA" * 50 + "b") == "b"


def test_word_rejects_unreduced_and_bad_letters():
    with pytest.raises(ValueError):
        Word("aA")
    with pytest.raises(ValueError):
        Word("axb")
    assert Word.reduced("abBA").letters == ""


def test_word_is_immutable():
    w = Word("ab")
    with pytest.raises(AttributeError):
        w.letters = "ba"


def test_word_inverse_and_concat():
    w = Word("abA")
    assert w.inverse().letters == "aBA"
    assert w.concat(w.inverse()).letters == ""
    assert Word("ab").concat(Word("Ba")).letters == "aa"
    assert len(Word("abab")) == 4


def test_cyclic_reduction_strips_conjugating_prefix():
    assert Word("abA").cyclic_reduced().letters == "b"
    assert Word("BabAAb").cyclic_reduced().letters == "bA"
    assert Word("abAB").cyclic_reduced().letters == "abAB"
    assert Word("a").cyclic_reduced().letters == "a"


def test_word_equality_and_hash():
    assert Word("ab") == Word("ab")
    assert Word("ab") != Word("ba")
    assert len({Word("ab"), Word("ab"), Word("ba")}) == 2


# ---------------------------------------------------------------------------
# the symmetric-square embedding


def test_embed_preserves_disk_form():
    rng = np.random.default_rng(21)
    for _ in range(30):
        g = embed_sl2(random_sl2(rng))
        assert np.allclose(g.m.T @ J @ g.m, J, atol=1e-9)


def test_embed_is_a_homomorphism():
    rng = np.random.default_rng(22)
    for _ in range(20):
        m1, m2 = random_sl2(rng), random_sl2(rng)
        lhs = embed_sl2(m1 @ m2)
        rhs = embed_sl2(m1) @ embed_sl2(m2)
        assert np.allclose(lhs.m, rhs.m, atol=1e-9 * np.abs(rhs.m).max())


def test_embed_squares_the_eigenvalue_ratio():
    ell = 1.4
    m = np.diag([np.exp(ell / 2.0), np.exp(-ell / 2.0)])
    g = embed_sl2(m)
    lam = np.sort(np.linalg.eigvals(g.m))[::-1]
    assert np.allclose(lam.real, [np.exp(ell), 1.0, np.exp(-ell)], atol=1e-12)
    assert translation_length(g) == pytest.approx(ell, abs=1e-12)


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_empty_word_is_identity():
    rep = fuchsian_pants(2.0, 2.0, 2.0)
    assert np.allclose(evaluate(rep, Word("")).m, np.eye(3))


def test_evaluate_is_a_homomorphism():
    rep = fuchsian_punctured_torus(2.0, 2.5)
    rng = np.random.default_rng(3)
    for _ in range(20):
        u, v = random_word(rng, 4), random_word(rng, 4)
        lhs = evaluate(rep, u.concat(v)).m
        rhs = (evaluate(rep, u) @ evaluate(rep, v)).m
        assert np.allclose(lhs, rhs, atol=1e-9 * np.abs(rhs).max())


def test_evaluate_inverse_letters_cancel():
    rep = fuchsian_pants(1.0, 1.0, 1.0)
    prod = evaluate(rep, Word("a")) @ evaluate(rep, Word("A"))
    assert np.allclose(prod.m, np.eye(3), atol=1e-12)


# ---------------------------------------------------------------------------
# fuchsian seeds


def test_pants_marked_lengths_match_request():
    for lens in [(2.0, 2.0, 2.0), (0.7, 1.1, 1.9), (0.25, 0.25, 0.25)]:
        rep = fuchsian_pants(*lens)
        for name, want in zip(("boundary1", "boundary2", "boundary3"), lens):
            assert marked_length(rep, name) == pytest.approx(want, abs=1e-9)


def test_pants_marking_words():
    rep = fuchsian_pants(2.0, 2.0, 2.0)
    assert rep.marking["boundary1"] == Word("a")
    assert rep.marking["boundary2"] == Word("b")
    assert rep.marking["boundary3"] == Word("BA")


def test_pants_rejects_nonpositive_lengths():
    with pytest.raises(ValueError):
        fuchsian_pants(2.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        fuchsian_pants(-1.0, 2.0, 2.0)


def test_torus_marked_lengths_match_request():
    rep = fuchsian_punctured_torus(1.7, 2.4)
    assert marked_length(rep, "a") == pytest.approx(1.7, abs=1e-9)
    assert marked_length(rep, "b") == pytest.approx(2.4, abs=1e-9)


def test_torus_commutator_is_parabolic():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    comm = evaluate(rep, Word("abAB"))
    # parabolic conic-preserving maps have all eigenvalues 1: trace 3
    assert np.trace(comm.m) == pytest.approx(3.0, abs=1e-6)
    with pytest.raises(NotHyperbolic):
        translation_length(comm, det=1.0)


def test_torus_rejects_short_curves():
    with pytest.raises(TooShort):
        fuchsian_punctured_torus(0.4, 2.0)
    with pytest.raises(TooShort):
        fuchsian_punctured_torus(0.6, 0.6)  # character equation has no real solution


def test_torus_generator_axes_cross():
    # endpoints of the two axes interleave on the circle exactly when the
    # curves intersect on the surface
    rep = fuchsian_punctured_torus(2.0, 2.0)
    ends = {}
    for name in ("a", "b"):
        sd = classify(evaluate(rep, rep.marking[name]))
        pts = [sd.fixed_points[0].to_affine(), sd.fixed_points[2].to_affine()]
        ends[name] = [np.arctan2(p[1], p[0]) for p in pts]
    order = sorted((ang, name) for name in ends for ang in ends[name])
    labels = "".join(name for _, name in order)
    assert labels in ("abab", "baba")


def test_pants_generator_axes_disjoint():
    rep = fuchsian_pants(2.0, 2.0, 2.0)
    ends = {}
    for name in ("a", "b"):
        sd = classify(evaluate(rep, Word(name)))
        pts = [sd.fixed_points[0].to_affine(), sd.fixed_points[2].to_affine()]
        ends[name] = [np.arctan2(p[1], p[0]) for p in pts]
    order = sorted((ang, name) for name in ends for ang in ends[name])
    labels = "".join(name for _, name in order)
    assert labels in ("aabb", "abba", "bbaa", "baab")


def test_discreteness_heuristic_warns_on_colliding_axes():
    rep = fuchsian_pants(2.0, 2.0, 2.0)
    # crush the two generators together so their fixed points nearly collide
    with pytest.warns(UserWarning):
        HolonomyRep(
            rep.gen_a,
            rep.gen_a @ ProjMap(np.eye(3) + 1e-7 * np.diag([1.0, 0.0, -1.0])),
            "pants",
            rep.marking,
        )
        from hilbertia.holonomy import _ping_pong_warning

        _ping_pong_warning(
            HolonomyRep(
                rep.gen_a,
                rep.gen_a @ ProjMap(np.eye(3) + 1e-7 * np.diag([1.0, 0.0, -1.0])),
                "pants",
                rep.marking,
            )
        )


# ---------------------------------------------------------------------------
# serialization


def test_rep_json_round_trip():
    rep = twist_deform(fuchsian_pants(1.0, 1.5, 2.0), "boundary1", 0.3)
    blob = rep.to_json()
    back = HolonomyRep.from_json(blob)
    assert np.allclose(back.gen_a.m, rep.gen_a.m)
    assert np.allclose(back.gen_b.m, rep.gen_b.m)
    assert back.topology == rep.topology
    assert back.marking == rep.marking
    assert back.log == rep.log
    assert back.log[0]["curve"] == "boundary1"
    assert back.log[0]["twist"] == pytest.approx(0.3)


def test_resolve_curve_accepts_all_forms():
    rep = fuchsian_pants(2.0, 2.0, 2.0)
    assert resolve_curve(rep, "boundary3") == Word("BA")
    assert resolve_curve(rep, Word("ab")) == Word("ab")
    assert resolve_curve(rep, "ab") == Word("ab")


# ---------------------------------------------------------------------------
# twists


def test_zero_twist_returns_identical_generators_and_logs():
    rep = fuchsian_pants(2.0, 2.0, 2.0)
    out = twist_deform(rep, "boundary1", 0.0)
    assert out.gen_a is rep.gen_a
    assert out.gen_b is rep.gen_b
    assert len(out.log) == len(rep.log) + 1
    assert out.log[-1] == {"curve": "boundary1", "twist": 0.0, "bulge": 0.0}


def test_twist_preserves_its_own_curve_length():
    torus = fuchsian_punctured_torus(2.0, 2.0)
    for t in (0.3, -0.8, 2.0):
        out = twist_deform(torus, "a", t)
        assert marked_length(out, "a") == pytest.approx(2.0, abs=1e-9)
    pants = fuchsian_pants(2.0, 2.0, 2.0)
    out = twist_deform(pants, "ab", 0.7)
    assert marked_length(out, "ab") == pytest.approx(marked_length(pants, "ab"), abs=1e-9)


def test_twist_changes_the_crossing_curve():
    torus = fuchsian_punctured_torus(2.0, 2.0)
    out = twist_deform(torus, "a", 0.5)
    assert abs(marked_length(out, "b") - marked_length(torus, "b")) > 1e-3


def test_twists_along_one_curve_add():
    torus = fuchsian_punctured_torus(2.0, 2.0)
    one = twist_deform(twist_deform(torus, "a", 0.3), "a", 0.4)
    two = twist_deform(torus, "a", 0.7)
    assert np.allclose(one.gen_b.m, two.gen_b.m, atol=1e-9)
    assert np.allclose(one.gen_a.m, two.gen_a.m, atol=1e-9)


def test_twist_keeps_rep_fuchsian():
    torus = fuchsian_punctured_torus(2.0, 2.0)
    out = twist_deform(torus, "b", 0.9)
    for g in (out.gen_a, out.gen_b):
        assert np.allclose(g.m.T @ J @ g.m, J, atol=1e-9)


def test_deformation_matrices_shape():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    dm = deformation_matrices(rep, "a", t=0.5, s=0.2)
    # both matrices share the curve eigenbasis, so they commute
    assert np.allclose((dm.gamma_t @ dm.o_t).m, (dm.o_t @ dm.gamma_t).m, atol=1e-12)
    assert np.linalg.det(dm.basis) == pytest.approx(1.0, abs=1e-9)


def test_deform_rejects_unsupported_curves():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    with pytest.raises(ValueError):
        twist_deform(rep, "aab", 0.5)


# ---------------------------------------------------------------------------
# bulges


def test_zero_bulge_is_identity_with_log_entry():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    out = bulge_deform(rep, "a", 0.0)
    assert out.gen_a is rep.gen_a and out.gen_b is rep.gen_b
    assert out.log[-1]["bulge"] == 0.0


def test_bulge_preserves_its_own_curve_length():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    for s in (0.5, 1.0):
        out = bulge_deform(rep, "a", s)
        assert marked_length(out, "a") == pytest.approx(2.0, abs=1e-9)


def test_bulge_leaves_the_disk_preserving_locus():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    out = bulge_deform(rep, "a", 1.0)
    # some conjugate of J may be preserved instead, but not J itself
    assert not np.allclose(out.gen_b.m.T @ J @ out.gen_b.m, J, atol=1e-6)


def test_bulged_hull_is_no_longer_a_conic():
    rep = bulge_deform(fuchsian_punctured_torus(2.0, 2.0), "a", 1.0)
    hull = orbit_hull(rep, depth=10)
    assert conic_fit_residual(hull.vertices) > 1e-2


def test_fuchsian_hull_is_a_conic():
    hull = orbit_hull(fuchsian_punctured_torus(2.0, 2.0), depth=8)
    r = np.linalg.norm(hull.vertices, axis=1)
    assert np.abs(r - 1.0).max() < 1e-3
    assert conic_fit_residual(hull.vertices) < 1e-6


def test_bulge_then_twist_commute_on_the_same_curve():
    rep = fuchsian_punctured_torus(2.0, 2.0)
    one = twist_deform(bulge_deform(rep, "a", 0.4), "a", 0.6)
    two = bulge_deform(twist_deform(rep, "a", 0.6), "a", 0.4)
    assert np.allclose(one.gen_a.m, two.gen_a.m, atol=1e-9)
    assert np.allclose(one.gen_b.m, two.gen_b.m, atol=1e-9)


def test_deformed_rep_is_still_a_homomorphism():
    rep = bulge_deform(twist_deform(fuchsian_punctured_torus(2.0, 2.0), "a", 0.5), "b", 0.7)
    rng = np.random.default_rng(9)
    for _ in range(10):
        u, v = random_word(rng, 4), random_word(rng, 4)
        lhs = evaluate(rep, u.concat(v)).m
        rhs = (evaluate(rep, u) @ evaluate(rep, v)).m
        assert np.allclose(lhs, rhs, atol=1e-8 * np.abs(rhs).max())


# ---------------------------------------------------------------------------
# duality


def test_double_dual_is_the_original():
    rep = bulge_deform(fuchsian_punctured_torus(2.0, 2.0), "a", 0.8)
    back = dual_structure(dual_structure(rep))
    assert np.allclose(back.gen_a.m, rep.gen_a.m, atol=1e-12)
    assert np.allclose(back.gen_b.m, rep.gen_b.m, atol=1e-12)


def test_dual_preserves_marked_lengths():
    rep = bulge_deform(fuchsian_punctured_torus(2.0, 2.0), "a", 0.8)
    dual = dual_structure(rep)
    for name in ("a", "b"):
        assert marked_length(dual, name) == pytest.approx(marked_length(rep, name), abs=1e-12)


def test_dual_commutes_with_twist():
    # duality preserves each word's eigenbasis ordering, so twisting commutes
    # with dualising at the same parameter
    torus = fuchsian_punctured_torus(2.0, 2.0)
    t = 0.37
    lhs = dual_structure(twist_deform(torus, "a", t))
    rhs = twist_deform(dual_structure(torus), "a", t)
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(50):
        w = random_word(rng, 6, cyclic=True)
        try:
            a = translation_length(evaluate(lhs, w), det=1.0)
            b = translation_length(evaluate(rhs, w), det=1.0)
        except NotHyperbolic:
            continue
        assert a == pytest.approx(b, abs=1e-8)
        checked += 1
    assert checked >= 40
