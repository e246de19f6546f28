import functools
import json

import numpy as np
import pytest

from hilbertia.affine import (
    BlaschkeData,
    GridSolution,
    blaschke_from_jet,
    blaschke_metric,
    compare_hilbert_affine,
    solve_monge_ampere,
)
from hilbertia.domains import ConvexDomain, Ellipse, Polygon, orbit_hull, square
from hilbertia.errors import (
    NonConvexDomain,
    NotConverged,
    NotPositiveDefinite,
    TooCloseToBoundary,
)
from hilbertia.holonomy import bulge_deform, fuchsian_pants

DISK = Ellipse.unit_disk()


@functools.lru_cache(maxsize=None)
def disk_solution(resolution, tol=1e-5):
    return solve_monge_ampere(DISK, resolution, tol=tol, max_sweeps=40000)


@functools.lru_cache(maxsize=None)
def bulged_hull():
    rep = bulge_deform(fuchsian_pants(2.0, 2.0, 2.0), "a", 1.0)
    return orbit_hull(rep, depth=8)


def disk_error(sol):
    """Sup distance to -sqrt(1-r^2) over nodes at least 2h inside."""
    X, Y = np.meshgrid(sol.xs, sol.ys, indexing="ij")
    exact = -np.sqrt(np.maximum(1.0 - X ** 2 - Y ** 2, 0.0))
    deep = sol.interior & (sol.boundary_depth >= 2.0 * sol.spacing)
    return float(np.abs(sol.u - exact)[deep].max())


# ---------------------------------------------------------------- solving


def test_disk_against_closed_form():
    sol = disk_solution(65)
    assert disk_error(sol) < 1e-3


def test_solution_negative_inside():
    sol = disk_solution(33)
    assert (sol.u[sol.interior] < 0.0).all()
    assert (sol.u[~sol.interior] == 0.0).all()


def test_refinement_reduces_error():
    coarse = disk_error(disk_solution(33))
    fine = disk_error(disk_solution(65))
    assert 1.6 <= coarse / fine <= 4.4


def test_residual_history_monotone():
    # each sweep either lowers the max residual or stays within 5%
    for res in (33, 65):
        hist = np.array(disk_solution(res).residual_history)
        assert (hist[1:] <= hist[:-1] * 1.05).all()
        assert hist[-1] < 1e-5


def test_discrete_convexity():
    sol = disk_solution(65)
    uxx, uyy, uxy = sol.hessian_field()
    mean = 0.5 * (uxx + uyy)
    span = np.sqrt(0.25 * (uxx - uyy) ** 2 + uxy ** 2)
    assert (mean - span)[sol.interior].min() > -1e-8


def test_reported_residual_matches_field():
    sol = disk_solution(33)
    deep = sol.interior & (sol.boundary_depth >= 2.0 * sol.spacing)
    assert np.isclose(
        sol.residual, np.abs(sol.residual_field()[deep]).max(), rtol=1e-12
    )


def test_square_domain_solves():
    sol = solve_monge_ampere(square(), 33, tol=1e-3, max_sweeps=20000)
    assert (sol.u[sol.interior] < 0.0).all()
    assert sol.residual < 1e-3


def test_resolution_floor():
    with pytest.raises(ValueError):
        solve_monge_ampere(DISK, 17)


def test_unsupported_domain():
    with pytest.raises(NonConvexDomain):
        solve_monge_ampere(ConvexDomain(), 33)


def test_sweep_cap_raises():
    with pytest.raises(NotConverged):
        solve_monge_ampere(DISK, 65, tol=1e-5, max_sweeps=200)


# ---------------------------------------------------- grid serialization


def test_bytes_round_trip_is_bit_identical():
    sol = disk_solution(33)
    blob = sol.to_bytes()
    back = GridSolution.from_bytes(DISK, blob)
    assert np.array_equal(back.u, sol.u)
    assert back.to_bytes() == blob


def test_bytes_header_is_json():
    head = disk_solution(33).to_bytes().split(b"\n", 1)[0]
    header = json.loads(head.decode())
    assert header["resolution"] == 33
    assert header["spacing"] == pytest.approx(2.0 / 32.0)


def test_bytes_reject_wrong_domain():
    blob = disk_solution(33).to_bytes()
    with pytest.raises(ValueError):
        GridSolution.from_bytes(Ellipse.axis_aligned((0.0, 0.0), 1.2, 0.6), blob)


# ------------------------------------------------------- Blaschke metric


def test_disk_metric_is_klein_at_origin():
    bd = blaschke_metric(disk_solution(65), (0.0, 0.0))
    assert np.abs(bd.h_metric - np.eye(2)).max() < 1e-3


def test_metric_positive_definite_off_center():
    sol = disk_solution(65)
    for p in [(0.3, 0.1), (-0.4, -0.2), (0.0, 0.5)]:
        bd = blaschke_metric(sol, p)
        assert np.linalg.eigvalsh(bd.h_metric).min() > 0.0


def test_affine_normal_points_along_radial_graph():
    sol = disk_solution(65)
    for p in [(0.0, 0.0), (0.25, 0.0), (-0.2, 0.35)]:
        bd = blaschke_metric(sol, p)
        x, y = bd.point
        i = int(round((x - sol.xs[0]) / sol.spacing))
        j = int(round((y - sol.ys[0]) / sol.spacing))
        F = (-1.0 / sol.u[i, j]) * np.array([1.0, x, y])
        assert np.linalg.norm(bd.xi - F) / np.linalg.norm(F) < 1e-2


def test_transversal_scale_cancels():
    jet = ((0.1, 0.2), -0.8, (0.12, 0.24), np.array([[1.3, 0.2], [0.2, 1.1]]))
    one = blaschke_from_jet(*jet)
    two = blaschke_from_jet(*jet, transversal_scale=2.0)
    assert np.abs(one.h_metric - two.h_metric).max() < 1e-10
    assert np.allclose(two.xi, one.xi, atol=1e-10)


def test_unimodular_change_of_coordinates():
    """Mapping domain and solution through det-1 linear maps moves the
    metric by the same map: T^t h' T recovers h to rounding."""
    rng = np.random.default_rng(23)
    p = np.array([0.15, -0.2])
    u = -0.7
    grad = np.array([0.21, -0.33])
    hess = np.array([[1.7, 0.4], [0.4, 1.2]])
    base = blaschke_from_jet(p, u, grad, hess)
    for _ in range(5):
        T = rng.normal(size=(2, 2))
        T /= np.sqrt(abs(np.linalg.det(T)))
        if np.linalg.det(T) < 0.0:
            T[0] *= -1.0
        Ti = np.linalg.inv(T)
        moved = blaschke_from_jet(T @ p, u, Ti.T @ grad, Ti.T @ hess @ Ti)
        assert np.abs(T.T @ moved.h_metric @ T - base.h_metric).max() < 1e-6


def test_blaschke_rejects_concave_jet():
    with pytest.raises(NotPositiveDefinite):
        blaschke_from_jet((0.0, 0.0), -1.0, (0.0, 0.0), -np.eye(2))


def test_blaschke_near_boundary_rejected():
    with pytest.raises(TooCloseToBoundary):
        blaschke_metric(disk_solution(33), (0.9, 0.0))


def test_blaschke_data_shape():
    bd = blaschke_metric(disk_solution(65), (0.1, 0.1))
    assert isinstance(bd, BlaschkeData)
    assert bd.h_metric.shape == (2, 2)
    assert bd.xi.shape == (3,)
    assert np.allclose(bd.h_metric, bd.h_metric.T)


# ------------------------------------------------- Hilbert vs affine


def test_disk_norm_ratio_band():
    rep = compare_hilbert_affine(DISK, disk_solution(65), 200)
    assert rep.norm_ratio_min <= 1.0 <= rep.norm_ratio_max
    assert rep.norm_ratio_max - rep.norm_ratio_min < 0.05


def test_disk_ratio_constant_within_two_percent():
    rep = compare_hilbert_affine(DISK, disk_solution(65), 200)
    assert rep.norm_ratio_max / rep.norm_ratio_mean < 1.02
    assert rep.norm_ratio_mean / rep.norm_ratio_min < 1.02


def test_volume_ratios_single_band():
    rep = compare_hilbert_affine(DISK, disk_solution(65), 100)
    assert rep.volume_ratio_max / rep.volume_ratio_min < 3.0


def test_comparison_is_seeded():
    one = compare_hilbert_affine(DISK, disk_solution(65), 50, seed=11)
    two = compare_hilbert_affine(DISK, disk_solution(65), 50, seed=11)
    assert np.array_equal(one.norm_ratios, two.norm_ratios)


def test_norm_ratio_guard_trips_on_garbage():
    sol = GridSolution.from_bytes(DISK, disk_solution(65).to_bytes())
    sol.u *= 30.0  # still convex, but the affine norm shrinks thirtyfold
    with pytest.raises(NotConverged):
        compare_hilbert_affine(DISK, sol, 50)


def test_compare_needs_samples():
    with pytest.raises(ValueError):
        compare_hilbert_affine(DISK, disk_solution(33), 0)


def test_bulged_hull_ratios_bounded():
    hull = bulged_hull()
    sol = solve_monge_ampere(hull, 65, tol=1e-4, max_sweeps=40000)
    rep = compare_hilbert_affine(hull, sol, 200)
    assert 0.1 < rep.norm_ratio_min <= rep.norm_ratio_max < 10.0
    assert rep.volume_ratio_max / rep.volume_ratio_min < 3.0


def test_report_exports():
    rep = compare_hilbert_affine(DISK, disk_solution(65), 40)
    obj = rep.to_json()
    assert obj["norm_ratio"]["samples"] == 40
    assert obj["norm_ratio"]["min"] <= obj["norm_ratio"]["mean"]
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "quantity,min,max,mean"
    assert len(lines) == 3
