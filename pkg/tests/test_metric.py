import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tolerant_robust.errors import (EmptySupportError, InvalidArgumentError, InvalidPointError,
                                    InvalidRadiusError, InvalidSpaceError, ParseError)
from tolerant_robust.metric import (Ball, Boundary, DoublingParameters, EuclideanSpace,
                                    FiniteSpace, distance, doubling_ratio_bound,
                                    empirical_doubling_constant, measure_ball, sample_ball,
                                    verify_doubling_euclidean, zeta_from_constants)


def line_space(n=3, weights=None):
    return FiniteSpace.from_coordinates(np.arange(n, dtype=float)[:, None], weights)


# distance

def test_l2_distance_pythagorean():
    assert distance(EuclideanSpace(2), (0, 0), (3, 4)) == 5.0


def test_linf_distance_max_coordinate():
    assert distance(EuclideanSpace(2, "Linf"), (0, 0), (3, 4)) == 4.0


def test_finite_distance_is_matrix_lookup():
    D = np.array([[0, 1.0, 1.5], [1.0, 0, 0.7], [1.5, 0.7, 0]])
    assert distance(FiniteSpace(D), 1, 2) == 0.7


def test_point_validation():
    with pytest.raises(InvalidPointError):
        EuclideanSpace(2).distance((0, 0, 0), (1, 1))
    with pytest.raises(InvalidPointError):
        line_space().distance(0, 3)
    with pytest.raises(InvalidPointError):
        line_space().point(True)


@given(st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
def test_distance_axioms_l2(v):
    sp = EuclideanSpace(2)
    p, q, z = v[0:2], v[2:4], v[4:6]
    assert sp.distance(p, q) == sp.distance(q, p)
    assert sp.distance(p, p) == 0
    assert sp.distance(p, z) <= sp.distance(p, q) + sp.distance(q, z) + 1e-9


# measure

def test_measure_linf_square():
    assert measure_ball(EuclideanSpace(2, "Linf"), Ball((0, 0), 0.5)) == 1.0


def test_measure_l2_disk_is_pi():
    assert abs(measure_ball(EuclideanSpace(2), Ball((0, 0), 1.0)) - math.pi) <= 1e-12


def test_measure_l2_dim3_sphere_volume():
    # independent closed form 4/3 pi r^3
    assert math.isclose(EuclideanSpace(3).measure_ball(Ball((0, 0, 0), 2.0)),
                        4.0 / 3.0 * math.pi * 8.0, rel_tol=1e-12)


def test_measure_finite_counts_members():
    sp = line_space(5)
    assert measure_ball(sp, Ball(2, 1.0)) == 3.0
    assert measure_ball(sp, Ball(2, 1.0, Boundary.OPEN)) == 1.0


def test_negative_radius_rejected():
    with pytest.raises(InvalidRadiusError):
        Ball((0,), -0.1)


# sampling

@pytest.mark.parametrize("space,center", [(EuclideanSpace(3), (1.0, 2.0, 3.0)),
                                          (EuclideanSpace(2, "Linf"), (0.0, 0.0)),
                                          (line_space(4), 1)])
def test_zero_radius_returns_center(space, center):
    rng = np.random.default_rng(1)
    for _ in range(5):
        assert np.all(np.asarray(sample_ball(space, Ball(center, 0.0), rng)) == np.asarray(center))


@pytest.mark.parametrize("space", [EuclideanSpace(1), EuclideanSpace(3), EuclideanSpace(2, "Linf"),
                                   EuclideanSpace(5, "Linf")])
def test_sampling_containment(space):
    rng = np.random.default_rng(2)
    c = np.linspace(-1, 1, space.dim)
    pts = space.sample_ball(Ball(c, 0.7), rng, 100_000)
    assert np.all(space.distances(c, pts) <= 0.7)


def test_linf_marginals_uniform_mean_within_four_se():
    rng = np.random.default_rng(3)
    c, r, n = np.array([0.5, -2.0]), 1.5, 100_000
    pts = EuclideanSpace(2, "Linf").sample_ball(Ball(c, r), rng, n)
    se = (2 * r) / math.sqrt(12) / math.sqrt(n)
    assert np.all(np.abs(pts.mean(axis=0) - c) <= 4 * se)
    # a uniform marginal puts a quarter of its mass in each quarter of the side
    for j in range(2):
        counts = np.histogram(pts[:, j], bins=4, range=(c[j] - r, c[j] + r))[0]
        assert np.all(np.abs(counts / n - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / n))


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_l2_uniform_inner_ball_fraction(dim):
    # uniform on the ball <=> fraction inside radius r/2 is (1/2)^dim
    rng = np.random.default_rng(4 + dim)
    n = 100_000
    pts = EuclideanSpace(dim).sample_ball(Ball(np.zeros(dim), 2.0), rng, n)
    frac = np.mean(np.linalg.norm(pts, axis=1) <= 1.0)
    p = 0.5 ** dim
    assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_finite_sampling_weight_proportional():
    sp = line_space(5, weights=[1, 2, 3, 4, 5])
    rng = np.random.default_rng(5)
    n = 100_000
    draws = sp.sample_ball(Ball(2, 10.0), rng, n)
    freq = np.bincount(draws, minlength=5) / n
    p = np.arange(1, 6) / 15
    assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n))


def test_finite_empty_ball_raises():
    with pytest.raises(EmptySupportError):
        line_space(3).sample_ball(Ball(1, 0.0, Boundary.OPEN), np.random.default_rng(0))


# finite-space construction and file format

def test_finite_rejects_triangle_violation():
    D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0.0]])
    with pytest.raises(InvalidSpaceError):
        FiniteSpace(D)


@pytest.mark.parametrize("D,w", [
    (np.array([[0, 1], [2, 0.0]]), None),
    (np.array([[1, 1], [1, 0.0]]), None),
    (np.array([[0, 0], [0, 0.0]]), None),
    (np.array([[0, 1], [1, 0.0]]), [1.0, 0.0]),
])
def test_finite_rejects_bad_inputs(D, w):
    with pytest.raises(InvalidSpaceError):
        FiniteSpace(D, w)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=2, max_size=8,
                unique=True))
def test_constructor_accepts_every_true_metric(coords):
    sp = FiniteSpace.from_coordinates(np.array(coords, dtype=float), norm="Linf")
    D = sp.D
    assert np.all(D[:, :, None] <= D[:, None, :] + D.T[None, :, :] + 1e-9)


def test_finite_file_round_trip(tmp_path):
    sp = FiniteSpace.from_coordinates(np.array([[0.0], [0.3], [1.1]]), [1.0, 2.5, 0.25])
    path = tmp_path / "space.txt"
    path.write_text("# three points\n" + sp.to_text())
    back = FiniteSpace.from_file(path)
    assert np.array_equal(back.D, sp.D) and np.array_equal(back.weights, sp.weights)


def test_finite_file_malformed():
    with pytest.raises(ParseError):
        FiniteSpace.from_lines(["2", "1", "1", "0 1"])
    with pytest.raises(ParseError):
        FiniteSpace.from_lines(["x"])


# doubling

def test_doubling_bound_euclidean_exact():
    assert doubling_ratio_bound(DoublingParameters.euclidean(3), 2.0) == 8.0


def test_doubling_bound_general_form():
    p = DoublingParameters(d=2, c1=2, c2=1)
    assert doubling_ratio_bound(p, 4.0, simplified=False) == 64.0


def test_doubling_bound_near_one():
    p = DoublingParameters(d=5)
    assert abs(doubling_ratio_bound(p, 1 + 1e-12) - 1.0) < 1e-10


def test_doubling_bound_rejects_alpha_le_one():
    with pytest.raises(InvalidArgumentError):
        doubling_ratio_bound(DoublingParameters(d=1), 1.0)
    with pytest.raises(InvalidArgumentError):
        doubling_ratio_bound(DoublingParameters(d=1, alpha0=3.0), 2.0)


def test_zeta_from_constants():
    assert zeta_from_constants(1.0, 1.0, 2.0) == 1.0
    assert math.isclose(zeta_from_constants(4.0, 2.0, 2.0), 2.0 * (1 + 2.0))


@pytest.mark.parametrize("space,r,alpha,expected", [
    (EuclideanSpace(2, "Linf"), 1.0, 3.0, 9.0),
    (EuclideanSpace(1), 2.0, 2.0, 2.0),
    (EuclideanSpace(3), 0.5, 1.5, 3.375),
])
def test_verify_doubling_examples(space, r, alpha, expected):
    rep = verify_doubling_euclidean(space, r, alpha, trials=3)
    assert rep.passed
    assert all(abs(t.ratio - expected) <= 1e-9 * expected for t in rep.trials)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("norm", ["L2", "Linf"])
@pytest.mark.parametrize("alpha", [1.1, 2.0, 5.0])
def test_euclidean_measure_ratio_exact(dim, norm, alpha):
    assert verify_doubling_euclidean(EuclideanSpace(dim, norm), 0.75, alpha).passed


def test_empirical_doubling_constant_brute_force():
    sp = FiniteSpace.from_coordinates(np.array([[0.0], [1.0], [3.0], [7.0]]), [1, 2, 1, 3])
    # the ratio is piecewise constant in r on pieces at least 0.5 wide, so a
    # fine grid hits every piece
    grid = np.linspace(0.001, 10, 20000)
    ratios = [((sp.D <= 2 * r) @ sp.weights / ((sp.D <= r) @ sp.weights)).max() for r in grid]
    assert empirical_doubling_constant(sp) == max(ratios)
