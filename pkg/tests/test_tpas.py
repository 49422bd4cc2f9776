import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tolerant_robust.errors import InvalidArgumentError, NonRealizableError, ParseError
from tolerant_robust.hypotheses import (Constant, Interval, LabeledSample, Perturbation,
                                        TableHypothesis, Threshold, Thresholds)
from tolerant_robust.metric import Boundary, DoublingParameters, EuclideanSpace, FiniteSpace
from tolerant_robust.robust_loss import (DiscreteMixture, Exact, adversarial_point_loss,
                                         expected_adversarial_loss)
from tolerant_robust.rng import substream
from tolerant_robust.tpas import (CountingLearner, CountingOracle, SmoothedClassifier, TpasConfig,
                                  lambda_threshold, error_mass_quantities, perturb_only_train,
                                  smoothed_predict, smoothed_threshold, tpas_sample_bound,
                                  tpas_train)

R1 = EuclideanSpace(1)
TWO_POINT = DiscreteMixture([(-1.0, 1, 0.5), (1.0, 0, 0.5)])


def line3():
    return FiniteSpace.from_coordinates(np.arange(3, dtype=float)[:, None])


# config

@pytest.mark.parametrize("r,gamma,budget", [(0, 0.1, 10), (1, 0, 10), (1, -0.5, 10), (1, 0.1, 0)])
def test_config_rejects_bad_values(r, gamma, budget):
    with pytest.raises(InvalidArgumentError):
        TpasConfig(r, gamma, budget)


def test_config_radii():
    cfg = TpasConfig(2.0, 0.25)
    assert cfg.v_radius == 2.5 and cfg.w_radius == 0.5


# smoothed prediction

def test_constant_base_predicts_one_everywhere():
    c = SmoothedClassifier(Constant(1), 0.3, R1, vote_budget=50)
    assert all(smoothed_predict(c, x) == 1 for x in np.linspace(-5, 5, 11))


def test_finite_tie_maps_to_one():
    c = SmoothedClassifier(TableHypothesis((1, 0, 0)), 1.0, line3())
    assert c.vote_fraction_exact([0])[0] == 0.5
    assert smoothed_predict(c, 0) == 1
    assert c.exact_flag
    strict = SmoothedClassifier(TableHypothesis((1, 0, 0)), 1.0, line3(), strict=True)
    assert smoothed_predict(strict, 0) == 0


def test_vote_ball_entirely_negative():
    c = SmoothedClassifier(Threshold(0.0), 0.09, R1)
    assert smoothed_predict(c, 0.5) == 0
    assert c.vote_fraction_exact([0.5])[0] == 0.0


def test_finite_vote_matches_enumeration():
    rng = np.random.default_rng(0)
    sp = FiniteSpace.from_coordinates(rng.normal(size=(9, 2)), rng.uniform(0.5, 2, size=9))
    base = TableHypothesis(tuple(int(v) for v in rng.integers(0, 2, 9)))
    c = SmoothedClassifier(base, 0.8, sp)
    for x in range(9):
        member = [j for j in range(9) if sp.D[x, j] <= 0.8]
        vote = sum(sp.weights[j] * base.table[j] for j in member) / sum(sp.weights[j] for j in member)
        assert math.isclose(c.vote_fraction_exact([x])[0], vote)
        assert c(np.array([x]))[0] == int(vote >= 0.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 1.5), st.floats(-3, 3))
def test_exact_vote_matches_quadrature(theta, rho, z):
    c = SmoothedClassifier(Interval(theta, theta + 0.7), rho, R1)
    n = 20000
    mids = z - rho + (np.arange(n) + 0.5) * 2 * rho / n
    approx = float(np.mean(c.base(mids)))
    assert abs(c.vote_fraction_exact([z])[0] - approx) <= 4.0 / n


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(0.01, 1))
def test_smoothed_threshold_closed_form_matches_generic_vote(theta, rho):
    c = SmoothedClassifier(Threshold(theta), rho, R1)
    closed = smoothed_threshold(Threshold(theta), rho)
    z = np.concatenate([np.linspace(theta - 3 * rho, theta + 3 * rho, 301),
                        [theta, np.nextafter(theta, np.inf), np.nextafter(theta, -np.inf)]])
    assert np.array_equal(c.predict_exact(z), closed(z))


def test_vote_stability_hoeffding():
    # exact vote at 0.4 is (0 - 0.4 + 1) / 2 = 0.3, margin 0.2 from one half
    c = SmoothedClassifier(Threshold(0.0), 1.0, R1, vote_budget=1000)
    mu0, n, trials = 0.2, 1000, 1000
    assert math.isclose(c.vote_fraction_exact([0.4])[0], 0.5 - mu0)
    exact = int(c.predict_exact([0.4])[0])
    flips = sum(c.predict_one(0.4, substream(7, "hoeffding", t)) != exact for t in range(trials))
    # the bound exp(-80) makes even a single flip in 1000 trials implausible
    assert math.exp(-2 * n * mu0 ** 2) * trials < 1e-30
    assert flips == 0


def test_mc_prediction_is_pure():
    c = SmoothedClassifier(Interval(-0.2, 0.3), 0.5, R1, vote_budget=200, seed=3)
    first = c(np.linspace(-1, 1, 21))
    assert np.array_equal(first, c(np.linspace(-1, 1, 21)))


def test_serialization_round_trip():
    c = SmoothedClassifier(Interval(-0.25, 0.75, 0), 0.1, R1, vote_budget=77, seed=9)
    back = SmoothedClassifier.from_text(c.to_text(), R1)
    assert back.base == c.base and (back.radius, back.vote_budget, back.seed) == (0.1, 77, 9)
    assert c.to_text().splitlines()[-1] == "smooth 0.1 77 9"
    with pytest.raises(ParseError):
        SmoothedClassifier.from_text("threshold 0 L\nsmoothed 0.1 5 1", R1)


# certified robust loss of the smoothed classifier

def dense_smoothed_fail(c, x, y, r, open_ball):
    knots = np.concatenate([[b - c.radius, b + c.radius, b] for b in c.base.breakpoints()])
    pts = np.concatenate([np.linspace(x - r, x + r, 2001), knots,
                          np.nextafter(knots, np.inf), np.nextafter(knots, -np.inf)])
    inside = (np.abs(pts - x) < r) if open_ball else (np.abs(pts - x) <= r)
    return int(np.any(c.predict_exact(pts[inside]) != y))


bases = st.one_of(
    st.builds(Threshold, st.integers(-8, 8).map(lambda v: v / 8)),
    st.tuples(st.integers(-8, 8), st.integers(1, 8)).map(lambda t: Interval(t[0] / 8, (t[0] + t[1]) / 8)),
)


@settings(max_examples=250, deadline=None)
@given(bases, st.sampled_from([0.125, 0.25, 0.5]), st.integers(-16, 16).map(lambda v: v / 8),
       st.integers(0, 1), st.sampled_from([0.125, 0.375, 0.5, 1.0]), st.booleans())
def test_smoothed_exact_loss_matches_dense_oracle(base, rho, x, y, r, open_ball):
    c = SmoothedClassifier(base, rho, R1)
    pert = Perturbation(r, Boundary.OPEN if open_ball else Boundary.CLOSED)
    rep = adversarial_point_loss(c, x, y, pert, Exact(), R1)
    assert rep.certified
    assert rep.value == dense_smoothed_fail(c, x, y, r, open_ball)


@settings(max_examples=200, deadline=None)
@given(st.integers(-40, 40).filter(lambda v: abs(v) != 10).map(lambda v: v / 100))
def test_counterexample_success_iff_threshold_in_window(theta):
    # the window ends are skipped: float(0.1) and 1 - float(0.9) differ in the last bit
    c = SmoothedClassifier(Threshold(theta), 0.09, R1)
    loss = expected_adversarial_loss(c, TWO_POINT, Perturbation(0.9), Exact(), R1).value
    assert (loss == 0.0) == (-0.1 <= theta < 0.1)


# training

def evenly_split(m):
    return LabeledSample.from_pairs([(-1.0, 1) if i % 2 == 0 else (1.0, 0) for i in range(m)])


def test_counterexample_training_certified_zero():
    s = evenly_split(200)
    oracle, learner = CountingOracle(R1), CountingLearner()
    c = tpas_train(Thresholds(), s, TpasConfig(0.9, 0.1, seed=1), R1, learner=learner, oracle=oracle)
    rep = expected_adversarial_loss(c, TWO_POINT, Perturbation(0.9), Exact(), R1)
    assert rep.value == 0.0 and rep.certified
    assert oracle.calls == 200 and learner.calls == 1
    assert all(math.isclose(r, 0.99) for r in oracle.radii)


@pytest.mark.parametrize("m", [1, 57, 200])
def test_oracle_and_learner_counts(m):
    oracle, learner = CountingOracle(R1), CountingLearner()
    tpas_train(Thresholds(), evenly_split(m), TpasConfig(0.9, 0.1), R1, learner=learner, oracle=oracle)
    assert oracle.calls == m and learner.calls == 1


def test_single_point_prediction_region():
    # the learner places the boundary on the perturbed point, which smoothing keeps
    s = LabeledSample.from_pairs([(0.0, 1)])
    for seed in range(20):
        c = tpas_train(Thresholds(), s, TpasConfig(1.0, 0.5, seed=seed), R1)
        xp = float(c.perturbed_sample.points[0, 0])
        assert abs(xp) <= 1.5
        z = np.array([xp - 0.3, xp, np.nextafter(xp, np.inf), xp + 0.3])
        assert list(c.predict_exact(z)) == [1, 1, 0, 0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.integers(0, 2 ** 32))
def test_perturbed_sample_contained_and_fit(xs, seed):
    s = LabeledSample.from_pairs([(x, 1) for x in xs])
    cfg = TpasConfig(0.4, 0.3, seed=seed)
    c = tpas_train(Thresholds(), s, cfg, R1)
    moved = c.perturbed_sample.points.reshape(-1)
    assert np.all(np.abs(moved - np.array(xs)) <= cfg.v_radius)
    assert np.array_equal(c.base(moved), c.perturbed_sample.labels)


def test_finite_space_training_contained():
    sp = FiniteSpace.from_coordinates(np.arange(10, dtype=float)[:, None])
    s = LabeledSample([0, 1, 7, 8], [1, 1, 0, 0], indices=True)
    from tolerant_robust.hypotheses import FiniteTable
    fam = FiniteTable(np.array([[1] * k + [0] * (10 - k) for k in range(11)]))
    c = tpas_train(fam, s, TpasConfig(1.0, 1.0), sp)
    moved = c.perturbed_sample.points
    assert np.all(sp.D[s.points, moved] <= 2.0)
    assert np.array_equal(c.base(moved), s.labels)


def test_non_realizable_perturbation_surfaces():
    s = LabeledSample.from_pairs([(0.0, 1), (0.1, 0)])

    def pushing_oracle(ball, rng):
        # send the positive point right and the negative one left
        return np.array([ball.center[0] + (ball.radius if ball.center[0] == 0 else -ball.radius)])

    with pytest.raises(NonRealizableError):
        tpas_train(Thresholds(), s, TpasConfig(1.0, 1.0), R1, oracle=pushing_oracle)


def test_empty_sample_rejected():
    with pytest.raises(InvalidArgumentError):
        tpas_train(Thresholds(), LabeledSample.from_pairs([]), TpasConfig(1, 1), R1)


def test_perturb_only_counterexample_fails_at_open_radius():
    s = evenly_split(200)
    h = perturb_only_train(Thresholds(), s, 1.0, R1, np.random.default_rng(4))
    rep = expected_adversarial_loss(h, TWO_POINT, Perturbation(1.0, Boundary.OPEN), Exact(), R1)
    assert rep.value >= 0.5


# analysis quantities

def test_lambda_examples():
    assert lambda_threshold(1.0, 1) == pytest.approx(1 / 6, abs=1e-15)
    assert lambda_threshold(0.37, 0) == pytest.approx(1 / 3, abs=1e-15)
    assert lambda_threshold(0.1, 2) == pytest.approx(1 / 363, rel=1e-12)
    assert lambda_threshold(0.1, DoublingParameters.euclidean(2)) == pytest.approx(1 / 363, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        lambda_threshold(0.0, 1)


@given(st.floats(1e-3, 1e3), st.floats(0, 6))
def test_lambda_range(gamma, zd):
    lam = lambda_threshold(gamma, zd)
    assert 0 < lam <= 1 / 3


def test_bound_ratio_and_scaling():
    for zd in (1, 2, 5):
        ratio = tpas_sample_bound(0.1, 0.05, 1.0, zd, 3) / tpas_sample_bound(0.1, 0.05, 2.0, zd, 3)
        assert math.isclose(ratio, (4 / 3) ** zd)
    assert math.isclose(tpas_sample_bound(0.1, 0.05, 0.2, 0, 2), (2 + math.log(20)) / 0.1)
    assert math.isclose(tpas_sample_bound(0.05, 0.05, 0.2, 1, 2), 2 * tpas_sample_bound(0.1, 0.05, 0.2, 1, 2))
    with pytest.raises(InvalidArgumentError):
        tpas_sample_bound(1.0, 0.05, 0.2, 1, 2)


def test_error_mass_no_error_region():
    q = error_mass_quantities(Constant(1), 0.0, 1, 1.0, 0.5, R1)
    assert (q.Sigma, q.sigma_max) == (0.0, 0.0) and q.implication_holds and q.certified


def test_error_mass_sigma_is_length_ratio():
    # threshold at 0.5 with y = 1: errors on (0.5, 1.5] inside [-1.5, 1.5]
    q = error_mass_quantities(Threshold(0.5), 0.0, 1, 1.0, 0.5, R1)
    assert q.Sigma == float(Fraction(1, 3))
    assert q.ratio == 3.0 and q.lam == pytest.approx(1 / 9)


@pytest.mark.parametrize("L", [0.125, 0.25, 0.5])
def test_error_mass_concentrated_error_mass(L):
    # error interval of length L centred at 0.5, inside one W-ball of radius 0.25
    r, gamma = 1.0, 0.25
    g = Interval(0.5 - L / 2, 0.5 + L / 2, 1)
    q = error_mass_quantities(g, 0.0, 0, r, gamma, R1)
    assert q.Sigma == float(Fraction(L) / (2 * Fraction(r) * (1 + Fraction(gamma))))
    assert q.sigma_max == min(1.0, L / (2 * r * gamma))
    assert q.sigma_max == pytest.approx(q.Sigma * (1 + gamma) / gamma)


def test_error_mass_finite_ratio_is_exact():
    sp = line3()
    q = error_mass_quantities(TableHypothesis((1, 1, 1)), 1, 1, 1.0, 1.0, sp)
    # V-ball of radius 2 holds all 3 points; W-balls of radius 1 hold 2 or 3
    assert q.ratio == 1.5 and q.lam == pytest.approx(2 / 9) and q.certified


def test_error_mass_grid_in_two_dimensions_is_uncertified():
    q = error_mass_quantities(Constant(0), (0.0, 0.0), 1, 1.0, 1.0, EuclideanSpace(2), grid_resolution=9)
    assert q.Sigma == 1.0 and q.sigma_max == 1.0 and not q.certified
