"""Tolerant perturb-and-smooth learning.

Training perturbs every sample point once inside its reference ball of
radius ``(1 + gamma) r``, fits the plain realizable learner a single time on
the perturbed sample, and wraps the result in a majority vote over balls of
radius ``gamma r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidArgumentError, UnsupportedModeError
from .hypotheses import (LEFT_IS_ONE, Hypothesis, HypothesisFamily, LabeledSample,
                         Perturbation, Threshold, erm_realizable, parse_hypothesis)
from .metric import Ball, DoublingParameters, EuclideanSpace, FiniteSpace
from .robust_loss import Piecewise1D
from .rng import key64, substream

# float votes this close to one half are rechecked in exact arithmetic
NEAR_TIE = 1e-9


@dataclass(frozen=True)
class TpasConfig:
    r: float
    gamma: float
    vote_budget: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.r > 0:
            raise InvalidArgumentError(f"radius must be positive, got {self.r}")
        if not self.gamma > 0:
            raise InvalidArgumentError(f"tolerance gamma must be positive, got {self.gamma}")
        if self.vote_budget < 1:
            raise InvalidArgumentError("vote budget must be positive")

    @property
    def v_radius(self) -> float:
        return (1.0 + self.gamma) * self.r

    @property
    def w_radius(self) -> float:
        return self.gamma * self.r


class SmoothedClassifier(Hypothesis):
    """Majority label of ``base`` over the closed ball of radius ``radius``.

    ``h(x) = 1{E_{x' ~ B(x)} base(x') >= 1/2}``; a vote of exactly one half
    gives label 1. On finite spaces the vote is computed exactly. On
    Euclidean spaces predictions use ``vote_budget`` oracle draws from a
    substream keyed by ``(seed, x)``, so a prediction is a pure function of the
    classifier and the query point. In one dimension the exact vote fraction
    is also available and is what certified robust losses use.

    ``strict=True`` switches to the rule ``> 1/2``; it exists only so that the
    verification suite can inject that mutation.
    """

    def __init__(self, base: Hypothesis, radius: float, space, vote_budget: int = 1000,
                 seed: int = 0, strict: bool = False):
        if not radius > 0:
            raise InvalidArgumentError("smoothing radius must be positive")
        self.base = base
        self.radius = float(radius)
        self.space = space
        self.vote_budget = int(vote_budget)
        self.seed = int(seed)
        self.strict = strict
        self.perturbed_sample: Optional[LabeledSample] = None
        self._pw = None

    def __repr__(self):
        return (f"SmoothedClassifier(base={self.base!r}, radius={self.radius}, "
                f"vote_budget={self.vote_budget}, seed={self.seed})")

    @property
    def dim(self):
        return None if isinstance(self.space, FiniteSpace) else self.space.dim

    @property
    def exact_flag(self) -> bool:
        return isinstance(self.space, FiniteSpace)

    def _label(self, frac):
        frac = np.asarray(frac)
        return (frac > 0.5 if self.strict else frac >= 0.5).astype(np.uint8)

    def _piecewise(self) -> Piecewise1D:
        if self._pw is None:
            if not (isinstance(self.space, EuclideanSpace) and self.space.dim == 1):
                raise UnsupportedModeError("exact votes need a finite or 1-D Euclidean space")
            self._pw = Piecewise1D(self.base)
        return self._pw

    def vote_fraction_exact(self, X) -> np.ndarray:
        """Exact base-label average over the smoothing ball, for each point."""
        if isinstance(self.space, FiniteSpace):
            idx = self.space.points(X)
            member = self.space.D[idx] <= self.radius
            w = self.space.weights
            ones = member @ (w * self.base(np.arange(self.space.n)))
            return ones / (member @ w)
        z = np.asarray(X, dtype=float).reshape(-1)
        pw = self._piecewise()
        return pw.ones_length(z - self.radius, z + self.radius) / (2 * self.radius)

    def vote_fraction_mc(self, x, rng: Optional[np.random.Generator] = None) -> float:
        x = self.space.point(x)
        if rng is None:
            rng = substream(self.seed, "smooth", key64(np.asarray(x, dtype=float)))
        draws = self.space.sample_ball(Ball(x, self.radius), rng, self.vote_budget)
        return float(np.mean(self.base(draws)))

    def predict_one(self, x, rng: Optional[np.random.Generator] = None) -> int:
        if isinstance(self.space, FiniteSpace):
            return int(self._label(self.vote_fraction_exact([x]))[0])
        return int(self._label(self.vote_fraction_mc(x, rng)))

    def vote_fraction_rational(self, z) -> Fraction:
        """Exact 1-D vote fraction at ``z`` in rational arithmetic."""
        z, rho = Fraction(z), Fraction(self.radius)
        return self._piecewise().ones_length_exact(z - rho, z + rho) / (2 * rho)

    def predict_exact(self, X) -> np.ndarray:
        frac = self.vote_fraction_exact(X)
        labels = self._label(frac)
        if isinstance(self.space, FiniteSpace):
            return labels
        # votes within rounding distance of one half are settled exactly
        z = np.asarray(X, dtype=float).reshape(-1)
        for i in np.flatnonzero(np.abs(frac - 0.5) <= NEAR_TIE):
            labels[i] = self._label(self.vote_fraction_rational(z[i]))
        return labels

    def __call__(self, X):
        if isinstance(self.space, FiniteSpace):
            return self.predict_exact(X)
        pts = self.space.points(X)
        return np.array([self.predict_one(p) for p in pts], dtype=np.uint8)

    def exact_point_loss(self, x, y: int, pert: Perturbation, space=None) -> int:
        """Certified adversarial 0/1 loss of the smoothed classifier at ``(x, y)``."""
        y = int(y)
        if isinstance(self.space, FiniteSpace):
            if pert.radius == 0:
                members = np.array([self.space.point(x)])
            else:
                members = self.space.members(Ball(x, pert.radius, pert.boundary))
            return int(np.any(self.predict_exact(members) != y))
        self._piecewise()
        xv = float(np.asarray(x, dtype=float).reshape(-1)[0])
        if pert.radius == 0:
            return int(self.predict_exact([xv])[0] != y)
        return _smoothed_loss_1d(self, xv, y, pert)

    def to_text(self) -> str:
        return f"{self.base.to_text()}\nsmooth {self.radius!r} {self.vote_budget} {self.seed}"

    @classmethod
    def from_text(cls, text: str, space) -> "SmoothedClassifier":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        tok = lines[-1].split()
        if tok[0] != "smooth" or len(tok) != 4:
            from .errors import ParseError
            raise ParseError(f"expected 'smooth <radius> <budget> <seed>', got {lines[-1]!r}")
        return cls(parse_hypothesis(lines[0]), float(tok[1]), space, int(tok[2]), int(tok[3]))


def _smoothed_loss_1d(c: SmoothedClassifier, x: float, y: int, pert: Perturbation) -> int:
    # The vote fraction f is continuous and piecewise linear with knots at
    # base breakpoints +- rho, so extremes over a ball sit on knots or ends.
    pw, rho = c._piecewise(), c.radius
    lo, hi = x - pert.radius, x + pert.radius
    knots = np.concatenate([pw.bp - rho, pw.bp + rho])
    near_end = np.any(np.abs(knots - lo) <= NEAR_TIE) or np.any(np.abs(knots - hi) <= NEAR_TIE)
    knots = knots[(knots > lo) & (knots < hi)]
    crit = np.unique(np.concatenate([[lo], knots, [hi]]))
    f = pw.ones_length(crit - rho, crit + rho) / (2 * rho)
    if near_end or np.any(np.abs(f - 0.5) <= NEAR_TIE):
        return _smoothed_loss_1d_rational(c, x, y, pert)
    return _bad_meets_ball((0.5 - f) if y == 1 else (f - 0.5), y, c.strict, pert.open)


def _smoothed_loss_1d_rational(c, x, y, pert) -> int:
    rho, fx, fr = Fraction(c.radius), Fraction(x), Fraction(pert.radius)
    lo, hi = fx - fr, fx + fr
    knots = {Fraction(b) + s * rho for b in c._piecewise().bp for s in (-1, 1)}
    crit = sorted({lo, hi} | {k for k in knots if lo < k < hi})
    f = [c.vote_fraction_rational(z) for z in crit]
    half = Fraction(1, 2)
    g = np.array([(half - v) if y == 1 else (v - half) for v in f], dtype=object)
    return _bad_meets_ball(g, y, c.strict, pert.open)


def _bad_meets_ball(g, y: int, strict: bool, open_ball: bool) -> int:
    """Whether points with the wrong smoothed label meet the ball.

    ``g`` samples a continuous piecewise-linear function at the ball ends and
    its knots; a point is mislabeled where ``g >= 0`` (or ``g > 0``).
    """
    bad_closed_set = (y == 0) != strict
    if not open_ball:
        return int(np.any(g >= 0) if bad_closed_set else np.any(g > 0))
    if not bad_closed_set:
        # an open bad set meets the open ball iff it meets its closure
        return int(np.any(g > 0))
    if np.any(g[1:-1] >= 0):
        return 1
    a, b = g[:-1], g[1:]
    return int(np.any(np.maximum(a, b) > 0) or np.any((a == 0) & (b == 0)))


def smoothed_predict(c: SmoothedClassifier, x, rng: Optional[np.random.Generator] = None) -> int:
    return c.predict_one(x, rng)


def smoothed_threshold(h: Threshold, rho: float) -> Threshold:
    """Closed form of the smoothed version of a left-is-one threshold.

    The vote fraction at z is ``clip(theta - z + rho, 0, 2 rho) / (2 rho)``,
    which is >= 1/2 exactly when ``z <= theta``: smoothing leaves it unchanged.
    """
    if h.orientation != LEFT_IS_ONE:
        raise InvalidArgumentError("closed form implemented for left-is-one thresholds")
    return Threshold(h.theta, LEFT_IS_ONE)


# ---------------------------------------------------------------------------
# training


class CountingOracle:
    """Sampling oracle wrapper that counts queries."""

    def __init__(self, space):
        self.space = space
        self.calls = 0
        self.radii = []

    def __call__(self, ball: Ball, rng):
        self.calls += 1
        self.radii.append(ball.radius)
        return self.space.sample_ball(ball, rng)


class CountingLearner:
    """Learner wrapper that counts invocations."""

    def __init__(self, learner: Callable = erm_realizable):
        self.learner = learner
        self.calls = 0

    def __call__(self, family, s):
        self.calls += 1
        return self.learner(family, s)


def perturb_sample(s: LabeledSample, radius: float, space, rng: np.random.Generator,
                   oracle: Optional[Callable] = None) -> LabeledSample:
    """Replace each point by one oracle draw from its ball of the given radius."""
    oracle = oracle if oracle is not None else space.sample_ball
    pts = [oracle(Ball(s.point(i), radius), rng) for i in range(len(s))]
    if s.indices:
        return s.with_points(np.array(pts, dtype=np.int64))
    return s.with_points(np.array(pts, dtype=float).reshape(len(s), -1))


def tpas_train(family: HypothesisFamily, s: LabeledSample, cfg: TpasConfig, space,
               learner: Optional[Callable] = None, oracle: Optional[Callable] = None,
               rng: Optional[np.random.Generator] = None) -> SmoothedClassifier:
    """Train a tolerant perturb-and-smooth classifier.

    Makes exactly ``len(s)`` oracle queries at radius ``(1 + gamma) r`` and one
    learner call. A perturbed sample that the family cannot fit raises
    ``NonRealizableError``; retrying is left to the caller.
    """
    if len(s) == 0:
        raise InvalidArgumentError("TPaS needs a non-empty sample")
    learner = learner if learner is not None else erm_realizable
    rng = rng if rng is not None else substream(cfg.seed, "tpas-perturb")
    perturbed = perturb_sample(s, cfg.v_radius, space, rng, oracle)
    base = learner(family, perturbed)
    clf = SmoothedClassifier(base, cfg.w_radius, space, cfg.vote_budget, cfg.seed)
    clf.perturbed_sample = perturbed
    return clf


def perturb_only_train(family: HypothesisFamily, s: LabeledSample, radius: float, space,
                       rng: np.random.Generator, learner: Optional[Callable] = None) -> Hypothesis:
    """Non-tolerant baseline: perturb at ``radius`` and return the raw ERM output."""
    learner = learner if learner is not None else erm_realizable
    return learner(family, perturb_sample(s, radius, space, rng))


# ---------------------------------------------------------------------------
# analysis quantities


def _zeta_d(params: Union[DoublingParameters, float]) -> float:
    return params.zeta_d if isinstance(params, DoublingParameters) else float(params)


def lambda_threshold(gamma: float, params: Union[DoublingParameters, float]) -> float:
    """(1/3) ((1 + gamma) / gamma)^(-zeta d)."""
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be positive, got {gamma}")
    return (1.0 / 3.0) * ((1.0 + gamma) / gamma) ** (-_zeta_d(params))


def tpas_sample_bound(epsilon: float, delta: float, gamma: float,
                      params: Union[DoublingParameters, float], vc: int) -> float:
    """Scaling law ((vc + ln 1/delta) / epsilon) (1 + 1/gamma)^(zeta d), unit constant."""
    if not (0 < epsilon < 1 and 0 < delta < 1 and gamma > 0 and vc > 0):
        raise InvalidArgumentError("need epsilon, delta in (0, 1), gamma > 0, vc > 0")
    return (vc + math.log(1.0 / delta)) / epsilon * (1.0 + 1.0 / gamma) ** _zeta_d(params)


@dataclass
class ErrorMassQuantities:
    Sigma: float
    sigma_max: float
    lam: float
    ratio: float  # worst mu(B_{(1+gamma) r}(x)) / mu(B_{gamma r}(z)) used for lam
    premise: bool  # Sigma <= lam
    implication_holds: bool  # premise implies sigma_max <= 1/3
    certified: bool


def _finish(Sigma, sigma_max, lam, ratio, certified) -> ErrorMassQuantities:
    premise = Sigma <= lam
    holds = (not premise) or sigma_max <= Fraction(1, 3)
    return ErrorMassQuantities(float(Sigma), float(sigma_max), float(lam), float(ratio),
                           bool(premise), bool(holds), certified)


def error_mass_quantities(g: Hypothesis, x, y: int, r: float, gamma: float, space,
                      grid_resolution: int = 41) -> ErrorMassQuantities:
    """Error mass of ``g`` around ``x`` at the reference and smoothing radii.

    ``Sigma`` is the fraction of the ball ``B_{(1+gamma) r}(x)`` where
    ``g != y``; ``sigma_max`` the largest such fraction over balls
    ``B_{gamma r}(z)`` with ``z`` in ``B_r(x)``. Finite spaces and 1-D Euclidean
    spaces are handled exactly in rational arithmetic, with ``lam`` taken from
    the exact worst-case measure ratio; higher-dimensional spaces fall back to
    grid probing and are not certified.
    """
    if not (r > 0 and gamma > 0):
        raise InvalidArgumentError("need r > 0 and gamma > 0")
    y = int(y)
    fr, fg = Fraction(r), Fraction(gamma)
    V, w = fr * (1 + fg), fr * fg
    third = Fraction(1, 3)
    if isinstance(space, FiniteSpace):
        xi = space.point(x)
        W = [Fraction(float(v)) for v in space.weights]
        err = g(np.arange(space.n)) != y
        D = space.D
        inV = np.flatnonzero(D[xi] <= float(V))
        muV = sum(W[j] for j in inV)
        Sigma = sum(W[j] for j in inV if err[j]) / muV
        sigma_max, ratio = Fraction(0), Fraction(0)
        for z in np.flatnonzero(D[xi] <= r):
            inw = np.flatnonzero(D[z] <= float(w))
            muw = sum(W[j] for j in inw)
            sigma_max = max(sigma_max, sum(W[j] for j in inw if err[j]) / muw)
            ratio = max(ratio, muV / muw)
        return _finish(Sigma, sigma_max, third / ratio, ratio, True)
    if isinstance(space, EuclideanSpace) and space.dim == 1:
        pw = Piecewise1D(g)
        fx = Fraction(float(np.asarray(x, dtype=float).reshape(-1)[0]))

        def err_len(lo, hi):
            ones = pw.ones_length_exact(lo, hi)
            return ones if y == 0 else (hi - lo) - ones

        Sigma = err_len(fx - V, fx + V) / (2 * V)
        # sigma(z) is piecewise linear in z with knots at breakpoints +- w
        crit = {fx - fr, fx + fr}
        for b in pw.bp:
            for k in (Fraction(b) - w, Fraction(b) + w):
                if fx - fr < k < fx + fr:
                    crit.add(k)
        sigma_max = max(err_len(z - w, z + w) / (2 * w) for z in crit)
        ratio = (1 + fg) / fg
        return _finish(Sigma, sigma_max, third / ratio, ratio, True)
    if isinstance(space, EuclideanSpace):
        c = space.point(x)
        lam = lambda_threshold(gamma, space.dim)

        def frac_err(center, radius):
            pts = _ball_grid(space, center, radius, grid_resolution)
            return float(np.mean(g(pts) != y))

        Sigma = frac_err(c, float(V))
        probes = _ball_grid(space, c, r, max(3, grid_resolution // 4))
        sigma_max = max(frac_err(z, float(w)) for z in probes)
        ratio = ((1 + gamma) / gamma) ** space.dim
        premise = Sigma <= lam
        return ErrorMassQuantities(Sigma, sigma_max, lam, ratio, premise,
                               (not premise) or sigma_max <= 1 / 3, False)
    raise UnsupportedModeError(f"no error-mass quantities for {space!r}")


def _ball_grid(space: EuclideanSpace, center, radius, resolution) -> np.ndarray:
    axes = [np.linspace(ci - radius, ci + radius, resolution) for ci in center]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, space.dim)
    return grid[space.contains(Ball(center, radius), grid)]
