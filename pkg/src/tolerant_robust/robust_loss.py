"""Binary and adversarial losses.

Three evaluation modes are available for the inner maximum over a
perturbation ball:

``Exact``
    Certified. Supported for piecewise-constant 1-D hypotheses (thresholds,
    intervals, majority votes of those), axis rectangles in any dimension,
    any hypothesis on a finite space (exhaustive), and smoothed classifiers
    that implement ``exact_point_loss``.
``Grid(resolution)``
    Maximum over a uniform grid of the ball's bounding box, filtered by
    membership, plus the centre. Exhaustive (hence certified) on finite spaces.
``MonteCarlo(draws)``
    Maximum over oracle draws plus the centre. Always a lower bound, never
    certified.

A radius of 0 always reduces to the binary loss, for open balls as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgumentError, UnsupportedModeError
from .hypotheses import AxisRectangle, Constant, Hypothesis, LabeledSample, Perturbation, predict
from .metric import Ball, EuclideanSpace, FiniteSpace
from .rng import child, substream


@dataclass(frozen=True)
class Exact:
    def __str__(self):
        return "exact"


@dataclass(frozen=True)
class Grid:
    resolution: int = 201

    def __post_init__(self):
        if self.resolution < 1:
            raise InvalidArgumentError("grid resolution must be positive")

    def __str__(self):
        return f"grid({self.resolution})"


@dataclass(frozen=True)
class MonteCarlo:
    draws: int = 1000

    def __post_init__(self):
        if self.draws < 1:
            raise InvalidArgumentError("draw count must be positive")

    def __str__(self):
        return f"mc({self.draws})"


EvaluationMode = Union[Exact, Grid, MonteCarlo]


def parse_mode(text: str) -> EvaluationMode:
    text = text.strip().lower()
    if text == "exact":
        return Exact()
    kind, _, arg = text.partition(":")
    if kind == "grid":
        return Grid(int(arg or 201))
    if kind in ("mc", "montecarlo"):
        return MonteCarlo(int(arg or 1000))
    raise InvalidArgumentError(f"unknown evaluation mode {text!r}")


@dataclass
class LossReport:
    value: float
    certified: bool
    mode: str
    stderr: Optional[float] = None
    n: int = 1

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InvalidArgumentError(f"loss {self.value} outside [0, 1]")


# ---------------------------------------------------------------------------
# one-dimensional piecewise-constant functions


class Piecewise1D:
    """A 1-D piecewise-constant hypothesis split at its finite breakpoints.

    ``values[k]`` is the label on the open piece between breakpoints ``k-1``
    and ``k`` (with ``-inf``/``+inf`` at the ends) and ``point_values[k]`` the
    label at breakpoint ``k`` itself.
    """

    def __init__(self, h: Hypothesis):
        bp = np.unique(np.asarray(h.breakpoints(), dtype=float))
        self.bp = bp
        if bp.size == 0:
            probes = np.array([0.0])
        else:
            probes = np.concatenate([[bp[0] - 1.0], 0.5 * (bp[:-1] + bp[1:]), [bp[-1] + 1.0]])
            # guard against midpoints that round onto a breakpoint
            probes[1:-1] = np.where((probes[1:-1] > bp[:-1]) & (probes[1:-1] < bp[1:]),
                                    probes[1:-1], np.nan)
        vals = np.zeros(probes.size, dtype=np.int64)
        good = ~np.isnan(probes)
        vals[good] = h(probes[good])
        self.values = vals
        # pieces between adjacent floats hold no representable point
        self.piece_valid = good
        self.point_values = h(bp).astype(np.int64) if bp.size else np.zeros(0, dtype=np.int64)
        self._h = h
        gb = np.zeros(bp.size)
        if bp.size > 1:
            gb[1:] = np.cumsum(vals[1:-1] * np.diff(bp))
        self._gb = gb

    def antiderivative(self, t) -> np.ndarray:
        """G(t) with G(first breakpoint) = 0 and G' = label on every piece."""
        t = np.asarray(t, dtype=float)
        if self.bp.size == 0:
            return self.values[0] * t
        k = np.searchsorted(self.bp, t, side="right")
        base = np.where(k > 0, self._gb[np.maximum(k - 1, 0)], 0.0)
        anchor = np.where(k > 0, self.bp[np.maximum(k - 1, 0)], self.bp[0])
        return base + self.values[k] * (t - anchor)

    def ones_length(self, lo, hi) -> np.ndarray:
        """Lebesgue measure of ``{t in [lo, hi] : h(t) = 1}``."""
        return self.antiderivative(hi) - self.antiderivative(lo)

    def ones_length_exact(self, lo, hi) -> Fraction:
        """Same as ``ones_length`` in rational arithmetic (inputs taken exactly)."""
        lo, hi = Fraction(lo), Fraction(hi)
        if hi <= lo:
            return Fraction(0)
        first = int(np.searchsorted(self.bp, float(lo), side="left"))
        while first > 0 and Fraction(self.bp[first - 1]) > lo:
            first -= 1
        while first < self.bp.size and Fraction(self.bp[first]) <= lo:
            first += 1
        # first = number of breakpoints <= lo
        total, a, k = Fraction(0), lo, first
        while k < self.bp.size and Fraction(self.bp[k]) < hi:
            b = Fraction(self.bp[k])
            total += int(self.values[k]) * (b - a)
            a, k = b, k + 1
        return total + int(self.values[k]) * (hi - a)

    def attained(self, lo: float, hi: float, open_ball: bool) -> set:
        """Set of labels taken on the ball ``[lo, hi]`` (or ``(lo, hi)``)."""
        if lo == hi:
            return {int(self._h(np.array([lo]))[0])}
        bp = self.bp
        out = set()
        left = np.concatenate([[-np.inf], bp])
        right = np.concatenate([bp, [np.inf]])
        hit = (left < hi) & (right > lo) & self.piece_valid
        out.update(int(v) for v in np.unique(self.values[hit]))
        inner = (bp > lo) & (bp < hi)
        out.update(int(v) for v in np.unique(self.point_values[inner]))
        if not open_ball:
            out.update(int(v) for v in self._h(np.array([lo, hi])))
        return out


def _has_breakpoints(h) -> bool:
    try:
        h.breakpoints()
    except Exception:
        return False
    return True


# ---------------------------------------------------------------------------
# point losses


def binary_loss(h: Hypothesis, s: LabeledSample) -> float:
    if len(s) == 0:
        raise InvalidArgumentError("binary loss of an empty sample")
    return float(np.mean(h(s.points) != s.labels))


def _exact_point_loss(h, x, y: int, pert: Perturbation, space) -> int:
    if hasattr(h, "exact_point_loss"):
        return int(h.exact_point_loss(x, y, pert, space))
    if isinstance(space, FiniteSpace):
        members = space.members(Ball(x, pert.radius, pert.boundary)) if pert.radius > 0 \
            else np.array([space.point(x)])
        return int(np.any(h(members) != y))
    if pert.radius == 0:
        return int(predict(h, x) != y)
    if isinstance(h, Constant):
        return int(h.label != y)
    if isinstance(h, AxisRectangle):
        norm = space.norm if isinstance(space, EuclideanSpace) else "L2"
        xx = np.asarray(x, dtype=float).reshape(1, -1)
        r = pert.radius
        if y == h.inside:
            lo, hi = np.array(h.lo), np.array(h.hi)
            return int(not np.all((xx - r >= lo) & (xx + r <= hi)))
        d = float(h.box_distance(xx, norm)[0])
        return int(d < r if pert.open else d <= r)
    if isinstance(space, EuclideanSpace) and space.dim == 1 and _has_breakpoints(h):
        xv = float(np.asarray(x, dtype=float).reshape(-1)[0])
        labels = Piecewise1D(h).attained(xv - pert.radius, xv + pert.radius, pert.open)
        return int(any(v != y for v in labels))
    raise UnsupportedModeError(f"exact evaluation unsupported for {type(h).__name__}")


def _grid_points(space: EuclideanSpace, ball: Ball, resolution: int) -> np.ndarray:
    c = space.point(ball.center)
    axes = [np.linspace(ci - ball.radius, ci + ball.radius, resolution) for ci in c]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, space.dim)
    grid = grid[space.contains(ball, grid)]
    return np.vstack([c[None, :], grid])


def adversarial_point_loss(h: Hypothesis, x, y: int, pert: Perturbation,
                           mode: EvaluationMode = Exact(), space=None,
                           rng: Optional[np.random.Generator] = None) -> LossReport:
    """Worst-case 0/1 loss of ``h`` over the ball of ``pert`` around ``x``."""
    y = int(y)
    if space is None:
        space = EuclideanSpace(1)
    if isinstance(mode, Exact):
        return LossReport(float(_exact_point_loss(h, x, y, pert, space)), True, str(mode))
    ball = Ball(x, pert.radius, pert.boundary)
    if isinstance(space, FiniteSpace) and isinstance(mode, Grid):
        return LossReport(float(_exact_point_loss(h, x, y, pert, space)), True, str(mode))
    if isinstance(mode, Grid):
        pts = _grid_points(space, ball, mode.resolution) if pert.radius > 0 \
            else space.point(x)[None, :]
        return LossReport(float(np.any(h(pts) != y)), False, str(mode))
    if isinstance(mode, MonteCarlo):
        rng = rng if rng is not None else substream(0, "adversarial_point_loss")
        if isinstance(space, FiniteSpace):
            draws = space.sample_ball(ball, rng, mode.draws) if pert.radius > 0 else np.zeros(0, np.int64)
            pts = np.concatenate([[space.point(x)], draws])
        else:
            draws = space.sample_ball(ball, rng, mode.draws)
            pts = np.vstack([space.point(x)[None, :], draws])
        return LossReport(float(np.any(h(pts) != y)), False, str(mode))
    raise InvalidArgumentError(f"unknown mode {mode!r}")


def empirical_adversarial_loss(h: Hypothesis, s: LabeledSample, pert: Perturbation,
                               mode: EvaluationMode = Exact(), space=None,
                               rng: Optional[np.random.Generator] = None) -> LossReport:
    if len(s) == 0:
        raise InvalidArgumentError("adversarial loss of an empty sample")
    rng = rng if rng is not None else substream(0, "empirical_adversarial_loss")
    total, certified = 0.0, True
    for i, (x, y) in enumerate(s):
        # one substream per point keeps evaluation order-independent
        sub = child(rng, i) if isinstance(mode, MonteCarlo) else None
        rep = adversarial_point_loss(h, x, y, pert, mode, space, sub)
        total += rep.value
        certified &= rep.certified
    return LossReport(total / len(s), certified, str(mode), n=len(s))


# ---------------------------------------------------------------------------
# data distributions


@dataclass
class DiscreteMixture:
    """Finitely many labelled atoms ``(point, label, probability)``."""

    atoms: Sequence[tuple]

    def __post_init__(self):
        probs = np.array([p for _, _, p in self.atoms], dtype=float)
        if probs.size == 0 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("atom probabilities must be nonnegative and sum to 1")
        self.probs = probs / probs.sum()

    def sample(self, rng: np.random.Generator, m: int, space=None) -> LabeledSample:
        idx = rng.choice(len(self.atoms), size=int(m), p=self.probs)
        return LabeledSample.from_pairs([(self.atoms[i][0], self.atoms[i][1]) for i in idx], space)


@dataclass
class UniformOnBalls:
    """Mixture of labelled balls; points are uniform within the chosen ball."""

    components: Sequence[tuple]  # (Ball, label, probability)

    def __post_init__(self):
        probs = np.array([p for _, _, p in self.components], dtype=float)
        if probs.size == 0 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("component probabilities must be nonnegative and sum to 1")
        self.probs = probs / probs.sum()

    def sample(self, rng: np.random.Generator, m: int, space) -> LabeledSample:
        comp = rng.choice(len(self.components), size=int(m), p=self.probs)
        pairs = []
        for c in comp:
            ball, label, _ = self.components[c]
            pairs.append((space.sample_ball(ball, rng), label))
        return LabeledSample.from_pairs(pairs, space)


DataDistribution = Union[DiscreteMixture, UniformOnBalls]


def expected_adversarial_loss(h: Hypothesis, dist: DataDistribution, pert: Perturbation,
                              mode: EvaluationMode = Exact(), space=None,
                              rng: Optional[np.random.Generator] = None,
                              draws: int = 2000) -> LossReport:
    """Population adversarial loss.

    Exact weighted sum over atoms for a :class:`DiscreteMixture`; a
    Monte-Carlo average with standard error over ``draws`` points for
    :class:`UniformOnBalls` (never certified).
    """
    rng = rng if rng is not None else substream(0, "expected_adversarial_loss")
    if isinstance(dist, DiscreteMixture):
        total, certified = 0.0, True
        for i, ((x, y, _), p) in enumerate(zip(dist.atoms, dist.probs)):
            if p == 0:
                continue
            sub = child(rng, i) if isinstance(mode, MonteCarlo) else None
            rep = adversarial_point_loss(h, x, y, pert, mode, space, sub)
            total += p * rep.value
            certified &= rep.certified
        return LossReport(min(1.0, total), certified, str(mode), stderr=0.0, n=len(dist.atoms))
    s = dist.sample(rng, draws, space)
    vals = np.array([adversarial_point_loss(h, x, y, pert, mode, space, child(rng, i)).value
                     for i, (x, y) in enumerate(s)])
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return LossReport(float(vals.mean()), False, str(mode), stderr=se, n=int(vals.size))
