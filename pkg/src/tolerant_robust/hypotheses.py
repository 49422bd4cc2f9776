"""Binary hypotheses, low-VC families, and exact ERM / robust-ERM solvers.

Hypotheses are callables mapping a batch of points to a ``uint8`` label
array; :func:`predict` is the single-point convenience. One-dimensional
hypotheses are piecewise constant and report their finite ``breakpoints``,
which is what makes exact robust-loss evaluation possible downstream.

Conventions
-----------
``Threshold(theta, "L")`` predicts ``1{x <= theta}`` and ``Threshold(theta, "R")``
its complement ``1{x > theta}``. Intervals and rectangles are closed, and
predict ``inside`` on the box and ``1 - inside`` elsewhere. A box whose bounds
are all ``-inf`` contains no real point and is used as the empty box.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (InvalidArgumentError, NonRealizableError, ParseError,
                     UnsupportedFamilyError)
from .metric import Boundary, EuclideanSpace, FiniteSpace

LEFT_IS_ONE = "L"
RIGHT_IS_ONE = "R"
NEG_INF = float("-inf")


def _fmt(x) -> str:
    return repr(float(x))


def _flat(X) -> np.ndarray:
    return np.asarray(X, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """Ordered (point, label) pairs.

    ``points`` is ``(m, dim)`` float for Euclidean data and ``(m,)`` int for
    finite-space indices (``indices=True``). Order matters: the minimal-index
    labeling of the compression scheme depends on it.
    """

    points: np.ndarray
    labels: np.ndarray
    indices: bool = False

    def __post_init__(self):
        labels = np.asarray(self.labels).reshape(-1)
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise InvalidArgumentError("labels must be 0 or 1")
        if self.indices:
            pts = np.asarray(self.points).reshape(-1).astype(np.int64)
        else:
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim <= 1:
                pts = pts.reshape(-1, 1)
        if pts.shape[0] != labels.size:
            raise InvalidArgumentError("points and labels differ in length")
        labels = labels.astype(np.uint8)
        pts.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pairs(cls, pairs, space=None) -> "LabeledSample":
        pairs = list(pairs)
        finite = isinstance(space, FiniteSpace)
        if not pairs:
            dim = 1 if space is None or finite else space.dim
            pts = np.zeros(0, dtype=np.int64) if finite else np.zeros((0, dim))
            return cls(pts, np.zeros(0, dtype=np.uint8), indices=finite)
        pts = [p for p, _ in pairs]
        labels = [int(y) for _, y in pairs]
        if finite:
            return cls(np.array(pts, dtype=np.int64), labels, indices=True)
        return cls(np.array(pts, dtype=float).reshape(len(pairs), -1), labels)

    def __len__(self):
        return int(self.labels.size)

    def __eq__(self, other):
        return (isinstance(other, LabeledSample) and self.indices == other.indices
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None

    def __iter__(self):
        for i in range(len(self)):
            yield self.point(i), int(self.labels[i])

    def point(self, i):
        return int(self.points[i]) if self.indices else self.points[i]

    @property
    def dim(self) -> Optional[int]:
        return None if self.indices else self.points.shape[1]

    def subset(self, idx) -> "LabeledSample":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledSample(self.points[idx], self.labels[idx], indices=self.indices)

    def with_points(self, points) -> "LabeledSample":
        return LabeledSample(points, self.labels, indices=self.indices)


# ---------------------------------------------------------------------------
# hypotheses


class Hypothesis:
    dim: Optional[int] = 1

    def __call__(self, X) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Finite points where a 1-D hypothesis may change value."""
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.to_text()


@dataclass(frozen=True)
class Constant(Hypothesis):
    label: int
    dim = None

    def __call__(self, X):
        X = np.asarray(X)
        n = X.shape[0] if X.ndim else 1
        return np.full(n, self.label, dtype=np.uint8)

    def breakpoints(self):
        return np.zeros(0)

    def to_text(self):
        return f"constant {int(self.label)}"


@dataclass(frozen=True)
class Threshold(Hypothesis):
    theta: float
    orientation: str = LEFT_IS_ONE

    def __post_init__(self):
        if self.orientation not in (LEFT_IS_ONE, RIGHT_IS_ONE):
            raise InvalidArgumentError(f"orientation must be 'L' or 'R', got {self.orientation!r}")
        object.__setattr__(self, "theta", float(self.theta))

    def __call__(self, X):
        x = _flat(X)
        left = x <= self.theta
        return (left if self.orientation == LEFT_IS_ONE else ~left).astype(np.uint8)

    def breakpoints(self):
        return np.array([self.theta]) if np.isfinite(self.theta) else np.zeros(0)

    def to_text(self):
        return f"threshold {self.orientation} {_fmt(self.theta)}"


@dataclass(frozen=True)
class Interval(Hypothesis):
    a: float
    b: float
    inside: int = 1

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not self.a <= self.b:
            raise InvalidArgumentError(f"interval needs a <= b, got [{self.a}, {self.b}]")

    def __call__(self, X):
        x = _flat(X)
        inn = (x >= self.a) & (x <= self.b)
        return np.where(inn, self.inside, 1 - self.inside).astype(np.uint8)

    def breakpoints(self):
        b = np.array([self.a, self.b])
        return np.unique(b[np.isfinite(b)])

    def to_text(self):
        return f"interval {_fmt(self.a)} {_fmt(self.b)} {int(self.inside)}"


@dataclass(frozen=True)
class AxisRectangle(Hypothesis):
    lo: tuple
    hi: tuple
    inside: int = 1

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not all(a <= b for a, b in zip(lo, hi)):
            raise InvalidArgumentError("rectangle needs lo <= hi coordinatewise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    def __call__(self, X):
        x = np.asarray(X, dtype=float).reshape(-1, self.dim)
        inn = np.all((x >= np.array(self.lo)) & (x <= np.array(self.hi)), axis=1)
        return np.where(inn, self.inside, 1 - self.inside).astype(np.uint8)

    def breakpoints(self):
        if self.dim != 1:
            raise UnsupportedFamilyError("breakpoints only exist for 1-D hypotheses")
        return Interval(self.lo[0], self.hi[0]).breakpoints()

    def box_distance(self, X, norm: str) -> np.ndarray:
        """Distance from each point to the closed box (0 inside)."""
        x = np.asarray(X, dtype=float).reshape(-1, self.dim)
        lo, hi = np.array(self.lo), np.array(self.hi)
        with np.errstate(invalid="ignore"):
            gap = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        gap = np.where(np.isnan(gap), np.inf, gap)
        if norm == "L2":
            return np.sqrt(np.sum(gap * gap, axis=1))
        return np.max(gap, axis=1)

    def to_text(self):
        parts = [f"rectangle {self.dim}"] + [_fmt(v) for v in self.lo] + [_fmt(v) for v in self.hi]
        return " ".join(parts) + f" {int(self.inside)}"


@dataclass(frozen=True)
class TableHypothesis(Hypothesis):
    """Arbitrary labels on the points of a finite space."""

    table: tuple
    dim = None

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))

    def __call__(self, X):
        idx = np.asarray(X).reshape(-1).astype(np.int64)
        return np.asarray(self.table, dtype=np.uint8)[idx]

    def breakpoints(self):
        raise UnsupportedFamilyError("table hypotheses live on finite spaces")

    def to_text(self):
        return "table " + " ".join(str(v) for v in self.table)


class MajorityVote(Hypothesis):
    """Unweighted vote ``1{sum_i h_i(x) / T >= 1/2}``."""

    def __init__(self, hypotheses: Sequence[Hypothesis]):
        if not hypotheses:
            raise InvalidArgumentError("majority vote needs at least one hypothesis")
        self.hypotheses = tuple(hypotheses)

    @property
    def dim(self):
        return self.hypotheses[0].dim

    def __len__(self):
        return len(self.hypotheses)

    def votes(self, X) -> np.ndarray:
        return np.sum([h(X).astype(np.int64) for h in self.hypotheses], axis=0)

    def __call__(self, X):
        return (2 * self.votes(X) >= len(self.hypotheses)).astype(np.uint8)

    def breakpoints(self):
        return np.unique(np.concatenate([h.breakpoints() for h in self.hypotheses]))

    def __eq__(self, other):
        return isinstance(other, MajorityVote) and self.hypotheses == other.hypotheses

    def __hash__(self):
        return hash(self.hypotheses)

    def __repr__(self):
        return f"MajorityVote({list(self.hypotheses)!r})"

    def to_text(self):
        return f"majority {len(self)} ; " + " ; ".join(h.to_text() for h in self.hypotheses)


def predict(h: Hypothesis, x) -> int:
    """Label of a single point (a scalar, a coordinate vector or an index)."""
    return int(h(np.asarray(x)[None, ...])[0])


def parse_hypothesis(text: str) -> Hypothesis:
    """Inverse of ``Hypothesis.to_text``."""
    text = text.strip()
    try:
        if text.startswith("majority"):
            head, *rest = [t.strip() for t in text.split(";")]
            count = int(head.split()[1])
            if count != len(rest):
                raise ParseError(f"majority declares {count} members, found {len(rest)}")
            return MajorityVote([parse_hypothesis(t) for t in rest])
        tok = text.split()
        kind = tok[0]
        if kind == "threshold":
            return Threshold(float(tok[2]), tok[1])
        if kind == "interval":
            return Interval(float(tok[1]), float(tok[2]), int(tok[3]))
        if kind == "rectangle":
            d = int(tok[1])
            vals = [float(t) for t in tok[2:2 + 2 * d]]
            return AxisRectangle(tuple(vals[:d]), tuple(vals[d:]), int(tok[2 + 2 * d]))
        if kind == "table":
            return TableHypothesis(tuple(int(t) for t in tok[1:]))
        if kind == "constant":
            return Constant(int(tok[1]))
    except (IndexError, ValueError) as exc:
        raise ParseError(f"cannot parse hypothesis {text!r}: {exc}") from exc
    raise ParseError(f"unknown hypothesis kind in {text!r}")


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class Perturbation:
    """Perturbation type ``x -> B_radius(x)`` with open or closed boundary."""

    radius: float
    boundary: Boundary = Boundary.CLOSED

    def __post_init__(self):
        if not self.radius >= 0:
            raise InvalidArgumentError(f"perturbation radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "boundary", Boundary.parse(self.boundary))

    @property
    def open(self) -> bool:
        return self.boundary is Boundary.OPEN


class HypothesisFamily:
    name = "family"

    @property
    def vc(self) -> int:
        raise NotImplementedError

    def erm(self, s: LabeledSample) -> Hypothesis:
        raise NotImplementedError

    def robust_erm(self, s: LabeledSample, pert: Perturbation, space=None) -> Hypothesis:
        raise NotImplementedError

    def spec(self) -> str:
        return self.name


class Thresholds(HypothesisFamily):
    """One-dimensional thresholds with a fixed orientation, or both (``"both"``)."""

    name = "thresholds"

    def __init__(self, orientation: str = LEFT_IS_ONE):
        if orientation not in (LEFT_IS_ONE, RIGHT_IS_ONE, "both"):
            raise InvalidArgumentError(f"bad orientation {orientation!r}")
        self.orientation = orientation

    def __repr__(self):
        return f"Thresholds({self.orientation!r})"

    def __eq__(self, other):
        return isinstance(other, Thresholds) and other.orientation == self.orientation

    def __hash__(self):
        return hash(("thresholds", self.orientation))

    def spec(self):
        return "thresholds" if self.orientation == LEFT_IS_ONE else f"thresholds:{self.orientation}"

    @property
    def orientations(self):
        return (LEFT_IS_ONE, RIGHT_IS_ONE) if self.orientation == "both" else (self.orientation,)

    @property
    def vc(self) -> int:
        return 2 if self.orientation == "both" else 1

    def erm(self, s):
        x = s.points.reshape(-1)
        y = s.labels
        for orient in self.orientations:
            # the "predict 1" side is left of the boundary for L, right of it for R
            ones, zeros = (x[y == 1], x[y == 0]) if orient == LEFT_IS_ONE else (x[y == 0], x[y == 1])
            hi_one = ones.max() if ones.size else NEG_INF
            lo_zero = zeros.min() if zeros.size else np.inf
            if not hi_one < lo_zero:
                continue
            if ones.size and zeros.size:
                theta = 0.5 * (hi_one + lo_zero)
                if not hi_one <= theta < lo_zero:
                    theta = hi_one
            elif ones.size:
                theta = hi_one
            elif zeros.size:
                theta = np.nextafter(lo_zero, NEG_INF)
            else:
                theta = 0.0
            return Threshold(theta, orient)
        raise NonRealizableError("no threshold is consistent with the sample")

    def robust_erm(self, s, pert, space=None):
        x = s.points.reshape(-1)
        y = s.labels
        r = pert.radius
        best = None
        for orient in self.orientations:
            # candidate boundaries: right edges of balls that must sit on the <= side
            side = 1 if orient == LEFT_IS_ONE else 0
            cand = np.unique(np.concatenate([[NEG_INF], x[y == side] + r]))
            lo, hi = x - r, x + r
            t = cand[:, None]
            if orient == LEFT_IS_ONE:
                bad1 = hi[None, :] > t
                bad0 = (lo[None, :] < t) if pert.open else (lo[None, :] <= t)
            else:
                bad1 = (lo[None, :] < t) if pert.open else (lo[None, :] <= t)
                bad0 = hi[None, :] > t
            loss = np.where(y[None, :] == 1, bad1, bad0).sum(axis=1)
            i = int(np.argmin(loss))
            key = (int(loss[i]), float(cand[i]))
            if best is None or key < best[0]:
                best = (key, Threshold(cand[i], orient))
        return best[1]


def _box_erm(pos: np.ndarray, neg: np.ndarray, dim: int):
    """Tightest box around ``pos`` widened by half its L-inf gap to ``neg``."""
    if pos.shape[0] == 0:
        if neg.shape[0] == 0:
            return np.zeros(dim), np.zeros(dim)
        corner = np.nextafter(neg.min(axis=0), NEG_INF)
        return corner, corner.copy()
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    if neg.shape[0] == 0:
        return lo, hi
    gap = np.max(np.maximum(np.maximum(lo - neg, neg - hi), 0.0), axis=1)
    if np.any(gap <= 0):
        raise NonRealizableError("a negative point lies inside the bounding box of the positives")
    t = 0.5 * gap.min()
    return lo - t, hi + t


class Intervals(HypothesisFamily):
    """Closed intervals labelled ``inside`` (VC dimension 2)."""

    name = "intervals"

    def __init__(self, inside: int = 1):
        self.inside = int(inside)

    def __repr__(self):
        return f"Intervals(inside={self.inside})"

    def __eq__(self, other):
        return isinstance(other, Intervals) and other.inside == self.inside

    def __hash__(self):
        return hash(("intervals", self.inside))

    def spec(self):
        return "intervals" if self.inside == 1 else "intervals:0"

    @property
    def vc(self):
        return 2

    def erm(self, s):
        x = s.points.reshape(-1, 1)
        pos = s.labels == self.inside
        lo, hi = _box_erm(x[pos], x[~pos], 1)
        return Interval(lo[0], hi[0], self.inside)

    def robust_erm(self, s, pert, space=None):
        x = s.points.reshape(-1)
        pos = s.labels == self.inside
        r = pert.radius
        lo, hi = x - r, x + r
        A = np.unique(lo[pos])
        B = np.unique(hi[pos])
        a, b = np.meshgrid(A, B, indexing="ij")
        ok = a <= b
        a = np.concatenate([[NEG_INF], a[ok]])
        b = np.concatenate([[NEG_INF], b[ok]])
        loss = _interval_losses(a, b, lo, hi, pos, pert.open)
        order = np.lexsort((b, a, loss))
        i = int(order[0])
        return Interval(a[i], b[i], self.inside)


def _interval_losses(a, b, lo, hi, pos, open_ball, chunk=4096):
    out = np.empty(a.size, dtype=np.int64)
    for start in range(0, a.size, chunk):
        aa = a[start:start + chunk, None]
        bb = b[start:start + chunk, None]
        # positives need the ball inside [a, b]
        bad_pos = (aa > lo[None, :]) | (bb < hi[None, :])
        # negatives need the ball disjoint from [a, b]
        if open_ball:
            bad_neg = (aa < hi[None, :]) & (bb > lo[None, :])
        else:
            bad_neg = (aa <= hi[None, :]) & (bb >= lo[None, :])
        out[start:start + chunk] = np.where(pos[None, :], bad_pos, bad_neg).sum(axis=1)
    return out


class AxisRectangles(HypothesisFamily):
    """Closed axis-aligned boxes in R^dim labelled ``inside`` (VC dimension 2 dim)."""

    name = "rectangles"

    def __init__(self, dim: int = 2, inside: int = 1):
        self.dim = int(dim)
        self.inside = int(inside)

    def __repr__(self):
        return f"AxisRectangles(dim={self.dim}, inside={self.inside})"

    def __eq__(self, other):
        return (isinstance(other, AxisRectangles) and other.dim == self.dim
                and other.inside == self.inside)

    def __hash__(self):
        return hash(("rectangles", self.dim, self.inside))

    def spec(self):
        return f"rectangles:{self.dim}"

    @property
    def vc(self):
        return 2 * self.dim

    def erm(self, s):
        pos = s.labels == self.inside
        lo, hi = _box_erm(s.points[pos], s.points[~pos], self.dim)
        return AxisRectangle(tuple(lo), tuple(hi), self.inside)

    def robust_erm(self, s, pert, space=None):
        """Exhaustive search over boxes spanned by inflated positive coordinates.

        Every optimal box can be shrunk onto the bounding box of the inflated
        balls of the positives it keeps, so this candidate set is exact. The
        cost grows as ``P^(2 dim)`` in the number of positives ``P``.
        """
        if self.dim > 2:
            raise UnsupportedFamilyError("robust ERM for rectangles supports dim <= 2")
        norm = space.norm if isinstance(space, EuclideanSpace) else "Linf"
        X = s.points
        pos = s.labels == self.inside
        r = pert.radius
        axes = []
        for k in range(self.dim):
            axes.append(np.unique(X[pos, k] - r))
            axes.append(np.unique(X[pos, k] + r))
        best_key, best_box = None, None
        empty = AxisRectangle((NEG_INF,) * self.dim, (NEG_INF,) * self.dim, self.inside)
        cands = [empty]
        for combo in itertools.product(*axes):
            lo, hi = combo[0::2], combo[1::2]
            if all(a <= b for a, b in zip(lo, hi)):
                cands.append(AxisRectangle(lo, hi, self.inside))
        for box in cands:
            loss = int(_rect_robust_fail(box, X, pos, r, pert.open, norm).sum())
            key = (loss, box.lo, box.hi)
            if best_key is None or key < best_key:
                best_key, best_box = key, box
        return best_box


def _rect_robust_fail(box: AxisRectangle, X, pos, r, open_ball, norm):
    lo, hi = np.array(box.lo), np.array(box.hi)
    with np.errstate(invalid="ignore"):
        inside_ok = np.all((X - r >= lo) & (X + r <= hi), axis=1)
    dist = box.box_distance(X, norm)
    touches = dist < r if open_ball else dist <= r
    return np.where(pos, ~inside_ok, touches)


class FiniteTable(HypothesisFamily):
    """An explicit list of label tables over a finite space."""

    name = "table"

    def __init__(self, tables):
        T = np.array(tables, dtype=np.uint8)
        if T.ndim != 2 or T.shape[0] == 0:
            raise InvalidArgumentError("tables must be a non-empty (K, n) array")
        T.setflags(write=False)
        self.tables = T
        self._vc = None

    def __repr__(self):
        return f"FiniteTable(K={self.tables.shape[0]}, n={self.tables.shape[1]})"

    @classmethod
    def all_labelings(cls, n: int) -> "FiniteTable":
        return cls(list(itertools.product((0, 1), repeat=n)))

    def hypothesis(self, k: int) -> TableHypothesis:
        return TableHypothesis(tuple(self.tables[k]))

    @property
    def vc(self) -> int:
        if self._vc is None:
            self._vc = shattering_dimension(self.tables)
        return self._vc

    def erm(self, s):
        idx = s.points.astype(np.int64)
        ok = np.all(self.tables[:, idx] == s.labels[None, :], axis=1)
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            raise NonRealizableError("no table is consistent with the sample")
        return self.hypothesis(int(hits[0]))

    def robust_losses(self, s, pert, space: FiniteSpace) -> np.ndarray:
        idx = s.points.astype(np.int64)
        D = space.D[idx]
        member = D < pert.radius if pert.open else D <= pert.radius
        wrong = self.tables[:, None, :] != s.labels[None, :, None]
        return np.any(wrong & member[None, :, :], axis=2).sum(axis=1)

    def robust_erm(self, s, pert, space=None):
        if not isinstance(space, FiniteSpace):
            raise UnsupportedFamilyError("table families need their finite space")
        return self.hypothesis(int(np.argmin(self.robust_losses(s, pert, space))))


def shattering_dimension(tables: np.ndarray, max_points: int = 16) -> int:
    """VC dimension of a finite family of label vectors by exhaustive search."""
    T = np.asarray(tables, dtype=np.uint8)
    n = T.shape[1]
    if n > max_points:
        raise InvalidArgumentError(f"exhaustive shattering limited to {max_points} points")
    best = 0
    for k in range(1, n + 1):
        if T.shape[0] < 2 ** k:
            break
        weights = 1 << np.arange(k)
        found = False
        for subset in itertools.combinations(range(n), k):
            codes = T[:, subset].astype(np.int64) @ weights
            if np.unique(codes).size == 2 ** k:
                found = True
                break
        if not found:
            break
        best = k
    return best


def erm_realizable(family: HypothesisFamily, s: LabeledSample) -> Hypothesis:
    """Deterministic consistent learner; raises ``NonRealizableError`` if none exists."""
    return family.erm(s)


def robust_erm(family: HypothesisFamily, s: LabeledSample, pert: Perturbation, space=None) -> Hypothesis:
    """Exact minimiser of the empirical adversarial loss over ``family``."""
    if not isinstance(family, (Thresholds, Intervals, AxisRectangles, FiniteTable)):
        raise UnsupportedFamilyError(f"no exact robust ERM for {family!r}")
    return family.robust_erm(s, pert, space)


def vc_dimension(family: HypothesisFamily) -> int:
    return family.vc


def parse_family(text: str, space=None) -> HypothesisFamily:
    """``thresholds``, ``thresholds:R``, ``thresholds:both``, ``intervals``,
    ``intervals:0``, ``rectangles:<dim>``, ``table:all``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "thresholds":
        return Thresholds(arg or LEFT_IS_ONE)
    if kind == "intervals":
        return Intervals(int(arg) if arg else 1)
    if kind == "rectangles":
        return AxisRectangles(int(arg) if arg else 2)
    if kind == "table":
        if not isinstance(space, FiniteSpace):
            raise InvalidArgumentError("table family needs a finite space")
        if arg in ("", "all"):
            return FiniteTable.all_labelings(space.n)
    raise InvalidArgumentError(f"unknown family spec {text!r}")
