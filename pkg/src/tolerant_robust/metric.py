"""Metric spaces with doubling measures and a ball-sampling oracle.

Two concrete spaces are provided:

* :class:`EuclideanSpace` -- ``R^dim`` under the L2 or L-infinity norm with
  Lebesgue measure. Points are float arrays of shape ``(dim,)``; batches are
  ``(n, dim)``. One-dimensional spaces also accept plain scalars.
* :class:`FiniteSpace` -- an explicit distance matrix with positive point
  weights acting as the measure. Points are integer indices.

Both expose the same small surface: ``distance``, ``distances``,
``contains``, ``measure_ball`` and ``sample_ball``. The module-level
functions of the same name simply dispatch to the space.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (EmptySupportError, InvalidArgumentError, InvalidPointError,
                     InvalidRadiusError, InvalidSpaceError)


class Boundary(enum.Enum):
    CLOSED = "closed"
    OPEN = "open"

    @classmethod
    def parse(cls, value) -> "Boundary":
        if isinstance(value, Boundary):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class Ball:
    center: object
    radius: float
    boundary: Boundary = Boundary.CLOSED

    def __post_init__(self):
        if not self.radius >= 0:
            raise InvalidRadiusError(f"ball radius must be >= 0, got {self.radius}")


def _within(dist, radius, boundary: Boundary):
    if boundary is Boundary.OPEN:
        return dist < radius
    return dist <= radius


class EuclideanSpace:
    """``R^dim`` with the L2 or L-infinity metric and Lebesgue measure."""

    kind = "euclidean"

    def __init__(self, dim: int = 1, norm: str = "L2"):
        if int(dim) != dim or dim < 1:
            raise InvalidArgumentError(f"dim must be a positive integer, got {dim}")
        norm = norm.upper().replace("-", "").replace("INFINITY", "INF")
        if norm not in ("L2", "LINF"):
            raise InvalidArgumentError(f"unsupported norm {norm!r}")
        self.dim = int(dim)
        self.norm = "L2" if norm == "L2" else "Linf"

    def __repr__(self):
        return f"EuclideanSpace(dim={self.dim}, norm={self.norm!r})"

    def __eq__(self, other):
        return (isinstance(other, EuclideanSpace) and other.dim == self.dim
                and other.norm == self.norm)

    def __hash__(self):
        return hash((self.dim, self.norm))

    def point(self, p) -> np.ndarray:
        arr = np.asarray(p, dtype=float)
        if arr.ndim == 0 and self.dim == 1:
            arr = arr.reshape(1)
        if arr.shape != (self.dim,):
            raise InvalidPointError(f"expected a point of dimension {self.dim}, got shape {arr.shape}")
        return arr

    def points(self, X) -> np.ndarray:
        arr = np.asarray(X, dtype=float)
        if self.dim == 1 and arr.ndim <= 1:
            return arr.reshape(-1, 1)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise InvalidPointError(f"expected points of dimension {self.dim}, got shape {arr.shape}")
        return arr

    def _norm(self, diff: np.ndarray) -> np.ndarray:
        if self.norm == "L2":
            return np.sqrt(np.sum(diff * diff, axis=-1))
        return np.max(np.abs(diff), axis=-1)

    def distance(self, p, q) -> float:
        return float(self._norm(self.point(p) - self.point(q)))

    def distances(self, center, X) -> np.ndarray:
        return self._norm(self.points(X) - self.point(center))

    def contains(self, ball: Ball, X) -> np.ndarray:
        return _within(self.distances(ball.center, X), ball.radius, ball.boundary)

    def unit_ball_volume(self) -> float:
        if self.norm == "Linf":
            return 2.0 ** self.dim
        k = self.dim
        return math.pi ** (k / 2) / math.gamma(k / 2 + 1)

    def measure_ball(self, ball: Ball) -> float:
        # open and closed balls have equal Lebesgue measure
        return self.unit_ball_volume() * float(ball.radius) ** self.dim

    def sample_ball(self, ball: Ball, rng: np.random.Generator, size: Optional[int] = None):
        c = self.point(ball.center)
        n = 1 if size is None else int(size)
        r = float(ball.radius)
        if r == 0:
            out = np.repeat(c[None, :], n, axis=0)
        elif self.norm == "Linf":
            out = c + rng.uniform(-r, r, size=(n, self.dim))
        else:
            g = rng.standard_normal((n, self.dim))
            norms = np.sqrt(np.sum(g * g, axis=1, keepdims=True))
            # a zero normal vector has probability zero; redraw defensively
            while np.any(norms == 0):
                bad = norms[:, 0] == 0
                g[bad] = rng.standard_normal((int(bad.sum()), self.dim))
                norms = np.sqrt(np.sum(g * g, axis=1, keepdims=True))
            u = rng.random((n, 1))
            out = c + g / norms * (r * u ** (1.0 / self.dim))
        return out[0] if size is None else out


class FiniteSpace:
    """A finite metric space with a weighted counting measure.

    Parameters
    ----------
    distances : (n, n) array
        Symmetric, zero diagonal, strictly positive off the diagonal, and
        satisfying the triangle inequality. Checked exhaustively.
    weights : (n,) array, optional
        Strictly positive point masses. Defaults to all ones.
    labels : list, optional
        Display descriptors for the points; never used in computation.
    """

    kind = "finite"

    def __init__(self, distances, weights=None, labels=None, tol: float = 1e-12):
        D = np.array(distances, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
            raise InvalidSpaceError("distance matrix must be square and non-empty")
        n = D.shape[0]
        W = np.ones(n) if weights is None else np.array(weights, dtype=float)
        if W.shape != (n,):
            raise InvalidSpaceError(f"expected {n} weights, got shape {W.shape}")
        if not np.all(W > 0) or not np.all(np.isfinite(W)):
            raise InvalidSpaceError("weights must be finite and strictly positive")
        if not np.all(np.isfinite(D)):
            raise InvalidSpaceError("distances must be finite")
        if not np.allclose(D, D.T, rtol=0, atol=tol):
            raise InvalidSpaceError("distance matrix is not symmetric")
        if np.any(np.diag(D) != 0):
            raise InvalidSpaceError("distance matrix must have a zero diagonal")
        off = ~np.eye(n, dtype=bool)
        if np.any(D[off] <= 0):
            raise InvalidSpaceError("distinct points must be at positive distance")
        # d(i,k) <= d(i,j) + d(j,k) for all i, j, k
        via = D[:, :, None] + D[None, :, :]
        if np.any(D[:, None, :] > via + tol):
            raise InvalidSpaceError("distance matrix violates the triangle inequality")
        D = 0.5 * (D + D.T)
        D.setflags(write=False)
        W.setflags(write=False)
        self.D = D
        self.weights = W
        self.labels = list(labels) if labels is not None else list(range(n))

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def __repr__(self):
        return f"FiniteSpace(n={self.n})"

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "FiniteSpace":
        """Load ``n``, then ``n`` weight lines, then ``n`` distance-matrix rows."""
        lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        return cls.from_lines(lines)

    @classmethod
    def from_lines(cls, lines) -> "FiniteSpace":
        from .errors import ParseError
        try:
            n = int(lines[0])
            weights = [float(lines[1 + i]) for i in range(n)]
            rows = [[float(t) for t in lines[1 + n + i].split()] for i in range(n)]
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed finite-space file: {exc}") from exc
        if len(lines) != 1 + 2 * n:
            raise ParseError(f"expected {1 + 2 * n} non-empty lines, got {len(lines)}")
        return cls(rows, weights)

    def to_text(self) -> str:
        out = [str(self.n)]
        out += [repr(float(w)) for w in self.weights]
        out += [" ".join(repr(float(v)) for v in row) for row in self.D]
        return "\n".join(out) + "\n"

    @classmethod
    def from_coordinates(cls, coords, weights=None, norm: str = "L2") -> "FiniteSpace":
        """Finite space of distinct points in R^k under the L2 or Linf metric."""
        X = np.asarray(coords, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        diff = X[:, None, :] - X[None, :, :]
        if norm.upper() == "L2":
            D = np.sqrt(np.sum(diff * diff, axis=-1))
        else:
            D = np.max(np.abs(diff), axis=-1)
        return cls(D, weights, labels=[tuple(r) for r in X])

    def point(self, p) -> int:
        if isinstance(p, (bool, np.bool_)):
            raise InvalidPointError("boolean is not a point index")
        try:
            idx = int(p)
        except (TypeError, ValueError) as exc:
            raise InvalidPointError(f"finite-space points are indices, got {p!r}") from exc
        if idx != p or not 0 <= idx < self.n:
            raise InvalidPointError(f"index {p!r} outside 0..{self.n - 1}")
        return idx

    def points(self, X) -> np.ndarray:
        arr = np.asarray(X)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        arr = arr.reshape(-1)
        if arr.size and (not np.all(np.equal(np.mod(arr, 1), 0))
                         or arr.min() < 0 or arr.max() >= self.n):
            raise InvalidPointError(f"indices outside 0..{self.n - 1}")
        return arr.astype(np.int64)

    def distance(self, p, q) -> float:
        return float(self.D[self.point(p), self.point(q)])

    def distances(self, center, X) -> np.ndarray:
        return self.D[self.point(center), self.points(X)]

    def members(self, ball: Ball) -> np.ndarray:
        """Indices of the points inside ``ball``, in increasing order."""
        row = self.D[self.point(ball.center)]
        return np.flatnonzero(_within(row, ball.radius, ball.boundary))

    def contains(self, ball: Ball, X) -> np.ndarray:
        return _within(self.distances(ball.center, X), ball.radius, ball.boundary)

    def measure_ball(self, ball: Ball) -> float:
        return float(self.weights[self.members(ball)].sum())

    def sample_ball(self, ball: Ball, rng: np.random.Generator, size: Optional[int] = None):
        idx = self.members(ball)
        if idx.size == 0:
            raise EmptySupportError(f"ball {ball} contains no point")
        w = self.weights[idx]
        n = 1 if size is None else int(size)
        draws = idx[rng.choice(idx.size, size=n, p=w / w.sum())]
        return int(draws[0]) if size is None else draws


Space = Union[EuclideanSpace, FiniteSpace]


def distance(space: Space, p, q) -> float:
    return space.distance(p, q)


def measure_ball(space: Space, ball: Ball) -> float:
    return space.measure_ball(ball)


def sample_ball(space: Space, ball: Ball, rng: np.random.Generator, size: Optional[int] = None):
    return space.sample_ball(ball, rng, size)


def empirical_doubling_constant(space: FiniteSpace) -> float:
    """Smallest C with mu(B_2r(x)) <= C mu(B_r(x)) for every x and r > 0.

    The ratio only changes when r or 2r crosses a pairwise distance, so it is
    enough to scan r over all distances and all half-distances.
    """
    vals = np.unique(space.D[space.D > 0])
    radii = np.unique(np.concatenate([vals, vals / 2.0]))
    best = 1.0
    for r in radii:
        inner = (space.D <= r) @ space.weights
        outer = (space.D <= 2 * r) @ space.weights
        best = max(best, float(np.max(outer / inner)))
    return best


@dataclass(frozen=True)
class DoublingParameters:
    """Constants of the doubling-measure growth bound.

    ``mu(B_{alpha r}) <= (c1 alpha)^(c2 d) mu(B_r)`` in general, and
    ``<= alpha^(zeta d) mu(B_r)`` once ``alpha >= alpha0``.
    """

    d: float
    zeta: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    alpha0: Optional[float] = None
    Gamma: Optional[float] = None

    def __post_init__(self):
        if self.d < 0 or self.zeta < 0:
            raise InvalidArgumentError("d and zeta must be nonnegative")
        if self.c1 < 1 or self.c2 <= 0:
            raise InvalidArgumentError("need c1 >= 1 and c2 > 0")
        if self.alpha0 is not None and self.alpha0 <= 1:
            raise InvalidArgumentError("alpha0 must exceed 1")

    @property
    def zeta_d(self) -> float:
        return self.zeta * self.d

    @classmethod
    def euclidean(cls, dim: int) -> "DoublingParameters":
        return cls(d=float(dim), zeta=1.0, c1=1.0, c2=1.0)

    @classmethod
    def from_constants(cls, d: float, c1: float, c2: float, alpha0: float,
                       Gamma: Optional[float] = None) -> "DoublingParameters":
        """Fold (c1, c2, alpha0) into zeta = c2 (1 + log_{alpha0} c1)."""
        return cls(d=d, zeta=zeta_from_constants(c1, c2, alpha0), c1=c1, c2=c2,
                   alpha0=alpha0, Gamma=Gamma)

    @classmethod
    def for_space(cls, space: Space) -> "DoublingParameters":
        if isinstance(space, EuclideanSpace):
            return cls.euclidean(space.dim)
        raise InvalidArgumentError(
            "finite spaces carry no closed-form doubling parameters; "
            "use the exact measure ratios of the space instead")


def zeta_from_constants(c1: float, c2: float, alpha0: float) -> float:
    if alpha0 <= 1:
        raise InvalidArgumentError("alpha0 must exceed 1")
    return c2 * (1.0 + math.log(c1) / math.log(alpha0))


def doubling_ratio_bound(params: DoublingParameters, alpha: float, simplified: bool = True) -> float:
    """Upper bound on mu(B_{alpha r}) / mu(B_r) for nested balls."""
    if not alpha > 1:
        raise InvalidArgumentError(f"alpha must exceed 1, got {alpha}")
    if simplified:
        if params.alpha0 is not None and alpha < params.alpha0:
            raise InvalidArgumentError(f"alpha={alpha} below alpha0={params.alpha0}")
        return alpha ** params.zeta_d
    return (params.c1 * alpha) ** (params.c2 * params.d)


@dataclass
class DoublingTrial:
    center: np.ndarray
    ratio: float
    expected: float
    passed: bool


@dataclass
class DoublingReport:
    r: float
    alpha: float
    trials: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.trials)


def verify_doubling_euclidean(space: EuclideanSpace, r: float, alpha: float, trials: int = 5,
                              rng: Optional[np.random.Generator] = None,
                              tol: float = 1e-9) -> DoublingReport:
    """Check mu(B_{alpha r}(x)) / mu(B_r(x)) == alpha^dim at random centres."""
    if not isinstance(space, EuclideanSpace):
        raise InvalidArgumentError("verify_doubling_euclidean needs a Euclidean space")
    rng = rng if rng is not None else np.random.default_rng(0)
    report = DoublingReport(r=r, alpha=alpha)
    expected = float(alpha) ** space.dim
    for _ in range(int(trials)):
        c = rng.uniform(-10, 10, size=space.dim)
        ratio = space.measure_ball(Ball(c, alpha * r)) / space.measure_ball(Ball(c, r))
        report.trials.append(DoublingTrial(c, ratio, expected,
                                           abs(ratio - expected) <= tol * max(1.0, expected)))
    return report
