"""Tolerant sample compression through boost-by-majority.

The encoder inflates the sample into the union of its reference balls,
materializes a finite approximation of that set, and boosts a weak learner
whose hypotheses are robust ERM fits on small blocks of original sample
points. Only the blocks are kept. The decoder refits every block, takes the
unweighted majority and smooths it over balls of radius ``gamma r``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import (CompressionFailure, InvalidArgumentError, NonRealizableError,
                     ParseError, UnsupportedFamilyError, UnsupportedModeError,
                     WeakLearnerFailure)
from .hypotheses import (LEFT_IS_ONE, Hypothesis, HypothesisFamily, Intervals, LabeledSample,
                         MajorityVote, Perturbation, Thresholds, robust_erm)
from .metric import Ball, DoublingParameters, EuclideanSpace, FiniteSpace
from .robust_loss import Exact, empirical_adversarial_loss
from .rng import substream
from .tpas import SmoothedClassifier, lambda_threshold

EDGE = 1.0 / 6.0
WEAK_ERROR_LIMIT = 0.5 - EDGE


# ---------------------------------------------------------------------------
# inflated set


class InflatedDistribution:
    """Uniform source index, then a uniform point of that index's reference ball.

    Labels and provenance come from the smallest source index whose closed
    reference ball covers the drawn point, not from the index that was drawn.
    Indices are 0-based.
    """

    def __init__(self, source: LabeledSample, v_radius: float, space):
        if len(source) == 0:
            raise InvalidArgumentError("inflated distribution needs a non-empty source")
        if not v_radius > 0:
            raise InvalidArgumentError("reference radius must be positive")
        self.source = source
        self.v_radius = float(v_radius)
        self.space = space

    @property
    def m(self) -> int:
        return len(self.source)

    def provenance(self, Z) -> np.ndarray:
        """Minimal covering source index for each point (-1 if uncovered)."""
        if isinstance(self.space, FiniteSpace):
            Z = np.asarray(Z, dtype=np.int64).reshape(-1)
            D = self.space.D[np.ix_(self.source.points, Z)]
        else:
            Z = self.space.points(Z)
            D = np.stack([self.space.distances(self.source.point(i), Z) for i in range(self.m)])
        covered = D <= self.v_radius
        return np.where(covered.any(axis=0), np.argmax(covered, axis=0), -1)

    def sample(self, rng: np.random.Generator, size: int):
        """Draw ``size`` points; returns ``(points, labels, provenance, drawn_index)``."""
        drawn = rng.integers(0, self.m, size=size)
        if isinstance(self.space, FiniteSpace):
            Z = np.empty(size, dtype=np.int64)
            for j in np.unique(drawn):
                at = np.flatnonzero(drawn == j)
                ball = Ball(self.source.point(j), self.v_radius)
                Z[at] = self.space.sample_ball(ball, rng, at.size)
        else:
            # uniform ball sampling commutes with translation
            origin = np.zeros(self.space.dim)
            offsets = self.space.sample_ball(Ball(origin, self.v_radius), rng, size)
            Z = self.source.points[drawn] + offsets
        prov = self.provenance(Z)
        # the drawn ball always covers its point; this only matters when
        # rounding puts the point a hair outside the computed radius
        prov = np.where(prov < 0, drawn, np.minimum(prov, drawn))
        return Z, self.source.labels[prov], prov, drawn


def sample_inflated(dist: InflatedDistribution, rng: np.random.Generator):
    """One draw from the inflated distribution: ``(point, label, provenance)``."""
    Z, y, prov, _ = dist.sample(rng, 1)
    return Z[0], int(y[0]), int(prov[0])


@dataclass
class FiniteApproximation:
    points: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray
    weights: np.ndarray
    dist: InflatedDistribution

    def __len__(self):
        return len(self.labels)

    def error_mask(self, h: Hypothesis) -> np.ndarray:
        return np.asarray(h(self.points)) != self.labels

    def weighted_error(self, h: Hypothesis, weights: Optional[np.ndarray] = None) -> float:
        w = self.weights if weights is None else weights
        return float(np.dot(w, self.error_mask(h)) / np.sum(w))


def build_finite_approximation(dist: InflatedDistribution, target_size: int,
                               rng: np.random.Generator) -> FiniteApproximation:
    if target_size < 1:
        raise InvalidArgumentError("target size must be at least 1")
    Z, y, prov, _ = dist.sample(rng, int(target_size))
    w = np.full(len(y), 1.0 / len(y))
    return FiniteApproximation(Z, y, prov, w, dist)


def default_approximation_size(m: int, beta: float, cap: int = 100_000) -> int:
    return int(min(10 * m * math.ceil(1.0 / beta), cap))


def theoretical_approximation_size(m: int, doubling_constant: float, vc_majority: int,
                                   beta: float) -> float:
    """4 m^2 C VC(G) / beta^2, reported only."""
    return 4.0 * m * m * doubling_constant * vc_majority / (beta * beta)


def boosting_rounds(m: int, beta: float) -> int:
    """ceil(18 ln(2m / beta)), rounded up to the next odd integer."""
    if m < 1 or not 0 < beta:
        raise InvalidArgumentError("need m >= 1 and beta > 0")
    T = max(1, math.ceil(18.0 * math.log(2.0 * m / beta)))
    return T if T % 2 == 1 else T + 1


def default_block_size(vc: int, m: int) -> int:
    return 3 * vc * math.ceil(math.log(m + 1))


# ---------------------------------------------------------------------------
# boosting


def bbm_weights(T: int, t: int, correct, edge: float = EDGE) -> np.ndarray:
    """Boost-by-majority weights before round ``t + 1`` (``t`` rounds done).

    An example voted correctly ``s`` times so far gets weight proportional to
    the probability that, with each remaining round correct independently with
    probability ``1/2 + edge``, the final vote ends exactly one short of a
    correct majority:
    ``C(T-t-1, floor(T/2)-s) p^(floor(T/2)-s) q^(floor(T/2)-t+s)``.
    Returned weights are normalized to sum 1; all zeros if every example is
    already decided.
    """
    if not 0 <= t < T:
        raise InvalidArgumentError(f"need 0 <= t < T, got t={t}, T={T}")
    s = np.asarray(correct, dtype=np.int64)
    half = T // 2
    rest = T - t - 1
    a = half - s
    b = half - t + s
    valid = (a >= 0) & (b >= 0) & (a <= rest)
    if not np.any(valid):
        return np.zeros(s.shape)
    logw = np.full(s.shape, -np.inf)
    p, q = 0.5 + edge, 0.5 - edge
    lg = np.array([math.lgamma(i + 1) for i in range(rest + 1)])
    av, bv = a[valid], b[valid]
    logw[valid] = lg[rest] - lg[av] - lg[rest - av] + av * math.log(p) + bv * math.log(q)
    w = np.exp(logw - logw[valid].max())
    return w / w.sum()


def weak_learn(approx: FiniteApproximation, weights: np.ndarray, family: HypothesisFamily,
               pert_v: Perturbation, n: int, rng: np.random.Generator,
               max_retries: int = 5) -> Tuple[Hypothesis, LabeledSample, float]:
    """Robust ERM on ``n`` weighted draws mapped back to their source points.

    Returns the hypothesis, the block of source points it was fitted on (in
    first-draw order, duplicates removed) and its exact weighted error.
    """
    source = approx.dist.source
    space = approx.dist.space
    p = np.asarray(weights, dtype=float)
    p = p / p.sum()
    last = None
    for _ in range(max_retries):
        draws = rng.choice(len(approx), size=n, p=p)
        _, first = np.unique(approx.provenance[draws], return_index=True)
        ids = approx.provenance[draws][np.sort(first)]
        block = source.subset(ids)
        h = robust_erm(family, block, pert_v, space)
        err = float(np.dot(p, approx.error_mask(h)))
        last = err
        if err <= WEAK_ERROR_LIMIT:
            return h, block, err
    raise WeakLearnerFailure(f"no weak hypothesis after {max_retries} tries "
                             f"(last weighted error {last:.4f}, n={n})")


@dataclass
class RoundRecord:
    t: int
    n: int
    weak_error: float
    majority_error: Optional[float] = None


@dataclass
class BoostResult:
    vote: MajorityVote
    hypotheses: List[Hypothesis]
    blocks: List[LabeledSample]
    trace: List[RoundRecord]
    T_planned: int
    n: int

    @property
    def training_error(self) -> float:
        errs = [rec.majority_error for rec in self.trace if rec.majority_error is not None]
        return errs[-1]


def majority_training_error(approx: FiniteApproximation, hypotheses) -> float:
    """Unweighted-majority error on the approximation under its base weights."""
    return approx.weighted_error(MajorityVote(tuple(hypotheses)))


def boost_by_majority(approx: FiniteApproximation, family: HypothesisFamily, pert_v: Perturbation,
                      T: int, n: int, rng: np.random.Generator, target: float = 0.0,
                      max_retries: int = 5, max_doublings: int = 4) -> BoostResult:
    """Run up to ``T`` boost-by-majority rounds with edge 1/6.

    The majority error is evaluated after every odd round; boosting stops as
    soon as it is ``<= target``. A weak-learner failure doubles ``n`` and
    retries, up to ``max_doublings`` times.
    """
    if T < 1:
        raise InvalidArgumentError("T must be >= 1")
    base = approx.weights
    correct = np.zeros(len(approx), dtype=np.int64)
    hyps, blocks, trace = [], [], []
    n_used = n
    for t in range(T):
        w = bbm_weights(T, t, correct) * base
        if w.sum() == 0:
            break
        for attempt in range(max_doublings + 1):
            try:
                h, block, err = weak_learn(approx, w, family, pert_v, n_used, rng, max_retries)
                break
            except WeakLearnerFailure:
                if attempt == max_doublings:
                    raise
                n_used *= 2
        hyps.append(h)
        blocks.append(block)
        correct += ~approx.error_mask(h)
        rec = RoundRecord(t + 1, n_used, err)
        trace.append(rec)
        if (t + 1) % 2 == 1:
            votes = len(hyps)
            rec.majority_error = float(np.dot(base, 2 * correct <= votes) / base.sum())
            if rec.majority_error <= target:
                break
    if len(hyps) % 2 == 0:
        # a decided-early stop can land on an even round; drop the last member
        hyps.pop()
        blocks.pop()
        trace.pop()
    return BoostResult(MajorityVote(tuple(hyps)), hyps, blocks, trace, T, n_used)


# ---------------------------------------------------------------------------
# compressed representation


_HEADER = re.compile(r"^tolerant-compression v1 r=(\S+) gamma=(\S+) T=(\d+) n=(\d+) seed=(-?\d+)$")
_ENTRY = re.compile(r"\(([^;()]*);\s*([01])\s*\)")


def _is_int_token(tok: str) -> bool:
    return re.fullmatch(r"-?\d+", tok) is not None


@dataclass
class CompressionOutput:
    blocks: List[LabeledSample]
    r: float
    gamma: float
    T: int
    n: int
    seed: int
    boost: Optional[BoostResult] = field(default=None, repr=False, compare=False)

    @property
    def k(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def v_radius(self) -> float:
        return (1.0 + self.gamma) * self.r

    @property
    def w_radius(self) -> float:
        return self.gamma * self.r

    def to_text(self) -> str:
        lines = [f"tolerant-compression v1 r={self.r!r} gamma={self.gamma!r} "
                 f"T={self.T} n={self.n} seed={self.seed}"]
        for b in self.blocks:
            parts = [str(len(b))]
            for i in range(len(b)):
                pt = b.points[i]
                coords = str(int(pt)) if b.indices else " ".join(repr(float(c)) for c in pt)
                parts.append(f"({coords} ; {int(b.labels[i])})")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CompressionOutput":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ParseError("empty block file")
        mh = _HEADER.match(lines[0])
        if mh is None:
            raise ParseError(f"bad header: {lines[0]!r}")
        try:
            r, gamma = float(mh.group(1)), float(mh.group(2))
        except ValueError as exc:
            raise ParseError(f"bad header number: {exc}") from None
        T, n, seed = int(mh.group(3)), int(mh.group(4)), int(mh.group(5))
        blocks = []
        for ln in lines[1:]:
            head, _, rest = ln.partition(" ")
            if not _is_int_token(head):
                raise ParseError(f"block line must start with its length: {ln!r}")
            entries = _ENTRY.findall(rest)
            if len(entries) != int(head) or _ENTRY.sub("", rest).strip():
                raise ParseError(f"block length mismatch or stray text: {ln!r}")
            toks = [e[0].split() for e in entries]
            if any(len(t) == 0 for t in toks):
                raise ParseError(f"empty coordinates in {ln!r}")
            labels = np.array([int(e[1]) for e in entries])
            indices = all(len(t) == 1 and _is_int_token(t[0]) for t in toks)
            try:
                if indices:
                    pts = np.array([int(t[0]) for t in toks], dtype=np.int64)
                else:
                    if len({len(t) for t in toks}) != 1:
                        raise ParseError(f"ragged coordinates in {ln!r}")
                    pts = np.array([[float(c) for c in t] for t in toks], dtype=float)
            except ValueError as exc:
                raise ParseError(f"bad coordinate in {ln!r}: {exc}") from None
            blocks.append(LabeledSample(pts, labels, indices=indices))
        if len(blocks) != T:
            raise ParseError(f"header says T={T} but file has {len(blocks)} blocks")
        return cls(blocks, r, gamma, T, n, seed)


def decode_hypotheses(out: CompressionOutput, family: HypothesisFamily, space) -> List[Hypothesis]:
    pert = Perturbation(out.v_radius)
    return [robust_erm(family, b, pert, space) for b in out.blocks]


def decompress(out: CompressionOutput, family: HypothesisFamily, space,
               vote_budget: int = 1000) -> SmoothedClassifier:
    """Robust ERM per block, unweighted majority, then smoothing at ``gamma r``."""
    if out.T < 1 or len(out.blocks) != out.T:
        raise ParseError("compression output has no blocks or a wrong block count")
    vote = MajorityVote(tuple(decode_hypotheses(out, family, space)))
    return SmoothedClassifier(vote, out.w_radius, space, vote_budget, out.seed)


def _certifiable(space) -> bool:
    return isinstance(space, FiniteSpace) or (isinstance(space, EuclideanSpace) and space.dim == 1)


def verify_tolerant_compression(s: LabeledSample, out: CompressionOutput, r: float, gamma: float,
                                family: HypothesisFamily, space) -> bool:
    """True iff the decoded classifier has certified adversarial loss 0 on ``s`` at radius ``r``."""
    if not _certifiable(space):
        raise UnsupportedModeError("certification needs a finite or 1-D Euclidean space")
    if out.r != r or out.gamma != gamma:
        raise InvalidArgumentError("radius/tolerance differ from the compression header")
    clf = decompress(out, family, space)
    rep = empirical_adversarial_loss(clf, s, Perturbation(r), Exact(), space)
    return rep.certified and rep.value == 0.0


def check_v_realizable(s: LabeledSample, v_radius: float, family: HypothesisFamily, space) -> Hypothesis:
    pert = Perturbation(v_radius)
    h = robust_erm(family, s, pert, space)
    rep = empirical_adversarial_loss(h, s, pert, Exact(), space)
    if rep.value > 0:
        raise NonRealizableError(
            f"sample is not realizable at reference radius {v_radius}: "
            f"best robust loss {rep.value:.4f}")
    return h


def compress(s: LabeledSample, r: float, gamma: float, family: HypothesisFamily, space,
             beta: Optional[float] = None, seed: int = 0, approx_size: Optional[int] = None,
             T: Optional[int] = None, n: Optional[int] = None, max_attempts: int = 3,
             params: Union[DoublingParameters, float, None] = None) -> CompressionOutput:
    """Encode ``s`` into blocks of its own points.

    ``beta`` defaults to ``lambda_threshold(gamma, params)`` with ``params``
    taken from the space (1 for 1-D, ``dim`` for Euclidean space, and the
    empirical doubling exponent otherwise). Boosting targets a training error
    of ``beta / (2m)``; every attempt is certified on certifiable spaces.
    """
    if not (r > 0 and gamma > 0):
        raise InvalidArgumentError("need r > 0 and gamma > 0")
    if len(s) == 0:
        raise InvalidArgumentError("cannot compress an empty sample")
    m = len(s)
    v = (1.0 + gamma) * r
    check_v_realizable(s, v, family, space)
    if beta is None:
        beta = lambda_threshold(gamma, params if params is not None else _default_zeta_d(space))
    T = T if T is not None else boosting_rounds(m, beta)
    n = n if n is not None else default_block_size(family.vc, m)
    size = approx_size if approx_size is not None else default_approximation_size(m, beta)
    dist = InflatedDistribution(s, v, space)
    pert_v = Perturbation(v)
    failures = []
    for attempt in range(max_attempts):
        rng = substream(seed, "compress", attempt)
        approx = build_finite_approximation(dist, size, rng)
        try:
            boost = boost_by_majority(approx, family, pert_v, T, n, rng, target=beta / (2 * m))
        except WeakLearnerFailure as exc:
            failures.append(str(exc))
            continue
        out = CompressionOutput(boost.blocks, float(r), float(gamma), len(boost.blocks),
                                boost.n, int(seed), boost)
        if boost.training_error > beta / (2 * m):
            failures.append(f"training error {boost.training_error:.3g} above target")
            continue
        if _certifiable(space) and not verify_tolerant_compression(s, out, r, gamma, family, space):
            failures.append("decoded classifier not certified")
            continue
        return out
    raise CompressionFailure(f"compression failed after {max_attempts} attempts: {failures}")


def _default_zeta_d(space) -> float:
    if isinstance(space, EuclideanSpace):
        return float(space.dim)
    from .metric import empirical_doubling_constant
    return math.log2(empirical_doubling_constant(space))


# ---------------------------------------------------------------------------
# bounds and checks


def generalization_bound(m: int, k: int, delta: float) -> float:
    """(k ln m + ln(1/delta)) / (m - k)."""
    if not 0 <= k < m:
        raise InvalidArgumentError(f"need 0 <= k < m, got k={k}, m={m}")
    if not 0 < delta <= 1:
        raise InvalidArgumentError("delta must lie in (0, 1]")
    return (k * math.log(m) + math.log(1.0 / delta)) / (m - k)


def compression_sample_bound(epsilon: float, delta: float, gamma: float,
                             params: Union[DoublingParameters, float], vc: int,
                             setting: str = "realizable") -> float:
    """(vc zeta_d ln(1 + 1/gamma) + ln 1/delta) / epsilon (or epsilon^2 when agnostic)."""
    if not (0 < epsilon < 1 and 0 < delta < 1 and gamma > 0 and vc > 0):
        raise InvalidArgumentError("need epsilon, delta in (0, 1), gamma > 0, vc > 0")
    zd = params.zeta_d if isinstance(params, DoublingParameters) else float(params)
    num = vc * zd * math.log(1.0 + 1.0 / gamma) + math.log(1.0 / delta)
    if setting == "realizable":
        return num / epsilon
    if setting == "agnostic":
        return num / (epsilon * epsilon)
    raise InvalidArgumentError(f"setting must be 'realizable' or 'agnostic', got {setting!r}")


def _max_subarray(v: np.ndarray) -> float:
    best, cur = 0.0, 0.0
    for x in v:
        cur = max(0.0, cur + x)
        best = max(best, cur)
    return best


def epsnet_check(block: LabeledSample, approx: FiniteApproximation, weights: np.ndarray,
                 epsilon: float, family: HypothesisFamily) -> bool:
    """True iff every family member consistent with ``block`` has weighted error <= epsilon.

    ``block`` holds points of the same space as ``approx`` (typically drawn
    from it). Supported for 1-D thresholds and intervals, where the consistent
    set is a parameter range and the worst error is found exactly.
    """
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    x = np.asarray(approx.points, dtype=float).reshape(-1)
    y = approx.labels.astype(bool)
    bx = np.asarray(block.points, dtype=float).reshape(-1)
    by = block.labels.astype(bool)
    if isinstance(family, Thresholds):
        worst = max(_worst_threshold(x, y, w, bx, by, o) for o in family.orientations)
    elif isinstance(family, Intervals):
        worst = _worst_interval(x, y, w, bx, by, family.inside == 1)
    else:
        raise UnsupportedFamilyError(f"epsilon-net check not implemented for {family!r}")
    return worst <= epsilon + 1e-12


def _worst_threshold(x, y, w, bx, by, orient) -> float:
    # consistent boundaries form [lo, hi); the error only changes at approx points
    if orient == LEFT_IS_ONE:
        side_one, side_zero = bx[by], bx[~by]
    else:
        side_one, side_zero = bx[~by], bx[by]
    lo = side_one.max() if side_one.size else -np.inf
    hi = side_zero.min() if side_zero.size else np.inf
    if not lo < hi:
        return -np.inf
    cand = np.concatenate([[lo], x[(x > lo) & (x < hi)]])
    left = x[None, :] <= cand[:, None]
    pred = left if orient == LEFT_IS_ONE else ~left
    return float(((pred != y[None, :]) @ w).max())


def _worst_interval(x, y, w, bx, by, inside_is_one: bool) -> float:
    if not inside_is_one:
        y, by = ~y, ~by
    pos, neg = bx[by], bx[~by]
    if pos.size:
        a_hi, b_lo = pos.min(), pos.max()
        if np.any((neg >= a_hi) & (neg <= b_lo)):
            return -np.inf
        a_lo = neg[neg < a_hi].max() if np.any(neg < a_hi) else -np.inf
        b_hi = neg[neg > b_lo].min() if np.any(neg > b_lo) else np.inf
        # error splits into independent left-end, middle and right-end parts
        mid = float(np.dot(w, ((x >= a_hi) & (x <= b_lo)) & ~y))
        left = (x > a_lo) & (x < a_hi)
        right = (x > b_lo) & (x < b_hi)
        base_left = float(np.dot(w, (x <= a_lo) & y))
        base_right = float(np.dot(w, (x >= b_hi) & y))
        # choosing a: points in [a, a_hi) are predicted 1
        xl, yl, wl = x[left], y[left], w[left]
        order = np.argsort(xl)
        xl, yl, wl = xl[order], yl[order], wl[order]
        # err_left(a) = pos weight left of a + neg weight in [a, a_hi), for a in (a_lo, a_hi]
        pos_cum = np.concatenate([[0.0], np.cumsum(wl * yl)])
        neg_suffix = np.concatenate([np.cumsum((wl * ~yl)[::-1])[::-1], [0.0]])
        left_best = float(np.max(pos_cum + neg_suffix))
        xr, yr, wr = x[right], y[right], w[right]
        order = np.argsort(xr)
        xr, yr, wr = xr[order], yr[order], wr[order]
        neg_prefix = np.concatenate([[0.0], np.cumsum(wr * ~yr)])
        pos_suffix = np.concatenate([np.cumsum((wr * yr)[::-1])[::-1], [0.0]])
        right_best = float(np.max(neg_prefix + pos_suffix))
        return base_left + left_best + mid + right_best + base_right
    # no positives in the block: any interval avoiding the block negatives, or none at all
    total_pos = float(np.dot(w, y))
    cuts = np.sort(neg)
    order = np.argsort(x)
    xs, gain = x[order], np.where(y[order], -w[order], w[order])
    best = 0.0
    seg = np.searchsorted(cuts, xs, side="left")
    on_cut = np.isin(xs, cuts)
    for g in np.unique(seg):
        sel = (seg == g) & ~on_cut
        best = max(best, _max_subarray(gain[sel]))
    return total_pos + best
