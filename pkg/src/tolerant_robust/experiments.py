"""Seeded experiment scenarios and CSV reports.

Every replicate draws from its own substream keyed by
``(seed, scenario, cell, replicate)``, so rows do not depend on execution
order, and rows are sorted before writing.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .compression import (build_finite_approximation, check_v_realizable,
                          compress, compression_sample_bound, decode_hypotheses, epsnet_check,
                          generalization_bound, CompressionOutput, InflatedDistribution)
from .config import ExperimentConfig
from .errors import InvalidArgumentError, NonRealizableError, ParseError, TolerantError
from .hypotheses import (LabeledSample, Interval, Intervals, Perturbation, TableHypothesis,
                         Threshold, Thresholds, parse_family, robust_erm)
from .metric import Boundary, EuclideanSpace, FiniteSpace, verify_doubling_euclidean
from .robust_loss import DiscreteMixture, expected_adversarial_loss, parse_mode
from .rng import substream
from .tpas import (CountingLearner, CountingOracle, SmoothedClassifier, TpasConfig,
                   lambda_threshold, error_mass_quantities, perturb_only_train, tpas_sample_bound,
                   tpas_train)

RESULT_COLUMNS = ["scenario", "seed", "replicate", "m", "gamma", "learner", "robust_loss",
                  "certified", "binary_loss", "wall_time_ms", "k", "T", "train_error", "status"]
BOUND_COLUMNS = ["quantity", "zeta_d", "gamma", "epsilon", "delta", "vc", "m", "k", "value"]

COUNTEREXAMPLE_SUCCESS_RATE = 0.95


def default_config(scenario: str) -> ExperimentConfig:
    if scenario == "compare":
        return ExperimentConfig(scenario="compare", r=1.0,
                                distribution="atoms -4:1:0.45 -2:1:0.05 2:0:0.05 4:0:0.45",
                                sample_sizes=[5, 10, 20, 40, 80], replicates=30)
    if scenario == "bounds":
        return ExperimentConfig(scenario="bounds", gammas=[0.1, 0.5, 1.0], replicates=1)
    if scenario == "verify":
        return ExperimentConfig(scenario="verify", replicates=1)
    return ExperimentConfig(scenario=scenario)


# ---------------------------------------------------------------------------
# parsing helpers


def parse_space(text: str):
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind == "euclidean":
        parts = rest.split(":") if rest else ["1"]
        return EuclideanSpace(int(parts[0]), parts[1] if len(parts) > 1 else "L2")
    if kind == "finite":
        if not rest:
            raise ParseError("finite space needs a file path: 'finite:<path>'")
        return FiniteSpace.from_file(rest)
    raise ParseError(f"unknown space spec {text!r}")


def parse_distribution(text: str) -> DiscreteMixture:
    """``atoms x:y:p ...``; coordinates of multi-dimensional atoms join with ``/``."""
    tok = text.split()
    if not tok or tok[0] != "atoms" or len(tok) < 2:
        raise ParseError(f"expected 'atoms x:y:p ...', got {text!r}")
    atoms = []
    for t in tok[1:]:
        parts = t.split(":")
        if len(parts) != 3:
            raise ParseError(f"bad atom {t!r}")
        try:
            coords = [float(c) for c in parts[0].split("/")]
            x = coords[0] if len(coords) == 1 else tuple(coords)
            atoms.append((x, int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ParseError(f"bad atom {t!r}: {exc}") from None
    return DiscreteMixture(atoms)


# ---------------------------------------------------------------------------
# result rows


@dataclass
class ResultRow:
    scenario: str
    seed: int
    replicate: int
    m: int
    gamma: float
    learner: str
    robust_loss: float
    certified: bool
    binary_loss: float
    wall_time_ms: float
    k: Optional[int] = None
    T: Optional[int] = None
    train_error: Optional[float] = None
    status: str = "ok"

    def sort_key(self):
        return (self.scenario, self.learner, self.gamma, self.m, self.replicate)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, columns: List[str], path_or_buffer=None) -> str:
    """Write rows (dataclasses) with a fixed column order; returns the CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        d = asdict(row)
        w.writerow([_cell(d[c]) for c in columns])
    text = buf.getvalue()
    if isinstance(path_or_buffer, str) and path_or_buffer:
        with open(path_or_buffer, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif path_or_buffer is not None and not isinstance(path_or_buffer, str):
        path_or_buffer.write(text)
    return text


def _check_certified(rows: List[ResultRow], mode) -> None:
    from .robust_loss import Exact
    for row in rows:
        if row.certified and not isinstance(mode, Exact):
            raise AssertionError(f"certified row from non-exact evaluation: {row}")


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000.0, 3)


# ---------------------------------------------------------------------------
# counter-example


def run_counterexample(cfg: ExperimentConfig) -> List[ResultRow]:
    """Tolerant TPaS against non-tolerant perturb-only training on thresholds.

    Arm ``tpas`` trains at radius ``r`` with tolerance ``gamma`` and is scored
    at the closed radius ``r``. Arm ``perturb_only`` perturbs inside closed
    balls of radius 1, skips smoothing, and is scored at the open radius 1.
    """
    space = EuclideanSpace(1)
    family = Thresholds()
    dist = parse_distribution(cfg.distribution)
    mode = parse_mode(cfg.mode)
    m = cfg.sample_sizes[0]
    budget_radius = 1.0
    rows = []
    for rep in range(cfg.replicates):
        rng = substream(cfg.seed, "counterexample", "tpas", rep)
        t0 = time.perf_counter()
        s = dist.sample(rng, m, space)
        oracle, learner = CountingOracle(space), CountingLearner()
        tcfg = TpasConfig(cfg.r, cfg.gamma, cfg.vote_budget, seed=cfg.seed + rep)
        status = "ok"
        try:
            clf = tpas_train(family, s, tcfg, space, learner=learner, oracle=oracle, rng=rng)
            if oracle.calls != m or learner.calls != 1:
                status = f"contract:{oracle.calls}/{learner.calls}"
            rep_a = expected_adversarial_loss(clf, dist, Perturbation(cfg.r), mode, space)
            bin_a = expected_adversarial_loss(clf, dist, Perturbation(0.0), mode, space)
            rows.append(ResultRow("counterexample", cfg.seed, rep, m, cfg.gamma, "tpas",
                                  rep_a.value, rep_a.certified, bin_a.value, _ms(t0), status=status))
        except TolerantError as exc:
            rows.append(ResultRow("counterexample", cfg.seed, rep, m, cfg.gamma, "tpas",
                                  float("nan"), False, float("nan"), _ms(t0),
                                  status=type(exc).__name__))
        rng = substream(cfg.seed, "counterexample", "perturb_only", rep)
        t0 = time.perf_counter()
        s = dist.sample(rng, m, space)
        h = perturb_only_train(family, s, budget_radius, space, rng)
        rep_b = expected_adversarial_loss(h, dist, Perturbation(budget_radius, Boundary.OPEN), mode, space)
        bin_b = expected_adversarial_loss(h, dist, Perturbation(0.0), mode, space)
        rows.append(ResultRow("counterexample", cfg.seed, rep, m, 0.0, "perturb_only",
                              rep_b.value, rep_b.certified, bin_b.value, _ms(t0)))
    rows.sort(key=ResultRow.sort_key)
    _check_certified(rows, mode)
    return rows


@dataclass
class CounterexampleSummary:
    replicates: int
    tpas_successes: int
    perturb_only_failures: int
    binary_zero: int

    @property
    def passed(self) -> bool:
        return (self.perturb_only_failures == self.replicates
                and self.tpas_successes >= math.ceil(COUNTEREXAMPLE_SUCCESS_RATE * self.replicates))


def summarize_counterexample(rows: List[ResultRow]) -> CounterexampleSummary:
    a = [r for r in rows if r.learner == "tpas"]
    b = [r for r in rows if r.learner == "perturb_only"]
    return CounterexampleSummary(
        replicates=len(b),
        tpas_successes=sum(1 for r in a if r.certified and r.robust_loss == 0.0 and r.status == "ok"),
        perturb_only_failures=sum(1 for r in b if r.certified and r.robust_loss >= 0.5),
        binary_zero=sum(1 for r in rows if r.binary_loss == 0.0))


# ---------------------------------------------------------------------------
# learner comparison


def _fit(learner: str, family, s: LabeledSample, r: float, gamma: float, space, seed: int,
         vote_budget: int):
    """Returns (classifier, k, T, train_error)."""
    if learner == "tpas":
        return tpas_train(family, s, TpasConfig(r, gamma, vote_budget, seed), space), None, None, None
    if learner == "compression":
        out = compress(s, r, gamma, family, space, seed=seed)
        from .compression import decompress
        return decompress(out, family, space, vote_budget), out.k, out.T, out.boost.training_error
    if learner == "robust_erm":
        return robust_erm(family, s, Perturbation(r), space), None, None, None
    if learner == "perturb_only":
        rng = substream(seed, "perturb_only")
        return perturb_only_train(family, s, (1 + gamma) * r, space, rng), None, None, None
    raise InvalidArgumentError(f"unknown learner {learner!r}")


def run_learner_comparison(cfg: ExperimentConfig) -> List[ResultRow]:
    space = parse_space(cfg.space)
    family = parse_family(cfg.family, space)
    dist = parse_distribution(cfg.distribution)
    mode = parse_mode(cfg.mode)
    if any(not g > 0 for g in cfg.gammas) and any(l in ("tpas", "compression") for l in cfg.learners):
        raise InvalidArgumentError("tolerant learners need gamma > 0 in every grid cell")
    rows = []
    for gi, gamma in enumerate(cfg.gammas):
        for mi, m in enumerate(cfg.sample_sizes):
            for rep in range(cfg.replicates):
                rng = substream(cfg.seed, "compare", gi, mi, rep)
                s = dist.sample(rng, m, space)
                cell_seed = int(rng.integers(0, 1 << 62))
                for learner in cfg.learners:
                    t0 = time.perf_counter()
                    try:
                        h, k, T, tr = _fit(learner, family, s, cfg.r, gamma, space, cell_seed,
                                           cfg.vote_budget)
                        rl = expected_adversarial_loss(h, dist, Perturbation(cfg.r), mode, space)
                        bl = expected_adversarial_loss(h, dist, Perturbation(0.0), mode, space)
                        rows.append(ResultRow("compare", cfg.seed, rep, m, gamma, learner, rl.value,
                                              rl.certified, bl.value, _ms(t0), k, T, tr))
                    except TolerantError as exc:
                        rows.append(ResultRow("compare", cfg.seed, rep, m, gamma, learner,
                                              float("nan"), False, float("nan"), _ms(t0),
                                              status=type(exc).__name__))
    rows.sort(key=ResultRow.sort_key)
    _check_certified(rows, mode)
    return rows


@dataclass
class TrendResult:
    learner: str
    gamma: float
    slope: float
    stderr: float
    z: float
    passed: bool
    cell_means: Dict[int, float] = field(default_factory=dict)


def trend_test(rows: List[ResultRow], z_crit: float = 2.326) -> List[TrendResult]:
    """One-sided test against an increasing loss trend in log2(m).

    Per (learner, gamma), regress per-replicate robust loss on log2(m) by
    least squares; the cell fails when ``slope / stderr > z_crit``.
    """
    out = []
    keys = sorted({(r.learner, r.gamma) for r in rows})
    for learner, gamma in keys:
        sel = [r for r in rows if r.learner == learner and r.gamma == gamma and r.status == "ok"]
        if not sel:
            continue
        x = np.log2([r.m for r in sel])
        y = np.array([r.robust_loss for r in sel])
        means = {m: float(np.mean([r.robust_loss for r in sel if r.m == m]))
                 for m in sorted({r.m for r in sel})}
        if np.ptp(x) == 0:
            out.append(TrendResult(learner, gamma, 0.0, 0.0, 0.0, True, means))
            continue
        xc = x - x.mean()
        slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
        resid = y - y.mean() - slope * xc
        dof = max(1, len(y) - 2)
        se = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(xc, xc)))
        if se == 0:
            z = 0.0 if slope <= 0 else math.inf
        else:
            z = slope / se
        out.append(TrendResult(learner, gamma, slope, se, z, z <= z_crit, means))
    return out


# ---------------------------------------------------------------------------
# bound tables


@dataclass
class BoundRow:
    quantity: str
    zeta_d: Optional[float]
    gamma: Optional[float]
    epsilon: Optional[float]
    delta: Optional[float]
    vc: Optional[int]
    m: Optional[int]
    k: Optional[int]
    value: float


def run_bound_tables(cfg: ExperimentConfig) -> List[BoundRow]:
    """Sample-size scaling of both learners plus the compression generalization bound."""
    rows = []
    for zd in cfg.zeta_d:
        for g in cfg.gammas:
            rows.append(BoundRow("tpas_factor", zd, g, None, None, None, None, None,
                                 (1.0 + 1.0 / g) ** zd))
            rows.append(BoundRow("compression_factor", zd, g, None, None, None, None, None,
                                 zd * math.log(1.0 + 1.0 / g)))
            rows.append(BoundRow("lambda", zd, g, None, None, None, None, None,
                                 lambda_threshold(g, zd)))
            for eps in cfg.epsilons:
                args = (eps, cfg.delta, g, zd, cfg.vc)
                rows.append(BoundRow("tpas_bound", zd, g, eps, cfg.delta, cfg.vc, None, None,
                                     tpas_sample_bound(*args)))
                rows.append(BoundRow("compression_bound_realizable", zd, g, eps, cfg.delta, cfg.vc,
                                     None, None, compression_sample_bound(*args, "realizable")))
                rows.append(BoundRow("compression_bound_agnostic", zd, g, eps, cfg.delta, cfg.vc,
                                     None, None, compression_sample_bound(*args, "agnostic")))
    for m in (100, 1000, 10000):
        for k in (0, 10, 50):
            if k < m:
                rows.append(BoundRow("generalization_bound", None, None, None, cfg.delta, None,
                                     m, k, generalization_bound(m, k, cfg.delta)))
    return rows


# ---------------------------------------------------------------------------
# random instances


def random_error_mass_instance_1d(rng: np.random.Generator):
    """(g, x, y, r, gamma) with error mass around ``x`` near the premise threshold."""
    x = float(rng.uniform(-1, 1))
    r = float(rng.uniform(0.1, 2.0))
    gamma = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
    y = int(rng.integers(0, 2))
    V = (1 + gamma) * r
    lam = lambda_threshold(gamma, 1)
    L = float(rng.uniform(0, 1.5)) * 2 * V * lam
    if rng.random() < 0.5:
        # error region is one tail of the reference ball
        if y == 1:
            g = Threshold(x + V - L, "L")
        else:
            g = Threshold(x - V + L, "L")
    else:
        a = float(rng.uniform(x - V, x + V - L))
        g = Interval(a, a + L, inside=1 - y)
    return g, x, y, r, gamma


def random_finite_instance(rng: np.random.Generator):
    """(space, g, x, y, r, gamma) on a small weighted grid subset."""
    n = int(rng.integers(3, 13))
    dim = int(rng.integers(1, 3))
    cells = rng.choice(16 ** dim, size=n, replace=False)
    coords = np.stack(np.unravel_index(cells, (16,) * dim), axis=1).astype(float)
    weights = rng.uniform(0.2, 3.0, size=n)
    space = FiniteSpace.from_coordinates(coords, weights, "L2" if rng.random() < 0.5 else "Linf")
    y = int(rng.integers(0, 2))
    p_err = float(rng.choice([0.02, 0.1, 0.3, 0.6]))
    table = np.where(rng.random(n) < p_err, 1 - y, y)
    g = TableHypothesis(tuple(int(v) for v in table))
    x = int(rng.integers(0, n))
    d = space.D[x]
    r = float(rng.choice(d[d > 0])) * float(rng.uniform(0.5, 1.5))
    gamma = float(rng.uniform(0.1, 3.0))
    return space, g, x, y, r, gamma


def random_compression_instance(rng: np.random.Generator, m_max: int = 100):
    """(s, r, gamma, family) with ``s`` realizable at the closed reference radius."""
    m = int(rng.integers(2, m_max + 1))
    r = float(rng.uniform(0.1, 0.5))
    gamma = float(rng.uniform(0.1, 1.0))
    V = (1 + gamma) * r
    if rng.random() < 0.7:
        family = Thresholds()
        theta = float(rng.uniform(-1, 1))
        xs, ys = [], []
        while len(xs) < m:
            x = float(rng.uniform(-5, 5))
            if x + V <= theta:
                xs.append(x), ys.append(1)
            elif x - V > theta:
                xs.append(x), ys.append(0)
    else:
        family = Intervals()
        a = float(rng.uniform(-3, 0))
        b = a + 2 * V + float(rng.uniform(0.5, 3))
        xs, ys = [], []
        while len(xs) < m:
            x = float(rng.uniform(-6, 6))
            if a + V <= x <= b - V:
                xs.append(x), ys.append(1)
            elif x + V < a or x - V > b:
                xs.append(x), ys.append(0)
    return LabeledSample(np.array(xs), np.array(ys)), r, gamma, family


# ---------------------------------------------------------------------------
# verification suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    count: int
    failures: int
    detail: str = ""


@dataclass
class VerificationReport:
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> List[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.count - c.failures}/{c.count}"
                + (f" ({c.detail})" if c.detail else "") for c in self.checks]


def check_error_mass_1d(cfg: ExperimentConfig) -> CheckResult:
    rng = substream(cfg.seed, "verify", "mass-1d")
    bad, premise = 0, 0
    for _ in range(cfg.mass_instances):
        g, x, y, r, gamma = random_error_mass_instance_1d(rng)
        q = error_mass_quantities(g, x, y, r, gamma, EuclideanSpace(1))
        premise += q.premise
        bad += not (q.implication_holds and q.certified)
    return CheckResult("error-mass-1d", bad == 0, cfg.mass_instances, bad,
                       f"premise held in {premise}")


def check_error_mass_finite(cfg: ExperimentConfig) -> CheckResult:
    rng = substream(cfg.seed, "verify", "mass-finite")
    bad, premise = 0, 0
    for _ in range(cfg.finite_instances):
        space, g, x, y, r, gamma = random_finite_instance(rng)
        q = error_mass_quantities(g, x, y, r, gamma, space)
        premise += q.premise
        bad += not (q.implication_holds and q.certified)
    return CheckResult("error-mass-finite", bad == 0, cfg.finite_instances, bad,
                       f"premise held in {premise}")


def check_doubling(cfg: ExperimentConfig) -> CheckResult:
    rng = substream(cfg.seed, "verify", "doubling")
    total = bad = 0
    for dim in range(1, 7):
        for norm in ("L2", "Linf"):
            for r in (0.5, 1.0, 3.0):
                for alpha in (1.5, 2.0, 4.0):
                    rep = verify_doubling_euclidean(EuclideanSpace(dim, norm), r, alpha, rng=rng)
                    total += 1
                    bad += not rep.passed
    return CheckResult("doubling-exactness", bad == 0, total, bad)


def brute_force_worst_threshold(approx_x, approx_y, w, block_x, block_y, orient="L") -> float:
    """Worst weighted error over consistent thresholds on a dense candidate grid."""
    vals = np.unique(np.concatenate([approx_x, block_x]))
    mids = 0.5 * (vals[:-1] + vals[1:]) if vals.size > 1 else np.zeros(0)
    cand = np.concatenate([[-np.inf], vals, mids, [vals.max() + 1.0 if vals.size else 0.0]])
    worst = -np.inf
    for th in cand:
        h = Threshold(th, orient)
        if np.all(h(block_x) == block_y):
            worst = max(worst, float(np.dot(w, h(approx_x) != approx_y)))
    return worst


def check_epsnet(cfg: ExperimentConfig) -> CheckResult:
    rng = substream(cfg.seed, "verify", "epsnet")
    bad = 0
    for _ in range(cfg.epsnet_instances):
        s, r, gamma, _ = random_compression_instance(rng, m_max=8)
        family = Thresholds()
        try:
            check_v_realizable(s, (1 + gamma) * r, family, EuclideanSpace(1))
        except NonRealizableError:
            continue
        approx = build_finite_approximation(
            InflatedDistribution(s, (1 + gamma) * r, EuclideanSpace(1)), 40, rng)
        w = rng.uniform(0.1, 1.0, size=len(approx))
        w /= w.sum()
        pick = rng.choice(len(approx), size=int(rng.integers(0, 6)), replace=False)
        block = LabeledSample(approx.points[pick].reshape(-1), approx.labels[pick])
        eps = float(rng.uniform(0, 0.6))
        fast = epsnet_check(block, approx, w, eps, family)
        worst = brute_force_worst_threshold(approx.points.reshape(-1), approx.labels, w,
                                            block.points.reshape(-1), block.labels)
        bad += fast != (worst <= eps + 1e-12)
    return CheckResult("epsnet-vs-bruteforce", bad == 0, cfg.epsnet_instances, bad)


@dataclass
class CorpusRun:
    index: int
    m: int
    family: str
    success: bool
    certified: bool
    decay_ok: bool
    final_ok: bool
    roundtrip_ok: bool
    decode_ok: bool
    k: int
    T: int
    error: str = ""


def run_compression_corpus(cfg: ExperimentConfig, m_max: int = 100) -> List[CorpusRun]:
    from .compression import verify_tolerant_compression
    space = EuclideanSpace(1)
    runs = []
    for i in range(cfg.corpus_size):
        rng = substream(cfg.seed, "verify", "corpus", i)
        s, r, gamma, family = random_compression_instance(rng, m_max)
        m = len(s)
        beta = lambda_threshold(gamma, 1)
        try:
            out = compress(s, r, gamma, family, space, beta=beta, seed=cfg.seed + i)
        except TolerantError as exc:
            runs.append(CorpusRun(i, m, family.spec(), False, False, False, False, False, False,
                                  0, 0, f"{type(exc).__name__}: {exc}"))
            continue
        trace = [(rec.t, rec.majority_error) for rec in out.boost.trace
                 if rec.majority_error is not None]
        decay_ok = all(err <= math.exp(-t / 18.0) for t, err in trace)
        final_ok = out.boost.training_error <= beta / (2 * m)
        text = out.to_text()
        back = CompressionOutput.from_text(text)
        roundtrip_ok = back.to_text() == text and all(
            np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)
            for a, b in zip(out.blocks, back.blocks))
        decode_ok = decode_hypotheses(back, family, space) == list(out.boost.hypotheses)
        cert = verify_tolerant_compression(s, back, r, gamma, family, space)
        runs.append(CorpusRun(i, m, family.spec(), True, cert, decay_ok, final_ok, roundtrip_ok,
                              decode_ok, out.k, out.T))
    return runs


def check_compression_corpus(cfg: ExperimentConfig) -> CheckResult:
    runs = run_compression_corpus(cfg)
    bad = [r for r in runs if not (r.success and r.certified and r.decay_ok and r.final_ok
                                   and r.roundtrip_ok and r.decode_ok)]
    return CheckResult("compression-corpus", not bad, len(runs), len(bad),
                       "; ".join(f"#{r.index} {r.error}" for r in bad[:3]))


def check_tie_rule(cfg: ExperimentConfig, strict: bool = False) -> CheckResult:
    """3-point line, base labels (1, 0, 0), smoothing radius 1: the vote at 0 is 1/2 -> 1."""
    space = FiniteSpace.from_coordinates(np.array([[0.0], [1.0], [2.0]]))
    clf = SmoothedClassifier(TableHypothesis((1, 0, 0)), 1.0, space, strict=strict)
    got = int(clf([0])[0])
    return CheckResult("finite-tie-rule", got == 1, 1, int(got != 1), f"prediction {got}")


def check_tpas_contract(cfg: ExperimentConfig) -> CheckResult:
    space = EuclideanSpace(1)
    dist = parse_distribution("atoms -1:1:0.5 1:0:0.5")
    bad = total = 0
    for m in (1, 57, 200):
        rng = substream(cfg.seed, "verify", "tpas-contract", m)
        s = dist.sample(rng, m, space)
        oracle, learner = CountingOracle(space), CountingLearner()
        cfg_t = TpasConfig(0.9, 0.1, cfg.vote_budget, cfg.seed)
        tpas_train(Thresholds(), s, cfg_t, space, learner=learner, oracle=oracle, rng=rng)
        total += 1
        bad += not (oracle.calls == m and learner.calls == 1
                    and all(rad == cfg_t.v_radius for rad in oracle.radii))
    return CheckResult("tpas-contract", bad == 0, total, bad)


def check_closed_arm_realizability(cfg: ExperimentConfig) -> CheckResult:
    """Closed balls of radius 1 around -1 and 1 meet at 0: must surface a realizability error."""
    s = LabeledSample(np.array([-1.0, 1.0]), np.array([1, 0]))
    try:
        check_v_realizable(s, 1.0, Thresholds(), EuclideanSpace(1))
    except NonRealizableError as exc:
        return CheckResult("closed-arm-realizability", True, 1, 0, str(exc))
    return CheckResult("closed-arm-realizability", False, 1, 1, "no error raised")


VERIFICATION_CHECKS: Dict[str, Callable[[ExperimentConfig], CheckResult]] = {
    "error-mass-1d": check_error_mass_1d,
    "error-mass-finite": check_error_mass_finite,
    "doubling-exactness": check_doubling,
    "epsnet-vs-bruteforce": check_epsnet,
    "compression-corpus": check_compression_corpus,
    "finite-tie-rule": check_tie_rule,
    "tpas-contract": check_tpas_contract,
    "closed-arm-realizability": check_closed_arm_realizability,
}


def run_verification_suite(cfg: ExperimentConfig, only: Optional[List[str]] = None) -> VerificationReport:
    checks = []
    for name, fn in VERIFICATION_CHECKS.items():
        if only and name not in only:
            continue
        try:
            checks.append(fn(cfg))
        except Exception as exc:  # a crashing check is a failed check, not a crashed suite
            checks.append(CheckResult(name, False, 0, 1, f"{type(exc).__name__}: {exc}"))
    return VerificationReport(checks)
