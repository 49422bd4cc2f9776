"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import sys

from .compression import CompressionOutput, compress, decompress
from .config import ExperimentConfig, parse_config_text
from .errors import InvalidArgumentError, ParseError, TolerantError
from .experiments import (BOUND_COLUMNS, RESULT_COLUMNS, default_config, parse_distribution,
                          parse_space, run_bound_tables, run_counterexample,
                          run_learner_comparison, run_verification_suite,
                          summarize_counterexample, trend_test, write_csv)
from .hypotheses import Perturbation, parse_family
from .robust_loss import empirical_adversarial_loss, parse_mode
from .rng import substream
from .tpas import CountingLearner, CountingOracle, TpasConfig, tpas_train

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


def _load_config(args, scenario: str) -> ExperimentConfig:
    cfg = default_config(scenario)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = parse_config_text(fh.read())
        cfg = ExperimentConfig.from_dict({**_as_raw(cfg), **raw})
    return cfg.with_overrides(seed=args.seed, replicates=args.replicates,
                              out=args.out if args.out else None)


def _as_raw(cfg: ExperimentConfig) -> dict:
    out = {}
    for k, v in vars(cfg).items():
        out[k] = " ".join(str(x) for x in v) if isinstance(v, list) else str(v)
    return out


def _emit(text: str, path: str):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_counterexample(args) -> int:
    cfg = _load_config(args, "counterexample")
    rows = run_counterexample(cfg)
    write_csv(rows, RESULT_COLUMNS, cfg.out or None)
    summ = summarize_counterexample(rows)
    print(f"perturb-only robust loss >= 0.5: {summ.perturb_only_failures}/{summ.replicates}")
    print(f"TPaS certified robust loss 0:    {summ.tpas_successes}/{summ.replicates}")
    return EXIT_OK if summ.passed else EXIT_CHECK


def cmd_compare(args) -> int:
    cfg = _load_config(args, "compare")
    rows = run_learner_comparison(cfg)
    write_csv(rows, RESULT_COLUMNS, cfg.out or None)
    ok = True
    for tr in trend_test(rows, cfg.trend_z):
        ok &= tr.passed
        means = " ".join(f"m={m}:{v:.4f}" for m, v in tr.cell_means.items())
        print(f"{'PASS' if tr.passed else 'FAIL'} {tr.learner} gamma={tr.gamma} "
              f"z={tr.z:.2f} {means}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_bounds(args) -> int:
    cfg = _load_config(args, "bounds")
    text = write_csv(run_bound_tables(cfg), BOUND_COLUMNS)
    _emit(text, cfg.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args, "verify")
    report = run_verification_suite(cfg, args.only)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK


def _sample(cfg: ExperimentConfig, space, tag: str):
    rng = substream(cfg.seed, tag)
    return parse_distribution(cfg.distribution).sample(rng, cfg.sample_sizes[0], space)


def cmd_tpas_run(args) -> int:
    cfg = _load_config(args, "tpas-run")
    space = parse_space(cfg.space)
    family = parse_family(cfg.family, space)
    s = _sample(cfg, space, "tpas-run")
    oracle, learner = CountingOracle(space), CountingLearner()
    clf = tpas_train(family, s, TpasConfig(cfg.r, cfg.gamma, cfg.vote_budget, cfg.seed), space,
                     learner=learner, oracle=oracle)
    rep = empirical_adversarial_loss(clf, s, Perturbation(cfg.r), parse_mode(cfg.mode), space)
    _emit(clf.to_text() + "\n", cfg.out)
    print(f"oracle calls {oracle.calls}, learner calls {learner.calls}, "
          f"empirical robust loss {rep.value} (certified={rep.certified})", file=sys.stderr)
    return EXIT_OK


def cmd_compress_run(args) -> int:
    cfg = _load_config(args, "compress-run")
    space = parse_space(cfg.space)
    family = parse_family(cfg.family, space)
    s = _sample(cfg, space, "compress-run")
    out = compress(s, cfg.r, cfg.gamma, family, space, seed=cfg.seed)
    _emit(out.to_text(), cfg.out)
    print(f"m={len(s)} k={out.k} T={out.T} n={out.n} "
          f"training error {out.boost.training_error}", file=sys.stderr)
    return EXIT_OK


def cmd_decompress(args) -> int:
    cfg = _load_config(args, "decompress")
    space = parse_space(cfg.space)
    family = parse_family(cfg.family, space)
    with open(args.blocks, encoding="utf-8") as fh:
        out = CompressionOutput.from_text(fh.read())
    _emit(decompress(out, family, space, cfg.vote_budget).to_text() + "\n", cfg.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' config file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output path (CSV, block file or classifier text)")
    common.add_argument("--replicates", type=int, help="replicates per cell (overrides config)")

    p = argparse.ArgumentParser(prog="tolerant-robust",
                                description="Tolerant adversarially robust learning experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("demo-counterexample", parents=[common],
                   help="tolerant vs non-tolerant training on the two-point distribution"
                   ).set_defaults(func=cmd_counterexample)
    sub.add_parser("compare", parents=[common], help="learner comparison over m and gamma grids"
                   ).set_defaults(func=cmd_compare)
    sub.add_parser("bounds", parents=[common], help="sample-size bound tables"
                   ).set_defaults(func=cmd_bounds)
    v = sub.add_parser("verify", parents=[common], help="run all brute-force oracle checks")
    v.add_argument("--only", nargs="*", help="run only the named checks")
    v.set_defaults(func=cmd_verify)
    sub.add_parser("tpas-run", parents=[common], help="train one TPaS classifier"
                   ).set_defaults(func=cmd_tpas_run)
    sub.add_parser("compress-run", parents=[common], help="compress one sample to a block file"
                   ).set_defaults(func=cmd_compress_run)
    d = sub.add_parser("decompress", parents=[common], help="decode a block file")
    d.add_argument("blocks", help="block file to decode")
    d.set_defaults(func=cmd_decompress)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TolerantError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
