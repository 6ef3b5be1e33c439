"""Command-line interface.

Subcommands: learn, sanitize, attack, mech, experiment. All randomness comes
from --seed; runs are reproducible byte for byte. Exit codes: 0 success,
1 invalid configuration or arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import fingerprint
from .domain import generalization_error, load_database, sample_database
from .harness import (
    ConfigError,
    TrialReport,
    _draw_targets,
    _learn_universe,
    emit,
    load_config,
    make_attack_learner,
    parse_distribution,
    run_experiment,
)
from .learners import (
    LearnResult,
    direct_sum_learner,
    erm_multi,
    generic_multi_learner,
    parity_learner,
    point_learner,
)
from .mechanisms import (
    PrivacyParams,
    ScoredCandidate,
    compose_advanced,
    compose_basic,
    exponential_mechanism,
    laplace_sample,
)
from .rng import stream
from .sanitize import sanitize_points


def _add_common(parser):
    parser.add_argument("--seed", type=int, required=True, help="master seed (no ambient randomness)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpmulti")
    sub = parser.add_subparsers(dest="command", required=True)

    learn = sub.add_parser("learn", help="run one multi-learning pass on sampled data")
    learn.add_argument("algorithm", choices=("points", "parities", "generic", "direct-sum", "erm"))
    learn.add_argument("--k", type=int, required=True)
    learn.add_argument("--n", type=int, required=True)
    learn.add_argument("--alpha", type=float, default=0.2)
    learn.add_argument("--beta", type=float, default=0.1)
    learn.add_argument("--epsilon", type=float, default=1.0)
    learn.add_argument("--epsilon-prime", type=float, default=None)
    learn.add_argument("--delta", type=float, default=0.01)
    learn.add_argument("--universe", type=int, default=None, help="universe size (indexed classes)")
    learn.add_argument("--d", type=int, default=None, help="bit width (parity class)")
    learn.add_argument("--class", dest="class_kind", default=None, choices=("point", "thresh", "parity"))
    learn.add_argument("--dist", default="uniform")
    learn.add_argument("--targets", default="random")
    _add_common(learn)

    san = sub.add_parser("sanitize", help="differentially private query release")
    san.add_argument("queries", choices=("points",))
    san.add_argument("--alpha", type=float, required=True)
    san.add_argument("--epsilon", type=float, required=True)
    san.add_argument("--delta", type=float, required=True)
    san.add_argument("--input", required=True, help="database file (header + `x y1 .. yk` rows)")
    _add_common(san)

    attack = sub.add_parser("attack", help="fingerprinting-code tracing attack experiments")
    attack.add_argument("code", choices=("boneh-shaw",))
    attack.add_argument("--n", type=int, required=True, help="number of users (<= 8)")
    attack.add_argument("--xi", type=float, required=True, help="code security level")
    attack.add_argument("--trials", type=int, required=True)
    attack.add_argument("--learner", choices=("erm", "points", "generic", "parities"), default="erm")
    attack.add_argument("--variant", choices=("pac", "padded", "parity"), default="pac")
    attack.add_argument("--alpha", type=float, default=0.2)
    attack.add_argument("--length", type=int, default=None)
    _add_common(attack)

    mech = sub.add_parser("mech", help="mechanism demos")
    mech_sub = mech.add_subparsers(dest="mechanism", required=True)
    lap = mech_sub.add_parser("laplace")
    lap.add_argument("--scale", type=float, required=True)
    lap.add_argument("--draws", type=int, default=10)
    _add_common(lap)
    em = mech_sub.add_parser("exponential")
    em.add_argument("--scores", required=True, help="comma list id:score, e.g. a:10,b:0")
    em.add_argument("--epsilon", type=float, required=True)
    em.add_argument("--sensitivity", type=float, default=1.0)
    em.add_argument("--draws", type=int, default=10)
    _add_common(em)
    comp = mech_sub.add_parser("compose")
    comp.add_argument("--epsilon", type=float, required=True)
    comp.add_argument("--delta", type=float, default=0.0)
    comp.add_argument("--count", type=int, required=True, help="number of identical charges")
    comp.add_argument("--mode", choices=("basic", "advanced"), default="basic")
    comp.add_argument("--delta-prime", type=float, default=None)
    comp.add_argument("--format", choices=("csv", "json"), default="csv")
    comp.add_argument("--out", default=None)

    exp = sub.add_parser("experiment", help="run a declarative experiment config")
    exp_sub = exp.add_subparsers(dest="action", required=True)
    run = exp_sub.add_parser("run")
    run.add_argument("--config", required=True)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--format", choices=("csv", "json"), default=None, help="override config format")
    run.add_argument("--out", default=None)
    return parser


def _emit(report: TrialReport, fmt: str, out: str | None) -> None:
    emit(report, fmt, sys.stdout if out is None else out)


def _cmd_learn(args) -> int:
    params = {
        "algorithm": args.algorithm,
        "k": str(args.k),
        "alpha": str(args.alpha),
        "beta": str(args.beta),
        "epsilon": str(args.epsilon),
        "delta": str(args.delta),
        "targets": args.targets,
    }
    if args.universe is not None:
        params["universe"] = str(args.universe)
    if args.d is not None:
        params["d"] = str(args.d)
    if args.class_kind is not None:
        params["class"] = args.class_kind
    universe, cclass = _learn_universe(params)
    rng = stream(args.seed, 0, 0)
    dist = parse_distribution(args.dist, universe)
    targets = _draw_targets(params, cclass, args.k, rng)
    db = sample_database(dist, targets, args.n, rng)

    if args.algorithm == "erm":
        result = LearnResult(erm_multi(db, cclass))
    elif args.algorithm == "parities":
        result = parity_learner(db, args.epsilon, args.delta, args.beta, rng)
    elif args.algorithm == "points":
        result = point_learner(db, args.alpha, args.epsilon, args.delta, rng, beta=args.beta)
    elif args.algorithm == "direct-sum":
        base = lambda sdb, srng: point_learner(sdb, args.alpha, args.epsilon, args.delta, srng, beta=args.beta)
        result = direct_sum_learner(base, db, "basic", rng)
    else:
        if args.epsilon_prime is None:
            raise ConfigError("learn.epsilon_prime: required for the generic learner")
        result = generic_multi_learner(
            db, cclass, args.alpha, args.beta, args.epsilon, args.epsilon_prime, args.delta, rng
        )

    columns = ["label", "hypothesis", "parameter", "target", "error"]
    rows = []
    if result.failed:
        rows = [[j, "bottom", -1, int(targets[j].param), 1.0] for j in range(args.k)]
    else:
        for j, (h, c) in enumerate(zip(result.hypotheses, targets)):
            err = generalization_error(dist, c, h)
            rows.append([j, h.kind, -1 if h.param is None else int(h.param), int(c.param), err])
    meta = {"seed": args.seed, "n": args.n, "failed": result.failed,
            "below_sample_bound": result.below_sample_bound}
    if result.ledger.charges:
        total = result.ledger.basic_total()
        meta["epsilon_total"] = total.epsilon
        meta["delta_total"] = total.delta
    report = TrialReport("learn", columns, rows, meta=meta).rounded()
    _emit(report, args.format, args.out)
    return 0


def _cmd_sanitize(args) -> int:
    db = load_database(args.input)
    rng = stream(args.seed, 0, 0)
    answers = sanitize_points(db, args.alpha, args.epsilon, args.delta, rng)
    columns = ["x", "a_x"]
    rows = [[x, answers.answers[x]] for x in answers.support]
    report = TrialReport(
        "sanitize", columns, rows,
        meta={"seed": args.seed, "n": db.n, "universe": db.universe.size},
    ).rounded()
    _emit(report, args.format, args.out)
    return 0


def _cmd_attack(args) -> int:
    learner = make_attack_learner(
        args.learner, args.variant,
        {"alpha": str(args.alpha)},
    )
    report = fingerprint.attack_experiment(
        learner, args.n, args.xi, args.trials, args.variant, args.alpha, args.seed, length=args.length
    )
    columns = [
        "n_users", "trials", "completeness_rate", "soundness_violation_rate",
        "accuracy_rate", "flagged_rate",
    ]
    rows = [[args.n, args.trials, report.completeness_rate, report.soundness_violation_rate,
             report.accuracy_rate, report.flagged_rate]]
    per_cols = ["trial", "feasible", "accused", "accurate", "flagged"]
    per_rows = [[r["trial"], r["feasible"], r["accused"], r["accurate"], r["flagged"]] for r in report.rows]
    out = TrialReport("attack", columns, rows, per_trial_columns=per_cols,
                      per_trial_rows=per_rows, meta={"seed": args.seed, "length": report.length}).rounded()
    _emit(out, args.format, args.out)
    return 0


def _cmd_mech(args) -> int:
    if args.mechanism == "laplace":
        rng = stream(args.seed, 0, 0)
        draws = laplace_sample(args.scale, rng, size=args.draws)
        report = TrialReport("mech", ["draw", "value"], [[i, float(v)] for i, v in enumerate(draws)],
                             meta={"scale": args.scale, "seed": args.seed})
    elif args.mechanism == "exponential":
        rng = stream(args.seed, 0, 0)
        candidates = []
        for part in args.scores.split(","):
            name, score = part.split(":")
            candidates.append(ScoredCandidate(name.strip(), float(score)))
        picks = [exponential_mechanism(candidates, args.epsilon, args.sensitivity, rng) for _ in range(args.draws)]
        report = TrialReport("mech", ["draw", "choice"], [[i, p] for i, p in enumerate(picks)],
                             meta={"epsilon": args.epsilon, "seed": args.seed})
    else:
        charges = [PrivacyParams(args.epsilon, args.delta)] * args.count
        if args.mode == "basic":
            total = compose_basic(charges)
        else:
            if args.delta_prime is None:
                raise ConfigError("mech.compose: --delta-prime required in advanced mode")
            total = compose_advanced(charges, args.delta_prime)
        report = TrialReport("mech", ["epsilon_total", "delta_total"],
                             [[total.epsilon, total.delta]], meta={"mode": args.mode})
    _emit(report.rounded(), args.format, args.out)
    return 0


def _cmd_experiment(args) -> int:
    try:
        config = load_config(args.config)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
    report = run_experiment(config, threads=args.threads)
    fmt = args.format or config.params.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"{config.kind}.format: expected csv|json, got {fmt!r}")
    _emit(report, fmt, args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "learn":
            return _cmd_learn(args)
        if args.command == "sanitize":
            return _cmd_sanitize(args)
        if args.command == "attack":
            return _cmd_attack(args)
        if args.command == "mech":
            return _cmd_mech(args)
        return _cmd_experiment(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
