"""Experiment harness: declarative configs, seeded trial execution, reports.

Configs are INI files (key = value sections) with no embedded code. Every
trial draws its randomness from a stream keyed by (seed, point index, trial
index), so reports are byte-identical across runs and across worker counts.
"""

from __future__ import annotations

import configparser
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import fingerprint
from .domain import (
    PARITY,
    POINT,
    THRESH,
    ConceptClass,
    Distribution,
    MultiLabeledDatabase,
    Universe,
    generalization_error,
    sample_database,
    vc_sample_size,
)
from .learners import (
    LearnResult,
    direct_sum_learner,
    erm_multi,
    generic_multi_learner,
    generic_privacy_total,
    generic_rows_bound,
    parity_block_plan,
    parity_learner,
    point_learner,
    point_rows_bound,
)
from .rng import stream
from .sanitize import sanitize_points

LEARN_ALGORITHMS = ("points", "parities", "generic", "direct-sum", "erm")


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


def plan_sample_size(
    algorithm: str,
    *,
    cclass: ConceptClass | None = None,
    k: int = 1,
    alpha: float | None = None,
    beta: float | None = None,
    epsilon: float | None = None,
    delta: float | None = None,
    epsilon_prime: float | None = None,
    agnostic: bool = False,
) -> int:
    """Planning sample size for each learner, with this package's pinned constants."""
    if algorithm == "erm":
        return vc_sample_size(cclass.vc_dim, alpha, beta, "agnostic" if agnostic else "realizable")
    if algorithm == "parities":
        m, s = parity_block_plan(cclass.universe.bit_width, epsilon, beta, delta)
        return m * s
    if algorithm in ("points", "direct-sum"):
        return point_rows_bound(alpha, beta, delta, epsilon)
    if algorithm == "generic":
        return generic_rows_bound(cclass, k, alpha, beta, epsilon, epsilon_prime, delta)
    raise ValueError(f"unknown algorithm tag {algorithm!r}")


def format_float(value: float) -> str:
    return f"{value:.9g}"


def _round9(value):
    if isinstance(value, float):
        return float(format_float(value))
    return value


@dataclass
class TrialReport:
    """Aggregate rows per sweep point, plus optional per-trial rows."""

    kind: str
    columns: list[str]
    rows: list[list]
    per_trial_columns: list[str] | None = None
    per_trial_rows: list[list] | None = None
    meta: dict = field(default_factory=dict)

    def rounded(self) -> "TrialReport":
        rows = [[_round9(v) for v in row] for row in self.rows]
        per_rows = None
        if self.per_trial_rows is not None:
            per_rows = [[_round9(v) for v in row] for row in self.per_trial_rows]
        meta = {key: _round9(v) for key, v in self.meta.items()}
        return TrialReport(self.kind, list(self.columns), rows, self.per_trial_columns, per_rows, meta)


def emit(report: TrialReport, fmt: str, destination) -> None:
    """Write a report as CSV (single table) or JSON (full structure).

    CSV carries the per-trial table when present, otherwise the aggregates.
    Floats are printed at 9 significant digits in both formats.
    """
    if fmt == "csv":
        text = to_csv(report)
    elif fmt == "json":
        text = to_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {destination}: {exc}") from exc


def to_csv(report: TrialReport) -> str:
    if report.per_trial_rows is not None:
        columns, rows = report.per_trial_columns, report.per_trial_rows
    else:
        columns, rows = report.columns, report.rows
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list]]:
    """Inverse of to_csv; numeric fields come back as int or float."""
    lines = [line for line in text.splitlines() if line]
    columns = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = []
        for fieldtext in line.split(","):
            try:
                row.append(int(fieldtext))
            except ValueError:
                try:
                    row.append(float(fieldtext))
                except ValueError:
                    row.append(fieldtext)
        rows.append(row)
    return columns, rows


def to_json(report: TrialReport) -> str:
    rounded = report.rounded()
    payload = {
        "kind": rounded.kind,
        "columns": rounded.columns,
        "rows": rounded.rows,
        "per_trial_columns": rounded.per_trial_columns,
        "per_trial_rows": rounded.per_trial_rows,
        "meta": rounded.meta,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_json(text: str) -> TrialReport:
    payload = json.loads(text)
    return TrialReport(
        kind=payload["kind"],
        columns=payload["columns"],
        rows=payload["rows"],
        per_trial_columns=payload["per_trial_columns"],
        per_trial_rows=payload["per_trial_rows"],
        meta=payload["meta"],
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description parsed from an INI file."""

    kind: str
    trials: int
    seed: int
    sweep_axis: str | None
    sweep_values: tuple[int, ...]
    params: dict

    def points(self) -> Sequence[int | None]:
        return self.sweep_values if self.sweep_axis else (None,)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from exc
    if "experiment" not in parser:
        raise ConfigError("experiment: section missing")
    exp = parser["experiment"]
    kind = exp.get("kind", "").strip()
    if kind not in ("learn", "sanitize", "attack"):
        raise ConfigError(f"experiment.kind: expected learn|sanitize|attack, got {kind!r}")
    try:
        trials = int(exp.get("trials", ""))
    except ValueError:
        raise ConfigError("experiment.trials: integer required")
    if trials < 1:
        raise ConfigError(f"experiment.trials: must be >= 1, got {trials}")
    if "seed" not in exp:
        raise ConfigError("experiment.seed: required (no ambient randomness)")
    try:
        seed = int(exp["seed"])
    except ValueError:
        raise ConfigError("experiment.seed: integer required")
    sweep_axis = exp.get("sweep", "").strip() or None
    sweep_values: tuple[int, ...] = ()
    if sweep_axis:
        raw = exp.get("values", "").split()
        if not raw:
            raise ConfigError("experiment.values: required when sweep is set")
        try:
            sweep_values = tuple(int(v) for v in raw)
        except ValueError:
            raise ConfigError("experiment.values: integers required")
        if any(b <= a for a, b in zip(sweep_values, sweep_values[1:])):
            raise ConfigError("experiment.values: must be strictly increasing")
    if kind not in parser:
        raise ConfigError(f"{kind}: section missing")
    params = dict(parser[kind])
    return ExperimentConfig(kind, trials, seed, sweep_axis, sweep_values, params)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _need(params: dict, section: str, key: str, cast: Callable, default=None):
    if key not in params:
        if default is not None:
            return default
        raise ConfigError(f"{section}.{key}: required")
    try:
        return cast(params[key])
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {params[key]!r}")


def parse_distribution(spec: str, universe: Universe) -> Distribution:
    spec = spec.strip()
    if spec == "uniform":
        return Distribution.uniform(universe)
    if spec.startswith("pointmass:"):
        return Distribution.point_mass(universe, int(spec.split(":", 1)[1]))
    if spec.startswith("weights:"):
        weights = [float(w) for w in spec.split(":", 1)[1].split(",")]
        return Distribution.from_weights(universe, weights)
    with open(spec) as fh:
        weights = [float(line) for line in fh if line.strip()]
    return Distribution.from_weights(universe, weights)


def _learn_universe(params: dict) -> tuple[Universe, ConceptClass]:
    algorithm = params.get("algorithm", "")
    class_kind = params.get("class", "parity" if algorithm == "parities" else "point")
    if class_kind == "parity" or algorithm == "parities":
        d = _need(params, "learn", "d", int)
        universe = Universe.bitvectors(d)
        return universe, ConceptClass(PARITY, universe)
    size = _need(params, "learn", "universe", int)
    universe = Universe.indexed(size)
    kinds = {"point": POINT, "thresh": THRESH}
    if class_kind not in kinds:
        raise ConfigError(f"learn.class: expected point|thresh|parity, got {class_kind!r}")
    return universe, ConceptClass(kinds[class_kind], universe)


def _draw_targets(params: dict, cclass: ConceptClass, k: int, rng: np.random.Generator):
    spec = params.get("targets", "random").strip()
    if spec == "random":
        return tuple(cclass.concept(int(p)) for p in rng.integers(0, cclass.universe.size, size=k))
    try:
        fixed = [int(p) for p in spec.split(",")]
    except ValueError:
        raise ConfigError(f"learn.targets: expected 'random' or comma list, got {spec!r}")
    if len(fixed) != k:
        raise ConfigError(f"learn.targets: expected {k} parameters, got {len(fixed)}")
    return tuple(cclass.concept(p) for p in fixed)


def _static_charge(algorithm: str, params: dict, k: int) -> tuple[float, float]:
    """Charge each algorithm is expected to report, per its composition schedule."""
    eps = float(params.get("epsilon", 0) or 0)
    delta = float(params.get("delta", 0) or 0)
    if algorithm == "erm":
        return 0.0, 0.0
    if algorithm in ("points", "parities"):
        return eps, delta
    if algorithm == "direct-sum":
        return k * eps, k * delta
    if algorithm == "generic":
        eps_prime = float(params.get("epsilon_prime", 0) or 0)
        total = generic_privacy_total(k, eps, eps_prime, delta, "basic")
        return total.epsilon, total.delta
    raise ConfigError(f"learn.algorithm: unknown {algorithm!r}")


def run_learn_trial(config: ExperimentConfig, n: int, point_idx: int, trial: int) -> tuple[bool, float, float, float]:
    params = config.params
    algorithm = params.get("algorithm", "")
    if algorithm not in LEARN_ALGORITHMS:
        raise ConfigError(f"learn.algorithm: expected one of {LEARN_ALGORITHMS}, got {algorithm!r}")
    k = _need(params, "learn", "k", int)
    alpha = _need(params, "learn", "alpha", float, default=0.2)
    beta = _need(params, "learn", "beta", float, default=0.1)
    eps = _need(params, "learn", "epsilon", float, default=1.0)
    delta = _need(params, "learn", "delta", float, default=0.0)
    universe, cclass = _learn_universe(params)
    rng = stream(config.seed, point_idx, trial)
    dist = parse_distribution(params.get("dist", "uniform"), universe)
    targets = _draw_targets(params, cclass, k, rng)
    db = sample_database(dist, targets, n, rng)

    if algorithm == "erm":
        result = LearnResult(erm_multi(db, cclass))
    elif algorithm == "parities":
        result = parity_learner(db, eps, delta, beta, rng)
    elif algorithm == "points":
        result = point_learner(db, alpha, eps, delta, rng, beta=beta)
    elif algorithm == "direct-sum":
        base = lambda sdb, srng: point_learner(sdb, alpha, eps, delta, srng, beta=beta)
        result = direct_sum_learner(base, db, params.get("mode", "basic"), rng)
    else:
        eps_prime = _need(params, "learn", "epsilon_prime", float)
        result = generic_multi_learner(db, cclass, alpha, beta, eps, eps_prime, delta, rng)

    if result.ledger.charges:
        total = result.ledger.basic_total()
        eps_total, delta_total = total.epsilon, total.delta
    else:
        eps_total = delta_total = 0.0
    expected = _static_charge(algorithm, params, k)
    if not (math.isclose(eps_total, expected[0], abs_tol=1e-9) and math.isclose(delta_total, expected[1], abs_tol=1e-9)):
        raise RuntimeError(f"ledger total ({eps_total}, {delta_total}) != static charge {expected}")

    if result.failed:
        return False, 1.0, eps_total, delta_total
    max_err = max(generalization_error(dist, c, h) for c, h in zip(targets, result.hypotheses))
    if algorithm == "parities":
        success = all(h.param == c.param for h, c in zip(result.hypotheses, targets))
    else:
        success = max_err <= alpha
    return success, max_err, eps_total, delta_total


def run_sanitize_trial(config: ExperimentConfig, n: int, point_idx: int, trial: int) -> tuple[bool, float, float, float]:
    params = config.params
    size = _need(params, "sanitize", "universe", int)
    alpha = _need(params, "sanitize", "alpha", float)
    eps = _need(params, "sanitize", "epsilon", float)
    delta = _need(params, "sanitize", "delta", float)
    universe = Universe.indexed(size)
    rng = stream(config.seed, point_idx, trial)
    dist = parse_distribution(params.get("dist", "uniform"), universe)
    xs = dist.sample(n, rng)
    db = MultiLabeledDatabase.unlabeled(universe, xs)
    answers = sanitize_points(db, alpha, eps, delta, rng)
    truth = np.bincount(db.xs, minlength=size) / db.n
    max_err = float(np.abs(answers.as_vector() - truth).max())
    return max_err <= alpha, max_err, eps, delta


def make_attack_learner(name: str, variant: str, params: dict) -> "fingerprint.LearnerFn":
    """Map a config learner name to a callable on attack databases."""
    alpha = float(params.get("alpha", 0.2))
    beta = float(params.get("beta", 0.1))
    eps = float(params.get("epsilon", 1.0))
    delta = float(params.get("delta", 0.01))
    eps_prime = float(params.get("epsilon_prime", 1.0))
    if name == "erm":
        kind = PARITY if variant == "parity" else THRESH

        def run_erm(db, rng):
            return LearnResult(erm_multi(db, ConceptClass(kind, db.universe)))

        return run_erm
    if name == "points":
        return lambda db, rng: point_learner(db, alpha, eps, delta, rng, beta=beta)
    if name == "parities":
        return lambda db, rng: parity_learner(db, eps, delta, beta, rng)
    if name == "generic":
        kind = PARITY if variant == "parity" else THRESH
        # Attack databases have <= 8 users; a size-6 synthetic database keeps
        # the exhaustive sanitizer inside its enumeration budget.
        return lambda db, rng: generic_multi_learner(
            db, ConceptClass(kind, db.universe), alpha, beta, eps, eps_prime, delta, rng,
            sanitizer="exhaustive", synth_size=6,
        )
    raise ConfigError(f"attack.learner: unknown {name!r}")


def run_experiment(config: ExperimentConfig, threads: int = 1) -> TrialReport:
    """Execute all sweep points and trials; deterministic for any thread count."""
    if config.kind == "attack":
        return _run_attack(config)
    runner = run_learn_trial if config.kind == "learn" else run_sanitize_trial
    axis = config.sweep_axis or "n"
    columns = [axis, "trials", "success_rate", "mean_max_error", "epsilon_total", "delta_total"]
    rows = []
    for point_idx, point in enumerate(config.points()):
        n = point if point is not None else _need(config.params, config.kind, "n", int)
        tasks = range(config.trials)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(lambda t: runner(config, n, point_idx, t), tasks))
        else:
            outcomes = [runner(config, n, point_idx, t) for t in tasks]
        success = sum(1 for ok, *_ in outcomes if ok)
        mean_err = math.fsum(err for _, err, *_ in outcomes) / config.trials
        eps_totals = {format_float(o[2]) for o in outcomes}
        delta_totals = {format_float(o[3]) for o in outcomes}
        if len(eps_totals) != 1 or len(delta_totals) != 1:
            raise RuntimeError("trials of one point reported different ledger totals")
        rows.append(
            [n, config.trials, success / config.trials, mean_err, outcomes[0][2], outcomes[0][3]]
        )
    return TrialReport(config.kind, columns, rows, meta={"seed": config.seed}).rounded()


def _run_attack(config: ExperimentConfig) -> TrialReport:
    params = config.params
    n_users = _need(params, "attack", "n_users", int)
    xi = _need(params, "attack", "xi", float)
    variant = params.get("variant", "pac").strip()
    alpha = float(params.get("alpha", 0.2))
    learner_name = params.get("learner", "erm").strip()
    length = int(params["length"]) if "length" in params else None
    learner = make_attack_learner(learner_name, variant, params)
    report = fingerprint.attack_experiment(
        learner, n_users, xi, config.trials, variant, alpha, config.seed, length=length
    )
    columns = [
        "n_users",
        "trials",
        "completeness_rate",
        "soundness_violation_rate",
        "accuracy_rate",
        "flagged_rate",
    ]
    rows = [
        [
            n_users,
            config.trials,
            report.completeness_rate,
            report.soundness_violation_rate,
            report.accuracy_rate,
            report.flagged_rate,
        ]
    ]
    per_cols = ["trial", "feasible", "accused", "accurate", "flagged"]
    per_rows = [[r["trial"], r["feasible"], r["accused"], r["accurate"], r["flagged"]] for r in report.rows]
    return TrialReport(
        "attack", columns, rows, per_trial_columns=per_cols, per_trial_rows=per_rows,
        meta={"seed": config.seed, "length": report.length},
    ).rounded()
