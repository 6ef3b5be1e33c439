"""Multi-concept learners.

erm_multi             exact per-label empirical risk minimization (non-private)
direct_sum_learner    k independent runs of a single-concept base learner
generic_multi_learner one-time sanitization + per-label exponential mechanism
parity_learner        block-wise GF(2) solving + stable vote selection
point_learner         heavy-hitter discovery + stable label-vector selection
subsampled_learner    with-replacement subsampling wrapper
nearest_parity        rounds an arbitrary boolean table to the closest parity

Learners do not enforce their sample-size bounds as hard errors; results carry
a below_sample_bound flag instead, so deliberately under-sampled experiments
(for scaling studies and lower-bound demos) still run.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .domain import (
    POINT,
    Concept,
    ConceptClass,
    EmptyDatabaseError,
    MultiLabeledDatabase,
    Universe,
    dichotomy_projection,
    evaluate_many,
    parity,
    point,
    zero,
)
from .mechanisms import (
    PrivacyLedger,
    PrivacyParams,
    ScoredCandidate,
    compose_advanced,
    compose_basic,
    exponential_mechanism,
    stable_argmax,
)
from .sanitize import answers_to_synthetic, point_sanitizer_rows, sanitize_exhaustive, sanitize_points

MultiHypothesis = tuple[Concept, ...]

LearnerFn = Callable[[MultiLabeledDatabase, np.random.Generator], "LearnResult"]


@dataclass(frozen=True)
class LearnResult:
    """Hypotheses (None when selection aborted) plus the privacy charge schedule.

    details carries learner-specific diagnostics (e.g. hypothesis-set sizes)
    for experiment reporting; it is not part of the privacy surface.
    """

    hypotheses: MultiHypothesis | None
    ledger: PrivacyLedger = field(default_factory=PrivacyLedger)
    below_sample_bound: bool = False
    details: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.hypotheses is None


def erm_multi(db: MultiLabeledDatabase, cclass: ConceptClass) -> MultiHypothesis:
    """Per-label empirical-error minimizer over a finite class.

    The objective separates per label, so each column is solved independently;
    ties break to the lowest concept parameter.
    """
    if db.n == 0:
        raise EmptyDatabaseError("cannot minimize empirical error on an empty database")
    db.universe.require_same(cclass.universe)
    best = np.argmin(erm_mismatch_counts(db, cclass), axis=0)
    return tuple(cclass.concept(int(p)) for p in best)


def erm_mismatch_counts(db: MultiLabeledDatabase, cclass: ConceptClass) -> np.ndarray:
    """Mismatch-count matrix (|C|, k) underlying erm_multi; exposed for oracles."""
    evals = cclass.eval_matrix(db.xs).astype(np.int64)
    labels = db.labels.astype(np.int64)
    return evals @ (1 - labels) + (1 - evals) @ labels


def gf2_solve(bits: int, equations: Iterable[tuple[int, int]]) -> int | None:
    """Solve <a_i, x> = b_i over GF(2); None when inconsistent.

    Rows are bitmasks (coordinate i = bit i). Free variables are fixed to 0,
    so the returned solution is deterministic.
    """
    rows = [(int(a) | (int(b) & 1) << bits) for a, b in equations]
    pivot_cols: list[int] = []
    pos = 0
    for col in range(bits):
        pivot = next((r for r in range(pos, len(rows)) if (rows[r] >> col) & 1), None)
        if pivot is None:
            continue
        rows[pos], rows[pivot] = rows[pivot], rows[pos]
        for r in range(len(rows)):
            if r != pos and (rows[r] >> col) & 1:
                rows[r] ^= rows[pos]
        pivot_cols.append(col)
        pos += 1
    for r in range(pos, len(rows)):
        if rows[r] == 1 << bits:
            return None
    solution = 0
    for row_idx, col in enumerate(pivot_cols):
        solution |= ((rows[row_idx] >> bits) & 1) << col
    return solution


def parity_block_plan(bits: int, epsilon: float, beta: float, delta: float) -> tuple[int, int]:
    """Pinned block schedule: m = ceil(8/eps * ln(4/(beta*delta))) blocks of s = 4*bits rows."""
    m = math.ceil((8.0 / epsilon) * math.log(4.0 / (beta * delta)))
    return m, 4 * bits


def parity_learner(
    db: MultiLabeledDatabase,
    epsilon: float,
    delta: float,
    beta: float,
    rng: np.random.Generator,
) -> LearnResult:
    """Learn k parities exactly (under uniform examples) via block voting.

    The rows are split into m disjoint blocks; each block solves all k label
    columns by GF(2) elimination, contributing one candidate vector (or an
    abstention when some column is inconsistent). A single stable-selection
    step releases the most frequent vector, so the whole run costs
    (epsilon, delta) regardless of k.
    """
    universe = db.universe
    if universe.bit_width is None:
        raise ValueError("parity learner requires a bit-vector universe")
    if db.n == 0:
        raise EmptyDatabaseError("cannot learn from an empty database")
    bits = universe.bit_width
    k = db.k
    m, s_target = parity_block_plan(bits, epsilon, beta, delta)
    below = db.n < m * s_target
    s = max(1, db.n // m)
    m_eff = min(m, db.n // s)

    votes: Counter[tuple[int, ...]] = Counter()
    first_seen: dict[tuple[int, ...], int] = {}
    for t in range(m_eff):
        lo, hi = t * s, (t + 1) * s
        block_xs = db.xs[lo:hi]
        vec: list[int] = []
        for j in range(k):
            sol = gf2_solve(bits, zip(block_xs.tolist(), db.labels[lo:hi, j].tolist()))
            if sol is None:
                break
            vec.append(sol)
        if len(vec) == k:
            votes[tuple(vec)] += 1
            first_seen.setdefault(tuple(vec), t)

    best_vec, best_count, second_count = _top_two_votes(votes, first_seen, k)
    choice = stable_argmax(
        ScoredCandidate(best_vec, float(best_count)),
        ScoredCandidate("runner-up", float(second_count)),
        epsilon,
        delta,
        rng,
    )
    ledger = PrivacyLedger([PrivacyParams(epsilon, delta)])
    if choice is None:
        return LearnResult(None, ledger, below)
    hyps = tuple(parity(universe, mask) for mask in best_vec)
    return LearnResult(hyps, ledger, below)


def _top_two_votes(votes: Counter, first_seen: dict, k: int) -> tuple[tuple[int, ...], int, int]:
    """Top-2 multiplicities over the (implicit) full candidate space.

    Unseen vectors count 0, so an empty or single-entry tally still yields a
    well-defined runner-up score. Ties break to the earliest-observed vector,
    which is deterministic and commutes with label-column permutations.
    """
    if not votes:
        return tuple([0] * k), 0, 0
    ordered = sorted(votes.items(), key=lambda item: (-item[1], first_seen[item[0]]))
    best_vec, best_count = ordered[0]
    second_count = ordered[1][1] if len(ordered) > 1 else 0
    return best_vec, best_count, second_count


def point_rows_bound(alpha: float, beta: float, delta: float, epsilon: float) -> int:
    """Pinned sample bound for the point learner: ceil(64/(alpha*eps) * ln(1/(alpha*beta*delta)))."""
    return math.ceil((64.0 / (alpha * epsilon)) * math.log(1.0 / (alpha * beta * delta)))


def point_learner(
    db: MultiLabeledDatabase,
    alpha: float,
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
    beta: float = 0.1,
) -> LearnResult:
    """Learn k point functions with an (epsilon, delta) charge independent of k.

    Half the budget sanitizes the element frequencies; elements whose released
    frequency reaches alpha/15 form the heavy set G (capped at floor(15/alpha)
    entries). The other half runs stable selection over per-heavy-element
    label vectors, maximizing the minimal count of any selected (x, vector)
    pair. Label j maps to the heavy element whose selected vector has bit j
    set (the lowest such element), else to the constant-zero hypothesis.
    `beta` only informs the sample-size advisory flag.
    """
    if db.n == 0:
        raise EmptyDatabaseError("cannot learn from an empty database")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    universe = db.universe
    k = db.k
    below = db.n < point_rows_bound(alpha, beta, delta, epsilon)
    ledger = PrivacyLedger([PrivacyParams(epsilon / 2, delta / 2), PrivacyParams(epsilon / 2, delta / 2)])

    answers = sanitize_points(db, alpha / 30.0, epsilon / 2.0, delta / 2.0, rng)
    heavy = [x for x in answers.support if answers.answers[x] >= alpha / 15.0]
    cap = int(15.0 / alpha)
    if len(heavy) > cap:
        heavy = sorted(heavy, key=lambda x: (-answers.answers[x], x))[:cap]
        heavy.sort()
    if not heavy:
        # No heavy elements: every selected vector is vacuously all-zero.
        return LearnResult(tuple(zero(universe) for _ in range(k)), ledger, below)

    top1, top2 = _per_element_top_vectors(db, heavy)
    best_q = min(c for c, _ in top1.values())
    # Runner-up objective value: any alternative selection downgrades at least
    # one element to (at best) its second-place vector count, and downgrading
    # exactly one element is optimal, so scan the single-downgrade candidates.
    second_q = 0
    for x_down in heavy:
        others = min((top1[x][0] for x in heavy if x != x_down), default=best_q)
        second_q = max(second_q, min(others, top2[x_down]))
    selected = {x: top1[x][1] for x in heavy}
    choice = stable_argmax(
        ScoredCandidate("selected", float(best_q)),
        ScoredCandidate("runner-up", float(second_q)),
        epsilon / 2.0,
        delta / 2.0,
        rng,
    )
    if choice is None:
        return LearnResult(None, ledger, below)
    hyps: list[Concept] = []
    for j in range(k):
        carriers = [x for x in heavy if selected[x][j] == 1]
        hyps.append(point(universe, carriers[0]) if carriers else zero(universe))
    return LearnResult(tuple(hyps), ledger, below)


def _per_element_top_vectors(db, heavy):
    """Per heavy element: (top count, top vector) and the runner-up count.

    Elements absent from the database get the all-zero vector with count 0.
    Top-vector ties break to the earliest row carrying the vector, which is
    deterministic and commutes with label-column permutations.
    """
    k = db.k
    counts: dict[int, Counter] = {x: Counter() for x in heavy}
    first_row: dict[int, dict[tuple[int, ...], int]] = {x: {} for x in heavy}
    heavy_set = set(heavy)
    for i, (x, row) in enumerate(zip(db.xs.tolist(), db.labels)):
        if x in heavy_set:
            vec = tuple(int(b) for b in row)
            counts[x][vec] += 1
            first_row[x].setdefault(vec, i)
    top1: dict[int, tuple[int, tuple[int, ...]]] = {}
    top2: dict[int, int] = {}
    for x in heavy:
        if not counts[x]:
            top1[x] = (0, tuple([0] * k))
            top2[x] = 0
            continue
        ordered = sorted(counts[x].items(), key=lambda item: (-item[1], first_row[x][item[0]]))
        top1[x] = (ordered[0][1], ordered[0][0])
        top2[x] = ordered[1][1] if len(ordered) > 1 else 0
    return top1, top2


def generic_rows_bound(
    cclass: ConceptClass,
    k: int,
    alpha: float,
    beta: float,
    epsilon: float,
    epsilon_prime: float,
    delta: float,
) -> int:
    """Pinned (unit-constant) sample bound for the generic learner."""
    vc = cclass.vc_dim
    select = (
        (vc / (alpha**3 * epsilon_prime)) * math.log(1.0 / alpha)
        + (1.0 / (alpha * epsilon_prime)) * math.log(k / beta)
        + (vc / alpha**2) * math.log(k / (alpha * beta))
    )
    if delta > 0:
        sanitizer = point_sanitizer_rows(alpha / 10.0, beta / 5.0, delta, epsilon)
    else:
        sanitizer = math.ceil(
            vc * math.log(cclass.universe.size) * math.log(2.0 / alpha) / (alpha**3 * epsilon)
        )
    return sanitizer + math.ceil(select)


def generic_privacy_total(
    k: int,
    epsilon: float,
    epsilon_prime: float,
    delta: float,
    mode: str = "basic",
) -> PrivacyParams:
    """Composed charge of one sanitization plus k exponential-mechanism selections."""
    sanitizer = PrivacyParams(epsilon, delta)
    selections = [PrivacyParams(epsilon_prime)] * k
    if mode == "basic":
        return compose_basic([sanitizer] + selections)
    if mode == "advanced":
        return compose_basic([sanitizer, compose_advanced(selections, delta)])
    raise ValueError(f"unknown composition mode {mode!r}")


def generic_multi_learner(
    db: MultiLabeledDatabase,
    cclass: ConceptClass,
    alpha: float,
    beta: float,
    epsilon: float,
    epsilon_prime: float,
    delta: float,
    rng: np.random.Generator,
    sanitizer: str = "auto",
    synth_size: int | None = None,
) -> LearnResult:
    """Agnostically learn k concepts from one sanitization of the unlabeled data.

    The sanitized database pins down a small hypothesis set H (one witness per
    dichotomy the class realizes on the sanitized support), and each label is
    then resolved by an exponential-mechanism selection over H scored by
    negative mismatch count. Charges (epsilon, delta) once plus k times
    (epsilon_prime, 0).

    sanitizer: "points" routes through the point-query sanitizer (point
    classes, approximate DP), "exhaustive" through the enumerative pure-DP
    sanitizer (synth_size caps its candidate databases at desk scale), "auto"
    picks by class.
    """
    if db.n == 0:
        raise EmptyDatabaseError("cannot learn from an empty database")
    db.universe.require_same(cclass.universe)
    if sanitizer == "auto":
        sanitizer = "points" if (cclass.kind == POINT and delta > 0) else "exhaustive"
    if sanitizer == "points":
        # Point-query error alpha/10 twice (release + reconstruction) bounds the
        # pairwise-xor query error by 2*(alpha/10 + alpha/10) = 2*alpha/5.
        answers = sanitize_points(db, alpha / 10.0, epsilon, delta, rng)
        synth = answers_to_synthetic(answers, alpha / 10.0)
    elif sanitizer == "exhaustive":
        synth = sanitize_exhaustive(db, (cclass, "xor"), alpha / 5.0, epsilon, rng, synth_size=synth_size)
    else:
        raise ValueError(f"unknown sanitizer {sanitizer!r}")

    support = synth.distinct_elements()
    witnesses = list(dichotomy_projection(cclass, support).values())
    labels = db.labels.astype(np.int64)
    evals = np.stack([evaluate_many(h, db.xs) for h in witnesses]).astype(np.int64)
    mismatches = evals @ (1 - labels) + (1 - evals) @ labels  # (|H|, k)

    hyps = []
    for j in range(db.k):
        candidates = [ScoredCandidate(i, -float(mismatches[i, j])) for i in range(len(witnesses))]
        hyps.append(witnesses[exponential_mechanism(candidates, epsilon_prime, 1.0, rng)])

    ledger = PrivacyLedger([PrivacyParams(epsilon, delta)])
    ledger.extend([PrivacyParams(epsilon_prime)] * db.k)
    below = db.n < generic_rows_bound(cclass, max(db.k, 1), alpha, beta, epsilon, epsilon_prime, delta)
    details = {"support_size": int(len(support)), "hypothesis_count": len(witnesses)}
    return LearnResult(tuple(hyps), ledger, below, details)


def direct_sum_learner(
    base: LearnerFn,
    db: MultiLabeledDatabase,
    mode: str,
    rng: np.random.Generator,
    delta_prime: float | None = None,
) -> LearnResult:
    """Run a single-concept learner independently on each label column.

    All runs share the same rows. The result ledger concatenates the base
    charges; compose with basic_total() or advanced_total(delta_prime) to
    match the chosen accounting mode.
    """
    if mode not in ("basic", "advanced"):
        raise ValueError(f"unknown composition mode {mode!r}")
    if mode == "advanced" and delta_prime is None:
        raise ValueError("advanced mode requires delta_prime")
    hyps: list[Concept] = []
    ledger = PrivacyLedger()
    below = False
    for j in range(db.k):
        single = MultiLabeledDatabase(db.universe, db.xs, db.labels[:, j : j + 1])
        result = base(single, rng)
        ledger.extend(result.ledger.charges)
        below = below or result.below_sample_bound
        if result.failed:
            return LearnResult(None, ledger, below)
        hyps.append(result.hypotheses[0])
    return LearnResult(tuple(hyps), ledger, below)


def secrecy_amplification(
    epsilon: float,
    delta: float,
    total_rows: int,
    subsample_rows: int,
) -> tuple[float, float]:
    """Privacy charge of running an n-row mechanism on a with-replacement
    subsample of an m-row database, as stated: (6*eps*m/n, 4*exp(6*eps*m/n)*(m/n)*delta)."""
    if total_rows < 2 * subsample_rows:
        raise ValueError("amplification statement requires m >= 2n")
    ratio = total_rows / subsample_rows
    eps = 6.0 * epsilon * ratio
    return eps, 4.0 * math.exp(eps) * ratio * delta


def subsampled_learner(
    base: LearnerFn,
    subsample_rows: int,
    db: MultiLabeledDatabase,
    rng: np.random.Generator,
) -> LearnResult:
    """Run `base` on a uniform with-replacement subsample of the rows.

    Requires at least 9x the base sample size, turning a distributional
    learner into one accurate on the fixed input database. The returned ledger
    carries the base charges; see secrecy_amplification for the subsampling
    privacy arithmetic.
    """
    if db.n < 9 * subsample_rows:
        raise ValueError(f"need at least 9*{subsample_rows} rows, got {db.n}")
    idx = rng.integers(0, db.n, size=subsample_rows)
    sub = MultiLabeledDatabase(db.universe, db.xs[idx], db.labels[idx])
    return base(sub, rng)


def _fwht(values: np.ndarray) -> np.ndarray:
    out = values.astype(np.int64, copy=True)
    h = 1
    while h < out.size:
        for start in range(0, out.size, 2 * h):
            a = out[start : start + h].copy()
            b = out[start + h : start + 2 * h]
            out[start : start + h] = a + b
            out[start + h : start + 2 * h] = a - b
        h *= 2
    return out


def nearest_parity(table: Sequence[int], universe: Universe) -> Concept:
    """Round a boolean truth table to the parity minimizing disagreement mass
    under the uniform distribution; ties break to the lowest mask.

    Enumerative via a Walsh-Hadamard transform; limited to 12-bit domains.
    """
    if universe.bit_width is None:
        raise ValueError("nearest_parity requires a bit-vector universe")
    if universe.bit_width > 12:
        raise ValueError("nearest_parity supports at most 12 bits")
    bits = np.asarray(table, dtype=np.int64)
    if bits.shape != (universe.size,):
        raise ValueError(f"table must have length {universe.size}")
    signs = 1 - 2 * bits
    spectrum = _fwht(signs)
    disagreements = (universe.size - spectrum) // 2
    return parity(universe, int(np.argmin(disagreements)))
