"""Differentially private synthetic-data release for counting queries.

Two sanitizers are provided:

* sanitize_points: noisy thresholded release of every point-function count,
  plus a reconstruction of the answers into a small synthetic database.
* sanitize_exhaustive: the exponential mechanism over every candidate
  synthetic database of a fixed size, scored by worst-case query error.
  Exact and exhaustive by design; guarded by an enumeration budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .domain import ConceptClass, EmptyDatabaseError, MultiLabeledDatabase, Universe, xor_eval_matrix
from .mechanisms import ScoredCandidate, exponential_mechanism, exponential_mechanism_pmf, laplace_sample

# Rows of a synthetic database holding residual mass; outside the universe,
# so every counting query evaluates to 0 on them.
SINK = -1


class EnumerationBudgetError(RuntimeError):
    """Candidate count exceeds the configured exhaustive-enumeration budget."""


@dataclass(frozen=True)
class SanitizedAnswers:
    """Sparse map x -> a_x in [0, 1]; absent elements answered 0."""

    universe: Universe
    answers: dict[int, float]

    def answer(self, x: int) -> float:
        self.universe.check_element(x)
        return self.answers.get(int(x), 0.0)

    @property
    def support(self) -> list[int]:
        return sorted(self.answers)

    def as_vector(self) -> np.ndarray:
        vec = np.zeros(self.universe.size)
        for x, a in self.answers.items():
            vec[x] = a
        return vec


@dataclass(frozen=True)
class SyntheticDatabase:
    """Unlabeled synthetic rows; sink_rows carry mass no real element should."""

    universe: Universe
    elements: np.ndarray  # real rows, int64
    sink_rows: int = 0

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=np.int64)
        if self.sink_rows < 0:
            raise ValueError("sink_rows must be non-negative")
        if elements.shape[0] + self.sink_rows < 1:
            raise ValueError("synthetic database must be non-empty")
        if elements.size and (elements.min() < 0 or elements.max() >= self.universe.size):
            raise ValueError("synthetic element outside universe")
        object.__setattr__(self, "elements", elements)

    @property
    def size(self) -> int:
        return int(self.elements.shape[0]) + self.sink_rows

    def frequency(self, x: int) -> float:
        self.universe.check_element(x)
        return float(np.count_nonzero(self.elements == x)) / self.size

    def distinct_elements(self) -> np.ndarray:
        return np.unique(self.elements)


def point_sanitizer_min_rows(alpha: float, epsilon: float, delta: float) -> int:
    """Rows needed for the release-0 tail in the crossing case to sit within delta/2.

    Solving exp(-eps*n*alpha/8 + eps/2) <= delta gives
    n >= 4/alpha + (8 / (eps*alpha)) ln(1/delta).
    """
    return math.ceil(4.0 / alpha + (8.0 / (epsilon * alpha)) * math.log(1.0 / delta))


def point_sanitizer_rows(alpha: float, beta: float, delta: float, epsilon: float) -> int:
    """Pinned sample-size bound for the point sanitizer: ceil(8 ln(16/(a*b*d)) / (a*eps))."""
    return math.ceil(8.0 * math.log(16.0 / (alpha * beta * delta)) / (alpha * epsilon))


def sanitize_points(
    db: MultiLabeledDatabase,
    alpha: float,
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
) -> SanitizedAnswers:
    """Release an approximate answer for every point-function counting query.

    For each x: counts at or below alpha/4 release 0 outright; otherwise the
    count gets Lap(2/(eps*n)) noise and is released only if the noisy value
    exceeds alpha/2 (else 0). Released answers are clamped to [0, 1], which is
    post-processing and privacy-neutral. Costs (epsilon, delta); delta is the
    accounting share of the deterministic release-0 branch, not a noise knob.
    Callers are responsible for supplying enough rows (see
    point_sanitizer_rows); the bound is deliberately not enforced here.
    """
    if db.n == 0:
        raise EmptyDatabaseError("cannot sanitize an empty database")
    for name, value in (("alpha", alpha), ("delta", delta)):
        if not 0 < value < 1:
            raise ValueError(f"{name} must be in (0, 1), got {value}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = db.n
    counts = np.bincount(db.xs, minlength=db.universe.size)
    answers: dict[int, float] = {}
    for x in np.flatnonzero(counts):
        frac = counts[x] / n
        if frac <= alpha / 4.0:
            continue
        noisy = frac + float(laplace_sample(2.0 / (epsilon * n), rng))
        if noisy <= alpha / 2.0:
            continue
        answers[int(x)] = min(max(noisy, 0.0), 1.0)
    return SanitizedAnswers(db.universe, answers)


def answers_to_synthetic(ans: SanitizedAnswers, alpha: float) -> SyntheticDatabase:
    """Reconstruct a small database whose point counts track the answers.

    Each answer is rounded down to a multiple of 1/m with
    m = ceil(1/alpha) + |support|, and residual mass goes to sink rows, so
    max_x |freq(x) - a_x| <= alpha whenever the answers carry total mass <= 1.
    Answer maps with mass > 1 are not representable as frequencies; the
    database then grows past m and the bound degrades gracefully.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    support = ans.support
    m = math.ceil(1.0 / alpha) + len(support)
    rows: list[int] = []
    for x in support:
        rows.extend([x] * int(ans.answers[x] * m))
    sink = max(0, m - len(rows))
    return SyntheticDatabase(ans.universe, np.array(rows, dtype=np.int64), sink_rows=sink)


def _query_matrix(query_class: ConceptClass | tuple[ConceptClass, str], xs: np.ndarray) -> np.ndarray:
    """Evaluation matrix for a class or its pairwise-xor closure ("xor" tag)."""
    if isinstance(query_class, tuple):
        cclass, tag = query_class
        if tag != "xor":
            raise ValueError(f"unknown query-class tag {tag!r}")
        return xor_eval_matrix(cclass, xs)
    return query_class.eval_matrix(xs)


def _query_answers(query_matrix_full: np.ndarray, counts: np.ndarray, total: int) -> np.ndarray:
    return (query_matrix_full @ counts.astype(np.float64)) / total


def sanitize_error(
    db: MultiLabeledDatabase,
    synth: SyntheticDatabase,
    query_class: ConceptClass | tuple[ConceptClass, str],
) -> float:
    """Worst query-answer gap max_c |c(D) - c(D_hat)|, by enumeration."""
    db.universe.require_same(synth.universe)
    full = _query_matrix(query_class, db.universe.elements())
    counts_db = np.bincount(db.xs, minlength=db.universe.size)
    counts_synth = np.bincount(synth.elements, minlength=db.universe.size)
    a = _query_answers(full, counts_db, db.n)
    b = _query_answers(full, counts_synth, synth.size)
    return float(np.abs(a - b).max())


def sanitize_exhaustive(
    db: MultiLabeledDatabase,
    query_class: ConceptClass | tuple[ConceptClass, str],
    alpha: float,
    epsilon: float,
    rng: np.random.Generator,
    synth_size: int | None = None,
    budget: int = 1 << 20,
) -> SyntheticDatabase:
    """Pure-DP sanitizer: exponential mechanism over all size-m databases.

    Candidates are the |X|^m element tuples; the score of a candidate is
    -n * max_c |c(D) - c(candidate)|, sensitivity 1. Exact but exponential,
    so the candidate count is capped by `budget`.
    """
    if db.n == 0:
        raise EmptyDatabaseError("cannot sanitize an empty database")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    size = db.universe.size
    if synth_size is None:
        cclass = query_class[0] if isinstance(query_class, tuple) else query_class
        synth_size = max(1, math.ceil(cclass.vc_dim * math.log(2.0 / min(alpha, 1.0)) / alpha**2))
    n_candidates = size**synth_size
    if n_candidates > budget:
        raise EnumerationBudgetError(
            f"|X|^m = {size}^{synth_size} = {n_candidates} exceeds budget {budget}; "
            "for point queries use sanitize_points instead"
        )
    scored, tuples = _exhaustive_candidates(db, query_class, synth_size)
    idx = exponential_mechanism(scored, epsilon, 1.0, rng)
    return SyntheticDatabase(db.universe, np.array(tuples[idx], dtype=np.int64))


def _exhaustive_candidates(db, query_class, synth_size):
    """Score every candidate tuple; shared by the sampler and its exact oracle."""
    size = db.universe.size
    full = _query_matrix(query_class, db.universe.elements())
    target = _query_answers(full, np.bincount(db.xs, minlength=size), db.n)
    tuples = list(itertools.product(range(size), repeat=synth_size))
    counts = np.zeros((len(tuples), size))
    for i, tup in enumerate(tuples):
        counts[i] = np.bincount(np.array(tup, dtype=np.int64), minlength=size)
    answers = (full @ counts.T) / synth_size  # (queries, candidates)
    max_err = np.abs(answers - target[:, None]).max(axis=0)
    scores = -db.n * max_err
    scored = [ScoredCandidate(i, float(s)) for i, s in enumerate(scores)]
    return scored, tuples


def sanitize_exhaustive_pmf(
    db: MultiLabeledDatabase,
    query_class: ConceptClass | tuple[ConceptClass, str],
    epsilon: float,
    synth_size: int,
) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Exact output distribution of sanitize_exhaustive over candidate tuples."""
    scored, tuples = _exhaustive_candidates(db, query_class, synth_size)
    return exponential_mechanism_pmf(scored, epsilon, 1.0), tuples
