"""Core randomized primitives: Laplace noise, the exponential mechanism,
stable selection of a maximizer, and (epsilon, delta) composition accounting.

Every mechanism has an exact-distribution companion so privacy and utility
claims can be checked against closed forms rather than sampled twice.
Logarithms in mechanism thresholds are natural logs throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) differential privacy guarantee."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class ScoredCandidate:
    """A selection candidate with its (finite) quality score."""

    id: Hashable
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"candidate score must be finite, got {self.score}")


@dataclass
class PrivacyLedger:
    """Accumulates (epsilon, delta) charges for later composition."""

    charges: list[PrivacyParams] = field(default_factory=list)

    def charge(self, epsilon: float, delta: float = 0.0) -> None:
        self.charges.append(PrivacyParams(epsilon, delta))

    def extend(self, params: Sequence[PrivacyParams]) -> None:
        self.charges.extend(params)

    def basic_total(self) -> PrivacyParams:
        return compose_basic(self.charges)

    def advanced_total(self, delta_prime: float) -> PrivacyParams:
        return compose_advanced(self.charges, delta_prime)


def compose_basic(charges: Sequence[PrivacyParams]) -> PrivacyParams:
    """Coordinate-wise sum: m runs of (eps_i, delta_i) cost (sum eps, sum delta)."""
    if not charges:
        raise ValueError("cannot compose an empty ledger")
    eps = math.fsum(c.epsilon for c in charges)
    delta = math.fsum(c.delta for c in charges)
    return PrivacyParams(eps, delta)


def compose_advanced(charges: Sequence[PrivacyParams], delta_prime: float) -> PrivacyParams:
    """Advanced composition of m identical (eps, delta) charges.

    eps' = sqrt(2 m ln(1/delta')) * eps + 2 m eps^2, delta' extra slack:
    total (eps', m delta + delta'). Requires homogeneous charges.
    """
    if not charges:
        raise ValueError("cannot compose an empty ledger")
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta_prime must be in (0, 1), got {delta_prime}")
    first = charges[0]
    if any(c != first for c in charges[1:]):
        raise ValueError("advanced composition requires identical charges")
    m = len(charges)
    eps = math.sqrt(2 * m * math.log(1 / delta_prime)) * first.epsilon + 2 * m * first.epsilon**2
    return PrivacyParams(eps, m * first.delta + delta_prime)


def laplace_sample(scale: float, rng: np.random.Generator, size: int | None = None):
    """Draw Lap(scale) by inverting the CDF of a single uniform per sample.

    One RNG consumption per draw keeps replay deterministic under seeding.
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_sf(t: float, scale: float) -> float:
    """P[Lap(scale) >= t], exact."""
    if t >= 0:
        return 0.5 * math.exp(-t / scale)
    return 1.0 - 0.5 * math.exp(t / scale)


def exponential_mechanism_pmf(
    candidates: Sequence[ScoredCandidate],
    epsilon: float,
    sensitivity: float,
) -> np.ndarray:
    """Exact output pmf: P[f] proportional to exp(epsilon * score(f) / (2 sensitivity)).

    Scores are max-shifted before exponentiation; the shift cancels in the
    normalization, so the pmf is unchanged and overflow-free.
    """
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    scores = np.array([c.score for c in candidates], dtype=np.float64)
    logits = epsilon * scores / (2.0 * sensitivity)
    weights = np.exp(logits - logits.max())
    return weights / weights.sum()


def exponential_mechanism(
    candidates: Sequence[ScoredCandidate],
    epsilon: float,
    sensitivity: float,
    rng: np.random.Generator,
) -> Hashable:
    """Sample a candidate id with probability proportional to exp(eps*score/2s)."""
    pmf = exponential_mechanism_pmf(candidates, epsilon, sensitivity)
    idx = int(np.searchsorted(np.cumsum(pmf), rng.random(), side="right"))
    idx = min(idx, len(candidates) - 1)
    return candidates[idx].id


def stable_argmax(
    best: ScoredCandidate,
    second: ScoredCandidate,
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
) -> Hashable | None:
    """Release the argmax only when its lead over the runner-up is noisily large.

    gap_hat = (best - second) + Lap(1/epsilon); output best.id when
    gap_hat >= (1/epsilon) ln(1/delta), else None. The runner-up is never
    released. Satisfies (epsilon, delta)-DP for sensitivity-1 scores.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    gap = best.score - second.score
    if gap < 0:
        raise ValueError(f"best score {best.score} below second {second.score}")
    gap_hat = gap + float(laplace_sample(1.0 / epsilon, rng))
    if gap_hat < math.log(1.0 / delta) / epsilon:
        return None
    return best.id


def stable_argmax_pmf(gap: float, epsilon: float, delta: float) -> tuple[float, float]:
    """Exact (P[release argmax], P[bottom]) of stable_argmax at the given gap."""
    if gap < 0:
        raise ValueError("gap must be non-negative")
    threshold = math.log(1.0 / delta) / epsilon
    p_top = laplace_sf(threshold - gap, 1.0 / epsilon)
    return p_top, 1.0 - p_top


def stable_argmax_over(
    candidates: Sequence[ScoredCandidate],
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
) -> Hashable | None:
    """Convenience wrapper scanning a candidate list for its top two scores."""
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    ordered = sorted(candidates, key=lambda c: -c.score)
    if len(ordered) == 1:
        # A lone candidate leads by an unbounded gap; release it outright.
        return ordered[0].id
    return stable_argmax(ordered[0], ordered[1], epsilon, delta, rng)


def dp_bound_holds(
    pmf_p: np.ndarray,
    pmf_q: np.ndarray,
    epsilon: float,
    delta: float,
    tol: float = 1e-9,
) -> bool:
    """Check P[T] <= e^eps Q[T] + delta for every outcome set T.

    It suffices to check the maximizing set T* = {o : p(o) > e^eps q(o)};
    tol absorbs float rounding in the exactly computed pmfs.
    """
    p = np.asarray(pmf_p, dtype=np.float64)
    q = np.asarray(pmf_q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"outcome sets differ: {p.shape} vs {q.shape}")
    excess = p - math.exp(epsilon) * q
    worst = excess[excess > 0].sum()
    return bool(worst <= delta + tol)
