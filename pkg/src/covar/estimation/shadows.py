"""Classical shadows from random single-qubit Pauli measurements.

Bases are stored as codes ``0 = X``, ``1 = Y``, ``2 = Z``; outcomes as bits
(0 for the +1 eigenvalue). A snapshot estimates a Pauli string of weight
``l`` as ``3^l · Π(±1)`` over its support when every supported qubit was
measured in the matching basis, and 0 otherwise. Batches for the
median-of-means are contiguous in acquisition order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from covar.errors import ValidationError
from covar.estimation.providers import ExpectationProvider, query_rng
from covar.model.pauli import PauliString
from covar.model.statevector import Statevector, apply_fixed, prepare

logger = logging.getLogger(__name__)

BASIS_LETTERS = "XYZ"
_LETTER_CODE = {letter: code for code, letter in enumerate(BASIS_LETTERS)}

# Rotation into the measured basis, gates applied left to right.
_BASIS_ROTATION: dict[int, tuple[str, ...]] = {0: ("H",), 1: ("SDG", "H"), 2: ()}


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    bases: tuple[str, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bases) != len(self.outcomes):
            raise ValidationError("Snapshot bases and outcomes differ in length")


@dataclass(frozen=True, eq=False)
class ShadowSet:
    """Immutable snapshot table: ``bases`` and ``outcomes`` are (snapshots × qubits)."""

    bases: np.ndarray
    outcomes: np.ndarray
    n_batches: int = 1

    def __post_init__(self) -> None:
        bases = np.asarray(self.bases, dtype=np.uint8)
        outcomes = np.asarray(self.outcomes, dtype=np.uint8)
        if bases.ndim != 2 or bases.shape != outcomes.shape:
            raise ValidationError(
                f"Bases {bases.shape} and outcomes {outcomes.shape} must be equal 2-D shapes"
            )
        if np.any(bases > 2) or np.any(outcomes > 1):
            raise ValidationError("Basis codes must be 0..2 and outcomes 0..1")
        if self.n_batches < 1:
            raise ValidationError(f"n_batches must be ≥ 1, got {self.n_batches}")
        if bases.shape[0] < self.n_batches:
            raise ValidationError(
                f"{bases.shape[0]} snapshots cannot fill {self.n_batches} batches"
            )
        bases.setflags(write=False)
        outcomes.setflags(write=False)
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n_qubits(self) -> int:
        return int(self.bases.shape[1])

    def __len__(self) -> int:
        return int(self.bases.shape[0])

    def snapshot(self, index: int) -> Snapshot:
        return Snapshot(
            bases=tuple(BASIS_LETTERS[c] for c in self.bases[index]),
            outcomes=tuple(int(b) for b in self.outcomes[index]),
        )


@dataclass(frozen=True)
class SampleBudget:
    epsilon: float
    delta: float
    locality: int
    n_observables: int
    n_batches: int
    n_per_batch: int

    @property
    def total(self) -> int:
        return self.n_batches * self.n_per_batch


# ---------------------------------------------------------------------------
# Acquisition
# ---------------------------------------------------------------------------

def _rotate(state: Statevector, setting: np.ndarray) -> np.ndarray:
    vec = state.amplitudes
    for q, code in enumerate(setting):
        for label in _BASIS_ROTATION[int(code)]:
            vec = apply_fixed(label, (q,), vec, state.n_qubits)
    return vec


def acquire(
    state: Statevector,
    n_snapshots: int,
    rng_seed: int | Sequence[int] | np.random.Generator | None = None,
    n_batches: int = 1,
) -> ShadowSet:
    """Draw uniform random bases per qubit and Born-sampled outcomes.

    Snapshots sharing a basis setting are sampled together from that
    setting's outcome distribution.
    """
    if n_snapshots < 1:
        raise ValidationError(f"n_snapshots must be ≥ 1, got {n_snapshots}")
    rng = np.random.default_rng(rng_seed)
    n = state.n_qubits
    bases = rng.integers(0, 3, size=(n_snapshots, n), dtype=np.uint8)
    outcomes = np.empty_like(bases)
    settings, inverse = np.unique(bases, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    shifts = np.arange(n - 1, -1, -1)
    for s, setting in enumerate(settings):
        rows = np.flatnonzero(inverse == s)
        probs = np.abs(_rotate(state, setting)) ** 2
        draws = rng.choice(probs.size, size=rows.size, p=probs / probs.sum())
        outcomes[rows] = (draws[:, None] >> shifts[None, :]) & 1
    return ShadowSet(bases, outcomes, n_batches)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

def snapshot_estimates(shadows: ShadowSet, p: PauliString) -> np.ndarray:
    """Single-snapshot estimator values for *p*, one per snapshot."""
    if p.is_identity:
        raise ValidationError("Shadow estimation needs a non-identity string")
    if p.n_qubits != shadows.n_qubits:
        raise ValidationError(
            f"String {p.label} does not act on {shadows.n_qubits} qubits"
        )
    support = list(p.support)
    codes = np.array([_LETTER_CODE[p.letter(q)] for q in support], dtype=np.uint8)
    match = np.all(shadows.bases[:, support] == codes, axis=1)
    parity = shadows.outcomes[:, support].sum(axis=1) & 1
    return np.where(match, (3.0 ** len(support)) * (1 - 2 * parity.astype(float)), 0.0)


def median_of_means(values: np.ndarray, n_batches: int) -> float:
    """Median of the means of *n_batches* contiguous batches."""
    means = [batch.mean() for batch in np.array_split(values, n_batches)]
    return float(np.median(means))


def estimate(shadows: ShadowSet, p: PauliString) -> float:
    if len(shadows) == 0:
        raise ValidationError("Empty shadow set")
    return median_of_means(snapshot_estimates(shadows, p), shadows.n_batches)


def estimate_many(shadows: ShadowSet, strings: Sequence[PauliString]) -> np.ndarray:
    """Estimates for every string from the same snapshots."""
    return np.array([estimate(shadows, p) for p in strings])


def plan_budget(epsilon: float, delta: float, locality: int, n_observables: int) -> SampleBudget:
    """Batches ``K = ⌈2 ln(2M/δ)⌉`` of ``⌈34·3^l/ε²⌉`` snapshots each."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta <= 1:
        raise ValidationError(f"delta must lie in (0, 1], got {delta}")
    if locality < 0:
        raise ValidationError(f"locality must be ≥ 0, got {locality}")
    if n_observables < 1:
        raise ValidationError(f"n_observables must be ≥ 1, got {n_observables}")
    k = max(1, math.ceil(2.0 * math.log(2.0 * n_observables / delta)))
    n_per_batch = math.ceil(34.0 * 3.0**locality / epsilon**2)
    return SampleBudget(epsilon, delta, locality, n_observables, k, n_per_batch)


# ---------------------------------------------------------------------------
# Provider
# ---------------------------------------------------------------------------

class ShadowProvider(ExpectationProvider):
    """Fresh shadows per query; every requested string shares the snapshots."""

    name = "shadows"

    def __init__(self, budget: SampleBudget, seed: int = 0) -> None:
        super().__init__()
        self.budget = budget
        self.seed = seed
        self._snapshots = 0
        logger.debug(
            "Shadow budget: %d batches x %d snapshots", budget.n_batches, budget.n_per_batch
        )

    @property
    def snapshots(self) -> int:
        return self._snapshots

    def _estimate(self, ansatz, theta, strings, query):  # type: ignore[override]
        state = prepare(ansatz, theta)
        shadows = acquire(
            state, self.budget.total, query_rng(self.seed, query), self.budget.n_batches
        )
        with self._lock:
            self._snapshots += len(shadows)
        return estimate_many(shadows, strings)


def shadow_provider(budget: SampleBudget, rng_seed: int = 0) -> ExpectationProvider:
    return ShadowProvider(budget, rng_seed)
