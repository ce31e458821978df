"""Expectation-value providers.

Every estimator of Pauli expectations (exact, noisy, shadow-backed) sits
behind :class:`ExpectationProvider` so the covariance math never knows how
the numbers were obtained.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from covar.errors import ValidationError
from covar.model.circuit import Ansatz
from covar.model.pauli import PauliString
from covar.model.statevector import pauli_expectations, prepare


class ExpectationProvider(ABC):
    """Estimates ``⟨ψ(θ)|P|ψ(θ)⟩`` for a batch of Pauli strings.

    Identity strings are answered with exactly 1. Results are clamped to
    ``[-1, 1]``. ``queries`` counts calls to :meth:`expectations`.
    """

    name = "provider"

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.queries = 0

    def _next_query(self) -> int:
        with self._lock:
            index = self.queries
            self.queries += 1
        return index

    @property
    def snapshots(self) -> int:
        """Total measurement snapshots consumed (shadow providers only)."""
        return 0

    def expectations(
        self,
        ansatz: Ansatz,
        theta: Sequence[float] | np.ndarray,
        strings: Sequence[PauliString],
    ) -> np.ndarray:
        arr = ansatz.check_theta(theta)
        for p in strings:
            if p.n_qubits != ansatz.n_qubits:
                raise ValidationError(
                    f"String {p.label} does not act on {ansatz.n_qubits} qubits"
                )
        query = self._next_query()
        out = np.ones(len(strings))
        active = [i for i, p in enumerate(strings) if not p.is_identity]
        if active:
            values = self._estimate(ansatz, arr, [strings[i] for i in active], query)
            out[active] = np.clip(values, -1.0, 1.0)
        return out

    @abstractmethod
    def _estimate(
        self,
        ansatz: Ansatz,
        theta: np.ndarray,
        strings: list[PauliString],
        query: int,
    ) -> np.ndarray:
        """Raw estimates for non-identity *strings*; *query* seeds any noise."""


class ExactProvider(ExpectationProvider):
    """Noiseless expectations from the dense statevector."""

    name = "exact"

    def _estimate(self, ansatz, theta, strings, query):  # type: ignore[override]
        return pauli_expectations(prepare(ansatz, theta), strings)


def query_rng(seed: int, query: int) -> np.random.Generator:
    """Generator for one query; disjoint queries never share a stream."""
    return np.random.default_rng([seed, query])
