"""Shared fixtures and dense-matrix oracles for the covar tests."""

from __future__ import annotations

from functools import reduce

import numpy as np
import pytest

from covar.model.circuit import Ansatz, HermitianOperator, PauliRotation, build_hea
from covar.model.hamiltonians import SpinRingTask, make_spin_ring
from covar.model.pauli import PauliString
from covar.model.statevector import Statevector

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


# ---------------------------------------------------------------------------
# Oracles (plain helpers, imported by test modules)
# ---------------------------------------------------------------------------

def dense_pauli(p: PauliString | str) -> np.ndarray:
    """Kronecker product with qubit 0 as the leftmost factor."""
    label = p if isinstance(p, str) else p.label
    return reduce(np.kron, [_SINGLE[ch] for ch in label])


def dense_operator(h: HermitianOperator) -> np.ndarray:
    return sum(c * dense_pauli(p) for c, p in h.terms)


def random_state(n_qubits: int, rng: np.random.Generator) -> Statevector:
    amps = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return Statevector(n_qubits, amps / np.linalg.norm(amps))


def random_operator(n_qubits: int, rng: np.random.Generator, n_terms: int = 5, max_weight: int = 2) -> HermitianOperator:
    terms: dict[PauliString, float] = {}
    while len(terms) < n_terms:
        weight = int(rng.integers(1, max_weight + 1))
        support = rng.choice(n_qubits, size=min(weight, n_qubits), replace=False)
        p = PauliString.from_sites(n_qubits, {int(q): "XYZ"[int(rng.integers(3))] for q in support})
        terms[p] = float(rng.uniform(-1, 1))
    return HermitianOperator(tuple((c, p) for p, c in terms.items()))


def dense_covariance(psi: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    """``⟨AB⟩ - ⟨A⟩⟨B⟩``."""
    return np.vdot(psi, a @ b @ psi) - np.vdot(psi, a @ psi) * np.vdot(psi, b @ psi)


def rx(n_qubits: int = 1, qubit: int = 0) -> Ansatz:
    return Ansatz(n_qubits, (PauliRotation(PauliString.single(n_qubits, qubit, "X"), 0),))


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def rng() -> np.random.Generator:
    """Fresh seeded generator per test."""
    return np.random.default_rng(1234)


@pytest.fixture
def spin_ring4() -> SpinRingTask:
    """4-qubit inhomogeneous ring, J=0.1."""
    return make_spin_ring(4, 0.1, seed=7)


@pytest.fixture
def hea4() -> Ansatz:
    """4 qubits, 1 layer: ν = 12."""
    return build_hea(4, 1)
