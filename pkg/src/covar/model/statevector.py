"""Dense statevector simulation of parametrised circuits.

Qubit 0 is the most significant bit of a basis index, matching the
left-to-right order of Pauli labels and of ``np.kron`` products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg

from covar.errors import NumericalError, ValidationError
from covar.lib.gates import gate_matrix
from covar.model.circuit import (
    Ansatz,
    FixedRotation,
    FixedUnitary,
    Gate,
    HermitianOperator,
    PauliRotation,
)
from covar.model.pauli import PauliString

MAX_DENSE_QUBITS = 12
MAX_SIM_QUBITS = 14
IMAG_TOL = 1e-10
_CHUNK_ELEMENTS = 1 << 22
_SHIFT = math.pi / 2


# ---------------------------------------------------------------------------
# Statevector
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_SIM_QUBITS:
            raise ValidationError(
                f"Statevectors support 1..{MAX_SIM_QUBITS} qubits, got {self.n_qubits}"
            )
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ValidationError(
                f"Expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> Statevector:
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> Statevector:
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _check_state_qubits(a: int, b: int) -> None:
    if a != b:
        raise ValidationError(f"Dimension mismatch: {a} vs {b} qubits")


# ---------------------------------------------------------------------------
# Pauli action in the index domain
# ---------------------------------------------------------------------------

def _index_mask(mask: int, n_qubits: int) -> int:
    out = 0
    for q in range(n_qubits):
        if (mask >> q) & 1:
            out |= 1 << (n_qubits - 1 - q)
    return out


@lru_cache(maxsize=4096)
def _pauli_action(n_qubits: int, x: int, z: int) -> tuple[np.ndarray, np.ndarray]:
    """``(flip, factor)`` with ``(P v)[flip[n]] = factor[n] · v[n]``."""
    xi = _index_mask(x, n_qubits)
    zi = _index_mask(z, n_qubits)
    n = np.arange(1 << n_qubits, dtype=np.int64)
    # bitwise_count returns uint8; cast before signing
    parity = (np.bitwise_count(n & zi) & 1).astype(np.int64)
    factor = (1j ** ((x & z).bit_count() % 4)) * (1 - 2 * parity).astype(complex)
    flip = n ^ xi
    flip.setflags(write=False)
    factor.setflags(write=False)
    return flip, factor


def apply_pauli(p: PauliString, vec: np.ndarray) -> np.ndarray:
    flip, factor = _pauli_action(p.n_qubits, p.x, p.z)
    out = np.empty_like(vec, dtype=complex)
    out[flip] = factor * vec
    return out


def _apply_rotation(p: PauliString, angle: float, vec: np.ndarray) -> np.ndarray:
    return math.cos(angle / 2) * vec - 1j * math.sin(angle / 2) * apply_pauli(p, vec)


def apply_fixed(label: str, targets: tuple[int, ...], vec: np.ndarray, n_qubits: int) -> np.ndarray:
    k = len(targets)
    mat = gate_matrix(label).reshape((2,) * (2 * k))
    psi = vec.reshape((2,) * n_qubits)
    out = np.tensordot(mat, psi, axes=(list(range(k, 2 * k)), list(targets)))
    out = np.moveaxis(out, list(range(k)), list(targets))
    return out.reshape(-1)


def _apply_gate(
    gate: Gate, vec: np.ndarray, theta: np.ndarray, n_qubits: int, shift: float = 0.0
) -> np.ndarray:
    if isinstance(gate, PauliRotation):
        angle = gate.sign * (float(theta[gate.param_index]) + shift)
        return _apply_rotation(gate.generator, angle, vec)
    if isinstance(gate, FixedRotation):
        return _apply_rotation(gate.generator, gate.angle, vec)
    return apply_fixed(gate.label, gate.targets, vec, n_qubits)


def run_circuit(
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    initial: np.ndarray | None = None,
    gate_shift: tuple[int, float] | None = None,
) -> np.ndarray:
    """Apply the gates in order; *gate_shift* offsets one gate's parameter."""
    arr = ansatz.check_theta(theta)
    if initial is None:
        vec = np.zeros(1 << ansatz.n_qubits, dtype=complex)
        vec[0] = 1.0
    else:
        vec = np.asarray(initial, dtype=complex)
    for g, gate in enumerate(ansatz.gates):
        shift = gate_shift[1] if gate_shift is not None and gate_shift[0] == g else 0.0
        vec = _apply_gate(gate, vec, arr, ansatz.n_qubits, shift)
    return vec


# ---------------------------------------------------------------------------
# Preparation and expectations
# ---------------------------------------------------------------------------

def prepare(ansatz: Ansatz, theta: Sequence[float] | np.ndarray) -> Statevector:
    """``U(θ)|0…0⟩``."""
    return Statevector(ansatz.n_qubits, run_circuit(ansatz, theta))


def apply_inverse(ansatz: Ansatz, theta: Sequence[float] | np.ndarray, vec: np.ndarray) -> np.ndarray:
    """``U(θ)† · vec``."""
    return run_circuit(ansatz.inverse(), theta, initial=vec)


def pauli_expectations(state: Statevector, strings: Sequence[PauliString]) -> np.ndarray:
    """Exact ``⟨ψ|P|ψ⟩`` for every string, vectorised over chunks of strings."""
    if not strings:
        return np.zeros(0)
    n = state.n_qubits
    for p in strings:
        _check_state_qubits(p.n_qubits, n)
    psi = state.amplitudes
    dim = state.dim
    idx = np.arange(dim, dtype=np.int64)
    xs = np.array([_index_mask(p.x, n) for p in strings], dtype=np.int64)
    zs = np.array([_index_mask(p.z, n) for p in strings], dtype=np.int64)
    phases = np.array([1j ** (p.y_count % 4) for p in strings])
    out = np.empty(len(strings), dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // dim)
    for start in range(0, len(strings), chunk):
        sl = slice(start, start + chunk)
        flipped = idx[None, :] ^ xs[sl, None]
        parity = (np.bitwise_count(idx[None, :] & zs[sl, None]) & 1).astype(np.int64)
        signs = 1 - 2 * parity
        out[sl] = phases[sl] * np.sum(np.conj(psi[flipped]) * signs * psi[None, :], axis=1)
    residual = float(np.max(np.abs(out.imag)))
    if residual > IMAG_TOL:
        raise NumericalError(f"Pauli expectation has imaginary residual {residual:.3e}")
    return out.real.copy()


def apply_operator(op: HermitianOperator, vec: np.ndarray) -> np.ndarray:
    """``H · vec``."""
    out = np.zeros_like(vec, dtype=complex)
    for c, p in op.terms:
        out += c * apply_pauli(p, vec)
    return out


def expectation(state: Statevector, op: HermitianOperator) -> float:
    """``⟨ψ|H|ψ⟩`` as a real number."""
    _check_state_qubits(op.n_qubits, state.n_qubits)
    return float(op.coefficients @ pauli_expectations(state, op.strings))


def variance(state: Statevector, op: HermitianOperator) -> float:
    """``⟨H²⟩ − ⟨H⟩²`` from the dense action of H."""
    _check_state_qubits(op.n_qubits, state.n_qubits)
    h_psi = apply_operator(op, state.amplitudes)
    mean = np.vdot(state.amplitudes, h_psi).real
    return float(max(np.vdot(h_psi, h_psi).real - mean**2, 0.0))


def operator_matrix(op: HermitianOperator) -> np.ndarray:
    """Dense ``2^N × 2^N`` matrix of *op*."""
    if op.n_qubits > MAX_DENSE_QUBITS:
        raise NumericalError(
            f"Dense matrices are limited to {MAX_DENSE_QUBITS} qubits, got {op.n_qubits}"
        )
    dim = 1 << op.n_qubits
    mat = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for c, p in op.terms:
        flip, factor = _pauli_action(p.n_qubits, p.x, p.z)
        mat[flip, cols] += c * factor
    return mat


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def _rotation_gates(ansatz: Ansatz, n: int) -> list[int]:
    if not 0 <= n < ansatz.n_params:
        raise ValidationError(f"Parameter index {n} out of range [0, {ansatz.n_params})")
    return [
        g for g in ansatz.rotation_indices
        if ansatz.gates[g].param_index == n  # type: ignore[union-attr]
    ]


def shift_rule_derivative(
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    n: int,
    observable: HermitianOperator,
) -> float:
    """``∂⟨O⟩/∂θ_n`` by the ±π/2 shift rule, summed over every occurrence."""
    total = 0.0
    for g in _rotation_gates(ansatz, n):
        plus = Statevector(ansatz.n_qubits, run_circuit(ansatz, theta, gate_shift=(g, _SHIFT)))
        minus = Statevector(ansatz.n_qubits, run_circuit(ansatz, theta, gate_shift=(g, -_SHIFT)))
        total += 0.5 * (expectation(plus, observable) - expectation(minus, observable))
    return total


def state_derivatives(ansatz: Ansatz, theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """Rows ``|∂_n ψ⟩`` by inserting ``-i·sign/2·P`` after each rotation."""
    arr = ansatz.check_theta(theta)
    n_q = ansatz.n_qubits
    out = np.zeros((ansatz.n_params, 1 << n_q), dtype=complex)
    vec = np.zeros(1 << n_q, dtype=complex)
    vec[0] = 1.0
    gates = ansatz.gates
    for g, gate in enumerate(gates):
        vec = _apply_gate(gate, vec, arr, n_q)
        if not isinstance(gate, PauliRotation):
            continue
        branch = (-0.5j * gate.sign) * apply_pauli(gate.generator, vec)
        for later in gates[g + 1:]:
            branch = _apply_gate(later, branch, arr, n_q)
        out[gate.param_index] += branch
    return out


def adjoint_derivatives(
    ansatz: Ansatz, theta: Sequence[float] | np.ndarray, vec: np.ndarray
) -> np.ndarray:
    """Rows ``(∂_n U)† · vec``."""
    arr = ansatz.check_theta(theta)
    n_q = ansatz.n_qubits
    out = np.zeros((ansatz.n_params, 1 << n_q), dtype=complex)
    inverse = ansatz.inverse()
    gates = ansatz.gates
    n_gates = len(gates)
    cur = np.asarray(vec, dtype=complex)
    # inverse.gates[j] is the adjoint of gates[n_gates - 1 - j]
    for j, inv_gate in enumerate(inverse.gates):
        gate = gates[n_gates - 1 - j]
        if isinstance(gate, PauliRotation):
            branch = (0.5j * gate.sign) * apply_pauli(gate.generator, cur)
            for later in inverse.gates[j:]:
                branch = _apply_gate(later, branch, arr, n_q)
            out[gate.param_index] += branch
        cur = _apply_gate(inv_gate, cur, arr, n_q)
    return out


# ---------------------------------------------------------------------------
# Spectra and overlaps
# ---------------------------------------------------------------------------

def exact_eigensystem(op: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and column eigenvectors of the dense matrix."""
    eigenvalues, eigenvectors = scipy.linalg.eigh(operator_matrix(op))
    return eigenvalues, eigenvectors


def fidelity(state: Statevector, reference: Statevector) -> float:
    """``|⟨ref|ψ⟩|²``."""
    _check_state_qubits(state.n_qubits, reference.n_qubits)
    return float(abs(np.vdot(reference.amplitudes, state.amplitudes)) ** 2)


def fidelity_max_basis(state: Statevector) -> tuple[float, int]:
    """Largest computational-basis fidelity and its index (lowest on ties)."""
    probs = state.probabilities
    index = int(np.argmax(probs))
    return float(probs[index]), index
