"""Covariance functions, their Jacobian, and the orthogonal-pool variant.

For a constraint ``O_k`` and ``H = Σ_a h_a H_a`` the covariance is
``f_k = Σ_a h_a (⟨P_ka⟩ + i⟨Q_ka⟩) - ⟨H⟩⟨O_k⟩`` where ``P_ka`` / ``Q_ka`` come
from :func:`~covar.model.pauli.symmetrized_products`. Only Pauli expectation
values are needed, so every estimate goes through an
:class:`~covar.estimation.providers.ExpectationProvider`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse

from covar.errors import AlreadyConverged, NumericalError, ValidationError
from covar.estimation.providers import ExpectationProvider
from covar.model.circuit import Ansatz, HermitianOperator
from covar.model.pauli import PauliString, symmetrized_products
from covar.model.statevector import (
    MAX_DENSE_QUBITS,
    Statevector,
    adjoint_derivatives,
    apply_inverse,
    apply_operator,
    apply_pauli,
    run_circuit,
    state_derivatives,
)

IMAG_TOL = 1e-9
_SHIFT = math.pi / 2


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StackedSystem:
    """Real and imaginary parts stacked: top half real, bottom half imaginary."""

    J_tilde: np.ndarray
    f_tilde: np.ndarray

    def __post_init__(self) -> None:
        if self.J_tilde.shape[0] != self.f_tilde.shape[0] or self.f_tilde.shape[0] % 2:
            raise ValidationError(
                f"Inconsistent stacked shapes {self.J_tilde.shape} / {self.f_tilde.shape}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.f_tilde))

    def unstack(self) -> tuple[np.ndarray, np.ndarray]:
        """``(f, J)`` as complex arrays."""
        half = self.f_tilde.shape[0] // 2
        f = self.f_tilde[:half] + 1j * self.f_tilde[half:]
        J = self.J_tilde[:half] + 1j * self.J_tilde[half:]
        return f, J


@dataclass(frozen=True)
class OrthogonalPool:
    """Operators coupling ``|0…0⟩`` to each other basis state of the rotated frame.

    Member ``k`` (``1 ≤ k < 2^N``) has covariance ``⟨k|U†HU|0⟩``.
    """

    n_qubits: int

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_DENSE_QUBITS:
            raise ValidationError(
                f"Orthogonal pools support 1..{MAX_DENSE_QUBITS} qubits, got {self.n_qubits}"
            )

    def __len__(self) -> int:
        return (1 << self.n_qubits) - 1


@dataclass(frozen=True, eq=False)
class CovarianceSystem:
    """Covariances and Jacobian over one constraint sample.

    Constraints are Pauli strings, or basis indices ``k ≥ 1`` for the
    orthogonal pool.
    """

    constraints: tuple[PauliString | int, ...]
    f: np.ndarray
    J: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        if self.J.ndim != 2 or self.J.shape[0] != self.f.shape[0]:
            raise ValidationError(
                f"Jacobian rows {self.J.shape} do not match f length {self.f.shape}"
            )
        if len(self.constraints) != self.f.shape[0]:
            raise ValidationError("One covariance per constraint is required")

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.f))

    def stack(self) -> StackedSystem:
        return stack(self)


def stack(system: CovarianceSystem) -> StackedSystem:
    return StackedSystem(
        J_tilde=np.vstack([system.J.real, system.J.imag]),
        f_tilde=np.concatenate([system.f.real, system.f.imag]),
    )


def stack_vector(f: np.ndarray) -> np.ndarray:
    return np.concatenate([f.real, f.imag])


# ---------------------------------------------------------------------------
# Assembly plan
# ---------------------------------------------------------------------------

class CovariancePlan:
    """Linear map from deduplicated Pauli expectations to covariances.

    ``f = M @ e - ⟨H⟩ e[obs]`` with ``⟨H⟩ = h @ e[terms]``; the same map
    applied column-wise to derivative vectors gives the Jacobian.
    """

    def __init__(self, constraints: Sequence[PauliString], h: HermitianOperator) -> None:
        if not constraints:
            raise ValidationError("At least one constraint is required")
        index: dict[PauliString, int] = {}

        def col(p: PauliString) -> int:
            if p not in index:
                index[p] = len(index)
            return index[p]

        rows: list[int] = []
        cols: list[int] = []
        vals: list[complex] = []
        obs: list[int] = []
        terms = [col(p) for p in h.strings]
        for k, o in enumerate(constraints):
            if o.n_qubits != h.n_qubits:
                raise ValidationError(
                    f"Constraint {o.label} does not act on {h.n_qubits} qubits"
                )
            if o.is_identity:
                raise ValidationError("Constraints must be non-identity")
            obs.append(col(o))
            for coeff, term in h.terms:
                prod, comm = symmetrized_products(o, term)
                if prod is not None:
                    rows.append(k)
                    cols.append(col(prod.string))
                    vals.append(coeff * prod.sign)
                else:
                    assert comm is not None
                    rows.append(k)
                    cols.append(col(comm.string))
                    vals.append(1j * coeff * comm.sign)
        self.constraints = tuple(constraints)
        self.strings: list[PauliString] = list(index)
        self.matrix = scipy.sparse.csr_matrix(
            (np.asarray(vals, dtype=complex), (rows, cols)),
            shape=(len(constraints), len(self.strings)),
        )
        self.obs = np.asarray(obs, dtype=int)
        self.terms = np.asarray(terms, dtype=int)
        self.coefficients = h.coefficients

    def energy(self, e: np.ndarray) -> float:
        return float(self.coefficients @ e[self.terms])

    def covariances(self, e: np.ndarray) -> np.ndarray:
        return self.matrix @ e - self.energy(e) * e[self.obs]

    def jacobian(self, e: np.ndarray, de: np.ndarray) -> np.ndarray:
        """Product rule over ``de`` (strings × parameters)."""
        d_energy = self.coefficients @ de[self.terms]
        return (
            self.matrix @ de
            - np.outer(e[self.obs], d_energy)
            - self.energy(e) * de[self.obs]
        )


def expectation_gradients(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    strings: Sequence[PauliString],
) -> np.ndarray:
    """Shift-rule derivatives (strings × ν), two provider calls per rotation.

    Shared parameters are expanded to one per rotation and the columns
    summed back to their owners.
    """
    arr = ansatz.check_theta(theta)
    expanded, owner = ansatz.expanded()
    base = arr[owner]
    out = np.zeros((len(strings), ansatz.n_params))
    for m in range(expanded.n_params):
        shifted = base.copy()
        shifted[m] += _SHIFT
        plus = provider.expectations(expanded, shifted, strings)
        shifted[m] -= 2 * _SHIFT
        minus = provider.expectations(expanded, shifted, strings)
        out[:, owner[m]] += 0.5 * (plus - minus)
    return out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def covariance_vector(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    constraints: Sequence[PauliString],
    h: HermitianOperator,
) -> np.ndarray:
    """All ``f_k`` from a single provider call over the deduplicated strings."""
    plan = CovariancePlan(constraints, h)
    e = provider.expectations(ansatz, theta, plan.strings)
    return plan.covariances(e)


def covariance(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    o_k: PauliString,
    h: HermitianOperator,
) -> complex:
    return complex(covariance_vector(provider, ansatz, theta, [o_k], h)[0])


def covariance_system(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    constraints: Sequence[PauliString],
    h: HermitianOperator,
) -> CovarianceSystem:
    """``f`` and ``J`` together in ``2ν + 1`` provider calls."""
    arr = ansatz.check_theta(theta)
    plan = CovariancePlan(constraints, h)
    e = provider.expectations(ansatz, arr, plan.strings)
    de = expectation_gradients(provider, ansatz, arr, plan.strings)
    return CovarianceSystem(
        constraints=plan.constraints,
        f=plan.covariances(e),
        J=plan.jacobian(e, de),
        theta=arr.copy(),
    )


def jacobian(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    constraints: Sequence[PauliString],
    h: HermitianOperator,
) -> np.ndarray:
    return covariance_system(provider, ansatz, theta, constraints, h).J


def variance_from_covariances(f_over_Q: np.ndarray, h: np.ndarray | HermitianOperator) -> float:
    """``Var[H] = Σ_a h_a Cov(H_a, H)`` for covariances over H's own terms."""
    coeffs = h.coefficients if isinstance(h, HermitianOperator) else np.asarray(h, dtype=float)
    f = np.asarray(f_over_Q)
    if f.shape != coeffs.shape:
        raise ValidationError(f"Length mismatch: {f.shape} covariances vs {coeffs.shape} terms")
    value = complex(coeffs @ f)
    if abs(value.imag) > IMAG_TOL:
        raise NumericalError(f"Variance has imaginary residual {value.imag:.3e}")
    return value.real


# ---------------------------------------------------------------------------
# Dense helpers
# ---------------------------------------------------------------------------

def _check_dense(n_qubits: int) -> None:
    if n_qubits > MAX_DENSE_QUBITS:
        raise NumericalError(
            f"Dense covariance paths are limited to {MAX_DENSE_QUBITS} qubits, got {n_qubits}"
        )


def exact_covariances(
    state: Statevector, strings: Sequence[PauliString], h: HermitianOperator
) -> np.ndarray:
    """``⟨O_k H⟩ - ⟨O_k⟩⟨H⟩`` straight from the amplitudes."""
    psi = state.amplitudes
    h_psi = apply_operator(h, psi)
    energy = np.vdot(psi, h_psi).real
    out = np.empty(len(strings), dtype=complex)
    for k, o in enumerate(strings):
        o_psi = apply_pauli(o, psi)
        out[k] = np.vdot(o_psi, h_psi) - np.vdot(psi, o_psi).real * energy
    return out


def covariance_matrix(state: Statevector, strings: Sequence[PauliString]) -> np.ndarray:
    """``C_kl = Cov(O_k, O_l)`` over the given strings."""
    psi = state.amplitudes
    vecs = np.array([apply_pauli(p, psi) for p in strings])
    means = (vecs @ psi.conj()).real
    return vecs.conj() @ vecs.T - np.outer(means, means)


def orthogonal_pool_covariances(
    ansatz: Ansatz, theta: Sequence[float] | np.ndarray, h: HermitianOperator
) -> np.ndarray:
    """``f_k = ⟨k|U†HU|0⟩`` for ``k = 1 … 2^N - 1``."""
    _check_dense(ansatz.n_qubits)
    psi = run_circuit(ansatz, theta)
    return apply_inverse(ansatz, theta, apply_operator(h, psi))[1:]


def orthogonal_pool_jacobian(
    ansatz: Ansatz, theta: Sequence[float] | np.ndarray, h: HermitianOperator
) -> np.ndarray:
    """Exact ``∂_n f_k`` of :func:`orthogonal_pool_covariances`."""
    _check_dense(ansatz.n_qubits)
    psi = run_circuit(ansatz, theta)
    h_psi = apply_operator(h, psi)
    outer = adjoint_derivatives(ansatz, theta, h_psi)
    d_psi = state_derivatives(ansatz, theta)
    inner = np.array([apply_inverse(ansatz, theta, apply_operator(h, d)) for d in d_psi])
    return (outer + inner)[:, 1:].T if len(d_psi) else np.zeros((len(psi) - 1, 0), dtype=complex)


def importance_weights(f: np.ndarray) -> np.ndarray:
    """``p_k = |f_k|² / Σ_j |f_j|²``."""
    mags = np.abs(np.asarray(f)) ** 2
    total = float(mags.sum())
    if total == 0.0:
        raise AlreadyConverged("All covariances vanish; the state is already a root")
    return mags / total
