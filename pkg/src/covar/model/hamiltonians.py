"""Benchmark problems: circuit recompilation and the inhomogeneous spin ring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from covar.errors import NumericalError, ValidationError
from covar.model.circuit import Ansatz, HermitianOperator, build_hea
from covar.model.pauli import OperatorPool, PauliString, enumerate_pool, z_product_pool
from covar.model.statevector import Statevector, fidelity, fidelity_max_basis, prepare

LEVEL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Problem bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Problem:
    """Everything an optimizer needs: circuit, target operator, start and pool.

    ``reference`` is the known solution state when one exists; metrics are
    reported against it. ``ground_energy`` is the exact minimum of the
    Hamiltonian when it was computed.
    """

    name: str
    ansatz: Ansatz
    hamiltonian: HermitianOperator
    theta0: np.ndarray
    pool: OperatorPool
    reference: Statevector | None = None
    ground_energy: float | None = None
    extras: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta0", self.ansatz.check_theta(self.theta0).copy())
        if self.hamiltonian.n_qubits != self.ansatz.n_qubits:
            raise ValidationError("Hamiltonian and ansatz act on different qubit counts")
        if self.pool.n_qubits != self.ansatz.n_qubits:
            raise ValidationError("Operator pool and ansatz act on different qubit counts")

    @property
    def n_qubits(self) -> int:
        return self.ansatz.n_qubits

    @property
    def n_params(self) -> int:
        return self.ansatz.n_params

    def with_pool(self, pool: OperatorPool) -> Problem:
        return Problem(
            self.name, self.ansatz, self.hamiltonian, self.theta0, pool,
            self.reference, self.ground_energy, dict(self.extras),
        )

    def with_theta0(self, theta0: np.ndarray) -> Problem:
        return Problem(
            self.name, self.ansatz, self.hamiltonian, theta0, self.pool,
            self.reference, self.ground_energy, dict(self.extras),
        )


# ---------------------------------------------------------------------------
# Recompilation
# ---------------------------------------------------------------------------

def z_field(n_qubits: int) -> HermitianOperator:
    """``H = -Σ_j Z_j``; its ground state is ``|0…0⟩``."""
    return HermitianOperator(
        tuple((-1.0, PauliString.single(n_qubits, q, "Z")) for q in range(n_qubits))
    )


@dataclass(frozen=True, eq=False)
class RecompilationTask:
    ansatz: Ansatz
    hidden_params: np.ndarray
    perturbation_scale: float
    hamiltonian: HermitianOperator
    commuting_pool: OperatorPool

    @property
    def n_qubits(self) -> int:
        return self.ansatz.n_qubits

    @property
    def circuit(self) -> Ansatz:
        """``U(θ)† V`` with ``V = U(θ*)`` baked into fixed rotations."""
        return self.ansatz.bind(self.hidden_params).then(self.ansatz.inverse())

    @property
    def target_state(self) -> Statevector:
        return prepare(self.ansatz, self.hidden_params)

    def problem(self, theta_init: np.ndarray, pool: OperatorPool | None = None) -> Problem:
        return Problem(
            name="recompilation",
            ansatz=self.circuit,
            hamiltonian=self.hamiltonian,
            theta0=theta_init,
            pool=pool if pool is not None else self.commuting_pool,
            reference=Statevector.zero(self.n_qubits),
            ground_energy=-float(self.n_qubits),
            extras={"theta_star": self.hidden_params.copy()},
        )


def _recompilation_task(n_qubits: int, n_layers: int, theta_star: np.ndarray, perturb: float) -> RecompilationTask:
    ansatz = build_hea(n_qubits, n_layers)
    return RecompilationTask(
        ansatz=ansatz,
        hidden_params=theta_star,
        perturbation_scale=perturb,
        hamiltonian=z_field(n_qubits),
        commuting_pool=z_product_pool(n_qubits, min(2, n_qubits)),
    )


def make_recompilation(
    n_qubits: int, n_layers: int, seed: int, perturb: float
) -> tuple[RecompilationTask, np.ndarray]:
    """Hidden ``θ* ~ U(-2π, 2π)`` and start ``θ* + Δ`` with ``|Δ_k| ≤ perturb``."""
    if perturb < 0 or not math.isfinite(perturb):
        raise ValidationError(f"perturb must be a finite value ≥ 0, got {perturb}")
    nu = n_qubits * (2 * n_layers + 1)
    rng = np.random.default_rng(seed)
    theta_star = rng.uniform(-2 * math.pi, 2 * math.pi, size=nu)
    delta = rng.uniform(-perturb, perturb, size=nu)
    task = _recompilation_task(n_qubits, n_layers, theta_star, perturb)
    return task, theta_star + delta


def make_recompilation_at_fidelity(
    n_qubits: int, n_layers: int, seed: int, target_fidelity: float
) -> tuple[RecompilationTask, np.ndarray]:
    """Like :func:`make_recompilation` but scales a random direction until the
    start state has the requested fidelity to the solution."""
    if not 0 < target_fidelity < 1:
        raise ValidationError(f"target_fidelity must lie in (0, 1), got {target_fidelity}")
    nu = n_qubits * (2 * n_layers + 1)
    rng = np.random.default_rng(seed)
    theta_star = rng.uniform(-2 * math.pi, 2 * math.pi, size=nu)
    direction = rng.uniform(-1.0, 1.0, size=nu)
    ansatz = build_hea(n_qubits, n_layers)
    target = prepare(ansatz, theta_star)

    def gap(scale: float) -> float:
        return fidelity(prepare(ansatz, theta_star + scale * direction), target) - target_fidelity

    grid = np.linspace(0.0, math.pi, 65)
    values = [gap(s) for s in grid]
    for lo, hi, v_lo, v_hi in zip(grid, grid[1:], values, values[1:]):
        if v_lo > 0 >= v_hi:
            scale = scipy.optimize.brentq(gap, lo, hi, xtol=1e-12)
            break
    else:
        raise NumericalError(f"No perturbation reaches fidelity {target_fidelity} (seed {seed})")
    task = _recompilation_task(n_qubits, n_layers, theta_star, float(scale))
    return task, theta_star + scale * direction


def recompilation_metrics(state: Statevector) -> tuple[float, float]:
    """``(1 - |⟨0…0|ψ⟩|², 1 - max_n |⟨n|ψ⟩|²)``."""
    zero = Statevector.zero(state.n_qubits)
    f_max, _ = fidelity_max_basis(state)
    return 1.0 - fidelity(state, zero), 1.0 - f_max


# ---------------------------------------------------------------------------
# Spin ring
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpinRingTask:
    """``H = J Σ_i σ_i·σ_{i+1} + Σ_i c_i Z_i`` with periodic boundary."""

    n_qubits: int
    J: float
    onsite: np.ndarray
    hamiltonian: HermitianOperator

    def problem(
        self,
        n_layers: int,
        seed: int,
        pool: OperatorPool | None = None,
        q: int = 2,
    ) -> Problem:
        """HEA on the ring with ``θ0 ~ U(-π, π)`` under *seed*."""
        ansatz = build_hea(self.n_qubits, n_layers)
        rng = np.random.default_rng(seed)
        theta0 = rng.uniform(-math.pi, math.pi, size=ansatz.n_params)
        return Problem(
            name="spin_ring",
            ansatz=ansatz,
            hamiltonian=self.hamiltonian,
            theta0=theta0,
            pool=pool if pool is not None else enumerate_pool(self.n_qubits, q),
        )


def make_spin_ring(n_qubits: int, J: float, seed: int) -> SpinRingTask:
    if n_qubits < 3:
        raise ValidationError(f"A spin ring needs at least 3 qubits, got {n_qubits}")
    if not math.isfinite(J):
        raise ValidationError(f"Non-finite coupling J={J}")
    rng = np.random.default_rng(seed)
    onsite = rng.uniform(-1.0, 1.0, size=n_qubits)
    terms: list[tuple[float, PauliString]] = []
    for i in range(n_qubits):
        j = (i + 1) % n_qubits
        for letter in "XYZ":
            terms.append((J, PauliString.from_sites(n_qubits, {i: letter, j: letter})))
    for i in range(n_qubits):
        terms.append((float(onsite[i]), PauliString.single(n_qubits, i, "Z")))
    return SpinRingTask(n_qubits, float(J), onsite, HermitianOperator(tuple(terms)))


# ---------------------------------------------------------------------------
# Spectral levels
# ---------------------------------------------------------------------------

def energy_levels(eigenvalues: np.ndarray, tol: float = LEVEL_TOL) -> np.ndarray:
    """Distinct levels of an ascending spectrum; degenerate values merge."""
    levels: list[float] = []
    for value in np.sort(np.asarray(eigenvalues, dtype=float)):
        if not levels or value - levels[-1] > tol:
            levels.append(float(value))
    return np.asarray(levels)


def classify_energy(energy: float, levels: np.ndarray, tol: float) -> int | None:
    """Index of the nearest level within *tol*, or ``None`` if unconverged."""
    index = int(np.argmin(np.abs(levels - energy)))
    return index if abs(levels[index] - energy) < tol else None
