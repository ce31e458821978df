"""Comparison optimizers: energy and variance gradient descent, natural gradient."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from covar.errors import NumericalError, ValidationError
from covar.estimation.covariance import covariance_system, exact_covariances, expectation_gradients
from covar.estimation.providers import ExpectationProvider
from covar.model.circuit import Ansatz, HermitianOperator
from covar.model.hamiltonians import Problem
from covar.model.statevector import apply_operator, prepare, state_derivatives
from covar.solver.lm import state_metrics
from covar.solver.trace import IterationRecord, IterationTrace

logger = logging.getLogger(__name__)

BASELINE_KINDS = ("vqe", "variance_vqe", "nat_grad")
IMAG_TOL = 1e-9


# ---------------------------------------------------------------------------
# Configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GdConfig:
    """Plain gradient descent; ``stall_threshold`` stops once the last energy
    improvement drops below it."""

    learning_rate: float = 0.1
    max_iterations: int = 100
    target: str = "energy"
    stall_threshold: float | None = None

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_iterations < 0:
            raise ValidationError(f"max_iterations must be ≥ 0, got {self.max_iterations}")
        if self.target not in ("energy", "variance"):
            raise ValidationError(f"GD target must be 'energy' or 'variance', got {self.target!r}")


@dataclass(frozen=True)
class NatGradConfig:
    learning_rate: float = 0.05
    pinv_tol: float = 1e-6
    max_iterations: int = 200
    stop_energy: float | None = None

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.pinv_tol > 0:
            raise ValidationError(f"pinv_tol must be positive, got {self.pinv_tol}")
        if self.max_iterations < 0:
            raise ValidationError(f"max_iterations must be ≥ 0, got {self.max_iterations}")


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def energy_gradient(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    h: HermitianOperator,
) -> np.ndarray:
    """``∂_n⟨H⟩`` by the shift rule, two provider calls per rotation."""
    return h.coefficients @ expectation_gradients(provider, ansatz, theta, h.strings)


def variance_gradient(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    h: HermitianOperator,
) -> np.ndarray:
    """``∂_n Var[H] = Σ_a h_a J_an`` with constraints the Hamiltonian's own terms."""
    system = covariance_system(provider, ansatz, theta, h.strings, h)
    grad = h.coefficients @ system.J
    residual = float(np.max(np.abs(grad.imag))) if grad.size else 0.0
    if residual > IMAG_TOL:
        raise NumericalError(f"Variance gradient has imaginary residual {residual:.3e}")
    return grad.real


def quantum_geometric_tensor(ansatz: Ansatz, theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """``Re(⟨∂_iψ|∂_jψ⟩ - ⟨∂_iψ|ψ⟩⟨ψ|∂_jψ⟩)`` from exact state derivatives."""
    psi = prepare(ansatz, theta).amplitudes
    d_psi = state_derivatives(ansatz, theta)
    overlaps = d_psi.conj() @ psi
    gram = d_psi.conj() @ d_psi.T
    return (gram - np.outer(overlaps, overlaps.conj())).real


def natural_gradient_step(
    ansatz: Ansatz,
    theta: Sequence[float] | np.ndarray,
    h: HermitianOperator,
    config: NatGradConfig,
) -> np.ndarray:
    """``θ - η F⁺ ∇E`` with exact derivatives and a tolerance pseudo-inverse."""
    arr = ansatz.check_theta(theta)
    psi = prepare(ansatz, arr).amplitudes
    d_psi = state_derivatives(ansatz, arr)
    grad = 2.0 * (d_psi.conj() @ apply_operator(h, psi)).real
    metric = quantum_geometric_tensor(ansatz, arr)
    return arr - config.learning_rate * scipy.linalg.pinvh(metric, atol=config.pinv_tol) @ grad


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def _record(
    problem: Problem, theta: np.ndarray, index: int, step_norm: float, wall_ms: float
) -> IterationRecord:
    energy, var, inf, inf_max = state_metrics(
        problem.ansatz, theta, problem.hamiltonian, problem.reference
    )
    f = exact_covariances(
        prepare(problem.ansatz, theta), problem.hamiltonian.strings, problem.hamiltonian
    )
    return IterationRecord(
        iter=index,
        f_norm=float(np.linalg.norm(f)),
        lambda_=math.nan,
        step_norm=step_norm,
        energy=energy,
        variance=var,
        infidelity=inf,
        infidelity_max_basis=inf_max,
        wall_ms=wall_ms,
    )


def run_baseline(
    kind: str,
    provider: ExpectationProvider,
    problem: Problem,
    config: GdConfig | NatGradConfig,
    record_timing: bool = True,
) -> tuple[np.ndarray, IterationTrace]:
    """Iterate one baseline rule; ``f_norm`` is the noiseless ``‖f‖`` over the
    Hamiltonian's terms so traces compare directly with CoVaR."""
    if kind not in BASELINE_KINDS:
        raise ValidationError(f"Unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    if kind == "nat_grad" and not isinstance(config, NatGradConfig):
        raise ValidationError("nat_grad needs a NatGradConfig")
    if kind != "nat_grad" and not isinstance(config, GdConfig):
        raise ValidationError(f"{kind} needs a GdConfig")

    h = problem.hamiltonian
    theta = problem.theta0.copy()
    queries0, snapshots0 = provider.queries, provider.snapshots
    trace = IterationTrace(optimizer=kind)
    trace.initial = _record(problem, theta, 0, 0.0, 0.0)
    previous = trace.initial.energy

    for it in range(1, config.max_iterations + 1):
        if isinstance(config, NatGradConfig):
            if config.stop_energy is not None and previous <= config.stop_energy:
                trace.converged = True
                break
            start = time.perf_counter()
            new_theta = natural_gradient_step(problem.ansatz, theta, h, config)
        else:
            start = time.perf_counter()
            use_variance = kind == "variance_vqe" or config.target == "variance"
            grad_fn = variance_gradient if use_variance else energy_gradient
            new_theta = theta - config.learning_rate * grad_fn(provider, problem.ansatz, theta, h)
        step_norm = float(np.linalg.norm(new_theta - theta))
        theta = new_theta
        wall_ms = (time.perf_counter() - start) * 1e3 if record_timing else 0.0
        record = _record(problem, theta, it, step_norm, wall_ms)
        trace.append(record)
        improvement = previous - record.energy
        previous = record.energy
        if (
            isinstance(config, GdConfig)
            and config.stall_threshold is not None
            and improvement < config.stall_threshold
        ):
            logger.info("%s stalled at iteration %d (ΔE step %.2e)", kind, it, improvement)
            trace.converged = True
            break
    else:
        if isinstance(config, NatGradConfig) and config.stop_energy is not None:
            trace.converged = previous <= config.stop_energy

    trace.provider_queries = provider.queries - queries0
    trace.snapshots = provider.snapshots - snapshots0
    logger.info(
        "%s finished after %d iterations: E=%.6f", kind, trace.iterations, trace.final.energy
    )
    return theta, trace
