"""CoVaR: stochastic Levenberg-Marquardt root finding on covariance functions.

Each iteration samples ``N_c`` constraints, builds the stacked real system
``(J̃, f̃)`` and tries damped steps ``λ = λ0·growth^i`` until one lowers
``‖f̃‖`` on the same sample.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np
import scipy.linalg

from covar.errors import AlreadyConverged, NumericalError, SingularSystemError, ValidationError
from covar.estimation.covariance import (
    CovariancePlan,
    CovarianceSystem,
    OrthogonalPool,
    StackedSystem,
    covariance_system,
    importance_weights,
    orthogonal_pool_covariances,
    orthogonal_pool_jacobian,
    stack_vector,
)
from covar.estimation.noise import ShotNoiseConfig, ShotNoiseProvider
from covar.estimation.providers import ExactProvider, ExpectationProvider
from covar.model.circuit import Ansatz, HermitianOperator
from covar.model.hamiltonians import Problem
from covar.model.pauli import OperatorPool, PauliString, sample_constraints
from covar.model.statevector import (
    Statevector,
    expectation,
    fidelity,
    fidelity_max_basis,
    prepare,
    variance,
)
from covar.solver.trace import IterationRecord, IterationTrace

logger = logging.getLogger(__name__)

REGULARIZERS = ("identity", "diagonal")
LINESEARCH_FACTORS: tuple[float, ...] = (1.0, 0.8, 0.6, 0.4, 0.2)

# Pauli strings, or basis indices for the orthogonal pool
Constraints = tuple[PauliString | int, ...]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LmConfig:
    n_constraints: int
    lambda0: float = 1e-4
    lambda_growth: float = 2.0
    regularizer: str = "identity"
    max_component_step: float = 1.0
    max_iterations: int = 50
    convergence_tol: float = 1e-8
    resample_each_iteration: bool = True
    linesearch_enabled: bool = False
    max_lambda_doublings: int = 30
    fresh_sample_acceptance: bool = False

    def __post_init__(self) -> None:
        if self.n_constraints < 1:
            raise ValidationError(f"n_constraints must be ≥ 1, got {self.n_constraints}")
        if not self.lambda0 > 0:
            raise ValidationError(f"lambda0 must be positive, got {self.lambda0}")
        if not self.lambda_growth > 1:
            raise ValidationError(f"lambda_growth must exceed 1, got {self.lambda_growth}")
        if self.regularizer not in REGULARIZERS:
            raise ValidationError(
                f"Unknown regularizer {self.regularizer!r}; expected one of {REGULARIZERS}"
            )
        if not self.max_component_step > 0:
            raise ValidationError(
                f"max_component_step must be positive, got {self.max_component_step}"
            )
        if self.max_iterations < 0:
            raise ValidationError(f"max_iterations must be ≥ 0, got {self.max_iterations}")
        if self.convergence_tol < 0:
            raise ValidationError(f"convergence_tol must be ≥ 0, got {self.convergence_tol}")
        if self.max_lambda_doublings < 0:
            raise ValidationError("max_lambda_doublings must be ≥ 0")


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def lm_step(
    stacked: StackedSystem,
    lam: float,
    regularizer: str = "identity",
    max_component_step: float | None = 1.0,
) -> np.ndarray:
    """``Δθ = -(J̃ᵀJ̃ + λR)⁻¹ J̃ᵀ f̃`` through the normal equations.

    ``R`` is the identity or the diagonal of ``J̃ᵀJ̃`` (zero entries raised
    to 1). A step whose largest component exceeds *max_component_step* is
    rescaled so that component equals the cap.
    """
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    J = stacked.J_tilde
    normal = J.T @ J
    gradient = J.T @ stacked.f_tilde
    if regularizer == "identity":
        reg = np.ones(normal.shape[0])
    elif regularizer == "diagonal":
        reg = np.diag(normal).copy()
        reg[reg == 0.0] = 1.0
    else:
        raise ValidationError(f"Unknown regularizer {regularizer!r}")
    normal[np.diag_indices_from(normal)] += lam * reg
    try:
        factor = scipy.linalg.cho_factor(normal, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"Normal matrix not positive definite at λ={lam:g}") from exc
    step = -scipy.linalg.cho_solve(factor, gradient)
    if max_component_step is not None and step.size:
        largest = float(np.max(np.abs(step)))
        if largest > max_component_step:
            step *= max_component_step / largest
    return step


def single_constraint_newton(f_k: float, J_k: float) -> float:
    """Newton's one-variable update ``-f_k / J_k``."""
    if J_k == 0:
        raise ValidationError("Newton update undefined for a zero derivative")
    return -f_k / J_k


# ---------------------------------------------------------------------------
# Constraint models
# ---------------------------------------------------------------------------

class ConstraintModel(Protocol):
    def sample(self, theta: np.ndarray, rng: np.random.Generator) -> Constraints: ...

    def system(self, theta: np.ndarray, constraints: Constraints) -> CovarianceSystem: ...

    def residual(self, theta: np.ndarray, constraints: Constraints) -> np.ndarray: ...


class PauliConstraints:
    """Covariances with Pauli strings, estimated through the provider."""

    def __init__(
        self,
        provider: ExpectationProvider,
        ansatz: Ansatz,
        h: HermitianOperator,
        pool: OperatorPool,
        n_constraints: int,
    ) -> None:
        if n_constraints > len(pool):
            raise ValidationError(f"N_c={n_constraints} exceeds pool size {len(pool)}")
        self.provider = provider
        self.ansatz = ansatz
        self.h = h
        self.pool = pool
        self.n_constraints = n_constraints
        self._plans: dict[Constraints, CovariancePlan] = {}

    def _plan(self, constraints: Constraints) -> CovariancePlan:
        plan = self._plans.get(constraints)
        if plan is None:
            self._plans.clear()
            plan = CovariancePlan(constraints, self.h)  # type: ignore[arg-type]
            self._plans[constraints] = plan
        return plan

    def sample(self, theta: np.ndarray, rng: np.random.Generator) -> Constraints:
        return tuple(sample_constraints(self.pool, self.n_constraints, rng))

    def system(self, theta: np.ndarray, constraints: Constraints) -> CovarianceSystem:
        return covariance_system(self.provider, self.ansatz, theta, constraints, self.h)  # type: ignore[arg-type]

    def residual(self, theta: np.ndarray, constraints: Constraints) -> np.ndarray:
        plan = self._plan(constraints)
        return plan.covariances(self.provider.expectations(self.ansatz, theta, plan.strings))


class OrthogonalConstraints:
    """Orthogonal-pool covariances, importance-sampled by ``|f_k|²``."""

    def __init__(self, ansatz: Ansatz, h: HermitianOperator, n_constraints: int) -> None:
        pool = OrthogonalPool(ansatz.n_qubits)
        if n_constraints > len(pool):
            raise ValidationError(f"N_c={n_constraints} exceeds pool size {len(pool)}")
        self.ansatz = ansatz
        self.h = h
        self.n_constraints = n_constraints

    def sample(self, theta: np.ndarray, rng: np.random.Generator) -> Constraints:
        weights = importance_weights(orthogonal_pool_covariances(self.ansatz, theta, self.h))
        size = min(self.n_constraints, int(np.count_nonzero(weights)))
        picks = rng.choice(weights.size, size=size, replace=False, p=weights)
        return tuple(int(i) + 1 for i in picks)

    def system(self, theta: np.ndarray, constraints: Constraints) -> CovarianceSystem:
        rows = np.asarray(constraints, dtype=int) - 1
        f = orthogonal_pool_covariances(self.ansatz, theta, self.h)[rows]
        J = orthogonal_pool_jacobian(self.ansatz, theta, self.h)[rows]
        return CovarianceSystem(tuple(constraints), f, J, np.asarray(theta, dtype=float).copy())

    def residual(self, theta: np.ndarray, constraints: Constraints) -> np.ndarray:
        rows = np.asarray(constraints, dtype=int) - 1
        return orthogonal_pool_covariances(self.ansatz, theta, self.h)[rows]


def constraint_model(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    h: HermitianOperator,
    pool: OperatorPool | OrthogonalPool,
    n_constraints: int,
) -> ConstraintModel:
    if isinstance(pool, OrthogonalPool):
        return OrthogonalConstraints(ansatz, h, n_constraints)
    return PauliConstraints(provider, ansatz, h, pool, n_constraints)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def state_metrics(
    ansatz: Ansatz,
    theta: np.ndarray,
    h: HermitianOperator,
    reference: Statevector | None,
) -> tuple[float, float, float, float]:
    """``(energy, variance, infidelity, infidelity_max_basis)`` from the noiseless state."""
    state = prepare(ansatz, theta)
    energy = expectation(state, h)
    var = variance(state, h)
    if reference is None:
        return energy, var, math.nan, math.nan
    f_max, _ = fidelity_max_basis(state)
    return energy, var, 1.0 - fidelity(state, reference), 1.0 - f_max


# ---------------------------------------------------------------------------
# Iteration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Candidate:
    theta: np.ndarray
    norm: float
    lam: float
    step_norm: float


def _try_step(
    model: ConstraintModel,
    theta: np.ndarray,
    step: np.ndarray,
    constraints: Constraints,
    lam: float,
    linesearch: bool,
) -> _Candidate:
    factors = LINESEARCH_FACTORS if linesearch else (1.0,)
    best: _Candidate | None = None
    for kappa in factors:
        trial = theta + kappa * step
        norm = float(np.linalg.norm(model.residual(trial, constraints)))
        if best is None or norm < best.norm:
            best = _Candidate(trial, norm, lam, float(np.linalg.norm(kappa * step)))
    assert best is not None
    return best


def covar_iterate(
    provider: ExpectationProvider,
    ansatz: Ansatz,
    theta0: Sequence[float] | np.ndarray,
    h: HermitianOperator,
    pool: OperatorPool | OrthogonalPool,
    config: LmConfig,
    rng_seed: int | np.random.Generator | None = None,
    *,
    reference: Statevector | None = None,
    record_timing: bool = True,
    on_record: Callable[[IterationRecord], None] | None = None,
) -> tuple[np.ndarray, IterationTrace]:
    """Run CoVaR from *theta0* and return the final parameters and trace.

    Metrics in the trace come from the noiseless state whatever the
    provider; ``reference`` enables the infidelity columns.
    """
    if config.n_constraints > len(pool):
        raise ValidationError(f"N_c={config.n_constraints} exceeds pool size {len(pool)}")
    rng = np.random.default_rng(rng_seed)
    model = constraint_model(provider, ansatz, h, pool, config.n_constraints)
    theta = ansatz.check_theta(theta0).copy()
    queries0, snapshots0 = provider.queries, provider.snapshots
    trace = IterationTrace(optimizer="covar")

    def finish() -> tuple[np.ndarray, IterationTrace]:
        trace.provider_queries = provider.queries - queries0
        trace.snapshots = provider.snapshots - snapshots0
        logger.info(
            "CoVaR finished after %d iterations: |f|=%.3e converged=%s flagged=%d",
            trace.iterations, trace.final_f_norm, trace.converged, trace.flagged_count,
        )
        return theta, trace

    constraints: Constraints | None = None
    for it in range(config.max_iterations + 1):
        start = time.perf_counter()
        # the closing pass only needs the residual, one provider query
        final_pass = it == config.max_iterations
        system: CovarianceSystem | None = None
        try:
            if constraints is None or config.resample_each_iteration:
                constraints = model.sample(theta, rng)
            if final_pass:
                current = float(np.linalg.norm(stack_vector(model.residual(theta, constraints))))
            else:
                system = model.system(theta, constraints)
                current = float(np.linalg.norm(stack_vector(system.f)))
        except AlreadyConverged:
            current = 0.0
        if it == 0:
            energy, var, inf, inf_max = state_metrics(ansatz, theta, h, reference)
            trace.initial = IterationRecord(0, current, math.nan, 0.0, energy, var, inf, inf_max)
        if current < config.convergence_tol:
            trace.converged = True
            return finish()
        if final_pass or system is None:
            break

        stacked = system.stack()
        if config.fresh_sample_acceptance:
            check_set = model.sample(theta, rng)
            baseline = float(np.linalg.norm(model.residual(theta, check_set)))
        else:
            check_set, baseline = constraints, current

        lam = config.lambda0
        best: _Candidate | None = None
        accepted: _Candidate | None = None
        for attempt in range(config.max_lambda_doublings + 1):
            try:
                step = lm_step(stacked, lam, config.regularizer, config.max_component_step)
            except SingularSystemError:
                logger.debug("iter %d: singular system at λ=%.3e", it + 1, lam)
                lam *= config.lambda_growth
                continue
            candidate = _try_step(model, theta, step, check_set, lam, config.linesearch_enabled)
            logger.debug(
                "iter %d attempt %d: λ=%.3e |f|=%.6e -> %.6e",
                it + 1, attempt, lam, baseline, candidate.norm,
            )
            if best is None or candidate.norm < best.norm:
                best = candidate
            if candidate.norm < baseline:
                accepted = candidate
                break
            lam *= config.lambda_growth
        if best is None:
            raise SingularSystemError(f"No λ gave a solvable system at iteration {it + 1}")
        flagged = accepted is None
        chosen = accepted if accepted is not None else best
        if flagged:
            logger.warning(
                "iter %d: no λ reduced |f| after %d doublings; taking the smallest candidate",
                it + 1, config.max_lambda_doublings,
            )
        theta = chosen.theta
        energy, var, inf, inf_max = state_metrics(ansatz, theta, h, reference)
        wall_ms = (time.perf_counter() - start) * 1e3 if record_timing else 0.0
        record = IterationRecord(
            iter=it + 1,
            f_norm=chosen.norm,
            lambda_=chosen.lam,
            step_norm=chosen.step_norm,
            energy=energy,
            variance=var,
            infidelity=inf,
            infidelity_max_basis=inf_max,
            flagged=flagged,
            wall_ms=wall_ms,
        )
        trace.append(record)
        if on_record is not None:
            on_record(record)
        if chosen.norm < config.convergence_tol and not config.resample_each_iteration:
            trace.converged = True
            return finish()
    return finish()


def run_covar(
    problem: Problem,
    provider: ExpectationProvider,
    config: LmConfig,
    seed: int,
    pool: OperatorPool | OrthogonalPool | None = None,
    record_timing: bool = True,
) -> tuple[np.ndarray, IterationTrace]:
    return covar_iterate(
        provider,
        problem.ansatz,
        problem.theta0,
        problem.hamiltonian,
        pool if pool is not None else problem.pool,
        config,
        seed,
        reference=problem.reference,
        record_timing=record_timing,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverdeterminationResult:
    """Predicted root offsets for one disturbed parameter (0 is the true root)."""

    ls_estimate: float
    newton_estimates: np.ndarray
    mean_newton: float


def overdetermination_demo(
    ansatz: Ansatz,
    theta_star: Sequence[float] | np.ndarray,
    disturbed_param_index: int,
    delta0: float,
    pool: OperatorPool,
    n_c: int,
    h: HermitianOperator,
    rng_seed: int | None = None,
) -> OverdeterminationResult:
    """Compare the 1-D least-squares root estimate with per-constraint Newton.

    Real and imaginary parts of each covariance are separate entries; the
    Newton estimates use every entry with a nonzero derivative. The
    least-squares estimate is the ``J²``-weighted mean of those Newton
    estimates, so with one constraint it equals the single Newton estimate
    only when one part of ``f_k`` varies with the parameter (commuting
    ``O_k`` and ``H`` leave the imaginary part at zero).
    """
    base = ansatz.check_theta(theta_star).copy()
    if not 0 <= disturbed_param_index < ansatz.n_params:
        raise ValidationError(f"Parameter index {disturbed_param_index} out of range")
    theta = base.copy()
    theta[disturbed_param_index] += delta0
    constraints = sample_constraints(pool, n_c, rng_seed)
    system = covariance_system(ExactProvider(), ansatz, theta, constraints, h)
    f = stack_vector(system.f)
    column = stack_vector(system.J[:, disturbed_param_index])
    usable = np.abs(column) > 1e-12
    if not usable.any():
        raise NumericalError("Every constraint is insensitive to the disturbed parameter")
    ls = delta0 - float(column @ f) / float(column @ column)
    newton = delta0 - f[usable] / column[usable]
    return OverdeterminationResult(ls, newton, float(np.mean(newton)))


@dataclass(frozen=True)
class NoiseFloorRow:
    n_constraints: int
    n_shots: int | None
    step_error_std: float
    step_error_max: float


def noise_floor_probe(
    problem: Problem,
    n_c_values: Sequence[int],
    n_shots: int | None,
    n_seeds: int = 20,
    rng_seed: int = 0,
    lam: float = 1e-4,
) -> list[NoiseFloorRow]:
    """Spread of the first-step error ``Δθ_noisy - Δθ_exact`` for each ``N_c``.

    ``n_shots=None`` uses the exact provider for the noisy branch too.
    """
    if n_seeds < 1:
        raise ValidationError(f"n_seeds must be ≥ 1, got {n_seeds}")
    rows: list[NoiseFloorRow] = []
    exact = ExactProvider()
    for n_c in n_c_values:
        constraints = sample_constraints(problem.pool, n_c, [rng_seed, n_c])
        args = (problem.ansatz, problem.theta0, constraints, problem.hamiltonian)
        reference = lm_step(covariance_system(exact, *args).stack(), lam, max_component_step=None)
        errors = []
        for s in range(n_seeds):
            if n_shots is None:
                provider: ExpectationProvider = ExactProvider()
            else:
                provider = ShotNoiseProvider(exact, ShotNoiseConfig(n_shots, seed=rng_seed * 7919 + s))
            noisy = lm_step(covariance_system(provider, *args).stack(), lam, max_component_step=None)
            errors.append(noisy - reference)
        err = np.asarray(errors)
        rows.append(NoiseFloorRow(n_c, n_shots, float(err.std()), float(np.abs(err).max())))
        logger.info("noise floor N_c=%d: std=%.3e", n_c, rows[-1].step_error_std)
    return rows


def solver_timing(
    n_params: int,
    n_c_values: Sequence[int],
    rng_seed: int = 0,
    repeats: int = 3,
) -> list[tuple[int, float]]:
    """Best-of-*repeats* wall time of :func:`lm_step` for each ``N_c``."""
    rng = np.random.default_rng(rng_seed)
    out: list[tuple[int, float]] = []
    for n_c in n_c_values:
        stacked = StackedSystem(
            J_tilde=rng.standard_normal((2 * n_c, n_params)),
            f_tilde=rng.standard_normal(2 * n_c),
        )
        best = math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            lm_step(stacked, 1e-4)
            best = min(best, time.perf_counter() - start)
        out.append((n_c, best))
    return out
