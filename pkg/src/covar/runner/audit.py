"""Opt-in audit files: the problem each seed solves, in reloadable formats.

With ``audit: true`` (or ``covar run --audit``) every seed writes::

    seed_<s>/<tag>/ansatz.txt       serialize_ansatz
    seed_<s>/<tag>/hamiltonian.txt  serialize_operator
    seed_<s>/<tag>/pool.txt         serialize_pool (Pauli pools only)
    seed_<s>/<tag>/system.mtx       exact covariance system at θ0
    seed_<s>/<tag>/shadows.npz      one shadow set at θ0 (shadow provider only)

The files are drawn from their own seeded streams with an exact provider,
so the run itself sees the same queries and random draws with or without
auditing.
"""

from __future__ import annotations

import logging
from pathlib import Path

from covar.estimation.covariance import OrthogonalPool, covariance_system
from covar.estimation.providers import ExactProvider, ExpectationProvider
from covar.estimation.shadows import ShadowProvider, acquire
from covar.model.hamiltonians import Problem
from covar.model.pauli import OperatorPool, sample_constraints
from covar.model.statevector import prepare
from covar.serialization.serialize import (
    save_shadows,
    serialize_ansatz,
    serialize_operator,
    serialize_pool,
    write_system,
)

logger = logging.getLogger(__name__)

# Second entry of the audit rng seeds, apart from any query index
_AUDIT_STREAM = 0xA0D17


def write_audit(
    directory: Path,
    problem: Problem,
    pool: OperatorPool | OrthogonalPool,
    provider: ExpectationProvider,
    n_constraints: int,
    seed: int,
) -> list[Path]:
    """Write the audit files for one problem; returns the paths written."""
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def text(name: str, body: str) -> None:
        path = directory / name
        path.write_text(body, encoding="utf-8")
        written.append(path)

    text("ansatz.txt", serialize_ansatz(problem.ansatz))
    text("hamiltonian.txt", serialize_operator(problem.hamiltonian))
    if isinstance(pool, OperatorPool):
        text("pool.txt", serialize_pool(pool))
        constraints = sample_constraints(pool, n_constraints, [seed, _AUDIT_STREAM])
        system = covariance_system(
            ExactProvider(), problem.ansatz, problem.theta0, constraints, problem.hamiltonian
        )
        written.append(write_system(system, directory / "system.mtx"))
    if isinstance(provider, ShadowProvider):
        budget = provider.budget
        shadows = acquire(
            prepare(problem.ansatz, problem.theta0),
            budget.total,
            [provider.seed, _AUDIT_STREAM],
            budget.n_batches,
        )
        written.append(save_shadows(shadows, directory / "shadows.npz"))
    logger.debug("audit files for seed %d in %s", seed, directory)
    return written
