"""Tests for classical-shadow acquisition, estimation and budgeting."""

from __future__ import annotations

import itertools
import math
from functools import reduce

import numpy as np
import pytest

from covar.errors import ValidationError
from covar.estimation.shadows import (
    ShadowSet,
    acquire,
    estimate,
    estimate_many,
    median_of_means,
    plan_budget,
    shadow_provider,
    snapshot_estimates,
)
from covar.lib.gates import gate_matrix
from covar.model.circuit import build_hea
from covar.model.pauli import PauliString, enumerate_pool
from covar.model.statevector import Statevector, pauli_expectations, prepare
from tests.conftest import random_state

_MEASURE = {
    0: gate_matrix("H"),
    1: gate_matrix("H") @ gate_matrix("SDG"),
    2: np.eye(2, dtype=complex),
}


def _exact_shadow_mean(state: Statevector, p: PauliString) -> float:
    """Expected single-snapshot estimate by enumerating settings and outcomes."""
    n = state.n_qubits
    total = 0.0
    for setting in itertools.product(range(3), repeat=n):
        rotated = reduce(np.kron, [_MEASURE[c] for c in setting]) @ state.amplitudes
        probs = np.abs(rotated) ** 2
        outcomes = np.array([[(k >> (n - 1 - q)) & 1 for q in range(n)] for k in range(1 << n)])
        table = ShadowSet(np.tile(setting, (1 << n, 1)), outcomes)
        total += float(probs @ snapshot_estimates(table, p)) / 3**n
    return total


# ============================================================================
# Single-snapshot estimator
# ============================================================================


class TestSnapshotEstimates:
    def test_matching_basis(self):
        table = ShadowSet(np.array([[2]]), np.array([[0]]))
        assert snapshot_estimates(table, PauliString.from_label("Z")).tolist() == [3.0]

    def test_mismatched_basis(self):
        table = ShadowSet(np.array([[0]]), np.array([[0]]))
        assert snapshot_estimates(table, PauliString.from_label("Z")).tolist() == [0.0]

    def test_two_qubit_parity(self):
        table = ShadowSet(np.array([[2, 0], [2, 0]]), np.array([[0, 1], [1, 1]]))
        values = snapshot_estimates(table, PauliString.from_label("ZX"))
        assert values.tolist() == [-9.0, 9.0]

    def test_unsupported_qubits_ignored(self):
        table = ShadowSet(np.array([[1, 2]]), np.array([[1, 0]]))
        assert snapshot_estimates(table, PauliString.from_label("IZ")).tolist() == [3.0]

    def test_identity_rejected(self):
        table = ShadowSet(np.array([[2]]), np.array([[0]]))
        with pytest.raises(ValidationError):
            snapshot_estimates(table, PauliString.identity(1))

    def test_unbiased_by_enumeration(self, rng):
        psi = random_state(2, rng)
        for label in ("ZI", "XY", "YY", "IX"):
            p = PauliString.from_label(label)
            exact = pauli_expectations(psi, [p])[0]
            assert _exact_shadow_mean(psi, p) == pytest.approx(exact, abs=1e-10)

    def test_snapshot_view(self):
        table = ShadowSet(np.array([[0, 1, 2]]), np.array([[1, 0, 1]]))
        snap = table.snapshot(0)
        assert snap.bases == ("X", "Y", "Z")
        assert snap.outcomes == (1, 0, 1)


class TestShadowSet:
    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            ShadowSet(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_bad_codes(self):
        with pytest.raises(ValidationError):
            ShadowSet(np.array([[3]]), np.array([[0]]))

    def test_too_many_batches(self):
        with pytest.raises(ValidationError):
            ShadowSet(np.zeros((2, 1)), np.zeros((2, 1)), n_batches=3)

    def test_read_only(self):
        table = ShadowSet(np.zeros((2, 1)), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            table.bases[0, 0] = 1


# ============================================================================
# Acquisition and estimation
# ============================================================================


class TestAcquire:
    def test_shape(self):
        shadows = acquire(Statevector.zero(3), 50, rng_seed=0, n_batches=5)
        assert len(shadows) == 50
        assert shadows.n_qubits == 3
        assert shadows.n_batches == 5

    def test_deterministic(self):
        psi = prepare(build_hea(2, 1), np.linspace(0.1, 0.6, 6))
        a = acquire(psi, 200, rng_seed=42)
        b = acquire(psi, 200, rng_seed=42)
        assert np.array_equal(a.bases, b.bases)
        assert np.array_equal(a.outcomes, b.outcomes)

    def test_z_basis_outcomes_of_basis_state(self):
        shadows = acquire(Statevector.basis(2, 2), 300, rng_seed=1)
        # |10⟩: qubit 0 always reads 1 when measured in Z
        z_rows = shadows.bases[:, 0] == 2
        assert np.all(shadows.outcomes[z_rows, 0] == 1)

    def test_estimate_converges(self):
        shadows = acquire(Statevector.zero(2), 6000, rng_seed=7, n_batches=6)
        assert estimate(shadows, PauliString.from_label("ZI")) == pytest.approx(1.0, abs=0.15)
        assert estimate(shadows, PauliString.from_label("XI")) == pytest.approx(0.0, abs=0.15)

    def test_estimate_many_shares_snapshots(self):
        shadows = acquire(Statevector.zero(2), 100, rng_seed=3)
        strings = [PauliString.from_label(s) for s in ("ZI", "IZ", "ZZ")]
        values = estimate_many(shadows, strings)
        assert values[1] == estimate(shadows, strings[1])

    def test_basis_marginals_are_uniform(self):
        n = 10_000
        shadows = acquire(random_state(2, np.random.default_rng(4)), n, rng_seed=11)
        sigma = math.sqrt((1 / 3) * (2 / 3) / n)
        for q in range(2):
            for code in range(3):
                freq = float(np.mean(shadows.bases[:, q] == code))
                assert abs(freq - 1 / 3) <= 4 * sigma

    def test_zero_snapshots(self):
        with pytest.raises(ValidationError):
            acquire(Statevector.zero(1), 0)


class TestMedianOfMeans:
    def test_outlier_batch_ignored(self):
        values = np.array([0.0, 0.0, 10.0, 10.0, 10.0, 10.0, 500.0, 500.0, 10.0])
        assert median_of_means(values, 3) == pytest.approx(10.0)

    def test_single_batch_is_mean(self):
        assert median_of_means(np.array([1.0, 2.0, 6.0]), 1) == pytest.approx(3.0)


# ============================================================================
# Budget
# ============================================================================


class TestPlanBudget:
    def test_minimal(self):
        budget = plan_budget(1.0, 1.0, 0, 1)
        assert budget.n_batches == 2
        assert budget.n_per_batch == 34
        assert budget.total == 68

    def test_halving_epsilon_quadruples(self):
        a = plan_budget(1.0, 0.1, 0, 10)
        b = plan_budget(0.5, 0.1, 0, 10)
        assert b.n_per_batch == 4 * a.n_per_batch
        assert b.n_batches == a.n_batches

    def test_batches_grow_logarithmically(self):
        budget = plan_budget(0.1, 0.05, 2, 1000)
        assert budget.n_batches == math.ceil(2 * math.log(2 * 1000 / 0.05))

    @pytest.mark.parametrize("args", [(0.0, 0.1, 1, 1), (0.1, 0.0, 1, 1), (0.1, 1.5, 1, 1), (0.1, 0.1, -1, 1), (0.1, 0.1, 1, 0)])
    def test_invalid(self, args):
        with pytest.raises(ValidationError):
            plan_budget(*args)


class TestShadowProvider:
    def test_snapshot_count_independent_of_strings(self):
        budget = plan_budget(1.0, 1.0, 0, 1)
        ansatz = build_hea(4, 1)
        theta = np.zeros(ansatz.n_params)
        one = shadow_provider(budget, rng_seed=0)
        one.expectations(ansatz, theta, [PauliString.from_label("ZIII")])
        many = shadow_provider(budget, rng_seed=0)
        many.expectations(ansatz, theta, list(enumerate_pool(4, 2)))
        assert one.snapshots == many.snapshots == budget.total

    def test_fresh_shadows_per_query(self):
        budget = plan_budget(1.0, 1.0, 0, 1)
        ansatz = build_hea(2, 1)
        theta = np.full(ansatz.n_params, 0.4)
        provider = shadow_provider(budget, rng_seed=5)
        strings = [PauliString.from_label("XZ")]
        provider.expectations(ansatz, theta, strings)
        provider.expectations(ansatz, theta, strings)
        assert provider.snapshots == 2 * budget.total
        assert provider.queries == 2

    def test_reproducible(self):
        budget = plan_budget(1.0, 0.5, 1, 4)
        ansatz = build_hea(2, 1)
        theta = np.full(ansatz.n_params, 0.2)
        strings = list(enumerate_pool(2, 1))
        a = shadow_provider(budget, 9).expectations(ansatz, theta, strings)
        b = shadow_provider(budget, 9).expectations(ansatz, theta, strings)
        assert np.array_equal(a, b)
