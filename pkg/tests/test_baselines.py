"""Tests for the gradient-descent and natural-gradient baselines."""

from __future__ import annotations

import math

import numpy as np
import pytest

from covar.errors import ValidationError
from covar.estimation.providers import ExactProvider
from covar.model.circuit import HermitianOperator, build_hea
from covar.model.statevector import expectation, prepare, variance
from covar.solver.baselines import (
    GdConfig,
    NatGradConfig,
    energy_gradient,
    natural_gradient_step,
    quantum_geometric_tensor,
    run_baseline,
    variance_gradient,
)
from tests.conftest import rx


# ============================================================================
# Gradients
# ============================================================================


class TestGradients:
    def test_rx_energy_gradient(self):
        h = HermitianOperator.from_labels([(-1.0, "Z")])
        for theta in (0.2, 1.1, -2.5):
            grad = energy_gradient(ExactProvider(), rx(), [theta], h)
            assert grad[0] == pytest.approx(math.sin(theta))

    def test_energy_gradient_matches_finite_difference(self, rng, spin_ring4):
        ansatz = build_hea(4, 1)
        theta = rng.uniform(-math.pi, math.pi, ansatz.n_params)
        h = spin_ring4.hamiltonian
        grad = energy_gradient(ExactProvider(), ansatz, theta, h)
        step = 1e-5
        for n in (0, 4, 9):
            plus, minus = theta.copy(), theta.copy()
            plus[n] += step
            minus[n] -= step
            fd = (expectation(prepare(ansatz, plus), h) - expectation(prepare(ansatz, minus), h)) / (2 * step)
            assert grad[n] == pytest.approx(fd, abs=1e-6)

    def test_variance_gradient_matches_finite_difference(self, rng, spin_ring4):
        ansatz = build_hea(4, 1)
        theta = rng.uniform(-math.pi, math.pi, ansatz.n_params)
        h = spin_ring4.hamiltonian
        grad = variance_gradient(ExactProvider(), ansatz, theta, h)
        step = 1e-5
        for n in (1, 6, 11):
            plus, minus = theta.copy(), theta.copy()
            plus[n] += step
            minus[n] -= step
            fd = (variance(prepare(ansatz, plus), h) - variance(prepare(ansatz, minus), h)) / (2 * step)
            assert grad[n] == pytest.approx(fd, abs=1e-6)


class TestGeometricTensor:
    def test_single_rotation(self):
        assert quantum_geometric_tensor(rx(), [0.3])[0, 0] == pytest.approx(0.25)

    def test_symmetric_psd(self, rng):
        ansatz = build_hea(3, 1)
        metric = quantum_geometric_tensor(ansatz, rng.uniform(-math.pi, math.pi, ansatz.n_params))
        assert np.allclose(metric, metric.T)
        assert np.min(np.linalg.eigvalsh(metric)) > -1e-10

    def test_natural_step_lowers_energy(self, rng, spin_ring4):
        ansatz = build_hea(4, 1)
        theta = rng.uniform(-math.pi, math.pi, ansatz.n_params)
        h = spin_ring4.hamiltonian
        new = natural_gradient_step(ansatz, theta, h, NatGradConfig(learning_rate=0.01))
        assert expectation(prepare(ansatz, new), h) < expectation(prepare(ansatz, theta), h)


# ============================================================================
# Runner
# ============================================================================


class TestRunBaseline:
    @pytest.fixture
    def problem(self, spin_ring4):
        return spin_ring4.problem(n_layers=1, seed=2)

    def test_zero_iterations(self, problem):
        theta, trace = run_baseline("vqe", ExactProvider(), problem, GdConfig(max_iterations=0))
        assert trace.iterations == 0
        assert np.array_equal(theta, problem.theta0)
        assert trace.final is trace.initial

    def test_vqe_lowers_energy(self, problem):
        _, trace = run_baseline("vqe", ExactProvider(), problem, GdConfig(learning_rate=0.05, max_iterations=20))
        assert trace.iterations == 20
        assert trace.final.energy < trace.initial.energy
        assert all(math.isnan(r.lambda_) for r in trace.records)

    def test_variance_vqe_lowers_variance(self, problem):
        _, trace = run_baseline(
            "variance_vqe", ExactProvider(), problem, GdConfig(learning_rate=0.02, max_iterations=15)
        )
        assert trace.final.variance < trace.initial.variance

    def test_stall_stops_early(self, problem):
        config = GdConfig(learning_rate=0.05, max_iterations=50, stall_threshold=1e3)
        _, trace = run_baseline("vqe", ExactProvider(), problem, config)
        assert trace.iterations == 1
        assert trace.converged

    def test_nat_grad_stop_energy(self, problem):
        start = expectation(prepare(problem.ansatz, problem.theta0), problem.hamiltonian)
        config = NatGradConfig(stop_energy=start + 1.0)
        _, trace = run_baseline("nat_grad", ExactProvider(), problem, config)
        assert trace.iterations == 0
        assert trace.converged

    def test_nat_grad_descends(self, problem):
        _, trace = run_baseline("nat_grad", ExactProvider(), problem, NatGradConfig(max_iterations=10))
        assert trace.final.energy < trace.initial.energy

    def test_counts_queries(self, problem):
        provider = ExactProvider()
        _, trace = run_baseline("vqe", provider, problem, GdConfig(max_iterations=2))
        assert trace.provider_queries == 2 * 2 * problem.n_params

    def test_unknown_kind(self, problem):
        with pytest.raises(ValidationError):
            run_baseline("adam", ExactProvider(), problem, GdConfig())

    def test_config_kind_mismatch(self, problem):
        with pytest.raises(ValidationError):
            run_baseline("nat_grad", ExactProvider(), problem, GdConfig())
        with pytest.raises(ValidationError):
            run_baseline("vqe", ExactProvider(), problem, NatGradConfig())

    def test_invalid_configs(self):
        with pytest.raises(ValidationError):
            GdConfig(learning_rate=0.0)
        with pytest.raises(ValidationError):
            GdConfig(target="fidelity")
        with pytest.raises(ValidationError):
            NatGradConfig(pinv_tol=0.0)
