"""Tests for the exact provider and the synthetic noise wrappers."""

from __future__ import annotations

import math

import numpy as np
import pytest

from covar.errors import ValidationError
from covar.estimation.covariance import covariance_system
from covar.estimation.noise import (
    CircuitNoiseConfig,
    ShotNoiseConfig,
    circuit_noisy_provider,
    fidelity_from_rates,
    shot_noisy_provider,
)
from covar.estimation.providers import ExactProvider
from covar.model.circuit import Ansatz, HermitianOperator, PauliRotation, build_hea
from covar.model.pauli import PauliString, enumerate_pool
from covar.solver.lm import lm_step
from tests.conftest import rx


@pytest.fixture
def setup(rng):
    ansatz = build_hea(3, 1)
    theta = rng.uniform(-np.pi, np.pi, ansatz.n_params)
    return ansatz, theta, list(enumerate_pool(3, 2))


# ============================================================================
# Exact provider
# ============================================================================


class TestExactProvider:
    def test_identity_is_one(self, setup):
        ansatz, theta, _ = setup
        values = ExactProvider().expectations(ansatz, theta, [PauliString.identity(3)])
        assert values.tolist() == [1.0]

    def test_values_in_range(self, setup):
        ansatz, theta, strings = setup
        values = ExactProvider().expectations(ansatz, theta, strings)
        assert np.all(np.abs(values) <= 1.0)

    def test_counts_queries(self, setup):
        ansatz, theta, strings = setup
        provider = ExactProvider()
        for _ in range(3):
            provider.expectations(ansatz, theta, strings)
        assert provider.queries == 3
        assert provider.snapshots == 0

    def test_qubit_mismatch(self, setup):
        ansatz, theta, _ = setup
        with pytest.raises(ValidationError):
            ExactProvider().expectations(ansatz, theta, [PauliString.from_label("ZZ")])


# ============================================================================
# Shot noise
# ============================================================================


class TestShotNoise:
    def test_huge_shot_count_matches_exact(self, setup):
        ansatz, theta, strings = setup
        exact = ExactProvider().expectations(ansatz, theta, strings)
        noisy = shot_noisy_provider(ExactProvider(), ShotNoiseConfig(10**12, seed=1))
        assert np.allclose(noisy.expectations(ansatz, theta, strings), exact, atol=1e-4)

    def test_sigma(self):
        assert ShotNoiseConfig(10_000).sigma == pytest.approx(0.01)

    def test_spread_matches_sigma(self, setup):
        ansatz, _, _ = setup
        theta = np.zeros(ansatz.n_params)
        # ⟨XII⟩ = 0 on |000⟩
        strings = [PauliString.from_label("XII")]
        provider = shot_noisy_provider(ExactProvider(), ShotNoiseConfig(100, seed=3))
        draws = [provider.expectations(ansatz, theta, strings)[0] for _ in range(400)]
        assert np.std(draws) == pytest.approx(0.1, rel=0.2)
        assert abs(np.mean(draws)) < 0.03

    def test_clipped(self, setup):
        ansatz, theta, strings = setup
        provider = shot_noisy_provider(ExactProvider(), ShotNoiseConfig(1, seed=0))
        values = provider.expectations(ansatz, theta, strings)
        assert np.all(np.abs(values) <= 1.0)

    def test_identity_unaffected(self, setup):
        ansatz, theta, _ = setup
        provider = shot_noisy_provider(ExactProvider(), ShotNoiseConfig(1, seed=0))
        assert provider.expectations(ansatz, theta, [PauliString.identity(3)]).tolist() == [1.0]

    def test_reproducible(self, setup):
        ansatz, theta, strings = setup
        a = shot_noisy_provider(ExactProvider(), ShotNoiseConfig(50, seed=4))
        b = shot_noisy_provider(ExactProvider(), ShotNoiseConfig(50, seed=4))
        assert np.array_equal(a.expectations(ansatz, theta, strings), b.expectations(ansatz, theta, strings))

    def test_mean_of_many_queries_is_exact(self):
        ansatz = rx()
        theta = [math.acos(0.3)]
        strings = [PauliString.from_label("Z")]
        config = ShotNoiseConfig(100, seed=8)
        provider = shot_noisy_provider(ExactProvider(), config)
        draws = [provider.expectations(ansatz, theta, strings)[0] for _ in range(10_000)]
        assert abs(np.mean(draws) - 0.3) <= 3 * config.sigma / 100

    def test_invalid_shots(self):
        with pytest.raises(ValidationError):
            ShotNoiseConfig(0)


# ============================================================================
# Circuit noise
# ============================================================================


class TestCircuitNoise:
    def test_unit_fidelity_is_identity(self, setup):
        ansatz, theta, strings = setup
        exact = ExactProvider().expectations(ansatz, theta, strings)
        noisy = circuit_noisy_provider(ExactProvider(), CircuitNoiseConfig(1.0, sigma=0.5))
        assert np.allclose(noisy.expectations(ansatz, theta, strings), exact)

    def test_offset_is_state_independent(self, rng, setup):
        ansatz, theta, strings = setup
        config = CircuitNoiseConfig(0.8, sigma=0.05, seed=2)
        provider = circuit_noisy_provider(ExactProvider(), config)
        other = rng.uniform(-np.pi, np.pi, ansatz.n_params)
        offsets = []
        for point in (theta, other):
            clean = ExactProvider().expectations(ansatz, point, strings)
            noisy = provider.expectations(ansatz, point, strings)
            offsets.append((noisy - 0.8 * clean) / 0.2)
        assert np.allclose(offsets[0], offsets[1])

    def test_offset_drawn_once(self):
        provider = circuit_noisy_provider(ExactProvider(), CircuitNoiseConfig(0.9, seed=1))
        p = PauliString.from_label("XZ")
        assert provider.offset(p) == provider.offset(p)

    def test_offset_seeded(self):
        a = circuit_noisy_provider(ExactProvider(), CircuitNoiseConfig(0.9, seed=1))
        b = circuit_noisy_provider(ExactProvider(), CircuitNoiseConfig(0.9, seed=1))
        p = PauliString.from_label("YYZ")
        assert a.offset(p) == b.offset(p)

    def test_zero_fidelity_rejected(self):
        with pytest.raises(ValidationError):
            CircuitNoiseConfig(0.0)

    def test_shrinks_toward_offsets(self, setup):
        ansatz, theta, strings = setup
        provider = circuit_noisy_provider(ExactProvider(), CircuitNoiseConfig(0.5, sigma=0.0))
        exact = ExactProvider().expectations(ansatz, theta, strings)
        assert np.allclose(provider.expectations(ansatz, theta, strings), 0.5 * exact)


class TestDepolarizingInvariance:
    """With ⟨O⟩ = ⟨H⟩ = 0 at θ, pure depolarizing noise scales f and J by F."""

    @pytest.fixture
    def system_pair(self):
        ansatz = Ansatz(
            2,
            (
                PauliRotation(PauliString.single(2, 0, "X"), 0),
                PauliRotation(PauliString.single(2, 1, "X"), 1),
            ),
        )
        theta = np.array([math.pi / 2, 0.7])
        h = HermitianOperator.from_labels([(1.0, "ZZ")])
        constraints = [PauliString.from_label("XI")]
        exact = covariance_system(ExactProvider(), ansatz, theta, constraints, h)
        noisy_provider = circuit_noisy_provider(ExactProvider(), CircuitNoiseConfig(0.9, sigma=0.0))
        noisy = covariance_system(noisy_provider, ansatz, theta, constraints, h)
        return exact, noisy

    def test_f_scales_by_fidelity(self, system_pair):
        exact, noisy = system_pair
        assert abs(exact.f[0]) == pytest.approx(math.cos(0.7))
        assert np.allclose(noisy.f, 0.9 * exact.f, atol=1e-12)

    def test_jacobian_scales_by_fidelity(self, system_pair):
        exact, noisy = system_pair
        assert abs(exact.J[0, 1]) == pytest.approx(math.sin(0.7))
        assert np.allclose(noisy.J, 0.9 * exact.J, atol=1e-12)

    def test_step_direction_unchanged(self, system_pair):
        exact, noisy = system_pair
        a = lm_step(exact.stack(), 1e-10, max_component_step=None)
        b = lm_step(noisy.stack(), 1e-10, max_component_step=None)
        assert np.allclose(a / np.linalg.norm(a), b / np.linalg.norm(b), atol=1e-8)


class TestFidelityFromRates:
    def test_device_example(self):
        assert fidelity_from_rates(0.00025, 0.001, 196, 52) == pytest.approx(0.9039, abs=1e-4)

    def test_perfect_gates(self):
        assert fidelity_from_rates(0.0, 0.0, 100, 100) == 1.0

    def test_invalid_rate(self):
        with pytest.raises(ValidationError):
            fidelity_from_rates(1.0, 0.0, 1, 1)
