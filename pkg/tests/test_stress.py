"""Ensemble and scale checks.

All tests are marked @pytest.mark.slow and can be run with:
    pytest tests/test_stress.py -v
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from covar.estimation.covariance import exact_covariances
from covar.estimation.noise import ShotNoiseConfig, shot_noisy_provider
from covar.estimation.providers import ExactProvider
from covar.estimation.shadows import acquire, estimate, plan_budget, shadow_provider
from covar.model.circuit import build_hea
from covar.model.hamiltonians import make_recompilation, make_spin_ring
from covar.model.pauli import PauliString, enumerate_pool
from covar.model.statevector import Statevector, exact_eigensystem, pauli_expectations, prepare
from covar.runner.config import parse_config
from covar.runner.experiments import run_experiment, run_sweep
from covar.solver.baselines import GdConfig, NatGradConfig, run_baseline
from covar.solver.lm import LmConfig, noise_floor_probe, run_covar, solver_timing


def _recompilation_config(tmp_path, nc_ratio: float, seeds: int):
    return parse_config(
        {
            "task": {"kind": "recompilation", "n_qubits": 6, "n_layers": 2, "perturb": 0.3},
            "optimizer": {"kind": "covar", "nc_ratio": nc_ratio, "max_iterations": 20},
            "pool": {"kind": "local", "q": 3},
            "seeds": list(range(seeds)),
            "output_dir": str(tmp_path / f"ratio_{nc_ratio:g}"),
            "record_timing": False,
        }
    )


def _first_below(values, threshold: float) -> float:
    """1-based iteration of the first value under *threshold*; inf if none."""
    for i, v in enumerate(values, start=1):
        if v < threshold:
            return i
    return math.inf


# -----------------------------------------------------------------------
# Recompilation ensembles
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestRecompilationEnsemble:
    def test_majority_reaches_solution(self, tmp_path) -> None:
        summary = run_experiment(_recompilation_config(tmp_path, 10.0, 10), threads=4)
        solved = [r for r in summary.rows if r["infidelity"] < 1e-6]
        assert len(solved) > len(summary.rows) / 2

    def test_median_infidelity_falls_with_constraint_ratio(self, tmp_path) -> None:
        config = parse_config(
            {
                "task": {"kind": "recompilation", "n_qubits": 6, "n_layers": 2, "perturb": 0.3},
                "optimizer": {"kind": "covar", "max_iterations": 20},
                "pool": {"kind": "local", "q": 3},
                "seeds": [0, 1, 2, 3, 4],
                "output_dir": str(tmp_path / "sweep"),
                "record_timing": False,
                "sweep": {"nc_ratios": [1, 2, 5, 10]},
            }
        )
        rows = run_sweep(config, threads=4)
        assert [r["value"] for r in rows] == [1.0, 2.0, 5.0, 10.0]
        medians = [r["infidelity_median"] for r in rows]
        for before, after in zip(medians, medians[1:]):
            assert after <= before + 1e-12

    def test_shot_noise_covar_beats_gradient_descent(self) -> None:
        covar_hits, gd_hits = [], []
        for seed in range(10):
            task, theta0 = make_recompilation(6, 2, seed, perturb=0.3)
            problem = task.problem(theta0, enumerate_pool(6, 3))
            noise = ShotNoiseConfig(100_000, seed=seed)
            lm = LmConfig(n_constraints=10 * problem.n_params, max_iterations=30)
            _, cv = run_covar(
                problem, shot_noisy_provider(ExactProvider(), noise), lm, seed, record_timing=False
            )
            covar_hits.append(_first_below(cv.column("infidelity"), 1e-3))
            _, gd = run_baseline(
                "vqe",
                shot_noisy_provider(ExactProvider(), noise),
                problem,
                GdConfig(learning_rate=0.1, max_iterations=300),
                record_timing=False,
            )
            gd_hits.append(_first_below(gd.column("infidelity"), 1e-3))
        assert sum(1 for it in covar_hits if it <= 30) >= 7
        assert np.median(covar_hits) < np.median(gd_hits)


# -----------------------------------------------------------------------
# Overdetermined root estimates
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestOverdetermination:
    def test_least_squares_beats_mean_newton(self, tmp_path) -> None:
        config = parse_config(
            {
                "task": {
                    "kind": "overdetermination_demo",
                    "n_qubits": 6,
                    "n_layers": 2,
                    "disturbed_param": 0,
                    "delta0": 0.5,
                },
                "optimizer": {"kind": "covar", "n_constraints": 300},
                "pool": {"kind": "local", "q": 3},
                "seeds": list(range(10)),
                "output_dir": str(tmp_path / "overdetermination"),
                "record_timing": False,
            }
        )
        summary = run_experiment(config, threads=4)
        assert sum(1 for r in summary.rows if r["ls_closer"]) >= 8


# -----------------------------------------------------------------------
# Spin-ring eigenstates
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestSpinRingEnsembles:
    def test_natural_gradient_then_covar_finds_eigenstates(self, tmp_path) -> None:
        config = parse_config(
            {
                "task": {
                    "kind": "convergence_distribution",
                    "n_qubits": 6,
                    "n_layers": 2,
                    "energy_gaps": [0.5],
                    "variation": 0.05,
                    "level_tol": 1e-3,
                },
                "optimizer": {
                    "kind": "nat_grad_then_covar",
                    "nat_grad_learning_rate": 0.05,
                    "nat_grad_max_iterations": 200,
                    "nc_ratio": 2,
                    "max_iterations": 40,
                },
                "pool": {"kind": "local", "q": 2},
                "seeds": list(range(10)),
                "output_dir": str(tmp_path / "distribution"),
                "record_timing": False,
            }
        )
        summary = run_experiment(config, threads=4)
        assert summary.extras["eigenstate_fraction"] >= 0.8

    def test_covar_escapes_local_trap(self, tmp_path) -> None:
        config = parse_config(
            {
                "task": {
                    "kind": "local_trap_escape",
                    "n_qubits": 6,
                    "n_layers": 2,
                    "stall_threshold": 2e-5,
                    "gd_learning_rate": 0.1,
                    "gd_max_iterations": 500,
                },
                "optimizer": {"kind": "covar", "nc_ratio": 3, "max_iterations": 30},
                "pool": {"kind": "local", "q": 2},
                "seeds": list(range(10)),
                "output_dir": str(tmp_path / "trap"),
                "record_timing": False,
            }
        )
        summary = run_experiment(config, threads=4)
        stall = summary.median("stall_energy_error")
        final = summary.median("energy_error")
        assert stall is not None and final is not None
        assert final * 10 <= stall

    def test_natural_gradient_energy_never_rises(self) -> None:
        task = make_spin_ring(6, 0.1, seed=3)
        problem = task.problem(n_layers=2, seed=3)
        _, trace = run_baseline(
            "nat_grad", ExactProvider(), problem, NatGradConfig(learning_rate=0.05, max_iterations=200)
        )
        energies = [trace.initial.energy] + trace.column("energy")
        for before, after in zip(energies, energies[1:]):
            assert after <= before + 1e-9


# -----------------------------------------------------------------------
# Shot-noise floor
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestNoiseFloor:
    def test_noise_does_not_accumulate(self) -> None:
        task, theta0 = make_recompilation(4, 1, seed=0, perturb=0.3)
        problem = task.problem(theta0, enumerate_pool(4, 4))
        nu = problem.n_params
        rows = noise_floor_probe(problem, [2 * nu, 20 * nu], 100_000, n_seeds=20)
        assert rows[1].step_error_std <= 1.5 * rows[0].step_error_std


# -----------------------------------------------------------------------
# Shadow concentration
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestShadowConcentration:
    @pytest.mark.parametrize("label", ["ZZ", "XY", "IX"])
    def test_planned_budget_meets_accuracy(self, label: str) -> None:
        rng = np.random.default_rng(5)
        amps = rng.normal(size=4) + 1j * rng.normal(size=4)
        state = Statevector(2, amps / np.linalg.norm(amps))
        p = PauliString.from_label(label)
        truth = pauli_expectations(state, [p])[0]
        budget = plan_budget(0.1, 0.05, p.weight, 1)
        hits = 0
        for trial in range(100):
            shadows = acquire(state, budget.total, [7, trial], budget.n_batches)
            hits += abs(estimate(shadows, p) - truth) <= budget.epsilon
        assert hits >= 95

    def test_provider_within_accuracy(self) -> None:
        ansatz = build_hea(2, 1)
        theta = np.linspace(0.2, 1.2, ansatz.n_params)
        strings = list(enumerate_pool(2, 2))
        truth = pauli_expectations(prepare(ansatz, theta), strings)
        budget = plan_budget(0.1, 0.05, 2, len(strings))
        provider = shadow_provider(budget, rng_seed=13)
        hits = 0
        for _ in range(100):
            values = provider.expectations(ansatz, theta, strings)
            hits += bool(np.all(np.abs(values - truth) <= budget.epsilon))
        assert hits >= 95


# -----------------------------------------------------------------------
# Eigenstate conditions
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestEigenstateCovariances:
    def test_every_eigenstate_of_five_qubit_ring(self) -> None:
        task = make_spin_ring(5, 0.1, seed=11)
        pool = list(enumerate_pool(5, 2))
        _, vectors = exact_eigensystem(task.hamiltonian)
        for column in vectors.T:
            f = exact_covariances(Statevector(5, column), pool, task.hamiltonian)
            assert np.max(np.abs(f)) < 1e-9


# -----------------------------------------------------------------------
# Solver cost
# -----------------------------------------------------------------------

@pytest.mark.slow
class TestSolverScaling:
    def test_lm_step_time_is_linear_in_constraints(self) -> None:
        timings = solver_timing(200, [1_000, 10_000, 100_000], rng_seed=0, repeats=3)
        for (n_a, t_a), (n_b, t_b) in zip(timings, timings[1:]):
            ratio = (t_b / t_a) / (n_b / n_a)
            assert 0.5 <= ratio <= 2.0
