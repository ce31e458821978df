"""Task drivers: one seeded job per seed, merged into a :class:`RunSummary`.

Each task kind maps to a per-seed function returning a :class:`SeedOutcome`.
Seed jobs run on a thread pool and write their own trace files under
``<output_dir>/seed_<s>/``; the coordinator writes the merged tables and
``summary.json`` afterwards, in seed order.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import scipy.optimize
import scipy.stats

from covar.errors import ConfigError
from covar.estimation.covariance import OrthogonalPool
from covar.estimation.noise import (
    CircuitNoiseConfig,
    ShotNoiseConfig,
    circuit_noisy_provider,
    shot_noisy_provider,
)
from covar.estimation.providers import ExactProvider, ExpectationProvider
from covar.estimation.shadows import plan_budget, shadow_provider
from covar.model.circuit import HermitianOperator
from covar.model.hamiltonians import (
    Problem,
    SpinRingTask,
    classify_energy,
    energy_levels,
    make_recompilation,
    make_recompilation_at_fidelity,
    make_spin_ring,
)
from covar.model.pauli import OperatorPool, enumerate_pool, z_product_pool
from covar.model.statevector import Statevector, exact_eigensystem, prepare
from covar.runner.audit import write_audit
from covar.runner.config import ExperimentConfig, PoolConfig, ProviderConfig
from covar.runner.formatter import RunSummary, quartiles, write_csv, write_json, write_summary, write_trace
from covar.solver.baselines import GdConfig, run_baseline
from covar.solver.lm import noise_floor_probe, overdetermination_demo, run_covar
from covar.solver.trace import IterationTrace

logger = logging.getLogger(__name__)

OVERLAP_BUCKET = 0.1
SWEEP_COLUMNS = (
    "parameter",
    "value",
    "n_seeds",
    "infidelity_median",
    "infidelity_q1",
    "infidelity_q3",
    "energy_error_median",
    "iterations_median",
)
_RUN_METRICS = (
    "energy_error",
    "infidelity",
    "infidelity_max_basis",
    "iterations",
    "flagged",
    "provider_queries",
    "snapshots",
    "final_f_norm",
)


@dataclass
class SeedOutcome:
    seed: int
    row: dict[str, Any]
    traces: dict[str, IterationTrace] = field(default_factory=dict)
    table: list[dict[str, Any]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------

def make_pool(config: PoolConfig, n_qubits: int) -> OperatorPool | OrthogonalPool:
    if config.kind == "orthogonal":
        return OrthogonalPool(n_qubits)
    if config.kind == "commuting":
        return z_product_pool(n_qubits, min(2, n_qubits))
    return enumerate_pool(n_qubits, min(config.q, n_qubits))


def _pauli_pool(pool: OperatorPool | OrthogonalPool) -> OperatorPool | None:
    return pool if isinstance(pool, OperatorPool) else None


def make_provider(
    config: ProviderConfig,
    seed: int,
    h: HermitianOperator,
    pool: OperatorPool | OrthogonalPool,
    n_constraints: int,
) -> ExpectationProvider:
    """Provider for one seed; shadow budgets cover every string a covariance system reads."""
    exact = ExactProvider()
    if config.kind == "shot_noise":
        return shot_noisy_provider(exact, ShotNoiseConfig(config.n_shots, seed=seed))
    if config.kind == "circuit_noise":
        return circuit_noisy_provider(exact, CircuitNoiseConfig(config.fidelity, config.sigma, seed=seed))
    if config.kind == "shadows":
        n = h.n_qubits
        h_weight = max(p.weight for p in h.strings)
        q = pool.locality_bound if isinstance(pool, OperatorPool) else n
        locality = min(n, q + h_weight)
        n_observables = n_constraints * (len(h.strings) + 1) + len(h.strings)
        return shadow_provider(plan_budget(config.epsilon, config.delta, locality, n_observables), seed)
    return exact


def _provider_for(
    config: ExperimentConfig,
    seed: int,
    problem: Problem,
    pool: OperatorPool | OrthogonalPool,
    audit_tag: str = "audit",
) -> ExpectationProvider:
    n_c = config.optimizer.n_constraints_for(problem.n_params)
    provider = make_provider(config.provider, seed, problem.hamiltonian, pool, n_c)
    if config.audit:
        directory = Path(config.output_dir) / f"seed_{seed}" / audit_tag
        write_audit(directory, problem, pool, provider, n_c, seed)
    return provider


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    levels: np.ndarray

    @property
    def ground_energy(self) -> float:
        return float(self.levels[0])

    @property
    def ground_space(self) -> np.ndarray:
        """Columns spanning the (possibly degenerate) ground level."""
        mask = self.eigenvalues < self.levels[0] + 1e-9
        return self.eigenvectors[:, mask]

    def ground_overlap(self, state: Statevector) -> float:
        return float(np.sum(np.abs(self.ground_space.conj().T @ state.amplitudes) ** 2))

    @property
    def reference(self) -> Statevector | None:
        """The ground state when it is unique."""
        space = self.ground_space
        if space.shape[1] != 1:
            return None
        return Statevector(space.shape[0].bit_length() - 1, space[:, 0])


def spectrum(h: HermitianOperator) -> Spectrum:
    eigenvalues, eigenvectors = exact_eigensystem(h)
    return Spectrum(eigenvalues, eigenvectors, energy_levels(eigenvalues))


def _spin_ring(config: ExperimentConfig, seed: int) -> tuple[SpinRingTask, Spectrum, Problem, OperatorPool | OrthogonalPool]:
    task_cfg = config.task
    task = make_spin_ring(task_cfg.n_qubits, task_cfg.J, seed)
    eig = spectrum(task.hamiltonian)
    pool = make_pool(config.pool, task.n_qubits)
    problem = task.problem(task_cfg.n_layers, seed, _pauli_pool(pool), config.pool.q)
    problem = replace(problem, ground_energy=eig.ground_energy, reference=eig.reference)
    return task, eig, problem, pool


# ---------------------------------------------------------------------------
# Optimizer dispatch
# ---------------------------------------------------------------------------

def optimize(
    config: ExperimentConfig,
    problem: Problem,
    provider: ExpectationProvider,
    pool: OperatorPool | OrthogonalPool,
    seed: int,
) -> tuple[np.ndarray, dict[str, IterationTrace]]:
    """Run the configured optimizer; the main trace is always under ``"trace"``."""
    opt = config.optimizer
    timing = config.record_timing
    if opt.kind == "covar":
        theta, trace = run_covar(problem, provider, opt.lm_config(problem.n_params), seed, pool, timing)
        return theta, {"trace": trace}
    if opt.kind in ("vqe", "variance_vqe"):
        theta, trace = run_baseline(opt.kind, provider, problem, opt.gd_config(), timing)
        return theta, {"trace": trace}

    stop = None
    if opt.stop_energy_gap is not None and problem.ground_energy is not None:
        stop = problem.ground_energy + opt.stop_energy_gap
    theta, ng = run_baseline("nat_grad", provider, problem, opt.nat_grad_config(stop), timing)
    if opt.kind == "nat_grad":
        return theta, {"trace": ng}
    theta, cv = run_covar(
        problem.with_theta0(theta), provider, opt.lm_config(problem.n_params), seed, pool, timing
    )
    return theta, {"trace_nat_grad": ng, "trace": cv}


def _energy_error(energy: float, problem: Problem) -> float:
    return energy - problem.ground_energy if problem.ground_energy is not None else math.nan


def seed_row(seed: int, problem: Problem, traces: dict[str, IterationTrace]) -> dict[str, Any]:
    """Final metrics of the main trace; counters sum over every phase."""
    main = traces["trace"]
    final = main.final
    return {
        "seed": seed,
        "energy": final.energy,
        "energy_error": _energy_error(final.energy, problem),
        "infidelity": final.infidelity,
        "infidelity_max_basis": final.infidelity_max_basis,
        "iterations": sum(t.iterations for t in traces.values()),
        "flagged": sum(t.flagged_count for t in traces.values()),
        "provider_queries": sum(t.provider_queries for t in traces.values()),
        "snapshots": sum(t.snapshots for t in traces.values()),
        "final_f_norm": main.final_f_norm,
        "converged": main.converged,
    }


# ---------------------------------------------------------------------------
# Per-seed jobs
# ---------------------------------------------------------------------------

def recompilation_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    t = config.task
    task, theta0 = make_recompilation(t.n_qubits, t.n_layers, seed, t.perturb)
    pool = make_pool(config.pool, t.n_qubits)
    problem = task.problem(theta0, _pauli_pool(pool))
    provider = _provider_for(config, seed, problem, pool)
    _, traces = optimize(config, problem, provider, pool, seed)
    return SeedOutcome(seed, seed_row(seed, problem, traces), traces)


def spin_ring_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    _, eig, problem, pool = _spin_ring(config, seed)
    provider = _provider_for(config, seed, problem, pool)
    _, traces = optimize(config, problem, provider, pool, seed)
    row = seed_row(seed, problem, traces)
    level = classify_energy(row["energy"], eig.levels, config.task.level_tol)
    row["level"] = -1 if level is None else level
    return SeedOutcome(seed, row, traces)


def overdetermination_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    t = config.task
    task, _ = make_recompilation(t.n_qubits, t.n_layers, seed, 0.0)
    pool = make_pool(config.pool, t.n_qubits)
    assert isinstance(pool, OperatorPool)
    n_c = config.optimizer.n_constraints_for(task.ansatz.n_params)
    result = overdetermination_demo(
        task.circuit, task.hidden_params, t.disturbed_param, t.delta0, pool, n_c, task.hamiltonian, seed
    )
    row = {
        "seed": seed,
        "n_constraints": n_c,
        "ls_estimate": result.ls_estimate,
        "mean_newton": result.mean_newton,
        "ls_error": abs(result.ls_estimate),
        "newton_error": abs(result.mean_newton),
        "ls_closer": abs(result.ls_estimate) < abs(result.mean_newton),
    }
    return SeedOutcome(seed, row)


def noise_floor_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    t = config.task
    task, theta0 = make_recompilation(t.n_qubits, t.n_layers, seed, t.perturb)
    pool = make_pool(config.pool, t.n_qubits)
    assert isinstance(pool, OperatorPool)
    problem = task.problem(theta0, pool)
    nu = problem.n_params
    n_c_values = [max(1, int(round(r * nu))) for r in t.nc_ratios]
    n_shots = config.provider.n_shots if config.provider.kind == "shot_noise" else None
    stats = noise_floor_probe(problem, n_c_values, n_shots, t.n_noise_seeds, seed, config.optimizer.lambda0)
    table = [
        {
            "seed": seed,
            "nc_ratio": ratio,
            "n_constraints": r.n_constraints,
            "n_shots": r.n_shots,
            "step_error_std": r.step_error_std,
            "step_error_max": r.step_error_max,
        }
        for ratio, r in zip(t.nc_ratios, stats)
    ]
    first, last = stats[0].step_error_std, stats[-1].step_error_std
    row = {
        "seed": seed,
        "std_first": first,
        "std_last": last,
        "std_ratio": last / first if first > 0 else math.nan,
    }
    return SeedOutcome(seed, row, table=table)


def local_trap_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    """Energy gradient descent to a stall, then CoVaR from the stalled point."""
    t = config.task
    _, _, problem, pool = _spin_ring(config, seed)
    provider = _provider_for(config, seed, problem, pool)
    gd_config = GdConfig(t.gd_learning_rate, t.gd_max_iterations, stall_threshold=t.stall_threshold)
    theta, gd = run_baseline("vqe", provider, problem, gd_config, config.record_timing)
    stall_energy = gd.final.energy
    traces = {"trace_gd": gd}

    lm = config.optimizer.lm_config(problem.n_params)
    skipped = gd.final_f_norm < lm.convergence_tol
    if skipped:
        logger.warning("seed %d: gradient descent already reached an eigenstate; skipping CoVaR", seed)
        final_energy, transient = stall_energy, False
        traces["trace"] = IterationTrace(records=[], initial=gd.final, optimizer="covar", converged=True)
    else:
        _, cv = run_covar(problem.with_theta0(theta), provider, lm, seed, pool, config.record_timing)
        traces["trace"] = cv
        final_energy = cv.final.energy
        transient = any(r.energy > stall_energy for r in cv.records)

    stall_error = _energy_error(stall_energy, problem)
    final_error = _energy_error(final_energy, problem)
    row = seed_row(seed, problem, traces)
    row.update(
        stall_energy_error=stall_error,
        gd_iterations=gd.iterations,
        covar_iterations=traces["trace"].iterations,
        covar_skipped=skipped,
        improvement=0.0 if skipped else stall_error - final_error,
        transient_increase=transient,
    )
    return SeedOutcome(seed, row, traces)


def convergence_distribution_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    """Natural gradient to ``E0 + gap`` per gap, a small random kick, then CoVaR."""
    t = config.task
    _, eig, problem, pool = _spin_ring(config, seed)
    provider = _provider_for(config, seed, problem, pool)
    lm = config.optimizer.lm_config(problem.n_params)
    traces: dict[str, IterationTrace] = {}
    table: list[dict[str, Any]] = []
    for i, gap in enumerate(t.energy_gaps):
        stop = eig.ground_energy + gap
        theta, ng = run_baseline(
            "nat_grad", provider, problem, config.optimizer.nat_grad_config(stop), config.record_timing
        )
        rng = np.random.default_rng([seed, i])
        theta_init = theta + rng.uniform(-t.variation, t.variation, size=problem.n_params)
        start_state = prepare(problem.ansatz, theta_init)
        _, cv = run_covar(problem.with_theta0(theta_init), provider, lm, seed, pool, config.record_timing)
        traces[f"gap_{i}/trace_nat_grad"] = ng
        traces[f"gap_{i}/trace"] = cv
        level = classify_energy(cv.final.energy, eig.levels, t.level_tol)
        table.append(
            {
                "seed": seed,
                "energy_gap": gap,
                "initial_energy_error": _energy_error(cv.initial.energy if cv.initial else math.nan, problem),
                "initial_overlap": eig.ground_overlap(start_state),
                "final_energy_error": _energy_error(cv.final.energy, problem),
                "level": -1 if level is None else level,
                "outcome": "unconverged" if level is None else ("ground" if level == 0 else "excited"),
                "iterations": cv.iterations,
            }
        )
    row = {
        "seed": seed,
        "runs": len(table),
        "ground": sum(1 for r in table if r["outcome"] == "ground"),
        "eigenstate": sum(1 for r in table if r["outcome"] != "unconverged"),
        "energy_error": float(np.median([r["final_energy_error"] for r in table])),
    }
    return SeedOutcome(seed, row, traces, table)


def scaling_seed(config: ExperimentConfig, seed: int) -> SeedOutcome:
    """CoVaR from a start at fixed initial fidelity, once per qubit count.

    The seed row reports the largest qubit count; the table has every count.
    """
    t = config.task
    traces: dict[str, IterationTrace] = {}
    table: list[dict[str, Any]] = []
    for n in t.qubit_counts:
        task, theta0 = make_recompilation_at_fidelity(n, t.n_layers, seed, t.target_fidelity)
        pool = make_pool(config.pool, n)
        problem = task.problem(theta0, _pauli_pool(pool))
        provider = _provider_for(config, seed, problem, pool, f"audit_n{n}")
        _, trace = run_covar(
            problem, provider, config.optimizer.lm_config(problem.n_params), seed, pool, config.record_timing
        )
        traces[f"n{n}/trace"] = trace
        table.append(
            {
                "seed": seed,
                "n_qubits": n,
                "initial_infidelity": trace.initial.infidelity if trace.initial else math.nan,
                "infidelity": trace.final.infidelity,
                "iterations": trace.iterations,
                "provider_queries": trace.provider_queries,
            }
        )
    largest = max(table, key=lambda r: r["n_qubits"])
    row = {"seed": seed, "n_qubits": largest["n_qubits"], "infidelity": largest["infidelity"]}
    return SeedOutcome(seed, row, traces, table)


SeedJob = Callable[[ExperimentConfig, int], SeedOutcome]

SEED_JOBS: dict[str, SeedJob] = {
    "recompilation": recompilation_seed,
    "spin_ring": spin_ring_seed,
    "overdetermination_demo": overdetermination_seed,
    "noise_floor_probe": noise_floor_seed,
    "local_trap_escape": local_trap_seed,
    "convergence_distribution": convergence_distribution_seed,
    "scaling": scaling_seed,
}

# Metrics aggregated into median/quartiles per task kind
TASK_METRICS: dict[str, tuple[str, ...]] = {
    "recompilation": _RUN_METRICS,
    "spin_ring": _RUN_METRICS,
    "overdetermination_demo": ("ls_error", "newton_error", "ls_closer"),
    "noise_floor_probe": ("std_first", "std_last", "std_ratio"),
    "local_trap_escape": _RUN_METRICS + ("stall_energy_error", "improvement", "transient_increase"),
    "convergence_distribution": ("runs", "ground", "eigenstate", "energy_error"),
    "scaling": ("infidelity",),
}

TABLE_COLUMNS: dict[str, tuple[str, ...]] = {
    "noise_floor_probe": ("seed", "nc_ratio", "n_constraints", "n_shots", "step_error_std", "step_error_max"),
    "convergence_distribution": (
        "seed", "energy_gap", "initial_energy_error", "initial_overlap",
        "final_energy_error", "level", "outcome", "iterations",
    ),
    "scaling": ("seed", "n_qubits", "initial_infidelity", "infidelity", "iterations", "provider_queries"),
}
DISTRIBUTION_COLUMNS = ("overlap_lo", "overlap_hi", "runs", "ground_fraction", "unconverged", "levels")


# ---------------------------------------------------------------------------
# Merged tables
# ---------------------------------------------------------------------------

def overlap_distribution(table: Sequence[dict[str, Any]], width: float = OVERLAP_BUCKET) -> list[dict[str, Any]]:
    """Bucket runs by initial ground-state overlap; one row per non-empty bucket."""
    n_buckets = int(round(1 / width))
    buckets: dict[int, list[dict[str, Any]]] = {}
    for r in table:
        b = min(int(r["initial_overlap"] / width), n_buckets - 1)
        buckets.setdefault(b, []).append(r)
    rows = []
    for b in sorted(buckets):
        runs = buckets[b]
        levels: dict[int, int] = {}
        for r in runs:
            levels[r["level"]] = levels.get(r["level"], 0) + 1
        rows.append(
            {
                "overlap_lo": round(b * width, 10),
                "overlap_hi": round((b + 1) * width, 10),
                "runs": len(runs),
                "ground_fraction": sum(1 for r in runs if r["outcome"] == "ground") / len(runs),
                "unconverged": sum(1 for r in runs if r["outcome"] == "unconverged"),
                "levels": " ".join(f"{k}:{v}" for k, v in sorted(levels.items())),
            }
        )
    return rows


def overlap_trend(rows: Sequence[dict[str, Any]]) -> float:
    """Spearman correlation of bucket centre against ground fraction; NaN if undefined."""
    if len(rows) < 2:
        return math.nan
    centres = [(r["overlap_lo"] + r["overlap_hi"]) / 2 for r in rows]
    fractions = [r["ground_fraction"] for r in rows]
    if len(set(fractions)) < 2:
        return math.nan
    return float(scipy.stats.spearmanr(centres, fractions).statistic)


def _scaling_by_qubits(table: Sequence[dict[str, Any]]) -> dict[str, Any]:
    counts = sorted({r["n_qubits"] for r in table})
    return {
        str(n): quartiles([r["infidelity"] for r in table if r["n_qubits"] == n]) for n in counts
    }


def _task_extras(config: ExperimentConfig, out: Path, table: list[dict[str, Any]], summary: RunSummary) -> None:
    kind = config.task.kind
    if kind == "overdetermination_demo":
        summary.extras["ls_closer_fraction"] = sum(1 for r in summary.rows if r["ls_closer"]) / len(summary.rows)
    elif kind == "local_trap_escape":
        stall = summary.median("stall_energy_error")
        final = summary.median("energy_error")
        summary.extras["median_improvement_factor"] = (
            stall / final if stall is not None and final not in (None, 0.0) else None
        )
    elif kind == "convergence_distribution":
        distribution = overlap_distribution(table)
        write_csv(out / "overlap_distribution.csv", DISTRIBUTION_COLUMNS, distribution)
        summary.extras["overlap_distribution"] = distribution
        summary.extras["spearman_rho"] = overlap_trend(distribution)
        summary.extras["eigenstate_fraction"] = sum(r["outcome"] != "unconverged" for r in table) / len(table)
    elif kind == "scaling":
        summary.extras["by_qubits"] = _scaling_by_qubits(table)


# ---------------------------------------------------------------------------
# Coordinator
# ---------------------------------------------------------------------------

def _write_seed(outcome: SeedOutcome, out: Path) -> None:
    for name, trace in outcome.traces.items():
        write_trace(trace, out / f"seed_{outcome.seed}" / f"{name}.csv")


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    """Run every seed of *config* and write traces, tables and ``summary.json``."""
    out = Path(config.output_dir)
    job = SEED_JOBS[config.task.kind]

    def run_seed(seed: int) -> SeedOutcome:
        logger.info("%s seed %d started", config.task.kind, seed)
        outcome = job(config, seed)
        _write_seed(outcome, out)
        logger.info("%s seed %d finished", config.task.kind, seed)
        return outcome

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(run_seed, config.seeds))

    table = [row for o in outcomes for row in o.table]
    if config.task.kind in TABLE_COLUMNS:
        write_csv(out / f"{config.task.kind}.csv", TABLE_COLUMNS[config.task.kind], table)
    summary = RunSummary(
        task=config.task.kind,
        optimizer=config.optimizer.kind,
        rows=[o.row for o in outcomes],
        metrics=TASK_METRICS[config.task.kind],
        extras={"config": asdict(config)},
    )
    _task_extras(config, out, table, summary)
    path = write_summary(summary, out / "summary.json")
    logger.info("wrote %s", path)
    return summary


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _power_law(x: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    return a * np.power(x, -b) + c


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> dict[str, float] | None:
    """Least-squares fit ``y = a·x^(-b) + c``; ``None`` with a warning when it fails."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    keep = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[keep], ys[keep]
    if xs.size < 3:
        return None
    p0 = (max(float(ys[0] - ys[-1]), 1e-12), 1.0, float(ys.min()))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.optimize.OptimizeWarning)
            params, _ = scipy.optimize.curve_fit(_power_law, xs, ys, p0=p0, maxfev=20_000)
    except (RuntimeError, ValueError, scipy.optimize.OptimizeWarning) as exc:
        logger.warning("power-law fit failed: %s", exc)
        return None
    a, b, c = (float(p) for p in params)
    return {"a": a, "b": b, "c": c}


def _point_dir(key: str, value: float | int) -> str:
    return f"{key}_{value:g}"


def run_sweep(config: ExperimentConfig, threads: int = 1) -> list[dict[str, Any]]:
    """One full experiment per sweep point, then ``sweep.csv`` and ``sweep_summary.json``."""
    if config.sweep is None:
        raise ConfigError("config has no sweep section")
    out = Path(config.output_dir)
    rows: list[dict[str, Any]] = []
    for key, value in config.sweep.points:
        point = config.at_sweep_point(key, value).with_output_dir(out / _point_dir(key, value))
        summary = run_experiment(point, threads)
        agg = summary.aggregates
        infidelity = agg.get("infidelity", {"median": None, "q1": None, "q3": None})
        rows.append(
            {
                "parameter": key,
                "value": value,
                "n_seeds": len(summary.rows),
                "infidelity_median": infidelity["median"],
                "infidelity_q1": infidelity["q1"],
                "infidelity_q3": infidelity["q3"],
                "energy_error_median": agg.get("energy_error", {}).get("median"),
                "iterations_median": agg.get("iterations", {}).get("median"),
            }
        )
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    fits: dict[str, Any] = {}
    for key in ("nc_ratio", "n_shots"):
        points = [r for r in rows if r["parameter"] == key and r["infidelity_median"] is not None]
        if points:
            fits[key] = fit_power_law([r["value"] for r in points], [r["infidelity_median"] for r in points])
    write_json(out / "sweep_summary.json", {"points": rows, "fits": fits})
    logger.info("wrote %s", out / "sweep.csv")
    return rows
