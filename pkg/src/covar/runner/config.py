"""Experiment configuration: YAML schema with strict validation.

A config file is one experiment family::

    task:
      kind: recompilation
      n_qubits: 4
      n_layers: 2
      perturb: 0.3
    provider:
      kind: exact
    optimizer:
      kind: covar
      nc_ratio: 2
      max_iterations: 20
    pool:
      kind: local
      q: 2
    seeds: [0, 1, 2]
    output_dir: out/recompilation

Every section rejects keys that do not apply to its ``kind``. All checks
run in :func:`load_config` / :func:`validate`, before anything is simulated
or written.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from covar.errors import ConfigError, CovarError
from covar.estimation.noise import CircuitNoiseConfig, ShotNoiseConfig
from covar.solver.baselines import GdConfig, NatGradConfig
from covar.solver.lm import LmConfig

TASK_KINDS = (
    "recompilation",
    "spin_ring",
    "overdetermination_demo",
    "noise_floor_probe",
    "local_trap_escape",
    "convergence_distribution",
    "scaling",
)
PROVIDER_KINDS = ("exact", "shot_noise", "circuit_noise", "shadows")
OPTIMIZER_KINDS = ("covar", "vqe", "variance_vqe", "nat_grad", "nat_grad_then_covar")
POOL_KINDS = ("local", "commuting", "orthogonal")

_TOP_LEVEL = {
    "task", "provider", "optimizer", "pool", "seeds", "output_dir", "sweep", "record_timing", "audit",
}


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaskConfig:
    kind: str
    n_qubits: int = 4
    n_layers: int = 2
    perturb: float = 0.3
    J: float = 0.1
    disturbed_param: int = 0
    delta0: float = 0.5
    nc_ratios: tuple[float, ...] = (2.0, 20.0)
    n_noise_seeds: int = 20
    stall_threshold: float = 2e-5
    gd_learning_rate: float = 0.1
    gd_max_iterations: int = 500
    energy_gaps: tuple[float, ...] = (0.5,)
    variation: float = 0.05
    level_tol: float = 1e-3
    qubit_counts: tuple[int, ...] = (4, 6)
    target_fidelity: float = 0.5


_COMMON_TASK = {"kind", "n_qubits", "n_layers"}
_SPIN_RING = _COMMON_TASK | {"J", "level_tol"}

# Keys each task kind accepts
TASK_FIELDS: dict[str, set[str]] = {
    "recompilation": _COMMON_TASK | {"perturb"},
    "spin_ring": _SPIN_RING,
    "overdetermination_demo": _COMMON_TASK | {"disturbed_param", "delta0"},
    "noise_floor_probe": _COMMON_TASK | {"perturb", "nc_ratios", "n_noise_seeds"},
    "local_trap_escape": _SPIN_RING | {"stall_threshold", "gd_learning_rate", "gd_max_iterations"},
    "convergence_distribution": _SPIN_RING | {"energy_gaps", "variation"},
    "scaling": {"kind", "n_layers", "qubit_counts", "target_fidelity"},
}


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "exact"
    n_shots: int = 100_000
    fidelity: float = 0.9
    sigma: float = 0.01
    epsilon: float = 0.1
    delta: float = 0.05


PROVIDER_FIELDS: dict[str, set[str]] = {
    "exact": {"kind"},
    "shot_noise": {"kind", "n_shots"},
    "circuit_noise": {"kind", "fidelity", "sigma"},
    "shadows": {"kind", "epsilon", "delta"},
}


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "covar"
    n_constraints: int | None = None
    nc_ratio: float | None = None
    max_iterations: int = 50
    lambda0: float = 1e-4
    lambda_growth: float = 2.0
    regularizer: str = "identity"
    max_component_step: float = 1.0
    convergence_tol: float = 1e-8
    resample_each_iteration: bool = True
    linesearch_enabled: bool = False
    max_lambda_doublings: int = 30
    fresh_sample_acceptance: bool = False
    learning_rate: float = 0.1
    pinv_tol: float = 1e-6
    stop_energy_gap: float | None = None
    stall_threshold: float | None = None
    nat_grad_learning_rate: float = 0.05
    nat_grad_max_iterations: int = 200

    def n_constraints_for(self, n_params: int) -> int:
        """Explicit ``n_constraints`` or ``round(nc_ratio · ν)``, at least 1."""
        if self.n_constraints is not None:
            return self.n_constraints
        ratio = self.nc_ratio if self.nc_ratio is not None else 1.0
        return max(1, int(round(ratio * n_params)))

    def lm_config(self, n_params: int) -> LmConfig:
        return LmConfig(
            n_constraints=self.n_constraints_for(n_params),
            lambda0=self.lambda0,
            lambda_growth=self.lambda_growth,
            regularizer=self.regularizer,
            max_component_step=self.max_component_step,
            max_iterations=self.max_iterations,
            convergence_tol=self.convergence_tol,
            resample_each_iteration=self.resample_each_iteration,
            linesearch_enabled=self.linesearch_enabled,
            max_lambda_doublings=self.max_lambda_doublings,
            fresh_sample_acceptance=self.fresh_sample_acceptance,
        )

    def gd_config(self) -> GdConfig:
        return GdConfig(
            learning_rate=self.learning_rate,
            max_iterations=self.max_iterations,
            stall_threshold=self.stall_threshold,
        )

    def nat_grad_config(self, stop_energy: float | None = None) -> NatGradConfig:
        """Natural gradient on its own, or as the first phase of ``nat_grad_then_covar``."""
        if self.kind == "nat_grad":
            return NatGradConfig(self.learning_rate, self.pinv_tol, self.max_iterations, stop_energy)
        return NatGradConfig(
            self.nat_grad_learning_rate, self.pinv_tol, self.nat_grad_max_iterations, stop_energy
        )


_LM_KEYS = {
    "n_constraints", "nc_ratio", "lambda0", "lambda_growth", "regularizer",
    "max_component_step", "convergence_tol", "resample_each_iteration",
    "linesearch_enabled", "max_lambda_doublings", "fresh_sample_acceptance",
}

OPTIMIZER_FIELDS: dict[str, set[str]] = {
    "covar": {"kind", "max_iterations"} | _LM_KEYS,
    "vqe": {"kind", "max_iterations", "learning_rate", "stall_threshold"},
    "variance_vqe": {"kind", "max_iterations", "learning_rate", "stall_threshold"},
    "nat_grad": {"kind", "max_iterations", "learning_rate", "pinv_tol", "stop_energy_gap"},
    "nat_grad_then_covar": {"kind", "max_iterations", "pinv_tol", "stop_energy_gap",
                            "nat_grad_learning_rate", "nat_grad_max_iterations"} | _LM_KEYS,
}


@dataclass(frozen=True)
class PoolConfig:
    kind: str = "local"
    q: int = 2


POOL_FIELDS: dict[str, set[str]] = {
    "local": {"kind", "q"},
    "commuting": {"kind"},
    "orthogonal": {"kind"},
}


@dataclass(frozen=True)
class SweepConfig:
    """Values substituted one at a time into ``optimizer.nc_ratio`` / ``provider.n_shots``."""

    nc_ratios: tuple[float, ...] = ()
    n_shots: tuple[int, ...] = ()

    @property
    def points(self) -> list[tuple[str, float | int]]:
        return [("nc_ratio", r) for r in self.nc_ratios] + [("n_shots", n) for n in self.n_shots]


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskConfig
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    pool: PoolConfig = field(default_factory=PoolConfig)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "out"
    sweep: SweepConfig | None = None
    record_timing: bool = True
    audit: bool = False

    def with_seed_offset(self, offset: int) -> ExperimentConfig:
        return replace(self, seeds=tuple(s + offset for s in self.seeds))

    def with_output_dir(self, output_dir: str | Path) -> ExperimentConfig:
        return replace(self, output_dir=str(output_dir))

    def with_audit(self) -> ExperimentConfig:
        return replace(self, audit=True)

    def at_sweep_point(self, key: str, value: float | int) -> ExperimentConfig:
        if key == "nc_ratio":
            optimizer = replace(self.optimizer, nc_ratio=float(value), n_constraints=None)
            return replace(self, optimizer=optimizer, sweep=None)
        provider = replace(self.provider, n_shots=int(value))
        return replace(self, provider=provider, sweep=None)


# ---------------------------------------------------------------------------
# Coercion
# ---------------------------------------------------------------------------

# Optional fields: name -> element type when not None
_OPTIONAL_TYPES: dict[str, type] = {
    "n_constraints": int,
    "nc_ratio": float,
    "stop_energy_gap": float,
    "stall_threshold": float,
}


def _scalar(value: Any, kind: type, where: str) -> Any:
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if kind is int:
        if not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if kind is float:
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{where} must be a finite number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


def _coerce(name: str, value: Any, default: Any, where: str) -> Any:
    if default is None and name in _OPTIONAL_TYPES:
        return None if value is None else _scalar(value, _OPTIONAL_TYPES[name], where)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where} must be a non-empty list")
        element = type(default[0]) if default else float
        return tuple(_scalar(v, element, f"{where}[{i}]") for i, v in enumerate(value))
    return _scalar(value, type(default), where)


def _section(cls: type, raw: Any, name: str, allowed: dict[str, set[str]], kinds: tuple[str, ...]) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"Section {name!r} must be a mapping")
    kind = raw.get("kind", getattr(cls, "kind", None) if name != "task" else None)
    if kind not in kinds:
        raise ConfigError(f"{name}.kind must be one of {kinds}, got {kind!r}")
    unknown = sorted(set(raw) - allowed[kind])
    if unknown:
        raise ConfigError(f"Unknown keys for {name} kind {kind!r}: {', '.join(map(str, unknown))}")
    defaults = {f.name: f.default for f in fields(cls)}
    values = {
        key: _coerce(key, value, defaults[key], f"{name}.{key}")
        for key, value in raw.items()
        if key != "kind"
    }
    return cls(kind=kind, **values)


def _sweep(raw: Any) -> SweepConfig:
    if not isinstance(raw, dict):
        raise ConfigError("Section 'sweep' must be a mapping")
    unknown = sorted(set(raw) - {"nc_ratios", "n_shots"})
    if unknown:
        raise ConfigError(f"Unknown keys for sweep: {', '.join(map(str, unknown))}")
    sweep = SweepConfig(
        nc_ratios=_coerce("nc_ratios", raw["nc_ratios"], (1.0,), "sweep.nc_ratios") if "nc_ratios" in raw else (),
        n_shots=_coerce("n_shots", raw["n_shots"], (1,), "sweep.n_shots") if "n_shots" in raw else (),
    )
    if not sweep.points:
        raise ConfigError("sweep needs nc_ratios or n_shots")
    return sweep


def parse_config(raw: Any) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from a parsed mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("Config must be a mapping")
    unknown = sorted(set(raw) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"Unknown top-level keys: {', '.join(map(str, unknown))}")
    if "task" not in raw:
        raise ConfigError("Config needs a 'task' section")

    seeds_raw = raw.get("seeds", [0])
    if not isinstance(seeds_raw, list) or not seeds_raw:
        raise ConfigError("seeds must be a non-empty list of integers")
    seeds = tuple(_scalar(s, int, f"seeds[{i}]") for i, s in enumerate(seeds_raw))
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")

    config = ExperimentConfig(
        task=_section(TaskConfig, raw["task"], "task", TASK_FIELDS, TASK_KINDS),
        provider=_section(ProviderConfig, raw.get("provider", {}), "provider", PROVIDER_FIELDS, PROVIDER_KINDS),
        optimizer=_section(OptimizerConfig, raw.get("optimizer", {}), "optimizer", OPTIMIZER_FIELDS, OPTIMIZER_KINDS),
        pool=_section(PoolConfig, raw.get("pool", {}), "pool", POOL_FIELDS, POOL_KINDS),
        seeds=seeds,
        output_dir=_scalar(raw.get("output_dir", "out"), str, "output_dir"),
        sweep=_sweep(raw["sweep"]) if raw.get("sweep") is not None else None,
        record_timing=_scalar(raw.get("record_timing", True), bool, "record_timing"),
        audit=_scalar(raw.get("audit", False), bool, "audit"),
    )
    validate(config)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Malformed YAML in {path}: {exc}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Semantic checks
# ---------------------------------------------------------------------------

def hea_params(n_qubits: int, n_layers: int) -> int:
    return n_qubits * (2 * n_layers + 1)


def pool_size(pool: PoolConfig, n_qubits: int) -> int:
    if pool.kind == "orthogonal":
        return 2**n_qubits - 1
    if pool.kind == "commuting":
        return n_qubits + math.comb(n_qubits, 2)
    return sum(math.comb(n_qubits, w) * 3**w for w in range(1, min(pool.q, n_qubits) + 1))


def _qubit_counts(task: TaskConfig) -> tuple[int, ...]:
    return task.qubit_counts if task.kind == "scaling" else (task.n_qubits,)


def uses_constraints(config: ExperimentConfig) -> bool:
    """Whether any stage of the experiment samples covariance constraints."""
    return config.optimizer.kind in ("covar", "nat_grad_then_covar") or config.task.kind in (
        "overdetermination_demo",
        "noise_floor_probe",
        "local_trap_escape",
        "convergence_distribution",
        "scaling",
    )


def validate(config: ExperimentConfig) -> None:
    """Cross-field checks; raises :class:`ConfigError` on the first problem."""
    task, opt, pool, provider = config.task, config.optimizer, config.pool, config.provider
    if task.n_layers < 1:
        raise ConfigError(f"task.n_layers must be ≥ 1, got {task.n_layers}")
    counts = _qubit_counts(task)
    for n in counts:
        if not 1 <= n <= 14:
            raise ConfigError(f"Qubit count {n} outside the simulable range 1..14")
    spin = task.kind in ("spin_ring", "local_trap_escape", "convergence_distribution")
    if spin and task.n_qubits < 3:
        raise ConfigError("Spin-ring tasks need at least 3 qubits")
    if task.kind in ("recompilation", "noise_floor_probe") and task.perturb < 0:
        raise ConfigError("task.perturb must be ≥ 0")
    if task.kind == "scaling" and not 0 < task.target_fidelity < 1:
        raise ConfigError("task.target_fidelity must lie in (0, 1)")
    if task.kind == "convergence_distribution":
        if provider.kind != "exact":
            raise ConfigError("convergence_distribution runs noiseless; use provider kind 'exact'")
        if any(g <= 0 for g in task.energy_gaps):
            raise ConfigError("task.energy_gaps must be positive")
        if task.variation < 0:
            raise ConfigError("task.variation must be ≥ 0")
    if task.kind == "overdetermination_demo":
        if not 0 <= task.disturbed_param < hea_params(task.n_qubits, task.n_layers):
            raise ConfigError(f"task.disturbed_param {task.disturbed_param} out of range")
        if pool.kind == "orthogonal":
            raise ConfigError("overdetermination_demo needs a Pauli pool")
    if task.kind == "noise_floor_probe":
        if provider.kind not in ("exact", "shot_noise"):
            raise ConfigError("noise_floor_probe supports the exact and shot_noise providers")
        if pool.kind == "orthogonal":
            raise ConfigError("noise_floor_probe needs a Pauli pool")
        if task.n_noise_seeds < 1:
            raise ConfigError("task.n_noise_seeds must be ≥ 1")
    if task.level_tol <= 0:
        raise ConfigError("task.level_tol must be positive")
    if pool.kind == "local" and not 1 <= pool.q <= max(counts):
        raise ConfigError(f"pool.q must lie in 1..{max(counts)}, got {pool.q}")
    if pool.kind == "orthogonal" and provider.kind != "exact":
        raise ConfigError("The orthogonal pool is evaluated exactly; use provider kind 'exact'")
    if opt.nc_ratio is not None and opt.n_constraints is not None:
        raise ConfigError("Give optimizer.n_constraints or optimizer.nc_ratio, not both")
    if opt.nc_ratio is not None and opt.nc_ratio <= 0:
        raise ConfigError("optimizer.nc_ratio must be positive")

    try:
        if provider.kind == "shot_noise":
            ShotNoiseConfig(provider.n_shots)
        elif provider.kind == "circuit_noise":
            CircuitNoiseConfig(provider.fidelity, provider.sigma)
        elif provider.kind == "shadows" and not (provider.epsilon > 0 and 0 < provider.delta <= 1):
            raise ConfigError("shadows need epsilon > 0 and 0 < delta ≤ 1")
        if opt.kind in ("vqe", "variance_vqe"):
            opt.gd_config()
        if opt.kind in ("nat_grad", "nat_grad_then_covar"):
            opt.nat_grad_config()
        for n in counts if uses_constraints(config) else ():
            nu = hea_params(n, task.n_layers)
            ratios = task.nc_ratios if task.kind == "noise_floor_probe" else (None,)
            sweep_ratios = config.sweep.nc_ratios if config.sweep else ()
            for ratio in (*ratios, *sweep_ratios):
                lm = replace(opt, nc_ratio=ratio, n_constraints=None) if ratio else opt
                n_c = lm.lm_config(nu).n_constraints
                size = pool_size(pool, n)
                if n_c > size:
                    raise ConfigError(
                        f"N_c={n_c} exceeds the {pool.kind} pool size {size} at {n} qubits"
                    )
    except ConfigError:
        raise
    except CovarError as exc:
        raise ConfigError(str(exc)) from exc
    if config.sweep is not None and config.sweep.n_shots and provider.kind != "shot_noise":
        raise ConfigError("Sweeping n_shots needs provider kind 'shot_noise'")
    if config.sweep is not None and any(r <= 0 for r in config.sweep.nc_ratios):
        raise ConfigError("sweep.nc_ratios must be positive")
