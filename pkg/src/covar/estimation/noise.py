"""Synthetic noise channels wrapped around an inner provider."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from covar.errors import ValidationError
from covar.estimation.providers import ExpectationProvider, query_rng
from covar.model.pauli import PauliString

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShotNoiseConfig:
    n_shots: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_shots < 1:
            raise ValidationError(f"n_shots must be ≥ 1, got {self.n_shots}")

    @property
    def sigma(self) -> float:
        return 1.0 / math.sqrt(self.n_shots)


@dataclass(frozen=True)
class CircuitNoiseConfig:
    fidelity: float
    sigma: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.fidelity <= 1:
            raise ValidationError(f"fidelity must lie in (0, 1], got {self.fidelity}")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be ≥ 0, got {self.sigma}")


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------

class ShotNoiseProvider(ExpectationProvider):
    """Adds an independent ``N(0, 1/N_s)`` draw to every returned value."""

    name = "shot_noise"

    def __init__(self, inner: ExpectationProvider, config: ShotNoiseConfig) -> None:
        super().__init__()
        self.inner = inner
        self.config = config
        logger.debug("Shot noise on %s: sigma=%.3e", inner.name, config.sigma)

    @property
    def snapshots(self) -> int:
        return self.inner.snapshots

    def _estimate(self, ansatz, theta, strings, query):  # type: ignore[override]
        clean = self.inner.expectations(ansatz, theta, strings)
        rng = query_rng(self.config.seed, query)
        return clean + rng.normal(0.0, self.config.sigma, size=len(strings))


class CircuitNoiseProvider(ExpectationProvider):
    """``F·⟨O⟩ + (1 - F)·ε_O`` with a fixed Gaussian ``ε_O`` per string."""

    name = "circuit_noise"

    def __init__(self, inner: ExpectationProvider, config: CircuitNoiseConfig) -> None:
        super().__init__()
        self.inner = inner
        self.config = config
        self._offsets: dict[PauliString, float] = {}

    @property
    def snapshots(self) -> int:
        return self.inner.snapshots

    def offset(self, p: PauliString) -> float:
        """State-independent error overlap for *p*, drawn once from its masks."""
        with self._lock:
            value = self._offsets.get(p)
            if value is None:
                rng = np.random.default_rng([self.config.seed, p.n_qubits, p.x, p.z])
                value = float(rng.normal(0.0, self.config.sigma))
                self._offsets[p] = value
        return value

    def _estimate(self, ansatz, theta, strings, query):  # type: ignore[override]
        clean = self.inner.expectations(ansatz, theta, strings)
        f = self.config.fidelity
        offsets = np.array([self.offset(p) for p in strings])
        return f * clean + (1.0 - f) * offsets


def shot_noisy_provider(inner: ExpectationProvider, config: ShotNoiseConfig) -> ExpectationProvider:
    return ShotNoiseProvider(inner, config)


def circuit_noisy_provider(inner: ExpectationProvider, config: CircuitNoiseConfig) -> ExpectationProvider:
    return CircuitNoiseProvider(inner, config)


def fidelity_from_rates(eps1: float, eps2: float, n1_gates: int, n2_gates: int) -> float:
    """Global circuit fidelity ``(1-ε₁)^{n₁}(1-ε₂)^{n₂}``."""
    for eps in (eps1, eps2):
        if not 0 <= eps < 1:
            raise ValidationError(f"Error rates must lie in [0, 1), got {eps}")
    if n1_gates < 0 or n2_gates < 0:
        raise ValidationError("Gate counts must be non-negative")
    return (1.0 - eps1) ** n1_gates * (1.0 - eps2) ** n2_gates
