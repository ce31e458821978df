"""Circuit and operator model: gates, ansätze and Pauli-sum Hamiltonians.

Rotations follow ``exp(-i · sign · θ · P / 2)`` so the ±π/2 shift rule is
exact. ``sign`` is ±1; inverted circuits flip it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from covar.errors import ValidationError
from covar.lib.gates import adjoint_label, gate_arity
from covar.model.pauli import PauliString


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PauliRotation:
    generator: PauliString
    param_index: int
    sign: int = 1

    def __post_init__(self) -> None:
        if self.generator.is_identity:
            raise ValidationError("Rotation generator must be non-identity")
        if self.param_index < 0:
            raise ValidationError(f"Negative parameter index {self.param_index}")
        if self.sign not in (1, -1):
            raise ValidationError(f"Rotation sign must be ±1, got {self.sign}")


@dataclass(frozen=True)
class FixedRotation:
    """A rotation with its angle bound at construction."""

    generator: PauliString
    angle: float

    def __post_init__(self) -> None:
        if self.generator.is_identity:
            raise ValidationError("Rotation generator must be non-identity")
        if not math.isfinite(self.angle):
            raise ValidationError(f"Non-finite rotation angle {self.angle}")


@dataclass(frozen=True)
class FixedUnitary:
    label: str
    targets: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        arity = gate_arity(self.label)
        if len(self.targets) != arity:
            raise ValidationError(
                f"Gate {self.label} acts on {arity} qubits, got targets {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise ValidationError(f"Repeated targets {self.targets} for {self.label}")


Gate = PauliRotation | FixedRotation | FixedUnitary


# ---------------------------------------------------------------------------
# Ansatz
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ansatz:
    """Ordered gate list mapping θ ∈ R^ν to ``U(θ)|0…0⟩``."""

    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)
    _n_params: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be positive, got {self.n_qubits}")
        object.__setattr__(self, "gates", tuple(self.gates))
        used: set[int] = set()
        for gate in self.gates:
            if isinstance(gate, (PauliRotation, FixedRotation)):
                if gate.generator.n_qubits != self.n_qubits:
                    raise ValidationError(
                        f"Generator {gate.generator.label} does not act on {self.n_qubits} qubits"
                    )
                if isinstance(gate, PauliRotation):
                    used.add(gate.param_index)
            elif any(not 0 <= t < self.n_qubits for t in gate.targets):
                raise ValidationError(f"Gate {gate.label} targets {gate.targets} out of range")
        n_params = max(used) + 1 if used else 0
        missing = sorted(set(range(n_params)) - used)
        if missing:
            raise ValidationError(f"Parameter indices {missing} are not used by any gate")
        object.__setattr__(self, "_n_params", n_params)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    @property
    def n_params(self) -> int:
        return self._n_params

    @property
    def rotation_indices(self) -> list[int]:
        """Positions of parametrised rotations in gate order."""
        return [i for i, g in enumerate(self.gates) if isinstance(g, PauliRotation)]

    @property
    def has_shared_params(self) -> bool:
        return len(self.rotation_indices) != self.n_params

    def check_theta(self, theta: Sequence[float] | np.ndarray) -> np.ndarray:
        arr = np.asarray(theta, dtype=float)
        if arr.shape != (self.n_params,):
            raise ValidationError(
                f"Expected {self.n_params} parameters, got shape {arr.shape}"
            )
        return arr

    def expanded(self) -> tuple[Ansatz, np.ndarray]:
        """One parameter per rotation gate.

        Returns the expanded ansatz and ``owner`` with ``owner[m]`` the
        original index of expanded parameter ``m``.
        """
        if not self.has_shared_params:
            return self, np.arange(self.n_params)
        gates: list[Gate] = []
        owner: list[int] = []
        for gate in self.gates:
            if isinstance(gate, PauliRotation):
                gates.append(PauliRotation(gate.generator, len(owner), gate.sign))
                owner.append(gate.param_index)
            else:
                gates.append(gate)
        return Ansatz(self.n_qubits, tuple(gates)), np.asarray(owner, dtype=int)

    def inverse(self) -> Ansatz:
        """``U(θ)†`` on the same parameters: reversed, rotation signs flipped."""
        gates: list[Gate] = []
        for gate in reversed(self.gates):
            if isinstance(gate, PauliRotation):
                gates.append(PauliRotation(gate.generator, gate.param_index, -gate.sign))
            elif isinstance(gate, FixedRotation):
                gates.append(FixedRotation(gate.generator, -gate.angle))
            else:
                gates.append(FixedUnitary(adjoint_label(gate.label), gate.targets))
        return Ansatz(self.n_qubits, tuple(gates))

    def bind(self, theta: Sequence[float] | np.ndarray) -> Ansatz:
        """Bake *theta* into fixed rotations; the result has no parameters."""
        arr = self.check_theta(theta)
        gates: list[Gate] = []
        for gate in self.gates:
            if isinstance(gate, PauliRotation):
                gates.append(FixedRotation(gate.generator, gate.sign * float(arr[gate.param_index])))
            else:
                gates.append(gate)
        return Ansatz(self.n_qubits, tuple(gates))

    def then(self, other: Ansatz) -> Ansatz:
        """Concatenate: apply ``self`` first, then ``other``."""
        if other.n_qubits != self.n_qubits:
            raise ValidationError("Cannot compose circuits on different qubit counts")
        return Ansatz(self.n_qubits, self.gates + other.gates)

    def gate_counts(self) -> tuple[int, int]:
        """(single-qubit, two-qubit) gate counts."""
        n1 = n2 = 0
        for gate in self.gates:
            width = gate.generator.weight if not isinstance(gate, FixedUnitary) else len(gate.targets)
            if width == 1:
                n1 += 1
            else:
                n2 += 1
        return n1, n2


def build_hea(n_qubits: int, n_layers: int) -> Ansatz:
    """Hardware-efficient ansatz.

    An initial Ry layer, then per layer Ry·Rz on every qubit followed by a
    ring of CZ gates (a single CZ for two qubits). Every rotation owns its
    parameter, so ν = n_qubits · (2·n_layers + 1).
    """
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be positive, got {n_qubits}")
    if n_layers < 1:
        raise ValidationError(f"n_layers must be ≥ 1, got {n_layers}")
    gates: list[Gate] = []
    idx = 0
    for q in range(n_qubits):
        gates.append(PauliRotation(PauliString.single(n_qubits, q, "Y"), idx))
        idx += 1
    if n_qubits == 1:
        edges: list[tuple[int, int]] = []
    elif n_qubits == 2:
        edges = [(0, 1)]
    else:
        edges = [(q, (q + 1) % n_qubits) for q in range(n_qubits)]
    for _ in range(n_layers):
        for q in range(n_qubits):
            gates.append(PauliRotation(PauliString.single(n_qubits, q, "Y"), idx))
            gates.append(PauliRotation(PauliString.single(n_qubits, q, "Z"), idx + 1))
            idx += 2
        for a, b in edges:
            gates.append(FixedUnitary("CZ", (a, b)))
    return Ansatz(n_qubits, tuple(gates))


# ---------------------------------------------------------------------------
# Hermitian operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermitianOperator:
    """Real linear combination ``Σ_a h_a P_a`` of distinct Pauli strings."""

    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(c), p) for c, p in self.terms)
        if not terms:
            raise ValidationError("A Hermitian operator needs at least one term")
        n = terms[0][1].n_qubits
        seen: set[PauliString] = set()
        for c, p in terms:
            if not math.isfinite(c):
                raise ValidationError(f"Non-finite coefficient {c} on {p.label}")
            if p.n_qubits != n:
                raise ValidationError("All terms must act on the same number of qubits")
            if p in seen:
                raise ValidationError(f"Duplicate term {p.label}")
            seen.add(p)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_labels(cls, pairs: Sequence[tuple[float, str]]) -> HermitianOperator:
        return cls(tuple((c, PauliString.from_label(lbl)) for c, lbl in pairs))

    @property
    def n_qubits(self) -> int:
        return self.terms[0][1].n_qubits

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def strings(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    def __len__(self) -> int:
        return len(self.terms)
