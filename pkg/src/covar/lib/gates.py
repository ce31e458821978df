"""Fixed (non-parametrised) gate library: matrices and adjoint labels.

Matrices act on the listed targets in order, first target most significant.
"""

from __future__ import annotations

import numpy as np

from covar.errors import ValidationError

_S2 = 1.0 / np.sqrt(2.0)

FIXED_GATES: dict[str, np.ndarray] = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}

# Every entry is its own inverse except the phase gates.
ADJOINTS: dict[str, str] = {name: name for name in FIXED_GATES}
ADJOINTS["S"] = "SDG"
ADJOINTS["SDG"] = "S"


def gate_matrix(label: str) -> np.ndarray:
    """Return the unitary for *label* (case-insensitive)."""
    key = label.upper()
    if key not in FIXED_GATES:
        raise ValidationError(f"Unknown fixed gate: {label!r}")
    return FIXED_GATES[key]


def gate_arity(label: str) -> int:
    """Number of qubits the fixed gate *label* acts on."""
    return int(np.log2(gate_matrix(label).shape[0]))


def adjoint_label(label: str) -> str:
    """Label of the adjoint gate."""
    gate_matrix(label)
    return ADJOINTS[label.upper()]
