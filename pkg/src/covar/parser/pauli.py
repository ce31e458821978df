"""Pauli label parser — converts text to :class:`PauliString` instances.

Supported formats
-----------------
- Dense label, qubit 0 leftmost: ``XIZY``
- Sparse sites with an explicit width: ``X0 Z2`` or ``X0Z2`` (needs ``n_qubits``)
- Identity shorthand: ``I`` (needs ``n_qubits`` unless it is one qubit)
"""

from __future__ import annotations

import re

from covar.errors import ValidationError
from covar.model.pauli import PauliString

_DENSE_RE = re.compile(r"^[IXYZixyz]+$")
_SITE_RE = re.compile(r"([XYZxyz])(\d+)")
_SPARSE_RE = re.compile(r"^(?:\s*[XYZxyz]\d+)+\s*$")


def parse_pauli(text: str, n_qubits: int | None = None) -> PauliString:
    """Parse *text* into a :class:`PauliString`.

    Dense labels must match *n_qubits* when it is given.
    """
    s = text.strip()
    if not s:
        raise ValidationError("Empty Pauli string")

    if s.upper() == "I" and n_qubits is not None:
        return PauliString.identity(n_qubits)

    if _DENSE_RE.match(s):
        p = PauliString.from_label(s)
        if n_qubits is not None and p.n_qubits != n_qubits:
            raise ValidationError(
                f"Label {s!r} has {p.n_qubits} qubits, expected {n_qubits}"
            )
        return p

    if _SPARSE_RE.match(s):
        if n_qubits is None:
            raise ValidationError(f"Sparse Pauli {s!r} needs n_qubits")
        sites: dict[int, str] = {}
        for letter, index in _SITE_RE.findall(s):
            q = int(index)
            if q in sites:
                raise ValidationError(f"Qubit {q} listed twice in {s!r}")
            sites[q] = letter.upper()
        return PauliString.from_sites(n_qubits, sites)

    raise ValidationError(f"Invalid Pauli string: {text!r}")


def format_sparse(p: PauliString) -> str:
    """Sparse form such as ``X0 Z2``; ``I`` for the identity."""
    if p.is_identity:
        return "I"
    return " ".join(f"{p.letter(q)}{q}" for q in p.support)
