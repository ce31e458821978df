"""Write circuits, pools, operators, shadows and covariance systems.

Usage::

    from covar.serialization.serialize import serialize_ansatz, write_system

    text = serialize_ansatz(ansatz)
    write_system(system, "/path/to/system.mtx")
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io

from covar.estimation.covariance import CovarianceSystem
from covar.estimation.shadows import ShadowSet
from covar.model.circuit import Ansatz, FixedRotation, HermitianOperator, PauliRotation
from covar.model.pauli import OperatorPool, PauliString

SHADOW_FORMAT_VERSION = 1


def serialize_ansatz(ansatz: Ansatz) -> str:
    """One record per gate under an ``# ansatz`` header."""
    lines = [f"# ansatz n_qubits:{ansatz.n_qubits} n_params:{ansatz.n_params}"]
    for gate in ansatz.gates:
        if isinstance(gate, PauliRotation):
            lines.append(f"rot {gate.generator.label} param:{gate.param_index} sign:{gate.sign}")
        elif isinstance(gate, FixedRotation):
            lines.append(f"frot {gate.generator.label} angle:{gate.angle!r}")
        else:
            targets = ",".join(str(t) for t in gate.targets)
            lines.append(f"fixed {gate.label} targets:{targets}")
    return "\n".join(lines) + "\n"


def serialize_pool(pool: OperatorPool) -> str:
    lines = [f"# pool n_qubits:{pool.n_qubits} q:{pool.locality_bound} size:{len(pool)}"]
    lines.extend(p.label for p in pool)
    return "\n".join(lines) + "\n"


def serialize_operator(op: HermitianOperator) -> str:
    lines = [f"# operator n_qubits:{op.n_qubits}"]
    lines.extend(f"term {p.label} coeff:{c!r}" for c, p in op.terms)
    return "\n".join(lines) + "\n"


def save_shadows(shadows: ShadowSet, path: str | Path) -> Path:
    """Compressed ``.npz``: basis codes as two bit planes, outcomes as bits."""
    target = Path(path)
    if target.suffix != ".npz":
        target = target.with_name(target.name + ".npz")
    bases = shadows.bases
    np.savez_compressed(
        target,
        version=np.array(SHADOW_FORMAT_VERSION),
        shape=np.array(bases.shape),
        n_batches=np.array(shadows.n_batches),
        bases_low=np.packbits(bases & 1, axis=None),
        bases_high=np.packbits(bases >> 1, axis=None),
        outcomes=np.packbits(shadows.outcomes, axis=None),
    )
    return target


def _constraint_token(c: PauliString | int) -> str:
    return c.label if isinstance(c, PauliString) else str(int(c))


def mtx_path(path: str | Path) -> Path:
    """Matrix Market files always carry the ``.mtx`` suffix."""
    p = Path(path)
    return p if p.suffix == ".mtx" else p.with_name(p.name + ".mtx")


def write_system(system: CovarianceSystem, path: str | Path) -> Path:
    """Matrix Market array ``[f | J]`` with constraints and θ in the comments."""
    data = np.column_stack([system.f, system.J])
    comment = "\n".join(
        [
            "constraints: " + " ".join(_constraint_token(c) for c in system.constraints),
            "theta: " + " ".join(repr(float(t)) for t in system.theta),
        ]
    )
    target = mtx_path(path)
    scipy.io.mmwrite(str(target), data, comment=comment, field="complex", precision=17)
    return target
