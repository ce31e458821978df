"""Read circuits, pools, operators, shadows and covariance systems.

Usage::

    from covar.serialization.deserialize import deserialize_ansatz, read_system

    ansatz = deserialize_ansatz(text)
    system = read_system("/path/to/system.mtx")
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io

from covar.errors import CovarError, SerializationError
from covar.estimation.covariance import CovarianceSystem
from covar.estimation.shadows import ShadowSet
from covar.model.circuit import (
    Ansatz,
    FixedRotation,
    FixedUnitary,
    Gate,
    HermitianOperator,
    PauliRotation,
)
from covar.model.pauli import OperatorPool, PauliString
from covar.parser.pauli import parse_pauli
from covar.parser.records import ParsedRecord, ParseError, is_comment, parse_record
from covar.serialization.serialize import SHADOW_FORMAT_VERSION, mtx_path


def _records(text: str, section: str) -> tuple[ParsedRecord, list[tuple[int, ParsedRecord]]]:
    """Header plus numbered body records; raises on the first bad line."""
    header: ParsedRecord | None = None
    body: list[tuple[int, ParsedRecord]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if is_comment(line):
            continue
        rec = parse_record(line)
        if isinstance(rec, ParseError):
            raise SerializationError(f"line {lineno}: {rec.error}")
        if rec.kind == "header":
            if header is not None:
                raise SerializationError(f"line {lineno}: second header")
            if rec.target != section:
                raise SerializationError(f"line {lineno}: expected a {section} header")
            header = rec
        elif header is None:
            raise SerializationError(f"line {lineno}: record before the {section} header")
        else:
            body.append((lineno, rec))
    if header is None:
        raise SerializationError(f"Missing {section} header")
    return header, body


def _int(rec: ParsedRecord, key: str, lineno: int) -> int:
    try:
        return int(rec.params[key])
    except ValueError as exc:
        raise SerializationError(f"line {lineno}: {key} must be an integer") from exc


def _float(rec: ParsedRecord, key: str, lineno: int) -> float:
    try:
        return float(rec.params[key])
    except ValueError as exc:
        raise SerializationError(f"line {lineno}: {key} must be a number") from exc


def _pauli(rec: ParsedRecord, n_qubits: int, lineno: int) -> PauliString:
    try:
        return parse_pauli(rec.target or "", n_qubits)
    except CovarError as exc:
        raise SerializationError(f"line {lineno}: {exc}") from exc


def deserialize_ansatz(text: str) -> Ansatz:
    header, body = _records(text, "ansatz")
    n = _int(header, "n_qubits", 0)
    gates: list[Gate] = []
    try:
        for lineno, rec in body:
            if rec.kind == "rot":
                sign = _int(rec, "sign", lineno) if "sign" in rec.params else 1
                gates.append(PauliRotation(_pauli(rec, n, lineno), _int(rec, "param", lineno), sign))
            elif rec.kind == "frot":
                gates.append(FixedRotation(_pauli(rec, n, lineno), _float(rec, "angle", lineno)))
            elif rec.kind == "fixed":
                try:
                    targets = tuple(int(t) for t in rec.params["targets"].split(","))
                except ValueError as exc:
                    raise SerializationError(f"line {lineno}: bad targets") from exc
                gates.append(FixedUnitary(rec.target or "", targets))
            else:
                raise SerializationError(f"line {lineno}: {rec.kind} record in an ansatz")
        ansatz = Ansatz(n, tuple(gates))
    except SerializationError:
        raise
    except CovarError as exc:
        raise SerializationError(str(exc)) from exc
    if "n_params" in header.params and _int(header, "n_params", 0) != ansatz.n_params:
        raise SerializationError(
            f"Header declares {header.params['n_params']} parameters, gates use {ansatz.n_params}"
        )
    return ansatz


def deserialize_pool(text: str) -> OperatorPool:
    header, body = _records(text, "pool")
    n = _int(header, "n_qubits", 0)
    members: list[PauliString] = []
    for lineno, rec in body:
        if rec.kind != "member":
            raise SerializationError(f"line {lineno}: {rec.kind} record in a pool")
        members.append(_pauli(rec, n, lineno))
    q = _int(header, "q", 0) if "q" in header.params else max((p.weight for p in members), default=1)
    try:
        pool = OperatorPool(n, q, tuple(members))
    except CovarError as exc:
        raise SerializationError(str(exc)) from exc
    if "size" in header.params and _int(header, "size", 0) != len(pool):
        raise SerializationError(
            f"Header declares {header.params['size']} members, found {len(pool)}"
        )
    return pool


def deserialize_operator(text: str) -> HermitianOperator:
    header, body = _records(text, "operator")
    n = _int(header, "n_qubits", 0)
    terms: list[tuple[float, PauliString]] = []
    for lineno, rec in body:
        if rec.kind != "term":
            raise SerializationError(f"line {lineno}: {rec.kind} record in an operator")
        terms.append((_float(rec, "coeff", lineno), _pauli(rec, n, lineno)))
    try:
        return HermitianOperator(tuple(terms))
    except CovarError as exc:
        raise SerializationError(str(exc)) from exc


def load_shadows(path: str | Path) -> ShadowSet:
    try:
        with np.load(path) as data:
            if int(data["version"]) != SHADOW_FORMAT_VERSION:
                raise SerializationError(f"Unsupported shadow format {int(data['version'])}")
            shape = tuple(int(s) for s in data["shape"])
            count = shape[0] * shape[1]
            low = np.unpackbits(data["bases_low"], count=count).reshape(shape)
            high = np.unpackbits(data["bases_high"], count=count).reshape(shape)
            outcomes = np.unpackbits(data["outcomes"], count=count).reshape(shape)
            n_batches = int(data["n_batches"])
    except (OSError, KeyError, ValueError) as exc:
        raise SerializationError(f"Cannot read shadows from {path}: {exc}") from exc
    try:
        return ShadowSet(low | (high << 1), outcomes, n_batches)
    except CovarError as exc:
        raise SerializationError(str(exc)) from exc


def read_system(path: str | Path) -> CovarianceSystem:
    path = mtx_path(path)
    tokens: dict[str, list[str]] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.startswith("%"):
                    break
                body = line.lstrip("%").strip()
                key, sep, rest = body.partition(":")
                if sep and key in ("constraints", "theta"):
                    tokens[key] = rest.split()
        data = np.asarray(scipy.io.mmread(str(path)))
    except (OSError, ValueError) as exc:
        raise SerializationError(f"Cannot read covariance system from {path}: {exc}") from exc
    if "constraints" not in tokens or "theta" not in tokens:
        raise SerializationError(f"{path} lacks constraint or theta comments")
    n_qubits = None
    constraints: list[PauliString | int] = []
    for tok in tokens["constraints"]:
        if tok.isdigit():
            constraints.append(int(tok))
        else:
            p = parse_pauli(tok, n_qubits)
            n_qubits = p.n_qubits
            constraints.append(p)
    data = data.reshape(len(constraints), -1)
    try:
        return CovarianceSystem(
            constraints=tuple(constraints),
            f=data[:, 0].astype(complex),
            J=data[:, 1:].astype(complex),
            theta=np.array([float(t) for t in tokens["theta"]]),
        )
    except CovarError as exc:
        raise SerializationError(str(exc)) from exc
