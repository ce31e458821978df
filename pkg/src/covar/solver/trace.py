"""Per-iteration records shared by CoVaR and the baseline optimizers."""

from __future__ import annotations

from dataclasses import astuple, dataclass, field, fields

TRACE_COLUMNS: tuple[str, ...] = (
    "iter",
    "f_norm",
    "lambda",
    "step_norm",
    "energy",
    "variance",
    "infidelity",
    "infidelity_max_basis",
    "flagged",
    "wall_ms",
)


@dataclass(frozen=True)
class IterationRecord:
    """One iteration, field order matches :data:`TRACE_COLUMNS`.

    ``lambda_`` is NaN for optimizers without damping; the ``infidelity``
    columns are NaN when no reference state is known.
    """

    iter: int
    f_norm: float
    lambda_: float
    step_norm: float
    energy: float
    variance: float
    infidelity: float
    infidelity_max_basis: float
    flagged: bool = False
    wall_ms: float = 0.0

    def row(self) -> tuple[object, ...]:
        return astuple(self)


assert len(fields(IterationRecord)) == len(TRACE_COLUMNS)


@dataclass
class IterationTrace:
    """One record per completed iteration plus run-level counters.

    ``initial`` describes the starting point (``iter`` 0) and is kept out of
    ``records``.
    """

    records: list[IterationRecord] = field(default_factory=list)
    initial: IterationRecord | None = None
    optimizer: str = "covar"
    converged: bool = False
    provider_queries: int = 0
    snapshots: int = 0

    def append(self, record: IterationRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def flagged_count(self) -> int:
        return sum(1 for r in self.records if r.flagged)

    @property
    def final(self) -> IterationRecord:
        """Last completed iteration, or the starting point when none ran."""
        if self.records:
            return self.records[-1]
        if self.initial is None:
            raise IndexError("Empty trace")
        return self.initial

    @property
    def final_f_norm(self) -> float:
        return self.final.f_norm

    def column(self, name: str) -> list[object]:
        index = TRACE_COLUMNS.index(name)
        return [r.row()[index] for r in self.records]
