"""Exact algebra of N-qubit Pauli strings.

A :class:`PauliString` stores two bit masks: bit ``q`` of ``x`` / ``z`` is set
when qubit ``q`` carries an X / Z factor (both set means Y). Qubit 0 is the
leftmost letter of the label, so ``"XIZY"`` acts with X on qubit 0 and Y on
qubit 3. Products and commutation reduce to popcounts over these masks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from covar.errors import ValidationError

_LETTER_BITS: dict[str, tuple[int, int]] = {
    "I": (0, 0),
    "X": (1, 0),
    "Y": (1, 1),
    "Z": (0, 1),
}

_BITS_LETTER: dict[tuple[int, int], str] = {v: k for k, v in _LETTER_BITS.items()}

# i**k for k = 0..3
_I_POWERS: tuple[complex, ...] = (1 + 0j, 1j, -1 + 0j, -1j)


def _popcount(v: int) -> int:
    return v.bit_count()


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class PauliString:
    """Phase-free tensor product of single-qubit Paulis."""

    n_qubits: int
    x: int = 0
    z: int = 0

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be positive, got {self.n_qubits}")
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValidationError(
                f"Masks exceed {self.n_qubits} qubits: x={self.x:#x} z={self.z:#x}"
            )

    # -- constructors --

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Build from a label such as ``"XIZY"`` (qubit 0 leftmost)."""
        if not label:
            raise ValidationError("Empty Pauli label")
        x = z = 0
        for q, ch in enumerate(label.upper()):
            bits = _LETTER_BITS.get(ch)
            if bits is None:
                raise ValidationError(f"Invalid Pauli letter {ch!r} in {label!r}")
            x |= bits[0] << q
            z |= bits[1] << q
        return cls(n_qubits=len(label), x=x, z=z)

    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls(n_qubits=n_qubits)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> PauliString:
        """A weight-1 string with *letter* on *qubit*."""
        return cls.from_sites(n_qubits, {qubit: letter})

    @classmethod
    def from_sites(cls, n_qubits: int, sites: dict[int, str]) -> PauliString:
        """Build from a ``{qubit: letter}`` map; unlisted qubits are I."""
        x = z = 0
        for q, letter in sites.items():
            if not 0 <= q < n_qubits:
                raise ValidationError(f"Qubit {q} out of range for {n_qubits} qubits")
            bits = _LETTER_BITS.get(letter.upper())
            if bits is None:
                raise ValidationError(f"Invalid Pauli letter {letter!r}")
            x |= bits[0] << q
            z |= bits[1] << q
        return cls(n_qubits=n_qubits, x=x, z=z)

    # -- properties --

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n_qubits))

    def letter(self, qubit: int) -> str:
        return _BITS_LETTER[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n_qubits) if (mask >> q) & 1)

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def y_count(self) -> int:
        return _popcount(self.x & self.z)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True, slots=True)
class PhasedPauli:
    """A Pauli string times ``i**power``."""

    power: int
    string: PauliString

    def __post_init__(self) -> None:
        object.__setattr__(self, "power", self.power % 4)

    @property
    def phase(self) -> complex:
        return _I_POWERS[self.power]

    @property
    def is_hermitian(self) -> bool:
        return self.power % 2 == 0

    @property
    def sign(self) -> int:
        """Real sign ``±1`` of a Hermitian phased string."""
        if not self.is_hermitian:
            raise ValidationError(f"Phase {self.phase} is not real")
        return 1 if self.power == 0 else -1

    def __str__(self) -> str:
        prefix = {0: "+", 1: "+i", 2: "-", 3: "-i"}[self.power]
        return f"{prefix}{self.string.label}"


@dataclass(frozen=True)
class OperatorPool:
    """Ordered set of distinct non-identity Pauli strings of weight ≤ q."""

    n_qubits: int
    locality_bound: int
    members: tuple[PauliString, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        seen: set[PauliString] = set()
        for p in self.members:
            if p.n_qubits != self.n_qubits:
                raise ValidationError(
                    f"Pool member {p.label} has {p.n_qubits} qubits, pool has {self.n_qubits}"
                )
            if p.is_identity:
                raise ValidationError("Operator pools exclude the identity")
            if p.weight > self.locality_bound:
                raise ValidationError(
                    f"Pool member {p.label} exceeds locality bound {self.locality_bound}"
                )
            if p in seen:
                raise ValidationError(f"Duplicate pool member {p.label}")
            seen.add(p)
        # Distinct Pauli strings satisfy Tr[P_k P_l] / 2**N = δ_kl.

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[PauliString]:
        return iter(self.members)

    def __getitem__(self, index: int) -> PauliString:
        return self.members[index]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def _check_pair(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValidationError(
            f"Qubit-count mismatch: {a.n_qubits} vs {b.n_qubits}"
        )


def multiply(a: PauliString, b: PauliString) -> PhasedPauli:
    """Matrix product ``a·b = i**k · c``."""
    _check_pair(a, b)
    ya, xa, za = a.x & a.z, a.x & ~a.z, a.z & ~a.x
    yb, xb, zb = b.x & b.z, b.x & ~b.z, b.z & ~b.x
    # Cyclic pairs (XY, YZ, ZX) give +i per site, anticyclic ones -i.
    plus = _popcount((xa & yb) | (ya & zb) | (za & xb))
    minus = _popcount((xa & zb) | (ya & xb) | (za & yb))
    c = PauliString(n_qubits=a.n_qubits, x=a.x ^ b.x, z=a.z ^ b.z)
    return PhasedPauli(power=plus - minus, string=c)


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the symplectic product of *a* and *b* vanishes."""
    _check_pair(a, b)
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


def symmetrized_products(
    o: PauliString, h: PauliString
) -> tuple[PhasedPauli | None, PhasedPauli | None]:
    """Return ``(P, Q)`` with ``½{o,h} = P`` and ``-(i/2)[o,h] = Q``.

    Exactly one of the two is non-null; both carry a real phase ``±1``, so
    ``<o h> = <P> + i<Q>``.
    """
    prod = multiply(o, h)
    if prod.is_hermitian:
        return prod, None
    # -(i/2)[o,h] = -i·o·h when o and h anticommute.
    return None, PhasedPauli(power=prod.power + 3, string=prod.string)


def enumerate_pool(n_qubits: int, q: int) -> OperatorPool:
    """All Pauli strings of weight 1..q, ordered by support then letters."""
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be positive, got {n_qubits}")
    if not 1 <= q <= n_qubits:
        raise ValidationError(f"Locality q={q} out of range [1, {n_qubits}]")
    supports = sorted(
        itertools.chain.from_iterable(
            itertools.combinations(range(n_qubits), w) for w in range(1, q + 1)
        )
    )
    members: list[PauliString] = []
    for support in supports:
        for letters in itertools.product("XYZ", repeat=len(support)):
            members.append(PauliString.from_sites(n_qubits, dict(zip(support, letters))))
    return OperatorPool(n_qubits=n_qubits, locality_bound=q, members=tuple(members))


def z_product_pool(n_qubits: int, max_weight: int = 2) -> OperatorPool:
    """Commuting pool of Z products with weight 1..max_weight."""
    if not 1 <= max_weight <= n_qubits:
        raise ValidationError(f"max_weight={max_weight} out of range [1, {n_qubits}]")
    members = [
        PauliString.from_sites(n_qubits, {q: "Z" for q in support})
        for w in range(1, max_weight + 1)
        for support in itertools.combinations(range(n_qubits), w)
    ]
    return OperatorPool(n_qubits=n_qubits, locality_bound=max_weight, members=tuple(members))


def sample_constraints(
    pool: OperatorPool | Sequence[PauliString],
    n_c: int,
    rng_seed: int | np.random.Generator | None = None,
) -> list[PauliString]:
    """Draw *n_c* distinct members uniformly without replacement."""
    members = list(pool)
    if n_c < 1:
        raise ValidationError(f"n_c must be positive, got {n_c}")
    if n_c > len(members):
        raise ValidationError(f"n_c={n_c} exceeds pool size {len(members)}")
    rng = np.random.default_rng(rng_seed)
    picks = rng.choice(len(members), size=n_c, replace=False)
    return [members[int(i)] for i in picks]
