"""Tests for Pauli-string algebra and operator pools."""

from __future__ import annotations

import numpy as np
import pytest

from covar.errors import ValidationError
from covar.model.pauli import (
    OperatorPool,
    PauliString,
    commutes,
    enumerate_pool,
    multiply,
    sample_constraints,
    symmetrized_products,
    z_product_pool,
)
from tests.conftest import dense_pauli


def P(label: str) -> PauliString:
    return PauliString.from_label(label)


# ============================================================================
# PauliString
# ============================================================================


class TestPauliString:
    def test_label_roundtrip(self):
        assert P("XIZY").label == "XIZY"

    def test_qubit_zero_is_leftmost(self):
        p = P("XIZY")
        assert p.letter(0) == "X"
        assert p.letter(3) == "Y"
        assert p.x & 1 == 1

    def test_weight_and_support(self):
        p = P("XIZY")
        assert p.weight == 3
        assert p.support == (0, 2, 3)

    def test_identity(self):
        assert PauliString.identity(3).is_identity
        assert PauliString.identity(3).label == "III"

    def test_lowercase_accepted(self):
        assert P("xz") == P("XZ")

    def test_invalid_letter(self):
        with pytest.raises(ValidationError):
            P("XQ")

    def test_empty_label(self):
        with pytest.raises(ValidationError):
            P("")

    def test_mask_out_of_range(self):
        with pytest.raises(ValidationError):
            PauliString(2, x=4)

    def test_from_sites(self):
        assert PauliString.from_sites(4, {1: "Y", 3: "Z"}).label == "IYIZ"

    def test_from_sites_out_of_range(self):
        with pytest.raises(ValidationError):
            PauliString.from_sites(2, {2: "X"})


# ============================================================================
# Products and commutation
# ============================================================================


class TestMultiply:
    def test_x_times_y(self):
        prod = multiply(P("X"), P("Y"))
        assert prod.phase == 1j
        assert prod.string.label == "Z"

    def test_y_times_x(self):
        prod = multiply(P("Y"), P("X"))
        assert prod.phase == -1j
        assert prod.string.label == "Z"

    def test_z_squared(self):
        prod = multiply(P("Z"), P("Z"))
        assert prod.phase == 1
        assert prod.string.is_identity

    def test_two_qubit(self):
        prod = multiply(P("XZ"), P("YZ"))
        assert prod.phase == 1j
        assert prod.string.label == "ZI"

    def test_mismatched_qubits(self):
        with pytest.raises(ValidationError):
            multiply(P("X"), P("XX"))

    def test_matches_dense_product(self, rng):
        for _ in range(30):
            a = "".join(rng.choice(list("IXYZ"), size=3))
            b = "".join(rng.choice(list("IXYZ"), size=3))
            prod = multiply(P(a), P(b))
            expected = dense_pauli(a) @ dense_pauli(b)
            assert np.allclose(prod.phase * dense_pauli(prod.string), expected)


class TestCommutes:
    def test_x_z_anticommute(self):
        assert not commutes(P("X"), P("Z"))

    def test_xx_zz_commute(self):
        assert commutes(P("XX"), P("ZZ"))

    def test_xi_zz_anticommute(self):
        assert not commutes(P("XI"), P("ZZ"))

    def test_identity_commutes_with_everything(self):
        for label in ("XY", "ZZ", "YI"):
            assert commutes(P("II"), P(label))

    def test_matches_dense_commutator(self, rng):
        for _ in range(30):
            a = "".join(rng.choice(list("IXYZ"), size=3))
            b = "".join(rng.choice(list("IXYZ"), size=3))
            ma, mb = dense_pauli(a), dense_pauli(b)
            assert commutes(P(a), P(b)) == np.allclose(ma @ mb, mb @ ma)


class TestSymmetrizedProducts:
    def test_equal_strings_give_identity(self):
        p_part, q_part = symmetrized_products(P("Z"), P("Z"))
        assert q_part is None
        assert p_part.sign == 1
        assert p_part.string.is_identity

    def test_x_y(self):
        p_part, q_part = symmetrized_products(P("X"), P("Y"))
        assert p_part is None
        assert q_part.sign == 1
        assert q_part.string.label == "Z"

    def test_x_z(self):
        p_part, q_part = symmetrized_products(P("X"), P("Z"))
        assert p_part is None
        assert q_part.sign == -1
        assert q_part.string.label == "Y"

    def test_decomposition_matches_dense(self, rng):
        for _ in range(30):
            a = "".join(rng.choice(list("IXYZ"), size=2))
            b = "".join(rng.choice(list("IXYZ"), size=2))
            ma, mb = dense_pauli(a), dense_pauli(b)
            p_part, q_part = symmetrized_products(P(a), P(b))
            assert (p_part is None) != (q_part is None)
            anti = 0.5 * (ma @ mb + mb @ ma)
            comm = -0.5j * (ma @ mb - mb @ ma)
            if p_part is not None:
                assert np.allclose(p_part.sign * dense_pauli(p_part.string), anti)
                assert np.allclose(comm, 0)
            else:
                assert np.allclose(q_part.sign * dense_pauli(q_part.string), comm)
                assert np.allclose(anti, 0)

    def test_non_hermitian_sign_raises(self):
        prod = multiply(P("X"), P("Y"))
        with pytest.raises(ValidationError):
            prod.sign


# ============================================================================
# Pools
# ============================================================================


class TestPools:
    @pytest.mark.parametrize("n_qubits,q,size", [(2, 2, 15), (3, 1, 9), (3, 2, 36), (4, 2, 66)])
    def test_enumerate_pool_size(self, n_qubits, q, size):
        assert len(enumerate_pool(n_qubits, q)) == size

    def test_enumerate_pool_respects_locality(self):
        pool = enumerate_pool(4, 2)
        assert all(1 <= p.weight <= 2 for p in pool)
        assert len(set(pool)) == len(pool)

    def test_enumerate_pool_bad_locality(self):
        with pytest.raises(ValidationError):
            enumerate_pool(3, 4)
        with pytest.raises(ValidationError):
            enumerate_pool(3, 0)

    def test_z_product_pool(self):
        pool = z_product_pool(4)
        assert len(pool) == 10
        assert all(set(p.label) <= {"I", "Z"} for p in pool)
        assert all(commutes(a, b) for a in pool for b in pool)

    def test_pool_rejects_identity(self):
        with pytest.raises(ValidationError):
            OperatorPool(2, 2, (P("II"),))

    def test_pool_rejects_duplicates(self):
        with pytest.raises(ValidationError):
            OperatorPool(2, 2, (P("XI"), P("XI")))

    def test_pool_rejects_heavy_member(self):
        with pytest.raises(ValidationError):
            OperatorPool(3, 1, (P("XXI"),))

    def test_pool_members_are_orthonormal(self):
        pool = enumerate_pool(2, 2)
        for i, a in enumerate(pool):
            for j, b in enumerate(pool):
                overlap = np.trace(dense_pauli(a) @ dense_pauli(b)) / 4
                assert overlap == pytest.approx(1.0 if i == j else 0.0)


class TestSampleConstraints:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_inclusion_frequency(self, seed):
        pool = enumerate_pool(3, 2)
        assert len(pool) == 36
        rng = np.random.default_rng(seed)
        draws = 10_000
        counts = dict.fromkeys(pool.members, 0)
        for _ in range(draws):
            for p in sample_constraints(pool, 10, rng):
                counts[p] += 1
        p_in = 10 / 36
        sigma = np.sqrt(p_in * (1 - p_in) / draws)
        # 4σ across all 36 members
        for count in counts.values():
            assert abs(count / draws - p_in) <= 4 * sigma

    def test_distinct_members(self):
        pool = enumerate_pool(3, 2)
        picks = sample_constraints(pool, 20, rng_seed=3)
        assert len(picks) == 20
        assert len(set(picks)) == 20
        assert all(p in pool.members for p in picks)

    def test_deterministic_under_seed(self):
        pool = enumerate_pool(3, 2)
        assert sample_constraints(pool, 10, 5) == sample_constraints(pool, 10, 5)

    def test_seeds_differ(self):
        pool = enumerate_pool(4, 2)
        assert sample_constraints(pool, 10, 1) != sample_constraints(pool, 10, 2)

    def test_whole_pool(self):
        pool = enumerate_pool(2, 1)
        assert set(sample_constraints(pool, len(pool), 0)) == set(pool)

    def test_too_many(self):
        with pytest.raises(ValidationError):
            sample_constraints(enumerate_pool(2, 1), 7, 0)

    def test_non_positive(self):
        with pytest.raises(ValidationError):
            sample_constraints(enumerate_pool(2, 1), 0, 0)
