from itertools import permutations
from math import factorial

import numpy as np
import pytest

from src.kronml.characters import CharacterTable, compute_character_table, dimension
from src.kronml.errors import KroneckerCorruptionError, PartitionError
from src.kronml.kronecker import (Triple, coefficient_histogram, depth_filter, depth_filter_mask, kron,
                                  kronecker_slice, kronecker_tensor, label)
from src.kronml.partitions import Partition, conjugate, enumerate_partitions


def P(*parts):
    return Partition(parts)


def test_known_small_coefficients():
    t3 = compute_character_table(3)
    assert kron(P(2, 1), P(2, 1), P(2, 1), t3) == 1
    assert kron(P(3), P(3), P(3), t3) == 1
    assert kron(P(3), P(2, 1), P(2, 1), t3) == 1
    assert kron(P(3), P(3), P(2, 1), t3) == 0
    t4 = compute_character_table(4)
    assert kron(P(2, 2), P(2, 2), P(2, 2), t4) == 1
    assert kron(P(3, 1), P(3, 1), P(2, 2), t4) == 1
    assert kron(P(3, 1), P(3, 1), P(1, 1, 1, 1), t4) == 0


def test_trivial_and_sign_factors():
    table = compute_character_table(6)
    order = table.order
    for lam in order:
        for mu in order:
            assert kron(lam, mu, P(6), table) == (1 if lam == mu else 0)
            assert kron(lam, mu, P(1, 1, 1, 1, 1, 1), table) == (1 if mu == conjugate(lam) else 0)


def test_tensor_is_symmetric_under_permutations():
    g = kronecker_tensor(compute_character_table(6))
    for perm in permutations(range(3)):
        assert np.array_equal(g, np.transpose(g, perm))


def test_tensor_agrees_with_single_coefficients():
    table = compute_character_table(5)
    g = kronecker_tensor(table, threads=2)
    for i, lam in enumerate(table.order):
        for j, mu in enumerate(table.order):
            for k, nu in enumerate(table.order):
                assert g[i, j, k] == kron(lam, mu, nu, table)


@pytest.mark.parametrize("n", [4, 6, 7])
def test_dimension_sum_rule(n):
    table = compute_character_table(n)
    dims = np.array([dimension(lam) for lam in table.order], dtype=np.int64)
    g = kronecker_tensor(table)
    assert np.array_equal(g @ dims, np.outer(dims, dims))


@pytest.mark.parametrize("n", range(1, 9))
def test_coefficients_vanish_outside_depth_filter(n):
    table = compute_character_table(n)
    g = kronecker_tensor(table)
    assert not np.any(g[~depth_filter_mask(n)])


def test_depth_filter():
    assert depth_filter(P(3), P(3), P(3))
    assert not depth_filter(P(3), P(3), P(2, 1))
    assert depth_filter(P(2, 1), P(2, 1), P(1, 1, 1))
    with pytest.raises(PartitionError):
        depth_filter(P(3), P(2), P(3))


def test_q2_has_five_triples():
    assert int(depth_filter_mask(2).sum()) == 5
    assert depth_filter_mask(2).size == 8


def test_label():
    table = compute_character_table(4)
    assert label(P(2, 2), P(2, 2), P(2, 2), table) == 1
    assert label(P(4), P(4), P(3, 1), table) == 0


def test_triple_requires_common_degree():
    with pytest.raises(PartitionError):
        Triple(P(3), P(2, 1), P(2, 2))
    assert str(Triple(P(2), P(1, 1), P(1, 1))) == "((2), (1,1), (1,1))"


def test_kron_rejects_partitions_of_other_degree():
    with pytest.raises(PartitionError):
        kron(P(4), P(4), P(4), compute_character_table(3))


def test_corrupted_table_is_detected():
    good = compute_character_table(3)
    chi = (good.chi[0], (-1, 0, 3), good.chi[2])
    bad = CharacterTable(n=3, order=good.order, chi=chi, class_sizes=good.class_sizes)
    with pytest.raises(KroneckerCorruptionError):
        kron(P(3), P(3), P(2, 1), bad)
    with pytest.raises(KroneckerCorruptionError):
        kronecker_slice(bad, 0)


def test_coefficient_histogram_counts_q():
    table = compute_character_table(6)
    counts = coefficient_histogram(table)
    assert sum(counts.values()) == int(depth_filter_mask(6).sum())
    assert min(counts) >= 0
    assert counts[0] > 0


def test_degree_twelve_census():
    from src.kronml.dataset import dataset_census

    table = compute_character_table(12)
    census = dataset_census(12, table)
    assert (census.total, census.passing, census.ones, census.zeros) == (456_533, 406_919, 280_009, 126_910)


def test_squared_dimensions_with_trivial_row():
    table = compute_character_table(5)
    g0 = kronecker_slice(table, 0)
    assert np.array_equal(g0, np.identity(len(table), dtype=np.int64))
    assert sum(dimension(lam) ** 2 for lam in enumerate_partitions(5)) == factorial(5)


@pytest.mark.parametrize("n", [3, 5, 6])
def test_conjugating_two_arguments_keeps_coefficients(n, table_of):
    table = table_of(n)
    parts = enumerate_partitions(n)
    for lam in parts:
        for mu in parts:
            for nu in parts:
                assert kron(lam, mu, nu, table) == kron(conjugate(lam), conjugate(mu), nu, table), (lam, mu, nu)


def test_conjugating_two_arguments_up_to_ten(table_of):
    for n in range(7, 11):
        table = table_of(n)
        conj = [table.index(conjugate(lam)) for lam in table.order]
        for i in range(len(table)):
            assert np.array_equal(kronecker_slice(table, i), kronecker_slice(table, conj[i])[conj]), (n, i)
