from math import factorial

import numpy as np
import pytest

from src.kronml.characters import (CharacterTable, class_sign, class_size, compute_character_table, dimension,
                                   exact_matmul, mn_character, parse_table, serialize_table)
from src.kronml.errors import CharacterTableError, PartitionError
from src.kronml.partitions import Partition, conjugate, enumerate_partitions
from src.kronml.verification import bialternant_character, check_table_against_bialternant


def P(*parts):
    return Partition(parts)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_table_matches_bialternant_formula(n):
    table = compute_character_table(n)
    for i, lam in enumerate(table.order):
        for j, rho in enumerate(table.order):
            assert table.chi[i][j] == bialternant_character(lam, rho), (lam, rho)
    assert check_table_against_bialternant(table) == ''


def test_bialternant_check_catches_swapped_rows():
    table = compute_character_table(4)
    a, b = table.index(P(3, 1)), table.index(P(2, 1, 1))
    chi = list(table.chi)
    chi[a], chi[b] = chi[b], chi[a]
    swapped = CharacterTable(n=4, order=table.order, chi=tuple(chi), class_sizes=table.class_sizes)
    assert swapped.row_orthogonality_ok()
    assert check_table_against_bialternant(swapped) != ''


def test_degree_one_table():
    table = compute_character_table(1)
    assert table.chi == ((1,),)
    assert table.class_sizes == (1,)


def test_degree_three_table():
    table = compute_character_table(3)
    assert table.chi == ((1, 1, 1), (-1, 0, 2), (1, -1, 1))
    assert table.class_sizes == (2, 3, 1)


def test_class_sizes_and_signs():
    assert class_size(P(2, 2)) == 3
    assert class_size(P(1, 1, 1, 1)) == 1
    assert class_size(P(4)) == 6
    assert sum(class_size(rho) for rho in enumerate_partitions(7)) == factorial(7)
    assert class_sign(P(2, 1)) == -1
    assert class_sign(P(3)) == 1


def test_dimensions():
    assert dimension(P(3, 2, 1)) == 16
    assert dimension(P(4, 2)) == 9
    assert dimension(P(5)) == 1
    assert sum(dimension(lam) ** 2 for lam in enumerate_partitions(8)) == factorial(8)


@pytest.mark.parametrize("n", range(1, 9))
def test_orthogonality_and_identity_column(n):
    table = compute_character_table(n)
    assert table.row_orthogonality_ok()
    assert table.column_orthogonality_ok()
    identity = len(table) - 1
    for i, lam in enumerate(table.order):
        assert table.chi[i][identity] == dimension(lam)


def test_sign_twist():
    table = compute_character_table(7)
    for i, lam in enumerate(table.order):
        for j, rho in enumerate(table.order):
            assert table.value(conjugate(lam), rho) == class_sign(rho) * table.chi[i][j]


def test_mn_character_rejects_mixed_degrees():
    with pytest.raises(PartitionError):
        mn_character(P(3), P(2, 1, 1))


def test_compute_rejects_large_degree():
    with pytest.raises(PartitionError):
        compute_character_table(21)


def test_serialize_and_parse():
    table = compute_character_table(5)
    text = serialize_table(table)
    assert text.splitlines()[0] == "5,7"
    assert parse_table(text) == table


def test_parse_rejects_corrupted_value():
    lines = serialize_table(compute_character_table(4)).splitlines()
    row = lines[-2].split(",")
    row[0] = str(int(row[0]) + 1)
    lines[-2] = ",".join(row)
    with pytest.raises(CharacterTableError):
        parse_table("\n".join(lines))


def test_parse_rejects_truncated_file():
    lines = serialize_table(compute_character_table(4)).splitlines()
    with pytest.raises(CharacterTableError):
        parse_table("\n".join(lines[:-1]))


def test_verify_rejects_bad_class_sizes():
    good = compute_character_table(3)
    bad = CharacterTable(n=3, order=good.order, chi=good.chi, class_sizes=(2, 2, 2))
    with pytest.raises(CharacterTableError):
        bad.verify()


def test_exact_matmul_switches_to_python_integers():
    big = np.array([[2 ** 40, 2 ** 40], [1, 1]], dtype=object)
    product = exact_matmul(big, big.T)
    assert product.dtype == object
    assert product[0, 0] == 2 * 2 ** 80
    small = np.array([[1, 2], [3, 4]], dtype=object)
    assert exact_matmul(small, small).dtype == np.int64
