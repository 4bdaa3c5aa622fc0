import pytest

from src.kronml.errors import PartitionError
from src.kronml.partitions import (Partition, conjugate, depth, enumerate_partitions, multiplicities, pad,
                                   partition_index)


def P(*parts):
    return Partition(parts)


def test_enumerate_small_degrees_in_reverse_lex_order():
    assert enumerate_partitions(1) == [P(1)]
    assert enumerate_partitions(3) == [P(3), P(2, 1), P(1, 1, 1)]
    assert enumerate_partitions(4) == [P(4), P(3, 1), P(2, 2), P(2, 1, 1), P(1, 1, 1, 1)]


@pytest.mark.parametrize("n, count", [(5, 7), (8, 22), (12, 77), (13, 101), (14, 135)])
def test_partition_counts(n, count):
    assert len(enumerate_partitions(n)) == count


def test_enumeration_is_strictly_decreasing():
    parts = [p.parts for p in enumerate_partitions(10)]
    assert all(a > b for a, b in zip(parts, parts[1:]))


@pytest.mark.parametrize("n", [0, -3, 31])
def test_degree_out_of_range(n):
    with pytest.raises(PartitionError):
        enumerate_partitions(n)


@pytest.mark.parametrize("parts", [(), (2, 3), (3, 0), (-1,)])
def test_invalid_partitions_rejected(parts):
    with pytest.raises(PartitionError):
        Partition(parts)


def test_depth():
    assert depth(P(12)) == 0
    assert depth(P(1, 1, 1)) == 2
    assert depth(P(5, 4, 3)) == 7


def test_pad_and_from_padded():
    assert pad(P(2, 1), 3) == (2, 1, 0)
    assert pad(P(1, 1, 1), 3) == (1, 1, 1)
    assert Partition.from_padded((3, 1, 0, 0)) == P(3, 1)


def test_pad_rejects_wrong_degree():
    with pytest.raises(PartitionError):
        pad(P(2, 1), 4)


def test_conjugate():
    assert conjugate(P(3, 1)) == P(2, 1, 1)
    assert conjugate(P(4)) == P(1, 1, 1, 1)
    for lam in enumerate_partitions(9):
        assert conjugate(conjugate(lam)) == lam
        assert conjugate(lam).n == lam.n


def test_partition_index_matches_enumeration():
    index = partition_index(6)
    for i, lam in enumerate(enumerate_partitions(6)):
        assert index[lam] == i


def test_multiplicities_and_str():
    assert multiplicities(P(3, 1, 1)) == {3: 1, 1: 2}
    assert multiplicities(P(4))[1] == 0
    assert sum(multiplicities(P(2, 2, 1)).values()) == 3
    assert str(P(3, 2, 1)) == "(3,2,1)"
    assert P(3, 2, 1).n == 6
