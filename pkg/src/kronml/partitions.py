"""
Partition Class - Integer partitions, their padded form and the depth statistic.
"""

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Sequence, Tuple

from .errors import PartitionError

MAX_DEGREE = 30

# A partition extended by zeros to length exactly n.
PaddedPartition = Tuple[int, ...]


@dataclass(frozen=True)
class Partition:
    """
    A weakly decreasing sequence of positive integers.

    Attributes:
        parts (tuple): The non-zero parts, largest first
    """

    parts: Tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if not parts:
            raise PartitionError("A partition needs at least one part")
        if any(p < 1 for p in parts):
            raise PartitionError(f"Partition parts must be positive: {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise PartitionError(f"Partition parts must be weakly decreasing: {parts}")
        object.__setattr__(self, 'parts', parts)

    @classmethod
    def from_padded(cls, entries: Sequence[int]) -> "Partition":
        """Strip trailing zeros from a padded vector."""
        return cls(tuple(int(e) for e in entries if e != 0))

    @property
    def n(self) -> int:
        """The integer being partitioned."""
        return sum(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)

    def __getitem__(self, index: int) -> int:
        return self.parts[index]

    def __repr__(self) -> str:
        return f"Partition({self.parts})"

    def __str__(self) -> str:
        return "(" + ",".join(str(p) for p in self.parts) + ")"


def _check_degree(n: int) -> None:
    if not isinstance(n, int) or isinstance(n, bool):
        raise PartitionError(f"Degree must be an integer, got {n!r}")
    if n < 1 or n > MAX_DEGREE:
        raise PartitionError(f"Degree must lie in 1..{MAX_DEGREE}, got {n}")


def _reverse_lex(n: int, largest: int) -> Iterator[Tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for head in range(min(n, largest), 0, -1):
        for tail in _reverse_lex(n - head, head):
            yield (head,) + tail


@lru_cache(maxsize=None)
def _partition_tuple(n: int) -> Tuple[Partition, ...]:
    return tuple(Partition(parts) for parts in _reverse_lex(n, n))


def enumerate_partitions(n: int) -> List[Partition]:
    """
    List every partition of n in reverse-lexicographic order.

    The order starts at (n) and ends at (1^n). Character-table rows and
    dataset rows inherit it, so it must never change.

    Args:
        n: Degree, 1 <= n <= 30

    Returns:
        List of Partition objects

    Raises:
        PartitionError: If n is outside 1..30
    """
    _check_degree(n)
    return list(_partition_tuple(n))


def partition_index(n: int) -> dict:
    """Map each partition of n to its position in enumerate_partitions(n)."""
    return {p: i for i, p in enumerate(_partition_tuple(n))}


def depth(partition: Partition) -> int:
    """Return n - λ₁."""
    return partition.n - partition.parts[0]


def pad(partition: Partition, n: int) -> PaddedPartition:
    """
    Extend a partition by zeros to length n.

    Args:
        partition: Partition of n
        n: Target length, must equal the partition's sum

    Returns:
        Tuple of length n
    """
    if partition.n != n:
        raise PartitionError(f"{partition} is a partition of {partition.n}, not of {n}")
    return partition.parts + (0,) * (n - len(partition.parts))


def conjugate(partition: Partition) -> Partition:
    """Transpose the Young diagram: the parts become the column lengths."""
    parts = partition.parts
    return Partition(tuple(sum(1 for p in parts if p > j) for j in range(parts[0])))


def multiplicities(partition: Partition) -> Counter:
    """Part -> number of occurrences."""
    return Counter(partition.parts)
