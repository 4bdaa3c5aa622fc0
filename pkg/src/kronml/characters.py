"""
Exact character theory of the symmetric group.

Characters are evaluated with the Murnaghan-Nakayama rule on beta-sets
(abacus positions): removing a border strip of length r moves one bead from
position b to the empty position b - r, and the strip's height is the number
of beads strictly between the two positions. Everything here is exact
integer arithmetic; floating point is only used to bound magnitudes before
choosing between int64 and Python integers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CharacterTableError, PartitionError
from .partitions import Partition, enumerate_partitions, multiplicities

logger = logging.getLogger(__name__)

MAX_TABLE_DEGREE = 20
INT64_SAFE = 2 ** 62

# A conjugacy class of S_n, labelled by the cycle lengths of its elements.
CycleType = Partition


def class_size(rho: CycleType) -> int:
    """
    Number of permutations with cycle type rho.

    Args:
        rho: Cycle type of a permutation of n = sum(rho)

    Returns:
        n! / z_rho with z_rho = prod_i i^{m_i} m_i!
    """
    z = 1
    for part, count in multiplicities(rho).items():
        z *= part ** count * factorial(count)
    return factorial(rho.n) // z


def class_sign(rho: CycleType) -> int:
    """Sign of any permutation of cycle type rho."""
    return -1 if (rho.n - len(rho)) % 2 else 1


def _border_strips(parts: Tuple[int, ...], length: int) -> Iterator[Tuple[int, Tuple[int, ...]]]:
    """
    Yield (sign, remainder) for every border strip of the given length.

    Args:
        parts: Partition parts, possibly empty
        length: Strip size

    Yields:
        (-1)^height and the parts of the partition left after removal
    """
    rows = len(parts)
    beta = [parts[i] + rows - 1 - i for i in range(rows)]
    occupied = set(beta)
    for bead in beta:
        target = bead - length
        if target < 0 or target in occupied:
            continue
        height = sum(1 for other in beta if target < other < bead)
        moved = sorted([b for b in beta if b != bead] + [target], reverse=True)
        remainder = tuple(moved[i] - (rows - 1 - i) for i in range(rows))
        yield (-1) ** height, tuple(p for p in remainder if p > 0)


@lru_cache(maxsize=None)
def _mn(parts: Tuple[int, ...], cycles: Tuple[int, ...]) -> int:
    if not cycles:
        return 1 if not parts else 0
    head, rest = cycles[0], cycles[1:]
    return sum(sign * _mn(remainder, rest) for sign, remainder in _border_strips(parts, head))


def mn_character(lam: Partition, rho: CycleType) -> int:
    """
    Character value chi_lam(rho) by the Murnaghan-Nakayama rule.

    Strips are removed for the largest remaining cycle first. Results are
    memoized on (partition, remaining cycle type).

    Raises:
        PartitionError: If lam and rho partition different integers
    """
    if lam.n != rho.n:
        raise PartitionError(f"{lam} and cycle type {rho} have different degrees")
    return _mn(lam.parts, tuple(sorted(rho.parts, reverse=True)))


def dimension(lam: Partition) -> int:
    """Number of standard Young tableaux of shape lam, by the hook length formula."""
    columns = [sum(1 for p in lam.parts if p > j) for j in range(lam.parts[0])]
    hooks = 1
    for i, row in enumerate(lam.parts):
        for j in range(row):
            hooks *= (row - j) + (columns[j] - i) - 1
    return factorial(lam.n) // hooks


def exact_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Exact integer matrix product.

    Uses int64 when every partial sum is provably below 2**62, otherwise
    falls back to Python integers (object dtype).
    """
    bound = float(np.max(np.abs(a).astype(float) @ np.abs(b).astype(float), initial=0.0))
    if bound < INT64_SAFE:
        return a.astype(np.int64) @ b.astype(np.int64)
    return a.astype(object) @ b.astype(object)


@dataclass(frozen=True)
class CharacterTable:
    """
    Full character table of S_n.

    Attributes:
        n (int): Degree
        order (tuple): Partitions in enumerate_partitions order; indexes rows and columns
        chi (tuple): chi[i][j] = chi_{order[i]}(order[j])
        class_sizes (tuple): Size of the class order[j]
    """

    n: int
    order: Tuple[Partition, ...]
    chi: Tuple[Tuple[int, ...], ...]
    class_sizes: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.order)

    def index(self, partition: Partition) -> int:
        try:
            return self.order.index(partition)
        except ValueError:
            raise PartitionError(f"{partition} is not a partition of {self.n}") from None

    def value(self, lam: Partition, rho: CycleType) -> int:
        return self.chi[self.index(lam)][self.index(rho)]

    def matrix(self) -> np.ndarray:
        """Exact p(n) x p(n) matrix (object dtype, Python integers)."""
        return np.array(self.chi, dtype=object)

    def sizes(self) -> np.ndarray:
        return np.array(self.class_sizes, dtype=object)

    def row_orthogonality_ok(self) -> bool:
        """sum_rho |C_rho| chi_lam(rho) chi_mu(rho) == n! [lam == mu]."""
        chi = self.matrix()
        gram = exact_matmul(chi * self.sizes()[None, :], chi.T)
        expected = np.identity(len(self), dtype=object) * factorial(self.n)
        return bool(np.array_equal(gram.astype(object), expected))

    def column_orthogonality_ok(self) -> bool:
        """sum_lam chi_lam(rho) chi_lam(sigma) == (n! / |C_rho|) [rho == sigma]."""
        chi = self.matrix()
        gram = exact_matmul(chi.T, chi)
        expected = np.zeros((len(self), len(self)), dtype=object)
        for j, size in enumerate(self.class_sizes):
            expected[j, j] = factorial(self.n) // size
        return bool(np.array_equal(gram.astype(object), expected))

    def verify(self) -> None:
        """
        Check shape, class sizes and both orthogonality relations.

        Raises:
            CharacterTableError: On the first failed check
        """
        p = len(self.order)
        if tuple(self.order) != tuple(enumerate_partitions(self.n)):
            raise CharacterTableError(f"Table for n={self.n} is not in enumerate_partitions order")
        if len(self.class_sizes) != p or any(len(row) != p for row in self.chi):
            raise CharacterTableError(f"Table for n={self.n} is not {p}x{p}")
        if sum(self.class_sizes) != factorial(self.n):
            raise CharacterTableError(f"Class sizes for n={self.n} do not sum to n!")
        if not self.row_orthogonality_ok():
            raise CharacterTableError(f"Row orthogonality fails for n={self.n}")
        if not self.column_orthogonality_ok():
            raise CharacterTableError(f"Column orthogonality fails for n={self.n}")


def _character_row(lam_parts: Tuple[int, ...], classes: Sequence[Tuple[int, ...]]) -> List[int]:
    return [_mn(lam_parts, rho) for rho in classes]


def compute_character_table(n: int, workers: int = 1) -> CharacterTable:
    """
    Build the character table of S_n from scratch.

    Args:
        n: Degree, 1 <= n <= 20
        workers: Processes used for rows; each process keeps its own memo

    Returns:
        Verified CharacterTable
    """
    if not isinstance(n, int) or n < 1 or n > MAX_TABLE_DEGREE:
        raise PartitionError(f"Character tables are available for 1 <= n <= {MAX_TABLE_DEGREE}, got {n}")
    order = tuple(enumerate_partitions(n))
    classes = [rho.parts for rho in order]
    logger.info("Computing character table of S_%d (%d classes, %d workers)", n, len(order), workers)
    if workers > 1 and len(order) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_character_row, [lam.parts for lam in order],
                                 [classes] * len(order), chunksize=4))
    else:
        rows = [_character_row(lam.parts, classes) for lam in order]
    table = CharacterTable(
        n=n,
        order=order,
        chi=tuple(tuple(row) for row in rows),
        class_sizes=tuple(class_size(rho) for rho in order),
    )
    table.verify()
    return table


@lru_cache(maxsize=8)
def _cached_table(n: int) -> CharacterTable:
    return compute_character_table(n)


def character_table(n: int, cache_dir: Optional[str] = None, workers: int = 1) -> CharacterTable:
    """
    Character table of S_n, computed once per process.

    When cache_dir is given the table is read from (or written to)
    chartab_<n>.csv in that directory.
    """
    if cache_dir is not None:
        from .table_store import CharacterTableStore

        return CharacterTableStore(cache_dir).load_or_build(n, workers=workers)
    if workers > 1:
        return compute_character_table(n, workers=workers)
    return _cached_table(n)


def serialize_table(table: CharacterTable) -> str:
    """Render the chartab_<n>.csv text."""
    lines = [f"{table.n},{len(table)}"]
    lines += [",".join(str(p) for p in lam.parts) for lam in table.order]
    lines += [str(size) for size in table.class_sizes]
    lines += [",".join(str(v) for v in row) for row in table.chi]
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> CharacterTable:
    """
    Parse chartab_<n>.csv text and verify it before returning.

    Raises:
        CharacterTableError: If the text is malformed or fails verification
    """
    lines = [line.strip() for line in text.strip().splitlines()]
    try:
        n, p = (int(x) for x in lines[0].split(","))
        if len(lines) != 1 + 3 * p:
            raise CharacterTableError(f"Expected {1 + 3 * p} lines, found {len(lines)}")
        order = tuple(Partition(tuple(int(x) for x in line.split(","))) for line in lines[1:1 + p])
        sizes = tuple(int(line) for line in lines[1 + p:1 + 2 * p])
        chi = tuple(tuple(int(x) for x in line.split(",")) for line in lines[1 + 2 * p:])
    except (ValueError, IndexError) as e:
        raise CharacterTableError(f"Malformed character table: {e}") from e
    if any(lam.n != n for lam in order):
        raise CharacterTableError(f"Partition order does not match n={n}")
    table = CharacterTable(n=n, order=order, chi=chi, class_sizes=sizes)
    table.verify()
    return table
