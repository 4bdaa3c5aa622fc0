"""
Kronecker coefficients of the symmetric group, the zero/non-zero label and
the depth filter.

g(lam, mu, nu) = (1/n!) sum_rho |C_rho| chi_lam(rho) chi_mu(rho) chi_nu(rho)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import factorial
from typing import Dict, Iterator

import numpy as np

from .characters import CharacterTable, exact_matmul
from .errors import KroneckerCorruptionError, PartitionError
from .partitions import Partition, depth, enumerate_partitions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Triple:
    """
    Three partitions of the same n.

    Attributes:
        lam, mu, nu (Partition): The triple, in order
    """

    lam: Partition
    mu: Partition
    nu: Partition

    def __post_init__(self):
        if not self.lam.n == self.mu.n == self.nu.n:
            raise PartitionError(f"Triple {self} mixes degrees {self.lam.n}, {self.mu.n}, {self.nu.n}")

    @property
    def n(self) -> int:
        return self.lam.n

    def __iter__(self) -> Iterator[Partition]:
        return iter((self.lam, self.mu, self.nu))

    def __str__(self) -> str:
        return f"({self.lam}, {self.mu}, {self.nu})"


def _check_table(table: CharacterTable, *partitions: Partition) -> None:
    for p in partitions:
        if p.n != table.n:
            raise PartitionError(f"{p} does not match the character table of S_{table.n}")


def kron(lam: Partition, mu: Partition, nu: Partition, table: CharacterTable) -> int:
    """
    Exact Kronecker coefficient g_{lam,mu}^nu.

    Args:
        lam, mu, nu: Partitions of table.n
        table: Character table of S_n

    Returns:
        Non-negative integer multiplicity of S_nu in S_lam (x) S_mu

    Raises:
        KroneckerCorruptionError: If the character sum is negative or not divisible by n!
    """
    _check_table(table, lam, mu, nu)
    a, b, c = table.chi[table.index(lam)], table.chi[table.index(mu)], table.chi[table.index(nu)]
    total = sum(size * x * y * z for size, x, y, z in zip(table.class_sizes, a, b, c))
    quotient, remainder = divmod(total, factorial(table.n))
    if remainder or quotient < 0:
        raise KroneckerCorruptionError(
            f"Character sum {total} for {lam}, {mu}, {nu} is not a non-negative multiple of {table.n}!")
    return quotient


def depth_filter(lam: Partition, mu: Partition, nu: Partition) -> bool:
    """|d_lam - d_mu| <= d_nu <= d_lam + d_mu; necessary for a non-zero coefficient."""
    if not lam.n == mu.n == nu.n:
        raise PartitionError(f"Partitions {lam}, {mu}, {nu} have different degrees")
    dl, dm, dn = depth(lam), depth(mu), depth(nu)
    return abs(dl - dm) <= dn <= dl + dm


def label(lam: Partition, mu: Partition, nu: Partition, table: CharacterTable) -> int:
    """Class 0 if the coefficient vanishes, class 1 otherwise."""
    return 0 if kron(lam, mu, nu, table) == 0 else 1


def depth_vector(n: int) -> np.ndarray:
    """Depths of enumerate_partitions(n), in order."""
    return np.array([depth(p) for p in enumerate_partitions(n)], dtype=np.int64)


def depth_filter_mask(n: int) -> np.ndarray:
    """Boolean p(n)^3 array; entry (i, j, k) is depth_filter on the i-th, j-th, k-th partitions."""
    d = depth_vector(n)
    dl, dm, dn = d[:, None, None], d[None, :, None], d[None, None, :]
    return (np.abs(dl - dm) <= dn) & (dn <= dl + dm)


def kronecker_slice(table: CharacterTable, i: int) -> np.ndarray:
    """
    All coefficients with lam = table.order[i], as a (mu, nu) matrix.

    The sum over classes runs in int64 only when its magnitude is bounded
    below 2**62 beforehand; otherwise Python integers are used.
    """
    chi = table.matrix()
    weighted = chi * (table.sizes() * chi[i])[None, :]
    sums = exact_matmul(weighted, chi.T)
    fact = factorial(table.n)
    if np.any(sums % fact != 0) or np.any(sums < 0):
        raise KroneckerCorruptionError(
            f"Character sums for {table.order[i]} are not non-negative multiples of {table.n}!")
    return sums // fact


def kronecker_tensor(table: CharacterTable, threads: int = 1) -> np.ndarray:
    """
    Every coefficient g[i, j, k] for the i-th, j-th and k-th partitions of n.

    Args:
        table: Character table of S_n
        threads: Worker threads over lam

    Returns:
        p(n)^3 integer array (int64, or object when values need it)
    """
    p = len(table)
    logger.info("Computing %d^3 Kronecker coefficients for n=%d", p, table.n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            slices = list(pool.map(lambda i: kronecker_slice(table, i), range(p)))
    else:
        slices = [kronecker_slice(table, i) for i in range(p)]
    if any(s.dtype == object for s in slices):
        return np.stack([s.astype(object) for s in slices])
    return np.stack(slices).astype(np.int64)


def coefficient_histogram(table: CharacterTable, threads: int = 1) -> Dict[int, int]:
    """Count how often each coefficient value occurs over the triples passing the depth filter."""
    values = kronecker_tensor(table, threads=threads)[depth_filter_mask(table.n)]
    uniques, counts = np.unique(values, return_counts=True)
    return {int(v): int(c) for v, c in zip(uniques, counts)}
