"""
Property suites behind the verify command.

The fast level covers n <= 8 exhaustively plus fixed examples; the full
level sweeps character-table and Kronecker identities up to n = 14 and
checks the reference dataset counts.
"""

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from math import factorial
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .characters import CharacterTable, character_table, class_sign, dimension, mn_character
from .config import REFERENCE_CENSUS, REFERENCE_Q_SIZE
from .dataset import dataset_census, enumerate_q_indices, sample_length
from .errors import VerificationError
from .kronecker import depth_filter_mask, kronecker_slice
from .model_cnn import VARIANTS, CnnArchitecture, cnn_build, gradient_check
from .partitions import Partition, conjugate, enumerate_partitions
from .rng import generator_for

logger = logging.getLogger(__name__)

LEVELS = ('fast', 'full')
FAST_MAX_N = 8
FULL_MAX_N = 14
SYMMETRY_SAMPLES = 1000
SUM_RULE_SAMPLES = 100
GRADIENT_TOLERANCE = 1e-4
ORACLE_MAX_N = 6
TWIST_MAX_N = 10

# p(n) for n = 1..14
PARTITION_COUNTS = (1, 2, 3, 5, 7, 11, 15, 22, 30, 42, 56, 77, 101, 135)

PERMUTATIONS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ''
    seconds: float = 0.0

    def __str__(self) -> str:
        icon = "✅" if self.passed else "❌"
        detail = f"  ({self.detail})" if self.detail else ''
        return f"{icon} {self.name:<44} {'PASS' if self.passed else 'FAIL'}{detail}"


@dataclass
class VerificationReport:
    """Outcome of one suite run."""
    level: str
    max_n: int
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def ensure_passed(self) -> None:
        if not self.passed:
            names = ", ".join(r.name for r in self.failures)
            raise VerificationError(f"{len(self.failures)} check(s) failed: {names}")

    def __str__(self) -> str:
        result = f"\n{'='*70}\n"
        result += f"VERIFICATION ({self.level}, n <= {self.max_n})\n"
        result += f"{'='*70}\n"
        result += "\n".join(str(r) for r in self.results) + "\n"
        result += f"{'='*70}\n"
        result += f"Passed: {len(self.results) - len(self.failures)}/{len(self.results)}\n"
        return result


# ---------------------------------------------------------------------------
# Individual properties. Each returns an empty string on success, or a
# description of the first violation.
# ---------------------------------------------------------------------------

def check_partition_counts(max_n: int) -> str:
    for n in range(1, max_n + 1):
        found = len(enumerate_partitions(n))
        if found != PARTITION_COUNTS[n - 1]:
            return f"p({n}) = {found}, expected {PARTITION_COUNTS[n - 1]}"
    return ''


def check_conjugation(max_n: int) -> str:
    for n in range(1, max_n + 1):
        for lam in enumerate_partitions(n):
            if conjugate(conjugate(lam)) != lam:
                return f"conjugate is not an involution at {lam}"
    return ''


def check_orthogonality(table: CharacterTable) -> str:
    if not table.row_orthogonality_ok():
        return f"row orthogonality fails for n={table.n}"
    if not table.column_orthogonality_ok():
        return f"column orthogonality fails for n={table.n}"
    return ''


def check_dimensions(table: CharacterTable) -> str:
    identity = len(table) - 1
    total = 0
    for i, lam in enumerate(table.order):
        if table.chi[i][identity] != dimension(lam):
            return f"chi_{lam}(1) = {table.chi[i][identity]} but the hook length formula gives {dimension(lam)}"
        total += dimension(lam) ** 2
    if total != factorial(table.n):
        return f"squared dimensions sum to {total}, not {table.n}!"
    return ''


def check_sign_twist(table: CharacterTable) -> str:
    """chi_{lam'}(rho) == sign(rho) chi_lam(rho)."""
    for i, lam in enumerate(table.order):
        twisted = table.chi[table.index(conjugate(lam))]
        for j, rho in enumerate(table.order):
            if twisted[j] != class_sign(rho) * table.chi[i][j]:
                return f"sign twist fails at {lam}, {rho}"
    return ''


def check_trivial_sign_rows(table: CharacterTable) -> str:
    trivial, sign = 0, len(table) - 1
    for j, rho in enumerate(table.order):
        if table.chi[trivial][j] != 1:
            return f"trivial character is {table.chi[trivial][j]} on {rho}"
        if table.chi[sign][j] != class_sign(rho):
            return f"sign character is {table.chi[sign][j]} on {rho}"
    return ''


def check_table_against_recursion(table: CharacterTable) -> str:
    """
    Stored entries agree with a fresh border-strip evaluation. Catches
    cached files whose rows were permuted, which orthogonality cannot see.
    """
    for i, lam in enumerate(table.order):
        for j, rho in enumerate(table.order):
            if mn_character(lam, rho) != table.chi[i][j]:
                return f"stored chi_{lam}({rho}) differs from a fresh evaluation"
    return ''


# Bialternant formula: chi_lam(rho) is the coefficient of x^(lam + delta) in
# a_delta * p_rho, with polynomials kept as {exponent tuple: coefficient}.

def _poly_multiply(a: Dict[Tuple[int, ...], int], b: Dict[Tuple[int, ...], int]) -> Dict[Tuple[int, ...], int]:
    out: Dict[Tuple[int, ...], int] = defaultdict(int)
    for ea, ca in a.items():
        for eb, cb in b.items():
            out[tuple(x + y for x, y in zip(ea, eb))] += ca * cb
    return {e: c for e, c in out.items() if c}


def _unit(m: int, i: int, power: int = 1) -> Tuple[int, ...]:
    return tuple(power if k == i else 0 for k in range(m))


def bialternant_character(lam: Partition, rho: Partition) -> int:
    """chi_lam(rho) by polynomial expansion, independent of border strips."""
    m = len(lam.parts)
    poly = {(0,) * m: 1}
    for i, j in combinations(range(m), 2):
        poly = _poly_multiply(poly, {_unit(m, i): 1, _unit(m, j): -1})
    for r in rho.parts:
        poly = _poly_multiply(poly, {_unit(m, i, r): 1 for i in range(m)})
    return poly.get(tuple(part + m - 1 - i for i, part in enumerate(lam.parts)), 0)


def check_table_against_bialternant(table: CharacterTable) -> str:
    for i, lam in enumerate(table.order):
        for j, rho in enumerate(table.order):
            expected = bialternant_character(lam, rho)
            if table.chi[i][j] != expected:
                return f"chi_{lam}({rho}) = {table.chi[i][j]}, bialternant formula gives {expected}"
    return ''


def check_conjugate_twist(table: CharacterTable) -> str:
    """g(lam', mu', nu) == g(lam, mu, nu)."""
    conj = np.array([table.index(conjugate(lam)) for lam in table.order])
    for i, lam in enumerate(table.order):
        twisted = kronecker_slice(table, int(conj[i]))[conj]
        if not np.array_equal(kronecker_slice(table, i), twisted):
            return f"conjugating lam={lam} and mu changes some g(lam, mu, nu)"
    return ''


def _sample_triples(n: int, p: int, count: int, seed: int) -> np.ndarray:
    rng = generator_for(seed, 'verify-triples', n)
    return rng.integers(0, p, size=(count, 3))


def check_permutation_symmetry(table: CharacterTable, seed: int, samples: int = SYMMETRY_SAMPLES) -> str:
    """g is invariant under every permutation of its three arguments."""
    p = len(table)
    slices = [kronecker_slice(table, i) for i in range(p)]
    for a, b, c in _sample_triples(table.n, p, samples, seed):
        triple = (int(a), int(b), int(c))
        values = {int(slices[triple[x]][triple[y], triple[z]]) for x, y, z in PERMUTATIONS}
        if len(values) != 1:
            names = ", ".join(str(table.order[t]) for t in triple)
            return f"coefficients of ({names}) differ under permutation: {sorted(values)}"
    return ''


def check_dimension_sum_rule(table: CharacterTable, seed: int, samples: int = SUM_RULE_SAMPLES) -> str:
    """sum_nu g(lam, mu, nu) dim(nu) == dim(lam) dim(mu)."""
    p = len(table)
    dims = [dimension(lam) for lam in table.order]
    rng = generator_for(seed, 'verify-sum-rule', table.n)
    for a, b in rng.integers(0, p, size=(samples, 2)):
        row = kronecker_slice(table, int(a))[int(b)]
        total = sum(int(g) * d for g, d in zip(row, dims))
        if total != dims[a] * dims[b]:
            return f"sum rule fails for {table.order[a]}, {table.order[b]}: {total} != {dims[a] * dims[b]}"
    return ''


def check_depth_necessity(table: CharacterTable) -> str:
    """Every triple outside the depth inequalities has a zero coefficient."""
    mask = depth_filter_mask(table.n)
    for i in range(len(table)):
        coefficients = kronecker_slice(table, i)
        outside = np.argwhere(~mask[i] & (coefficients != 0))
        if len(outside):
            j, k = outside[0]
            return f"non-zero coefficient outside the depth filter: {table.order[i]}, {table.order[j]}, {table.order[k]}"
    return ''


def check_trivial_factor(table: CharacterTable) -> str:
    """g(lam, mu, (n)) is 1 when lam == mu and 0 otherwise."""
    for i in range(len(table)):
        column = kronecker_slice(table, i)[:, 0]
        expected = np.zeros(len(table), dtype=np.int64)
        expected[i] = 1
        if not np.array_equal(column.astype(np.int64), expected):
            return f"g({table.order[i]}, mu, ({table.n})) is not the indicator of mu == lam"
    return ''


def check_fixed_examples() -> str:
    if len(enumerate_q_indices(2)) != 5:
        return f"#Q(2) = {len(enumerate_q_indices(2))}, expected 5"
    for n, encoding, length in ((2, 1, 6), (2, 2, 6), (2, 3, 36), (12, 3, 216)):
        if sample_length(n, encoding) != length:
            return f"encoding a={encoding} at n={n} has length {sample_length(n, encoding)}, expected {length}"
    return ''


def check_parameter_counts() -> str:
    for n in (12, 13, 14):
        for variant in VARIANTS:
            arch = CnnArchitecture(variant, n)
            if arch.parameter_count != arch.expected_parameter_count:
                return f"{variant} at n={n} has {arch.parameter_count} parameters"
    return ''


def check_gradients(seed: int) -> str:
    """Backpropagation agrees with finite differences on small random models."""
    rng = generator_for(seed, 'verify-gradients')
    for variant in VARIANTS:
        model = cnn_build(variant, 6, seed=int(rng.integers(2 ** 32)))
        shape = (4,) + model.architecture.input_shape
        x = rng.integers(0, 7, size=shape).astype(np.float64) + rng.uniform(0.05, 0.95, size=shape)
        labels = np.array([0, 1, 1, 0])
        error = gradient_check(model, x, labels)
        if error >= GRADIENT_TOLERANCE:
            return f"{variant} relative gradient error {error:.2e}"
    return ''


def check_census(table: CharacterTable) -> str:
    expected = REFERENCE_CENSUS[table.n]
    census = dataset_census(table.n, table)
    for key, value in expected.items():
        if getattr(census, key) != value:
            return f"{key} = {getattr(census, key)}, expected {value}"
    return ''


def check_q_sizes() -> str:
    for n, expected in REFERENCE_Q_SIZE.items():
        found = int(depth_filter_mask(n).sum())
        if found != expected:
            return f"#Q({n}) = {found}, expected {expected}"
    return ''


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def _run(report: VerificationReport, name: str, check: Callable[[], str]) -> None:
    started = time.perf_counter()
    try:
        problem = check()
    except Exception as e:
        problem = f"{type(e).__name__}: {e}"
    result = CheckResult(name, not problem, problem, time.perf_counter() - started)
    (logger.info if result.passed else logger.error)("%s: %s %s", name, 'pass' if result.passed else 'FAIL', problem)
    report.results.append(result)


def run_verification(level: str = 'fast', max_n: Optional[int] = None, seed: int = 0,
                     table_source: Optional[Callable[[int], CharacterTable]] = None) -> VerificationReport:
    """
    Run the property suite.

    Args:
        level: 'fast' (n <= 8) or 'full' (n <= 14 plus dataset counts)
        max_n: Lower the largest degree checked
        seed: Seed for the sampled checks
        table_source: Callable returning the character table for n

    Returns:
        VerificationReport with one entry per property and degree
    """
    if level not in LEVELS:
        raise ValueError(f"Unknown verification level {level!r}; expected one of {LEVELS}")
    limit = FAST_MAX_N if level == 'fast' else FULL_MAX_N
    top = limit if max_n is None else min(max_n, limit)
    if top < 1:
        raise ValueError(f"max_n must be positive, got {max_n}")
    table_source = table_source or character_table

    report = VerificationReport(level, top)
    _run(report, f"partition counts n<={top}", lambda: check_partition_counts(top))
    _run(report, f"conjugation involution n<={top}", lambda: check_conjugation(top))
    for n in range(1, top + 1):
        table = table_source(n)
        _run(report, f"orthogonality n={n}", lambda: check_orthogonality(table))
        _run(report, f"hook-length dimensions n={n}", lambda: check_dimensions(table))
        _run(report, f"sign twist n={n}", lambda: check_sign_twist(table))
        _run(report, f"trivial and sign rows n={n}", lambda: check_trivial_sign_rows(table))
        if n <= min(top, 12):
            _run(report, f"permutation symmetry n={n}", lambda: check_permutation_symmetry(table, seed))
            _run(report, f"dimension sum rule n={n}", lambda: check_dimension_sum_rule(table, seed))
            _run(report, f"trivial tensor factor n={n}", lambda: check_trivial_factor(table))
        if n <= FAST_MAX_N:
            _run(report, f"depth filter necessity n={n}", lambda: check_depth_necessity(table))
            _run(report, f"fresh border-strip values n={n}", lambda: check_table_against_recursion(table))
        if n <= ORACLE_MAX_N:
            _run(report, f"bialternant formula n={n}", lambda: check_table_against_bialternant(table))
        if n <= TWIST_MAX_N:
            _run(report, f"conjugate twist n={n}", lambda: check_conjugate_twist(table))
    _run(report, "fixed examples", check_fixed_examples)
    _run(report, "CNN parameter counts n=12..14", check_parameter_counts)
    _run(report, "CNN gradients vs finite differences", lambda: check_gradients(seed))
    if level == 'full' and top >= 12:
        table = table_source(12)
        _run(report, "dataset census n=12", lambda: check_census(table))
        if top >= 14:
            _run(report, "#Q sizes n=12, 14", check_q_sizes)
    return report

