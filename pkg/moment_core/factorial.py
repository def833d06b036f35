"""
Factorial powers and the diagonal restriction operator.

<f, eta^{⊙n}> is expanded over compositions n = n_1 + ... + n_k as
sum_k (-1)^(n-k) / k! * sum_c n! / (n_1 ... n_k) * <T_c f, eta^{⊗k}>.
T_c f depends only on the multiset of parts for symmetric f, so compositions are grouped by
integer partition and weighted by the number of distinct orderings.
"""
import logging
from collections import Counter
from collections.abc import Iterator
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, combinations_with_replacement, permutations
from math import factorial, prod
from typing import Final

from moment_common.errors import GridLimitError, MomentError, OrderMismatchError
from moment_common.tensor import (
    CoeffSequence,
    Composition,
    DiscreteMeasure,
    Index,
    PointConfiguration,
    Scalar,
    SetPartition,
    SymTensor,
)
from moment_core.grid import canonical, exact_div, multiplicity, site_counts, tensor_power_pairing

logger = logging.getLogger(__name__)

MAX_COMPOSITION_ORDER: Final[int] = 12


def _check_order(n: int) -> None:
    if n < 1 or n > MAX_COMPOSITION_ORDER:
        raise GridLimitError(f"Enumeration order must lie in 1..{MAX_COMPOSITION_ORDER}, got {n}")


def enumerate_compositions(n: int) -> list[Composition]:
    """
    All 2^(n-1) ordered compositions of n, by number of parts and then by cut positions.

    Raises:
        GridLimitError: If n is outside 1..12
    """
    _check_order(n)
    result: list[Composition] = []
    for k in range(1, n + 1):
        for cuts in combinations(range(1, n), k - 1):
            bounds = (0, *cuts, n)
            result.append(Composition(tuple(right - left for left, right in zip(bounds, bounds[1:]))))
    return result


def _restricted_growth(n: int) -> Iterator[list[int]]:
    labels = [0] * n

    def extend(position: int, used: int) -> Iterator[list[int]]:
        if position == n:
            yield labels
            return
        for label in range(used + 1):
            labels[position] = label
            yield from extend(position + 1, max(used, label + 1))

    yield from extend(1, 1) if n > 0 else iter(())


def enumerate_set_partitions(n: int) -> list[SetPartition]:
    """
    All Bell(n) set partitions of {1..n}, generated from restricted growth strings.

    Raises:
        GridLimitError: If n is outside 1..12
    """
    _check_order(n)
    result: list[SetPartition] = []
    for labels in _restricted_growth(n):
        blocks: dict[int, list[int]] = {}
        for element, label in enumerate(labels, start=1):
            blocks.setdefault(label, []).append(element)
        result.append(SetPartition(tuple(tuple(blocks[label]) for label in sorted(blocks))))
    return result


@lru_cache(maxsize=None)
def partition_weights(n: int) -> tuple[tuple[int, int, int], ...]:
    """
    Per block count k, the number of set partitions of {1..n} with k blocks and the sum of their Möbius weights.

    The Möbius weight of a partition is prod over blocks of (-1)^(|B|-1) (|B|-1)!.

    Returns:
        Triples (k, count, mobius) for k = 1..n; n = 0 gives the single triple (0, 1, 1)
    """
    if n == 0:
        return ((0, 1, 1),)
    counts: Counter[int] = Counter()
    mobius: Counter[int] = Counter()
    for partition in enumerate_set_partitions(n):
        k = len(partition.blocks)
        counts[k] += 1
        mobius[k] += prod((-1) ** (len(block) - 1) * factorial(len(block) - 1) for block in partition.blocks)
    return tuple((k, counts[k], mobius[k]) for k in range(1, n + 1))


def integer_partitions(n: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of n into non-increasing positive parts."""
    if n == 0:
        yield ()
        return
    top = n if largest is None else min(n, largest)
    for first in range(top, 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first, *rest)


def orderings(parts: tuple[int, ...]) -> int:
    """Number of distinct compositions sharing the multiset of parts."""
    return factorial(len(parts)) // prod(factorial(count) for count in Counter(parts).values())


def distinct_orderings(parts: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """Each distinct ordering of a multiset of parts exactly once, in lexicographic order."""
    if not parts:
        yield ()
        return
    for first in sorted(set(parts)):
        rest = list(parts)
        rest.remove(first)
        for tail in distinct_orderings(tuple(rest)):
            yield first, *tail


def falling_factorial(x: Scalar, k: int) -> Scalar:
    result: Scalar = 1
    for j in range(k):
        result *= x - j
    return result


def t_restrict(f: SymTensor, composition: Composition) -> SymTensor:
    """
    Diagonal restriction T_c f, re-symmetrized over its k arguments.

    The value at (x_1..x_k) is f at (x_1 repeated n_1 times, ..., x_k repeated n_k times), averaged over
    the distinct orderings of the parts.

    Raises:
        OrderMismatchError: If the composition does not sum to the order of f
    """
    if composition.n != f.order:
        raise OrderMismatchError(composition.n, f.order)
    k = composition.k
    arrangements = list(distinct_orderings(composition.parts))
    candidates: set[Index] = set()
    for alpha in f.entries:
        candidates.update(combinations_with_replacement(sorted(set(alpha)), k))
    entries: dict[Index, Scalar] = {}
    for beta in candidates:
        total: Scalar = 0
        for parts in arrangements:
            total += f.value([site for site, part in zip(beta, parts) for _ in range(part)])
        value = exact_div(total, len(arrangements))
        if value != 0:
            entries[beta] = value
    return SymTensor(k, entries)


def _restricted(f: SymTensor, parts: tuple[int, ...]) -> SymTensor:
    return t_restrict(f, Composition(parts))


def factorial_poly_expand(f: SymTensor) -> list[tuple[int, SymTensor]]:
    """
    Coefficients c^(k) with <f, eta^{⊙n}> = sum_k <c^(k), eta^{⊗k}> for every measure eta.

    Args:
        f: The order-n coefficient tensor

    Returns:
        Pairs (k, c^(k)) for k = n down to 1, or [(0, f)] when n = 0
    """
    n = f.order
    if n == 0:
        return [(0, f)]
    _check_order(n)
    coefficients: dict[int, SymTensor] = {}
    for parts in integer_partitions(n):
        k = len(parts)
        weight = Fraction((-1) ** (n - k) * orderings(parts) * factorial(n), factorial(k) * prod(parts))
        term = _restricted(f, parts).scale(weight)
        coefficients[k] = coefficients[k] + term if k in coefficients else term
    return [(k, coefficients[k]) for k in sorted(coefficients, reverse=True)]


def moment_poly_expand(f: SymTensor) -> CoeffSequence:
    """
    Coefficient sequence G with K(G)(eta) = <f, eta^{⊗n}>.

    g^(k) sums n! / (n_1! ... n_k!) T_c f over the compositions c of n with k parts.
    """
    n = f.order
    if n == 0:
        return CoeffSequence({0: f} if not f.is_zero else {}, 0)
    _check_order(n)
    tensors: list[SymTensor] = []
    for parts in integer_partitions(n):
        weight = orderings(parts) * factorial(n) // prod(factorial(part) for part in parts)
        tensors.append(_restricted(f, parts).scale(weight))
    return CoeffSequence.of(tensors, n)


def factorial_pairing(f: SymTensor, eta: DiscreteMeasure) -> Scalar:
    """<f, eta^{⊙n}> through the composition expansion; valid for real-valued eta."""
    if f.order <= 1:
        return tensor_power_pairing(f, eta)
    total: Scalar = 0
    for _, coefficient in factorial_poly_expand(f):
        total += tensor_power_pairing(coefficient, eta)
    return total


def factorial_pairing_config(f: SymTensor, gamma: PointConfiguration) -> Scalar:
    """
    Sum of f over ordered selections of pairwise distinct points of an integer configuration.

    A canonical index alpha with k_s copies of site s is hit by prod_s falling(gamma_s, k_s) selections per
    ordering of alpha.
    """
    if f.order == 0:
        return f.scalar_value()
    total: Scalar = 0
    for alpha, value in f.entries.items():
        selections = prod(
            falling_factorial(gamma.counts[site], count) for site, count in site_counts(alpha).items()
        )
        if selections:
            total += multiplicity(alpha) * selections * value
    return total


def factorial_pairing_config_bruteforce(f: SymTensor, gamma: PointConfiguration) -> Scalar:
    """Literal sum over ordered tuples of distinct point labels; exponential, meant as a reference."""
    points = [site for site, count in enumerate(gamma.counts) for _ in range(count)]
    if f.order == 0:
        return f.scalar_value()
    total: Scalar = 0
    for labels in permutations(range(len(points)), f.order):
        total += f.value(canonical([points[label] for label in labels]))
    return total


def partition_weight_identity(n: int, k: int) -> Fraction:
    """Sum over compositions of n with k parts of n! / (k! prod n_i!); equals the Stirling number S(n, k)."""
    if k < 1 or k > n:
        raise MomentError(f"Block count {k} is outside 1..{n}")
    total = Fraction(0)
    for composition in enumerate_compositions(n):
        if composition.k == k:
            total += Fraction(factorial(n), factorial(k) * prod(factorial(part) for part in composition.parts))
    return total
