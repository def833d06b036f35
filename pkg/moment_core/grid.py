"""
Canonical multi-index bookkeeping and the elementary pairings on symmetric tensors.

Every tensor is stored by sorted index; the pairings carry the multiplicity of each sorted index
(the number of ordered tuples collapsing onto it) explicitly.
"""
import logging
from collections import Counter, defaultdict
from collections.abc import Iterator, Sequence
from fractions import Fraction
from itertools import combinations_with_replacement, product
from math import comb, factorial, prod

from moment_common.errors import GridLimitError, OrderMismatchError
from moment_common.model import DEFAULT_MAX_ENTRIES
from moment_common.tensor import DiscreteMeasure, Index, Scalar, SymTensor, accumulate

logger = logging.getLogger(__name__)


def exact_div(numerator: Scalar, denominator: Scalar) -> Scalar:
    """Divide, staying in rational arithmetic unless a float is involved."""
    if isinstance(numerator, float) or isinstance(denominator, float):
        return numerator / denominator
    return Fraction(numerator) / Fraction(denominator)


def canonical(index: Sequence[int]) -> Index:
    return tuple(sorted(index))


def site_counts(alpha: Sequence[int]) -> Counter[int]:
    return Counter(alpha)


def multiplicity(alpha: Sequence[int]) -> int:
    """
    Number of ordered tuples whose sorted form is alpha.

    Args:
        alpha: A canonical multi-index

    Returns:
        n! / prod_s (count of s in alpha)!
    """
    return factorial(len(alpha)) // prod(factorial(count) for count in site_counts(alpha).values())


def count_canonical_indices(num_sites: int, order: int) -> int:
    return comb(num_sites + order - 1, order)


def canonical_indices(num_sites: int, order: int, max_entries: int = DEFAULT_MAX_ENTRIES) -> list[Index]:
    """
    All sorted multi-indices of the given order over num_sites sites.

    Raises:
        GridLimitError: If there are more than max_entries of them
    """
    count = count_canonical_indices(num_sites, order)
    if count > max_entries:
        raise GridLimitError(
            f"Order {order} on {num_sites} sites has {count} canonical indices, above the cap of {max_entries}"
        )
    return list(combinations_with_replacement(range(num_sites), order))


def merge(alpha: Sequence[int], beta: Sequence[int]) -> Index:
    return tuple(sorted((*alpha, *beta)))


def monomial(values: Sequence[Scalar], alpha: Sequence[int]) -> Scalar:
    result: Scalar = 1
    for site in alpha:
        result *= values[site]
    return result


def sub_multisets(gamma: Sequence[int], size: int) -> Iterator[tuple[Index, Index, int]]:
    """
    Split a canonical multi-index into a sub-multiset of the given size and its complement.

    Yields:
        (omega, rest, ways) where ways is the number of position subsets of gamma realizing omega
    """
    counts = sorted(site_counts(gamma).items())
    for taken in product(*(range(count + 1) for _, count in counts)):
        if sum(taken) != size:
            continue
        omega: list[int] = []
        rest: list[int] = []
        ways = 1
        for (site, count), k in zip(counts, taken):
            omega.extend([site] * k)
            rest.extend([site] * (count - k))
            ways *= comb(count, k)
        yield tuple(omega), tuple(rest), ways


def tensor_pairing(f: SymTensor, t: SymTensor) -> Scalar:
    """
    Sum over all ordered tuples of f * t, computed on canonical storage.

    Raises:
        OrderMismatchError: If the orders differ
    """
    if f.order != t.order:
        raise OrderMismatchError(f.order, t.order)
    small, large = (f, t) if len(f.entries) <= len(t.entries) else (t, f)
    total: Scalar = 0
    for index, value in small.entries.items():
        other = large.entries.get(index)
        if other is not None:
            total += multiplicity(index) * value * other
    return total


def tensor_power_pairing(f: SymTensor, eta: DiscreteMeasure) -> Scalar:
    """
    Evaluate <f, eta^{⊗n}>, the sum over ordered n-tuples of f times the product of the masses.
    """
    if f.order == 0:
        return f.scalar_value()
    total: Scalar = 0
    for index, value in f.entries.items():
        total += multiplicity(index) * value * monomial(eta.masses, index)
    return total


def sym_outer(f: SymTensor, g: SymTensor) -> SymTensor:
    """
    Symmetrized outer product of f and g.

    The value at a tuple of length a + b averages f x g over the C(a + b, a) ways of splitting it.
    """
    a, b = f.order, g.order
    splits = comb(a + b, a)
    result: defaultdict[Index, Scalar] = defaultdict(int)
    for alpha, f_value in f.entries.items():
        alpha_counts = site_counts(alpha)
        for beta, g_value in g.entries.items():
            gamma = merge(alpha, beta)
            gamma_counts = site_counts(gamma)
            ways = prod(comb(gamma_counts[site], count) for site, count in alpha_counts.items())
            result[gamma] += f_value * g_value * exact_div(ways, splits)
    return SymTensor(a + b, {index: value for index, value in result.items() if value != 0})


def tensor_power(values: Sequence[Scalar], order: int, max_entries: int = DEFAULT_MAX_ENTRIES) -> SymTensor:
    """g^{⊗n} for a site vector g."""
    if order == 0:
        return SymTensor.scalar(1)
    support = [site for site, value in enumerate(values) if value != 0]
    if count_canonical_indices(len(support), order) > max_entries:
        raise GridLimitError(f"Tensor power of order {order} exceeds the cap of {max_entries} entries")
    return SymTensor(
        order,
        {index: monomial(values, index) for index in combinations_with_replacement(support, order)},
    )


def contract(t: SymTensor, phi: Sequence[Scalar], p: int) -> SymTensor:
    """
    Pair the last p slots of t with phi^{⊗p}.

    The result has order t.order - p and value at delta equal to the sum over ordered p-tuples y of
    t(delta, y) * phi(y_1) ... phi(y_p).
    """
    if p > t.order:
        raise OrderMismatchError(p, t.order)
    if p == 0:
        return t
    additions: list[tuple[Index, Scalar]] = []
    for gamma, value in t.entries.items():
        for omega, rest, _ in sub_multisets(gamma, p):
            weight = monomial(phi, omega)
            if weight != 0:
                additions.append((rest, multiplicity(omega) * weight * value))
    return SymTensor(t.order - p, accumulate({}, additions))


def pointwise_power(values: Sequence[Scalar], exponent: int) -> tuple[Scalar, ...]:
    return tuple(value ** exponent for value in values)


def elementary_symmetric(values: Sequence[Scalar], degree: int) -> Scalar:
    """e_degree(values), by the usual one-pass recurrence."""
    table: list[Scalar] = [1] + [0] * degree
    for value in values:
        for j in range(degree, 0, -1):
            table[j] += table[j - 1] * value
    return table[degree]


def contains(gamma: Sequence[int], omega: Sequence[int]) -> bool:
    """Whether omega is a sub-multiset of gamma."""
    gamma_counts = site_counts(gamma)
    return all(gamma_counts[site] >= count for site, count in site_counts(omega).items())


def difference(gamma: Sequence[int], omega: Sequence[int]) -> Index:
    remaining = site_counts(gamma)
    remaining.subtract(omega)
    return tuple(sorted(remaining.elements()))
