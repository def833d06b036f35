"""
Riesz functionals in the tensor-power and factorial bases, and the conversion between moment and
correlation sequences.

On an atomic grid the diagonal push-forward of rho^(|pi|) along a set partition pi only lands on tuples that
are constant on every block, so both conversions reduce to per-site partition weights: a site carrying c
copies in the target and j copies in the source contributes the number of partitions of c elements into j
blocks (moments from correlations) or the matching Möbius weight sum (correlations from moments).
"""
import logging
from collections import defaultdict
from collections.abc import Sequence
from itertools import combinations_with_replacement
from math import factorial, prod

from moment_common.errors import DegreeOverflowError
from moment_common.tensor import (
    CoeffSequence,
    CorrelationSequence,
    Index,
    MomentSequence,
    Scalar,
    SymTensor,
    TruncatedSequence,
    accumulate,
)
from moment_core.factorial import partition_weights
from moment_core.grid import exact_div, multiplicity, site_counts, sub_multisets, tensor_pairing

logger = logging.getLogger(__name__)

type Polynomial = Sequence[tuple[int, SymTensor]]


def polynomial_degree(p: Polynomial) -> int:
    return max((k for k, tensor in p if not tensor.is_zero), default=0)


def riesz_moment(m: MomentSequence, p: Polynomial) -> Scalar:
    """
    L_m(P) for P(eta) = sum_k <p^(k), eta^{⊗k}>.

    Raises:
        DegreeOverflowError: If P has a nonzero coefficient above the truncation of m
    """
    required = polynomial_degree(p)
    if required > m.truncation:
        raise DegreeOverflowError(required, m.truncation, "Riesz functional")
    total: Scalar = 0
    for k, tensor in p:
        if not tensor.is_zero:
            total += tensor_pairing(tensor, m.component(k))
    return total


def riesz_corr(rho: CorrelationSequence, g: CoeffSequence) -> Scalar:
    """
    L_rho(KG) = sum_j <g^(j), rho^(j)> / j!.

    Raises:
        DegreeOverflowError: If G has a nonzero component above the truncation of rho
    """
    required = g.support_degree
    if required > rho.truncation:
        raise DegreeOverflowError(required, rho.truncation, "Riesz functional")
    total: Scalar = 0
    for order, tensor in g.items():
        total += exact_div(tensor_pairing(tensor, rho.component(order)), factorial(order))
    return total


def _site_weight_table(truncation: int, use_mobius: bool) -> dict[tuple[int, int], int]:
    table: dict[tuple[int, int], int] = {}
    for c in range(truncation + 1):
        for j, count, mobius in partition_weights(c):
            table[(c, j)] = mobius if use_mobius else count
    return table


def _convert(source: TruncatedSequence, use_mobius: bool) -> list[SymTensor]:
    weights = _site_weight_table(source.truncation, use_mobius)
    collected: defaultdict[int, list[tuple[Index, Scalar]]] = defaultdict(list)
    for k, tensor in enumerate(source.components):
        for beta, value in tensor.entries.items():
            source_counts = site_counts(beta)
            sites = sorted(source_counts)
            for n in range(k, source.truncation + 1):
                if k == 0 and n > 0:
                    break
                for extra in combinations_with_replacement(sites, n - k):
                    target_counts = source_counts.copy()
                    target_counts.update(extra)
                    weight = prod(weights[(target_counts[site], source_counts[site])] for site in sites)
                    gamma = tuple(sorted(target_counts.elements()))
                    collected[n].append((gamma, weight * value))
    return [SymTensor(n, accumulate({}, collected[n])) for n in range(source.truncation + 1)]


def corr_to_moment(rho: CorrelationSequence) -> MomentSequence:
    """
    m^(n) = sum over set partitions pi of {1..n} of the diagonal push-forward of rho^(|pi|) along pi.
    """
    return MomentSequence(rho.grid, tuple(_convert(rho, use_mobius=False)), rho.nonneg)


def moment_to_corr(m: MomentSequence) -> CorrelationSequence:
    """
    rho^(n) = sum over pi of prod_B (-1)^(|B|-1) (|B|-1)! times the push-forward of m^(|pi|); inverse of corr_to_moment.
    """
    return CorrelationSequence(m.grid, tuple(_convert(m, use_mobius=True)))


def shift_moment(m: MomentSequence, p: Polynomial) -> MomentSequence:
    """
    Moment sequence of Q -> L_m(P Q).

    m_P^(n)(delta) = sum_k sum_gamma multiplicity(gamma) p^(k)(gamma) m^(n+k)(delta ⊎ gamma); its Hankel matrix is
    the localizing matrix of P.

    Raises:
        DegreeOverflowError: If P has degree above the truncation of m
    """
    degree = polynomial_degree(p)
    if degree > m.truncation:
        raise DegreeOverflowError(degree, m.truncation, "localizing shift")
    truncation = m.truncation - degree
    collected: defaultdict[int, list[tuple[Index, Scalar]]] = defaultdict(list)
    for k, coefficient in p:
        if coefficient.is_zero:
            continue
        for n in range(truncation + 1):
            for epsilon, value in m.component(n + k).entries.items():
                for gamma, delta, _ in sub_multisets(epsilon, k):
                    c = coefficient.entries.get(gamma)
                    if c is not None:
                        collected[n].append((delta, multiplicity(gamma) * c * value))
    return MomentSequence(m.grid, tuple(SymTensor(n, accumulate({}, collected[n])) for n in range(truncation + 1)))
