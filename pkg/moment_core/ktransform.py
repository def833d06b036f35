"""
K-transform, ⋆-convolution, the H-tilde construction and shifts of correlation sequences.
"""
import logging
from collections import defaultdict
from collections.abc import Sequence
from itertools import combinations, product
from math import comb, factorial, prod
from typing import Final

from moment_common.errors import DegreeOverflowError, GridLimitError, MomentError
from moment_common.tensor import (
    CoeffSequence,
    CorrelationSequence,
    DiscreteMeasure,
    Index,
    PointConfiguration,
    Scalar,
    SiteFunction,
    SymTensor,
    accumulate,
)
from moment_core.correlation import riesz_corr
from moment_core.factorial import factorial_pairing
from moment_core.grid import (
    canonical,
    contains,
    contract,
    difference,
    elementary_symmetric,
    exact_div,
    site_counts,
    tensor_power,
)

logger = logging.getLogger(__name__)

MAX_STAR_ORDER: Final[int] = 10


def k_transform(g: CoeffSequence, eta: DiscreteMeasure) -> Scalar:
    """(KG)(eta) = sum_j <g^(j), eta^{⊙j}> / j!."""
    total: Scalar = 0
    for order, tensor in g.items():
        total += exact_div(factorial_pairing(tensor, eta), factorial(order))
    return total


def k_transform_config(g: CoeffSequence, gamma: PointConfiguration) -> Scalar:
    """
    K-transform on a simple configuration as a sum of g^(|xi|)(xi) over finite sub-configurations xi.

    Raises:
        MomentError: If gamma is not simple
    """
    if not gamma.is_simple:
        raise MomentError("The sub-configuration form of the K-transform needs a simple configuration")
    occupied = [site for site, count in enumerate(gamma.counts) if count]
    total: Scalar = 0
    for order, tensor in g.items():
        for xi in combinations(occupied, order):
            total += tensor.value(xi)
    return total


def factorial_basis_element(alpha: Sequence[int]) -> CoeffSequence:
    """e_alpha: the sequence whose only component is the delta at alpha, so K e_alpha = prod_s C(eta_s, k_s)."""
    return CoeffSequence({len(alpha): SymTensor.delta(alpha)}, len(alpha))


def phi_embedding(phi: SiteFunction, n: int) -> CoeffSequence:
    """Coefficient sequence with g^(n) = n! phi^{⊗n}, whose K-transform is <phi^{⊗n}, eta^{⊙n}>."""
    return CoeffSequence({n: tensor_power(phi.values, n).scale(factorial(n))}, n)


def _star_weights(a_counts: dict[int, int], b_counts: dict[int, int]) -> list[tuple[Index, int]]:
    """
    Per target multiset gamma, the number of covering pairs (J_1, J_2) with x_{J_1} ~ alpha and x_{J_2} ~ beta.

    At a site with a_s and b_s copies, gamma carries c_s in [max(a_s, b_s), a_s + b_s] copies, of which
    a_s + b_s - c_s are shared; there are C(c_s, a_s) C(a_s, a_s + b_s - c_s) ways to place them.
    """
    sites = sorted(set(a_counts) | set(b_counts))
    options: list[list[tuple[int, int]]] = []
    for site in sites:
        a, b = a_counts.get(site, 0), b_counts.get(site, 0)
        options.append([(c, comb(c, a) * comb(a, a + b - c)) for c in range(max(a, b), a + b + 1)])
    result: list[tuple[Index, int]] = []
    for choice in product(*options):
        gamma = tuple(site for site, (c, _) in zip(sites, choice) for _ in range(c))
        result.append((gamma, prod(weight for _, weight in choice)))
    return result


def star(g: CoeffSequence, h: CoeffSequence, max_degree: int | None = None) -> CoeffSequence:
    """
    ⋆-convolution: component j sums g(x_{J_1}) h(x_{J_2}) over ordered pairs of possibly overlapping subsets
    with J_1 ∪ J_2 = {1..j}.

    Args:
        g: Left factor
        h: Right factor
        max_degree: Truncation of the result; defaults to deg g + deg h

    Returns:
        The product, flagged as overflowed when nonzero components above the truncation were discarded

    Raises:
        GridLimitError: If the truncation exceeds the supported order
    """
    degree = g.degree + h.degree if max_degree is None else min(max_degree, g.degree + h.degree)
    if degree > MAX_STAR_ORDER:
        raise GridLimitError(f"⋆-convolution output order {degree} exceeds the cap of {MAX_STAR_ORDER}")
    collected: defaultdict[int, list[tuple[Index, Scalar]]] = defaultdict(list)
    overflow = g.overflow or h.overflow
    for _, g_tensor in g.items():
        for alpha, g_value in g_tensor.entries.items():
            a_counts = dict(site_counts(alpha))
            for _, h_tensor in h.items():
                for beta, h_value in h_tensor.entries.items():
                    for gamma, weight in _star_weights(a_counts, dict(site_counts(beta))):
                        if len(gamma) > degree:
                            overflow = True
                            continue
                        collected[len(gamma)].append((gamma, weight * g_value * h_value))
    components = {order: SymTensor(order, accumulate({}, additions)) for order, additions in collected.items()}
    nonzero = {order: tensor for order, tensor in components.items() if not tensor.is_zero}
    return CoeffSequence(nonzero, degree, overflow)


def h_tilde(h: CoeffSequence, x: Sequence[int]) -> CoeffSequence:
    """
    H-tilde at x: component s at y sums h^(s + |J|)(y, x_J) over all subsets J of {1..n}.
    """
    n = len(x)
    if n == 0:
        return h
    subset_counts: defaultdict[Index, int] = defaultdict(int)
    for size in range(n + 1):
        for positions in combinations(range(n), size):
            subset_counts[canonical([x[position] for position in positions])] += 1
    collected: defaultdict[int, list[tuple[Index, Scalar]]] = defaultdict(list)
    for order, tensor in h.items():
        for x_j, count in subset_counts.items():
            if len(x_j) > order:
                continue
            for gamma, value in tensor.entries.items():
                if contains(gamma, x_j):
                    collected[order - len(x_j)].append((difference(gamma, x_j), count * value))
    components = {order: SymTensor(order, accumulate({}, additions)) for order, additions in collected.items()}
    return CoeffSequence({order: tensor for order, tensor in components.items() if not tensor.is_zero}, h.degree)


def shift_corr(rho: CorrelationSequence, phi: SiteFunction, n: int) -> CorrelationSequence:
    """
    Correlation sequence of the shift by Phi_{phi,n}(eta) = <phi^{⊗n}, eta^{⊙n}>.

    Component k at z is sum_{l=0}^{min(n,k)} n!/(n-l)! e_l(phi(z_1), ..., phi(z_k)) times rho^(k+n-l)
    contracted with phi^{⊗(n-l)} in the extra slots.

    Raises:
        DegreeOverflowError: If rho is truncated below n
        MomentError: If phi is negative somewhere or n < 1
    """
    if n < 1:
        raise MomentError(f"Shift order must be at least 1, got {n}")
    if not phi.is_nonnegative:
        raise MomentError("Shifts are defined for nonnegative phi")
    if rho.truncation < n:
        raise DegreeOverflowError(n, rho.truncation, f"shift by Phi of order {n}")
    components: list[SymTensor] = []
    for k in range(rho.truncation - n + 1):
        additions: list[tuple[Index, Scalar]] = []
        for l in range(min(n, k) + 1):
            coefficient = factorial(n) // factorial(n - l)
            contracted = contract(rho.component(k + n - l), phi.values, n - l)
            for z, value in contracted.entries.items():
                weight = elementary_symmetric([phi.values[site] for site in z], l)
                if weight != 0:
                    additions.append((z, coefficient * weight * value))
        components.append(SymTensor(k, accumulate({}, additions)))
    logger.debug("Shifted a sequence of truncation %d by order %d", rho.truncation, n)
    return CorrelationSequence(rho.grid, tuple(components))


def shift_corr_bruteforce(rho: CorrelationSequence, p: CoeffSequence, q: CoeffSequence) -> Scalar:
    """
    The shifted functional straight from its definition: L_rho(KP * KQ) = L_rho(K(P ⋆ Q)).

    Raises:
        DegreeOverflowError: If deg P + deg Q exceeds the truncation of rho
    """
    required = max(p.support_degree, 0) + max(q.support_degree, 0)
    if required > rho.truncation:
        raise DegreeOverflowError(required, rho.truncation, "shifted functional")
    return riesz_corr(rho, star(p, q, required))
