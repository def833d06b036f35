"""
Seeded verification suites for the algebraic identities the checks rely on.

Exact suites run on integer or rational data and must match with zero error; floating-point suites report the
largest relative error over the battery.
"""
import logging
from collections.abc import Callable, Iterator, Sequence
from fractions import Fraction
from itertools import combinations, product
from math import comb
from typing import Final

import numpy as np

from moment_common.errors import MomentError
from moment_common.model import GridSpec, IdentityResult
from moment_common.tensor import (
    CoeffSequence,
    CorrelationSequence,
    DiscreteMeasure,
    PointConfiguration,
    Scalar,
    SiteFunction,
    SymTensor,
)
from moment_core.correlation import corr_to_moment, moment_to_corr, riesz_corr
from moment_core.factorial import (
    factorial_pairing_config,
    factorial_pairing_config_bruteforce,
    factorial_poly_expand,
    falling_factorial,
    partition_weight_identity,
    partition_weights,
)
from moment_core.grid import canonical_indices, exact_div, tensor_power, tensor_power_pairing
from moment_core.ktransform import (
    factorial_basis_element,
    h_tilde,
    k_transform,
    phi_embedding,
    shift_corr,
    shift_corr_bruteforce,
    star,
)
from moment_core.oracles import make_rng
from moment_core.realizability import basis_change_matrix, factorial_matrix, hankel_matrix

logger = logging.getLogger(__name__)

type Suite = Callable[[int | None, int], IdentityResult]

SUITE_CASES: Final[dict[str, int]] = {
    "propconv": 500,
    "shift": 20,
    "htilde": 20,
    "factorial": 200,
    "conversion": 20,
    "basis-change": 20,
}


def relative_error(left: Scalar, right: Scalar) -> float:
    return abs(float(left) - float(right)) / max(1.0, abs(float(left)), abs(float(right)))


def _rational(rng: np.random.Generator) -> Fraction:
    return Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 4)))


def random_tensor(rng: np.random.Generator, num_sites: int, order: int, exact: bool = False) -> SymTensor:
    """Dense random symmetric tensor with uniform [-1, 1] entries, or small rationals when exact."""
    entries = (
        (index, _rational(rng) if exact else float(rng.uniform(-1.0, 1.0)))
        for index in canonical_indices(num_sites, order)
    )
    return SymTensor.from_entries(order, entries)


def random_coefficients(rng: np.random.Generator, num_sites: int, degree: int, exact: bool = False) -> CoeffSequence:
    return CoeffSequence.of([random_tensor(rng, num_sites, order, exact) for order in range(degree + 1)], degree)


def random_correlations(
        rng: np.random.Generator,
        num_sites: int,
        truncation: int,
        exact: bool = False,
) -> CorrelationSequence:
    components = [SymTensor.scalar(1)]
    components.extend(random_tensor(rng, num_sites, order, exact) for order in range(1, truncation + 1))
    return CorrelationSequence(GridSpec.indexed(num_sites), tuple(components))


def _case_count(name: str, cases: int | None) -> int:
    return SUITE_CASES[name] if cases is None else cases


def _result(name: str, cases: int, errors: Iterator[float], threshold: float) -> IdentityResult:
    worst = max(errors, default=0.0)
    logger.debug("Identity %s: %d cases, max error %.3g", name, cases, worst)
    return IdentityResult(name=name, cases=cases, max_error=worst, threshold=threshold, passed=worst <= threshold)


def propconv_suite(cases: int | None = None, seed: int = 0) -> IdentityResult:
    """K(G ⋆ H)(eta) = KG(eta) KH(eta) for random sequences of degree up to 3 and measures on up to 5 sites."""
    count = _case_count("propconv", cases)
    rng = make_rng(seed)

    def errors() -> Iterator[float]:
        for _ in range(count):
            num_sites = int(rng.integers(1, 6))
            g = random_coefficients(rng, num_sites, int(rng.integers(0, 4)))
            h = random_coefficients(rng, num_sites, int(rng.integers(0, 4)))
            eta = DiscreteMeasure(tuple(float(mass) for mass in rng.uniform(0.0, 1.0, size=num_sites)))
            yield relative_error(k_transform(star(g, h), eta), k_transform(g, eta) * k_transform(h, eta))

    return _result("propconv", count, errors(), 1e-10)


def shift_suite(cases: int | None = None, seed: int = 0, max_degree: int = 5) -> IdentityResult:
    """
    The closed-form shifted sequence against the shifted functional from its definition, on every pair of
    factorial-basis monomials with combined degree up to max_degree. Runs on rational data.
    """
    rng = make_rng(seed)
    errors: list[float] = []
    for _ in range(_case_count("shift", cases)):
        num_sites = int(rng.integers(1, 3))
        rho = random_correlations(rng, num_sites, max_degree, exact=True)
        phi = SiteFunction(tuple(Fraction(int(value), 4) for value in rng.integers(0, 5, size=num_sites)))
        n = int(rng.integers(1, 3))
        shifted = shift_corr(rho, phi, n)
        embedding = phi_embedding(phi, n)
        monomials = [alpha for size in range(max_degree - n + 1) for alpha in canonical_indices(num_sites, size)]
        for alpha, beta in product(monomials, repeat=2):
            if len(alpha) + len(beta) + n > max_degree:
                continue
            q = star(factorial_basis_element(alpha), factorial_basis_element(beta))
            errors.append(relative_error(riesz_corr(shifted, q), shift_corr_bruteforce(rho, embedding, q)))
    return _result("shift", len(errors), iter(errors), 1e-12)


def rewriting_gaps(
        h: CoeffSequence,
        phi: SiteFunction,
        x: Sequence[int],
        max_order: int = 3,
        weight: Callable[[int, int], int] = comb,
) -> Iterator[float]:
    """
    Relative gaps between both sides of the rewriting of a shifted square around fixed points x.

    The left side sums, over l = 0..n, weight(n, l) times the average of (H ⋆ H)^(i+l)(y, x_J) over the
    l-subsets J of the positions of x, times phi^{⊗n}(x). The right side is (H~_x ⋆ H~_x)^(i)(y) phi^{⊗n}(x).
    Yields one gap per index tuple y of order i <= max_order.
    """
    n = len(x)
    squared = star(h, h)
    shifted = h_tilde(h, x)
    right_side = star(shifted, shifted)
    phi_power: Scalar = 1
    for site in x:
        phi_power *= phi.values[site]
    for i in range(max_order + 1):
        for y in canonical_indices(phi.num_sites, i):
            left: Scalar = 0
            for size in range(n + 1):
                tensor = squared.component(i + size)
                total: Scalar = 0
                for positions in combinations(range(n), size):
                    total += tensor.value((*y, *(x[position] for position in positions)))
                left += weight(n, size) * exact_div(total, comb(n, size))
            yield relative_error(left * phi_power, right_side.component(i).value(y) * phi_power)


def htilde_suite(cases: int | None = None, seed: int = 0) -> IdentityResult:
    """
    Rewriting of a shifted square around fixed points x, pointwise at every y of order up to 3 and every x of
    length up to 3, for random rational H and phi. Also checks that K(H~_x)(gamma) equals KH at gamma with the
    points of x added. Runs on rational data, so the error must vanish.
    """
    count = _case_count("htilde", cases)
    rng = make_rng(seed)

    def errors() -> Iterator[float]:
        for _ in range(count):
            num_sites = int(rng.integers(1, 3))
            h = random_coefficients(rng, num_sites, 2, exact=True)
            phi = SiteFunction(tuple(Fraction(int(value), 3) for value in rng.integers(1, 7, size=num_sites)))
            for n in range(4):
                for x in canonical_indices(num_sites, n):
                    yield from rewriting_gaps(h, phi, x)
                    counts = tuple(int(value) for value in rng.integers(0, 3, size=num_sites))
                    extended = list(counts)
                    for site in x:
                        extended[site] += 1
                    yield relative_error(
                        k_transform(h_tilde(h, x), PointConfiguration(counts).as_measure()),
                        k_transform(h, PointConfiguration(tuple(extended)).as_measure()),
                    )

    return _result("htilde", count, errors(), 1e-12)


def _configurations(num_sites: int, max_points: int) -> Iterator[PointConfiguration]:
    for counts in product(range(max_points + 1), repeat=num_sites):
        if sum(counts) <= max_points:
            yield PointConfiguration(counts)


def _expanded_pairing(expansion: Sequence[tuple[int, SymTensor]], eta: DiscreteMeasure) -> Scalar:
    """<f, eta^{⊙n}> from a precomputed factorial_poly_expand of f."""
    total: Scalar = 0
    for _, coefficient in expansion:
        total += tensor_power_pairing(coefficient, eta)
    return total


def factorial_suite(cases: int | None = None, seed: int = 0, max_points: int = 8) -> IdentityResult:
    """
    Factorial powers on integer configurations, exactly.

    For random tensors of order up to 6 on grids of up to 4 sites, the measure expansion, the closed form and (on
    at most 5 points) the literal sum over distinct points agree on every configuration with at most max_points
    points. The pairing of the indicator of a window A with gamma^{⊙n} is the falling factorial of gamma(A).
    """
    count = _case_count("factorial", cases)
    rng = make_rng(seed)

    def errors() -> Iterator[float]:
        for _ in range(count):
            num_sites = int(rng.integers(1, 5))
            f = random_tensor(rng, num_sites, int(rng.integers(0, 7)), exact=True)
            expansion = factorial_poly_expand(f) if f.order > 1 else [(f.order, f)]
            for gamma in _configurations(num_sites, max_points):
                closed = factorial_pairing_config(f, gamma)
                yield relative_error(_expanded_pairing(expansion, gamma.as_measure()), closed)
                if sum(gamma.counts) <= 5:
                    yield relative_error(factorial_pairing_config_bruteforce(f, gamma), closed)
        window_sites = 3
        configurations = list(_configurations(window_sites, max_points))
        for size in range(1, window_sites + 1):
            for window in combinations(range(window_sites), size):
                for n in range(1, max_points + 1):
                    indicator = tensor_power(SiteFunction.indicator(window_sites, window).values, n)
                    window_expansion = factorial_poly_expand(indicator)
                    for gamma in configurations:
                        mass = sum(gamma.counts[site] for site in window)
                        value = _expanded_pairing(window_expansion, gamma.as_measure())
                        yield relative_error(value, falling_factorial(mass, n))

    return _result("factorial", count, errors(), 0.0)


def conversion_suite(cases: int | None = None, seed: int = 0, truncation: int = 8) -> IdentityResult:
    """
    moment_to_corr inverts corr_to_moment exactly on rational data, and the composition sums collapse to
    set-partition counts for every n <= 8.
    """
    battery = _case_count("conversion", cases)
    rng = make_rng(seed)

    def errors() -> Iterator[float]:
        for _ in range(battery):
            rho = random_correlations(rng, int(rng.integers(1, 3)), truncation, exact=True)
            back = moment_to_corr(corr_to_moment(rho))
            for original, recovered in zip(rho.components, back.components):
                yield 0.0 if original == recovered else 1.0
        for n in range(1, 9):
            for k, count, _ in partition_weights(n):
                yield relative_error(partition_weight_identity(n, k), count)

    return _result("conversion", battery, errors(), 0.0)


def basis_change_suite(cases: int | None = None, seed: int = 0, degree: int = 3) -> IdentityResult:
    """The factorial Gram matrix equals T H T^T for the Hankel matrix H of the converted moments."""
    count = _case_count("basis-change", cases)
    rng = make_rng(seed)

    def errors() -> Iterator[float]:
        for _ in range(count):
            num_sites = int(rng.integers(1, 3))
            rho = random_correlations(rng, num_sites, 2 * degree)
            transform = basis_change_matrix(num_sites, degree)
            congruent = transform @ hankel_matrix(corr_to_moment(rho), degree) @ transform.T
            direct = factorial_matrix(rho, degree)
            scale = max(1.0, float(np.max(np.abs(direct))))
            yield float(np.max(np.abs(congruent - direct))) / scale

    return _result("basis-change", count, errors(), 1e-10)


SUITES: Final[dict[str, Suite]] = {
    "propconv": propconv_suite,
    "shift": shift_suite,
    "htilde": htilde_suite,
    "factorial": factorial_suite,
    "conversion": conversion_suite,
    "basis-change": basis_change_suite,
}


def run_suite(name: str, cases: int | None = None, seed: int = 0) -> IdentityResult:
    """
    Raises:
        MomentError: If no suite has that name
    """
    suite = SUITES.get(name)
    if suite is None:
        raise MomentError(f"Unknown identity suite {name!r}, expected one of {', '.join(SUITES)}")
    return suite(cases, seed)
