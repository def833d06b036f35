"""
Hankel and localizing matrices, their PSD verdicts, and the condition bundles for sub-probabilities,
probabilities, multiple and simple point configurations.

Matrices in the tensor-power basis are indexed by monomials x^alpha = eta^alpha over all canonical multi-indices
of size <= r; matrices in the factorial basis are indexed by the same multi-indices through e_alpha.
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property, lru_cache
from itertools import combinations
from math import factorial
from typing import Final, final

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse

from moment_common.errors import (
    BasisMismatchError,
    DegreeOverflowError,
    NonFiniteMatrixError,
    ZeroReferenceWeightError,
)
from moment_common.model import (
    DEFAULT_MAX_ENTRIES,
    CheckConfig,
    CheckKind,
    CheckReport,
    ConditionRecord,
    DeterminacyDiagnostic,
    DiagnosticRecord,
    EqualityRecord,
    GridSpec,
    TestSetPolicy,
)
from moment_common.tensor import (
    CorrelationSequence,
    Index,
    MomentSequence,
    Scalar,
    SiteFunction,
    SymTensor,
    TruncatedSequence,
    accumulate,
)
from moment_core.correlation import shift_moment
from moment_core.factorial import factorial_poly_expand
from moment_core.grid import (
    canonical_indices,
    contains,
    difference,
    exact_div,
    merge,
    monomial,
    multiplicity,
    tensor_power,
)
from moment_core.ktransform import factorial_basis_element, shift_corr, star

logger = logging.getLogger(__name__)

type Matrix = npt.NDArray[np.float64]

DEFAULT_TOL: Final[float] = 1e-9
DEFAULT_MC_TOL: Final[float] = 1e-6
DEFAULT_TOL_EQ: Final[float] = 1e-9
GROWTH_SLOPE_TOLERANCE: Final[float] = 0.01

EXACT_SCOPE: Final[str] = "exact"
UNIT_WEIGHT_NOTE: Final[str] = (
    "weighted Stieltjes condition with unit weights: the total mass of every component is finite on a finite grid, "
    "satisfied by construction"
)
TEST_SET_NOTE: Final[str] = (
    "conditions quantified over all capped test functions were evaluated on the listed test set only"
)


@final
@dataclass(frozen=True)
class MonomialBasis:
    num_sites: int
    degree: int
    elements: tuple[Index, ...]

    def __len__(self) -> int:
        return len(self.elements)


@lru_cache(maxsize=64)
def monomial_basis(num_sites: int, degree: int, max_entries: int = DEFAULT_MAX_ENTRIES) -> MonomialBasis:
    """All canonical multi-indices of size <= degree, ordered by size and then lexicographically."""
    elements: list[Index] = []
    for order in range(degree + 1):
        elements.extend(canonical_indices(num_sites, order, max_entries))
    return MonomialBasis(num_sites, degree, tuple(elements))


@final
class ConstraintKind(StrEnum):
    PHI_PSI = "phi_psi"
    UPSILON_PHI = "upsilon_phi"
    THETA_PHI = "theta_phi"
    PHI_PHI_K = "phi_phi_k"


@final
@dataclass(frozen=True)
class ConstraintPoly:
    """
    A constraint polynomial on measures.

    Phi_psi(eta) = <psi, eta>, Upsilon_phi(eta) = 1 - <phi, eta>^2, Theta_phi(eta) = 1 - <phi, eta> and
    Phi_{phi,k}(eta) = <phi^{⊗k}, eta^{⊙k}>.
    """
    kind: ConstraintKind
    function: SiteFunction
    k: int = 1

    @cached_property
    def expansion(self) -> list[tuple[int, SymTensor]]:
        values = self.function.values
        match self.kind:
            case ConstraintKind.PHI_PSI:
                return [(1, tensor_power(values, 1))]
            case ConstraintKind.UPSILON_PHI:
                return [(0, SymTensor.scalar(1)), (2, -tensor_power(values, 2))]
            case ConstraintKind.THETA_PHI:
                return [(0, SymTensor.scalar(1)), (1, -tensor_power(values, 1))]
            case ConstraintKind.PHI_PHI_K:
                return factorial_poly_expand(tensor_power(values, self.k))

    @property
    def degree(self) -> int:
        match self.kind:
            case ConstraintKind.PHI_PSI | ConstraintKind.THETA_PHI:
                return 1
            case ConstraintKind.UPSILON_PHI:
                return 2
            case ConstraintKind.PHI_PHI_K:
                return self.k


def _require(required: int, sequence: TruncatedSequence, what: str) -> None:
    if required > sequence.truncation:
        raise DegreeOverflowError(required, sequence.truncation, what)


@lru_cache(maxsize=64)
def _merged_keys(num_sites: int, degree: int) -> tuple[tuple[int, int, Index], ...]:
    elements = monomial_basis(num_sites, degree).elements
    return tuple(
        (i, j, merge(elements[i], elements[j]))
        for i in range(len(elements))
        for j in range(i, len(elements))
    )


def hankel_matrix(m: MomentSequence, r: int) -> Matrix:
    """
    Hankel matrix over the monomial basis of degree r: entry (alpha, beta) = m^(|alpha|+|beta|)(alpha ⊎ beta).

    Raises:
        DegreeOverflowError: If 2r exceeds the truncation of m
    """
    _require(2 * r, m, f"Hankel matrix of degree {r}")
    size = len(monomial_basis(m.num_sites, r))
    matrix = np.zeros((size, size), dtype=np.float64)
    for i, j, key in _merged_keys(m.num_sites, r):
        value = float(m.components[len(key)].entries.get(key, 0))
        matrix[i, j] = value
        matrix[j, i] = value
    return matrix


def localizing_matrix(m: MomentSequence, p: ConstraintPoly, r: int) -> Matrix:
    """
    Localizing matrix entry (alpha, beta) = L_m(P x^alpha x^beta), the Hankel matrix of the P-shifted sequence.

    Raises:
        DegreeOverflowError: If 2r + deg P exceeds the truncation of m
    """
    _require(2 * r + p.degree, m, f"localizing matrix of {p.kind} at degree {r}")
    return hankel_matrix(shift_moment(m, p.expansion), r)


type GramOperator = tuple[tuple[Index, ...], scipy.sparse.csr_array, npt.NDArray[np.intp], npt.NDArray[np.intp]]


@lru_cache(maxsize=32)
def _gram_operator(num_sites: int, degree: int) -> GramOperator:
    """
    Sparse map from correlation values to the upper triangle of the factorial Gram matrix.

    Row p of the operator holds, for the p-th pair (alpha, beta), the weights of rho at every gamma in
    riesz_corr(rho, e_alpha ⋆ e_beta).
    """
    elements = monomial_basis(num_sites, degree).elements
    keys: dict[Index, int] = {}
    rows: list[int] = []
    columns: list[int] = []
    data: list[float] = []
    pair_rows: list[int] = []
    pair_columns: list[int] = []
    for i, alpha in enumerate(elements):
        for j in range(i, len(elements)):
            pair = len(pair_rows)
            pair_rows.append(i)
            pair_columns.append(j)
            product = star(factorial_basis_element(alpha), factorial_basis_element(elements[j]))
            for order, tensor in product.items():
                for gamma, weight in tensor.entries.items():
                    rows.append(pair)
                    columns.append(keys.setdefault(gamma, len(keys)))
                    data.append(float(weight) * multiplicity(gamma) / factorial(order))
    operator = scipy.sparse.csr_array((data, (rows, columns)), shape=(len(pair_rows), len(keys)))
    return tuple(keys), operator, np.asarray(pair_rows, dtype=np.intp), np.asarray(pair_columns, dtype=np.intp)


def factorial_matrix(rho: CorrelationSequence, r: int) -> Matrix:
    """
    Gram matrix of the correlation functional over the factorial basis.

    Entry (alpha, beta) is L_rho(K(e_alpha ⋆ e_beta)).

    Raises:
        DegreeOverflowError: If 2r exceeds the truncation of rho
    """
    _require(2 * r, rho, f"factorial Gram matrix of degree {r}")
    keys, operator, pair_rows, pair_columns = _gram_operator(rho.num_sites, r)
    values = np.fromiter(
        (float(rho.components[len(key)].entries.get(key, 0)) for key in keys), dtype=np.float64, count=len(keys)
    )
    flat = operator @ values
    size = len(monomial_basis(rho.num_sites, r))
    matrix = np.zeros((size, size), dtype=np.float64)
    matrix[pair_rows, pair_columns] = flat
    matrix[pair_columns, pair_rows] = flat
    return matrix


def basis_change_matrix(num_sites: int, r: int) -> Matrix:
    """
    Lower-triangular T with K e_alpha = sum_beta T[alpha, beta] x^beta, so that factorial-basis matrices are
    T M T^T for the monomial-basis matrix M.
    """
    elements = monomial_basis(num_sites, r).elements
    position = {element: i for i, element in enumerate(elements)}
    transform = np.zeros((len(elements), len(elements)), dtype=np.float64)
    for i, alpha in enumerate(elements):
        for _, coefficient in factorial_poly_expand(SymTensor.delta(alpha)):
            for beta, value in coefficient.entries.items():
                transform[i, position[beta]] += float(value) * multiplicity(beta) / factorial(len(alpha))
    return transform


@final
@dataclass(frozen=True)
class PsdVerdict:
    min_eigenvalue: float
    threshold: float
    passed: bool


def psd_verdict(matrix: Matrix, tol: float) -> PsdVerdict:
    """
    Decide positive semidefiniteness of the symmetrized matrix within a relative tolerance.

    The matrix passes iff its smallest eigenvalue is >= -tol * (1 + max |entry|).

    Raises:
        NonFiniteMatrixError: If some entry is not finite
    """
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteMatrixError("Matrix has non-finite entries")
    symmetric = (matrix + matrix.T) / 2
    scale = 1.0 + float(np.max(np.abs(symmetric), initial=0.0))
    eigenvalues = scipy.linalg.eigvalsh(symmetric)
    min_eigenvalue = float(eigenvalues[0])
    threshold = -tol * scale
    return PsdVerdict(min_eigenvalue, threshold, min_eigenvalue >= threshold)


def _record(label: str, matrix: Matrix, tol: float, on_test_set: bool = False) -> ConditionRecord:
    verdict = psd_verdict(matrix, tol)
    if on_test_set:
        scope = "passed on test set" if verdict.passed else "failed on test set"
    else:
        scope = EXACT_SCOPE
    logger.debug("%s: dimension %d, min eigenvalue %.6g", label, matrix.shape[0], verdict.min_eigenvalue)
    return ConditionRecord(
        label=label,
        dimension=matrix.shape[0],
        min_eigenvalue=verdict.min_eigenvalue,
        threshold=verdict.threshold,
        passed=verdict.passed,
        scope=scope,
    )


def indicator_label(grid: GridSpec, sites: Sequence[int]) -> str:
    return "1{" + ",".join(grid.sites[site] for site in sites) + "}"


def build_test_set(grid: GridSpec, policy: TestSetPolicy) -> list[tuple[str, SiteFunction]]:
    """
    Indicators of all site subsets of size <= indicator_cap (every subset when the grid is that small) followed by
    random_count uniform [0, 1] vectors from a PCG64 generator seeded with the policy seed.
    """
    num_sites = grid.num_sites
    functions: list[tuple[str, SiteFunction]] = []
    for size in range(1, min(policy.indicator_cap, num_sites) + 1):
        for sites in combinations(range(num_sites), size):
            functions.append((indicator_label(grid, sites), SiteFunction.indicator(num_sites, sites)))
    rng = np.random.Generator(np.random.PCG64(policy.seed))
    for i in range(policy.random_count):
        values = rng.uniform(0.0, 1.0, size=num_sites)
        functions.append((f"random[{i}]", SiteFunction(tuple(float(value) for value in values))))
    logger.debug("Test set has %d functions", len(functions))
    return functions


def _singletons(grid: GridSpec) -> list[tuple[str, SiteFunction]]:
    return [
        (indicator_label(grid, (site,)), SiteFunction.indicator(grid.num_sites, (site,)))
        for site in range(grid.num_sites)
    ]


def mass_bound_records(m: MomentSequence, tol: float) -> list[DiagnosticRecord]:
    """Total mass of m^(2n) against m^(0) for every 2n <= D."""
    reference = float(m.components[0].entries.get((), 0))
    bound = reference + tol * (1.0 + abs(reference))
    records: list[DiagnosticRecord] = []
    for n in range(1, m.truncation // 2 + 1):
        component = m.components[2 * n]
        total = float(sum((multiplicity(index) * value for index, value in component.entries.items()), start=0))
        records.append(
            DiagnosticRecord(label=f"mass-bound[{2 * n}]", value=total, bound=bound, passed=total <= bound)
        )
    return records


def stieltjes_diagnostic(sequence: TruncatedSequence, horizon: int) -> DeterminacyDiagnostic:
    """
    Finite-horizon Stieltjes diagnostic with the indicator basis as test family.

    xi_n is the square root of the largest |entry| of the order-2n component. The sequence is flagged consistent
    with B (C n^2 ln n)^n growth unless log(xi_n^(1/n) / (n^2 ln n)) has a fitted slope above a small tolerance
    over n = 2..horizon.

    Raises:
        DegreeOverflowError: If 2 * horizon exceeds the truncation
    """
    _require(2 * horizon, sequence, f"Stieltjes diagnostic with horizon {horizon}")
    xi = [math.sqrt(sequence.components[2 * n].max_abs()) for n in range(1, horizon + 1)]
    partial_sums: list[float] = []
    running = 0.0
    for n, value in enumerate(xi, start=1):
        running += math.inf if value == 0 else value ** (-1.0 / (2 * n))
        partial_sums.append(running)
    exponents: list[float | None] = []
    fit_n: list[float] = []
    fit_y: list[float] = []
    for n, value in enumerate(xi[1:], start=2):
        if value == 0:
            exponents.append(None)
            continue
        exponents.append(math.log(value) / (n * math.log(n)))
        fit_n.append(float(n))
        fit_y.append(math.log(value) / n - math.log(n * n * math.log(n)))
    slope: float | None = None
    consistent = True
    if len(fit_n) >= 2:
        slope = float(np.polyfit(fit_n, fit_y, 1)[0])
        consistent = slope <= GROWTH_SLOPE_TOLERANCE
    return DeterminacyDiagnostic(
        horizon=horizon,
        xi=tuple(xi),
        carleman_partial_sums=tuple(partial_sums),
        growth_exponents=tuple(exponents),
        growth_slope=slope,
        consistent=consistent,
    )


def almost_increasing(rho: TruncatedSequence, horizon: int) -> float | None:
    """
    Minimal C >= 1 with rho_n / n! <= C^s rho_s / s! for all 1 <= n <= s <= horizon, rho_n = max |entry of rho^(n)|.

    Returns:
        The constant, or None if some rho_s vanishes while an earlier rho_n does not
    """
    _require(horizon, rho, f"almost-increasing bound with horizon {horizon}")
    sizes = [rho.components[n].max_abs() for n in range(horizon + 1)]
    constant = 1.0
    for s in range(1, horizon + 1):
        for n in range(1, s + 1):
            if sizes[n] == 0:
                continue
            if sizes[s] == 0:
                return None
            log_ratio = (math.log(sizes[n]) - math.lgamma(n + 1)) - (math.log(sizes[s]) - math.lgamma(s + 1))
            constant = max(constant, math.exp(log_ratio / s))
    return constant


def _determinacy(
        sequence: TruncatedSequence,
        horizon: int | None,
        with_almost_increasing: bool,
) -> DeterminacyDiagnostic | None:
    steps = sequence.truncation // 2 if horizon is None else horizon
    if steps < 1:
        return None
    diagnostic = stieltjes_diagnostic(sequence, steps)
    if with_almost_increasing:
        constant = almost_increasing(sequence, 2 * steps)
        diagnostic = diagnostic.model_copy(update={"almost_increasing": constant})
    return diagnostic


def _hankel_and_phi_psi(m: MomentSequence, r: int, tol: float) -> list[ConditionRecord]:
    records = [_record("hankel", hankel_matrix(m, r), tol)]
    for label, psi in _singletons(m.grid):
        matrix = localizing_matrix(m, ConstraintPoly(ConstraintKind.PHI_PSI, psi), r)
        records.append(_record(f"phi_psi[{label}]", matrix, tol))
    return records


def check_subprob(
        m: MomentSequence,
        r: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
) -> CheckReport:
    """
    Sub-probability conditions: Hankel PSD, Phi_psi localizers over the indicator basis and Upsilon_phi localizers
    over the test set, plus the mass bound as a diagnostic.

    Raises:
        DegreeOverflowError: If 2r + 2 exceeds the truncation of m
    """
    _require(2 * r + 2, m, "sub-probability check")
    functions = build_test_set(m.grid, test_set)
    conditions = _hankel_and_phi_psi(m, r, tol)
    for label, phi in functions:
        matrix = localizing_matrix(m, ConstraintPoly(ConstraintKind.UPSILON_PHI, phi), r)
        conditions.append(_record(f"upsilon[{label}]", matrix, tol, on_test_set=True))
    return CheckReport.assemble(
        CheckKind.SUBPROB,
        conditions,
        diagnostics=mass_bound_records(m, tol),
        test_set=[label for label, _ in functions],
        notes=[UNIT_WEIGHT_NOTE, TEST_SET_NOTE],
    )


def check_subprob_alt(
        m: MomentSequence,
        r: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
        horizon: int | None = None,
) -> CheckReport:
    """
    Sub-probability conditions with Theta_phi = 1 - <phi, eta> in place of Upsilon_phi; this form keeps the
    determinacy hypothesis, so the Stieltjes diagnostic is attached.
    """
    _require(2 * r + 1, m, "alternate sub-probability check")
    functions = build_test_set(m.grid, test_set)
    conditions = _hankel_and_phi_psi(m, r, tol)
    for label, phi in functions:
        matrix = localizing_matrix(m, ConstraintPoly(ConstraintKind.THETA_PHI, phi), r)
        conditions.append(_record(f"theta[{label}]", matrix, tol, on_test_set=True))
    return CheckReport.assemble(
        CheckKind.SUBPROB_ALT,
        conditions,
        diagnostics=mass_bound_records(m, tol),
        determinacy=_determinacy(m, horizon, with_almost_increasing=False),
        test_set=[label for label, _ in functions],
        notes=[UNIT_WEIGHT_NOTE, TEST_SET_NOTE],
    )


def check_prob(
        m: MomentSequence,
        r: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
        tol_eq: float = DEFAULT_TOL_EQ,
) -> CheckReport:
    """Sub-probability conditions plus the unit total mass equality sum_s m^(1)(s) = m^(0)."""
    report = check_subprob(m, r, tol, test_set)
    lhs = float(sum(m.components[1].entries.values(), start=0))
    rhs = float(m.components[0].entries.get((), 0))
    gap = abs(lhs - rhs)
    equality = EqualityRecord(label="unit-total-mass", lhs=lhs, rhs=rhs, gap=gap, passed=gap <= tol_eq)
    return CheckReport.assemble(
        CheckKind.PROB,
        report.conditions,
        equalities=[equality],
        diagnostics=report.diagnostics,
        test_set=report.test_set,
        notes=report.notes,
    )


def check_multi_config(
        m: MomentSequence,
        r: int,
        k_max: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
        horizon: int | None = None,
) -> CheckReport:
    """
    Multiple point configuration conditions: Hankel PSD and Phi_{phi,k} localizers for k = 1..k_max, with phi over
    the indicator basis for k = 1 and over the test set for k >= 2.
    """
    _require(2 * r + k_max, m, f"multiple configuration check with k_max = {k_max}")
    functions = build_test_set(m.grid, test_set)
    conditions = [_record("hankel", hankel_matrix(m, r), tol)]
    for k in range(1, k_max + 1):
        family = _singletons(m.grid) if k == 1 else functions
        for label, phi in family:
            matrix = localizing_matrix(m, ConstraintPoly(ConstraintKind.PHI_PHI_K, phi, k), r)
            conditions.append(_record(f"phi[k={k},{label}]", matrix, tol, on_test_set=k > 1))
    return CheckReport.assemble(
        CheckKind.MULTI_CONFIG,
        conditions,
        determinacy=_determinacy(m, horizon, with_almost_increasing=False),
        test_set=[label for label, _ in functions],
        notes=[TEST_SET_NOTE],
    )


def _diagonal_records(
        grid: GridSpec,
        lhs: Sequence[Scalar],
        rhs: Sequence[Scalar],
        tol_eq: float,
) -> list[EqualityRecord]:
    records: list[EqualityRecord] = []
    for site, (left, right) in enumerate(zip(lhs, rhs)):
        gap = abs(float(left) - float(right))
        records.append(EqualityRecord(
            label=f"diagonal[{grid.sites[site]}]", lhs=float(left), rhs=float(right), gap=gap, passed=gap <= tol_eq
        ))
    return records


def check_simple_config(
        m: MomentSequence,
        r: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
        tol_eq: float = DEFAULT_TOL_EQ,
        horizon: int | None = None,
) -> CheckReport:
    """Simple point configuration conditions: the k <= 2 multiple-configuration bundle plus m^(2)(s,s) = m^(1)(s)."""
    _require(2 * r + 2, m, "simple configuration check")
    report = check_multi_config(m, r, 2, tol, test_set, horizon)
    sites = range(m.num_sites)
    equalities = _diagonal_records(
        m.grid,
        [m.components[2].value((site, site)) for site in sites],
        [m.components[1].value((site,)) for site in sites],
        tol_eq,
    )
    return CheckReport.assemble(
        CheckKind.SIMPLE_CONFIG,
        report.conditions,
        equalities=equalities,
        determinacy=report.determinacy,
        test_set=report.test_set,
        notes=report.notes,
    )


def _corr_conditions(
        rho: CorrelationSequence,
        r: int,
        n_max: int,
        tol: float,
        functions: list[tuple[str, SiteFunction]],
) -> list[ConditionRecord]:
    conditions = [_record("factorial[n=0]", factorial_matrix(rho, r), tol)]
    for n in range(1, n_max + 1):
        family = _singletons(rho.grid) if n == 1 else functions
        for label, phi in family:
            matrix = factorial_matrix(shift_corr(rho, phi, n), r)
            conditions.append(_record(f"shift[n={n},{label}]", matrix, tol, on_test_set=n > 1))
    return conditions


def check_corr_multi(
        rho: CorrelationSequence,
        r: int,
        n_max: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
        horizon: int | None = None,
) -> CheckReport:
    """
    Multiple configuration conditions in the factorial basis: the Gram matrix of L_rho and of its shifts by
    Phi_{phi,n} for n = 1..n_max.
    """
    _require(2 * r + n_max, rho, f"correlation check with n_max = {n_max}")
    functions = build_test_set(rho.grid, test_set)
    return CheckReport.assemble(
        CheckKind.CORR_MULTI,
        _corr_conditions(rho, r, n_max, tol, functions),
        determinacy=_determinacy(rho, horizon, with_almost_increasing=True),
        test_set=[label for label, _ in functions],
        notes=[TEST_SET_NOTE],
    )


def check_corr_simple(
        rho: CorrelationSequence,
        r: int,
        tol: float = DEFAULT_TOL,
        test_set: TestSetPolicy = TestSetPolicy(),
        tol_eq: float = DEFAULT_TOL_EQ,
        horizon: int | None = None,
) -> CheckReport:
    """Factorial-basis conditions for shifts n in {0, 1, 2} plus the vanishing diagonal rho^(2)(s,s) = 0."""
    _require(2 * r + 2, rho, "simple correlation check")
    functions = build_test_set(rho.grid, test_set)
    sites = range(rho.num_sites)
    equalities = _diagonal_records(
        rho.grid, [rho.components[2].value((site, site)) for site in sites], [0] * rho.num_sites, tol_eq
    )
    return CheckReport.assemble(
        CheckKind.CORR_SIMPLE,
        _corr_conditions(rho, r, 2, tol, functions),
        equalities=equalities,
        determinacy=_determinacy(rho, horizon, with_almost_increasing=True),
        test_set=[label for label, _ in functions],
        notes=[TEST_SET_NOTE],
    )


def density_slice(rho: CorrelationSequence, sigma: Sequence[Scalar], x: Index) -> CorrelationSequence:
    """
    tau_x^(i)(gamma) = d^(i+n)(x ⊎ gamma) sigma^gamma with densities d = rho / sigma^{⊗k}; this equals
    rho^(i+n)(x ⊎ gamma) / sigma^x.
    """
    n = len(x)
    scale = monomial(sigma, x)
    components: list[SymTensor] = []
    for i in range(rho.truncation - n + 1):
        additions: list[tuple[Index, Scalar]] = []
        for epsilon, value in rho.components[i + n].entries.items():
            if contains(epsilon, x):
                additions.append((difference(epsilon, x), exact_div(value, scale)))
        components.append(SymTensor(i, accumulate({}, additions)))
    return CorrelationSequence(rho.grid, tuple(components))


def check_thm_suff(
        rho: CorrelationSequence,
        grid: GridSpec | None,
        n_max: int,
        r: int,
        tol: float = DEFAULT_TOL,
) -> CheckReport:
    """
    Sufficient condition through densities with respect to sigma^{⊗k}: for every n <= n_max and sorted n-tuple x,
    the factorial Gram matrix of the density slice at x must be PSD.

    Raises:
        ZeroReferenceWeightError: If sigma vanishes at some site
        DegreeOverflowError: If 2r + n_max exceeds the truncation of rho
    """
    grid = rho.grid if grid is None else grid
    for site, weight in zip(grid.sites, grid.sigma):
        if weight <= 0:
            raise ZeroReferenceWeightError(site)
    _require(2 * r + n_max, rho, f"density check with n_max = {n_max}")
    conditions = [_record("density[x=()]", factorial_matrix(rho, r), tol)]
    for n in range(1, n_max + 1):
        for x in canonical_indices(grid.num_sites, n):
            tau = density_slice(rho, grid.sigma, x)
            conditions.append(_record(f"density[x={grid.label(x)}]", factorial_matrix(tau, r), tol))
    return CheckReport.assemble(CheckKind.THM_SUFF, conditions)


def run_check(kind: CheckKind, sequence: TruncatedSequence, config: CheckConfig) -> CheckReport:
    """
    Dispatch a check by kind.

    Raises:
        BasisMismatchError: If the sequence basis does not fit the kind
        GridLimitError: If the monomial basis of degree r has more than config.max_entries elements
    """
    r = config.degree
    monomial_basis(sequence.num_sites, r, config.max_entries)
    match kind, sequence:
        case CheckKind.SUBPROB, MomentSequence():
            report = check_subprob(sequence, r, config.tol, config.test_set)
        case CheckKind.SUBPROB_ALT, MomentSequence():
            report = check_subprob_alt(sequence, r, config.tol, config.test_set, config.horizon)
        case CheckKind.PROB, MomentSequence():
            report = check_prob(sequence, r, config.tol, config.test_set, config.tol_eq)
        case CheckKind.MULTI_CONFIG, MomentSequence():
            report = check_multi_config(sequence, r, config.kmax, config.tol, config.test_set, config.horizon)
        case CheckKind.SIMPLE_CONFIG, MomentSequence():
            report = check_simple_config(sequence, r, config.tol, config.test_set, config.tol_eq, config.horizon)
        case CheckKind.CORR_MULTI, CorrelationSequence():
            report = check_corr_multi(sequence, r, config.nmax, config.tol, config.test_set, config.horizon)
        case CheckKind.CORR_SIMPLE, CorrelationSequence():
            report = check_corr_simple(sequence, r, config.tol, config.test_set, config.tol_eq, config.horizon)
        case CheckKind.THM_SUFF, CorrelationSequence():
            report = check_thm_suff(sequence, None, config.nmax, r, config.tol)
        case _:
            raise BasisMismatchError(f"Check {kind} needs a {kind.basis} sequence, got {type(sequence).__name__}")
    logger.info("Check %s finished with verdict %s", kind, report.verdict)
    return report

