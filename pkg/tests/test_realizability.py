import math
from collections.abc import Callable

import numpy as np
import pytest

from moment_common.errors import (
    BasisMismatchError,
    DegreeOverflowError,
    GridLimitError,
    NonFiniteMatrixError,
    ZeroReferenceWeightError,
)
from moment_common.model import (
    CheckConfig,
    CheckKind,
    GridSpec,
    MassLaw,
    ModelKind,
    ModelSpec,
    TestSetPolicy,
    Verdict,
)
from moment_common.tensor import (
    CorrelationSequence,
    DiscreteMeasure,
    Index,
    MomentSequence,
    Scalar,
    SiteFunction,
    SymTensor,
    TruncatedSequence,
)
from moment_core.codec import to_json_bytes
from moment_core.correlation import corr_to_moment
from moment_core.identities import random_correlations
from moment_core.oracles import (
    bernoulli_correlations,
    fixed_measure_moments,
    generate,
    make_rng,
    poisson_correlations,
)
from moment_core.realizability import (
    DEFAULT_MC_TOL,
    GROWTH_SLOPE_TOLERANCE,
    ConstraintKind,
    ConstraintPoly,
    almost_increasing,
    basis_change_matrix,
    build_test_set,
    check_corr_multi,
    check_corr_simple,
    check_multi_config,
    check_prob,
    check_simple_config,
    check_subprob,
    check_subprob_alt,
    check_thm_suff,
    factorial_matrix,
    hankel_matrix,
    localizing_matrix,
    mass_bound_records,
    monomial_basis,
    psd_verdict,
    run_check,
    stieltjes_diagnostic,
)

PROBABILITY = DiscreteMeasure((0.25, 0.75))


def with_entry[S: TruncatedSequence](sequence: S, index: Index, value: Scalar) -> S:
    tensor = sequence.component(len(index))
    return sequence.replace_component(SymTensor.from_entries(len(index), [*tensor.entries.items(), (index, value)]))


def one_site_sequence(values: list[int]) -> MomentSequence:
    components = tuple(SymTensor.from_entries(order, [((0,) * order, value)]) for order, value in enumerate(values))
    return MomentSequence(GridSpec.indexed(1), components)


def test_monomial_basis_order() -> None:
    assert monomial_basis(2, 2).elements == ((), (0,), (1,), (0, 0), (0, 1), (1, 1))
    assert len(monomial_basis(3, 0)) == 1


def test_hankel_of_point_mass_is_rank_one(subprob_moments: MomentSequence) -> None:
    v = np.array([1.0, 0.3, 0.4])
    np.testing.assert_allclose(hankel_matrix(subprob_moments, 1), np.outer(v, v), atol=1e-15)
    assert hankel_matrix(subprob_moments, 0).tolist() == [[1.0]]


def test_hankel_rejects_degree_overflow(subprob_moments: MomentSequence) -> None:
    with pytest.raises(DegreeOverflowError):
        hankel_matrix(subprob_moments, 3)


def test_phi_psi_localizer_shifts_entries(poisson_moments: MomentSequence) -> None:
    psi = SiteFunction.indicator(2, (0,))
    matrix = localizing_matrix(poisson_moments, ConstraintPoly(ConstraintKind.PHI_PSI, psi), 1)
    assert matrix[0, 0] == float(poisson_moments.component(1).value((0,)))
    assert matrix[1, 2] == float(poisson_moments.component(3).value((0, 0, 1)))


def test_upsilon_localizer_of_point_mass(subprob_moments: MomentSequence) -> None:
    phi = SiteFunction((1.0, 0.5))
    matrix = localizing_matrix(subprob_moments, ConstraintPoly(ConstraintKind.UPSILON_PHI, phi), 1)
    np.testing.assert_allclose(matrix, 0.75 * hankel_matrix(subprob_moments, 1), atol=1e-14)


def test_constraint_degrees() -> None:
    phi = SiteFunction((1, 1))
    assert ConstraintPoly(ConstraintKind.PHI_PSI, phi).degree == 1
    assert ConstraintPoly(ConstraintKind.UPSILON_PHI, phi).degree == 2
    assert ConstraintPoly(ConstraintKind.THETA_PHI, phi).degree == 1
    assert ConstraintPoly(ConstraintKind.PHI_PHI_K, phi, 3).degree == 3


def test_psd_verdict() -> None:
    identity = psd_verdict(np.eye(3), 1e-9)
    assert identity.passed
    assert identity.min_eigenvalue == pytest.approx(1.0)
    indefinite = psd_verdict(np.diag([1.0, -1.0]), 1e-9)
    assert not indefinite.passed
    assert indefinite.min_eigenvalue == pytest.approx(-1.0)
    assert indefinite.threshold == pytest.approx(-2e-9)
    with pytest.raises(NonFiniteMatrixError):
        psd_verdict(np.array([[1.0, math.nan], [math.nan, 1.0]]), 1e-9)


def test_psd_verdict_tolerates_rounding() -> None:
    assert psd_verdict(np.diag([1.0, -1e-12]), 1e-9).passed


def test_factorial_matrix_of_poisson(poisson_rho: CorrelationSequence) -> None:
    matrix = factorial_matrix(poisson_rho, 1)
    assert matrix.tolist() == [[1.0, 1.0, 2.0], [1.0, 2.0, 2.0], [2.0, 2.0, 6.0]]


@pytest.mark.parametrize("r", [1, 2, 3])
def test_factorial_matrix_is_congruent_to_the_hankel_matrix(r: int) -> None:
    rho = random_correlations(make_rng(r), 2, 2 * r)
    transform = basis_change_matrix(2, r)
    congruent = transform @ hankel_matrix(corr_to_moment(rho), r) @ transform.T
    np.testing.assert_allclose(factorial_matrix(rho, r), congruent, rtol=1e-10, atol=1e-10)


def test_basis_change_matrix_is_lower_triangular() -> None:
    np.testing.assert_array_equal(basis_change_matrix(2, 1), np.eye(3))
    transform = basis_change_matrix(2, 2)
    assert np.all(np.triu(transform, 1) == 0)
    assert transform[3, 3] == 0.5
    assert transform[3, 1] == -0.5
    assert transform[4, 4] == 1.0


def test_build_test_set() -> None:
    grid = GridSpec.indexed(3)
    labels = [label for label, _ in build_test_set(grid, TestSetPolicy())]
    assert labels == ["1{s0}", "1{s1}", "1{s2}", "1{s0,s1}", "1{s0,s2}", "1{s1,s2}", "1{s0,s1,s2}"]
    assert len(build_test_set(grid, TestSetPolicy(indicator_cap=1))) == 3
    first = build_test_set(grid, TestSetPolicy(indicator_cap=1, random_count=2, seed=4))
    second = build_test_set(grid, TestSetPolicy(indicator_cap=1, random_count=2, seed=4))
    assert [label for label, _ in first[3:]] == ["random[0]", "random[1]"]
    assert first == second
    assert all(function.is_capped and function.is_nonnegative for _, function in first)


def test_mass_bound_records(subprob_moments: MomentSequence) -> None:
    records = mass_bound_records(subprob_moments, 1e-9)
    assert [record.label for record in records] == ["mass-bound[2]", "mass-bound[4]"]
    assert records[0].value == pytest.approx(0.49)
    assert records[1].value == pytest.approx(0.7 ** 4)
    assert all(record.passed for record in records)
    assert all(record.bound == 1.0 + 2e-9 for record in records)


def test_mass_bound_records_report_the_applied_bound(subprob_moments: MomentSequence) -> None:
    (second, _) = mass_bound_records(with_entry(subprob_moments, (1, 1), 0.67 + 1e-9), 1e-9)
    assert second.value > 1.0
    assert second.passed
    assert second.value <= second.bound


def test_subprob_passes_on_a_sub_probability(subprob_moments: MomentSequence) -> None:
    report = check_subprob(subprob_moments, 1)
    assert report.verdict == Verdict.PASS
    assert report.kind == CheckKind.SUBPROB
    assert report.conditions[0].label == "hankel"
    assert report.conditions[0].scope == "exact"
    upsilon = [record for record in report.conditions if record.label.startswith("upsilon[")]
    assert len(upsilon) == 3
    assert all(record.scope == "passed on test set" for record in upsilon)
    assert report.test_set == ("1{s0}", "1{s1}", "1{s0,s1}")


def test_subprob_fails_above_unit_mass() -> None:
    report = check_subprob(fixed_measure_moments(DiscreteMeasure((0.5, 1.0)), 4), 1)
    assert report.verdict == Verdict.FAIL
    assert "upsilon[1{s0,s1}]" in report.failing_labels()
    failed = next(record for record in report.conditions if record.label == "upsilon[1{s0,s1}]")
    assert failed.scope == "failed on test set"


def test_subprob_needs_room_for_the_localizers(subprob_moments: MomentSequence) -> None:
    with pytest.raises(DegreeOverflowError) as raised:
        check_subprob(subprob_moments, 2)
    assert raised.value.required == 6


def test_subprob_alt_carries_determinacy(subprob_moments: MomentSequence) -> None:
    report = check_subprob_alt(subprob_moments, 1)
    assert report.verdict == Verdict.PASS
    assert report.determinacy is not None
    assert report.determinacy.horizon == 2
    assert any(record.label == "theta[1{s0,s1}]" for record in report.conditions)


def test_prob_needs_unit_total_mass(subprob_moments: MomentSequence) -> None:
    report = check_prob(subprob_moments, 1)
    assert report.verdict == Verdict.FAIL
    assert report.failing_labels() == ["unit-total-mass"]
    assert check_prob(fixed_measure_moments(PROBABILITY, 4), 1).verdict == Verdict.PASS


@pytest.mark.parametrize(("delta", "verdict"), [(2e-9, Verdict.FAIL), (5e-10, Verdict.PASS)])
def test_prob_equality_gate(delta: float, verdict: Verdict) -> None:
    m = fixed_measure_moments(PROBABILITY, 4).replace_component(SymTensor.scalar(1 + delta))
    report = check_prob(m, 1)
    assert report.verdict == verdict
    assert report.equalities[0].gap == pytest.approx(delta)
    if verdict == Verdict.FAIL:
        assert report.failing_labels() == ["unit-total-mass"]


def test_multi_config_rejects_a_fractional_mass() -> None:
    m = fixed_measure_moments(DiscreteMeasure((0.5,)), 4)
    report = check_multi_config(m, 1, 2)
    assert report.verdict == Verdict.FAIL
    assert report.failing_labels() == ["phi[k=2,1{s0}]"]


def test_multi_config_passes_on_poisson(poisson_moments: MomentSequence) -> None:
    assert check_multi_config(poisson_moments, 1, 2).verdict == Verdict.PASS


def test_simple_config_passes_on_bernoulli(bernoulli_moments: MomentSequence) -> None:
    report = check_simple_config(bernoulli_moments, 1)
    assert report.verdict == Verdict.PASS
    assert [record.label for record in report.equalities] == ["diagonal[s0]", "diagonal[s1]"]


def test_simple_config_rejects_poisson(poisson_moments: MomentSequence) -> None:
    report = check_simple_config(poisson_moments, 1)
    assert report.verdict == Verdict.FAIL
    assert report.failing_labels() == ["diagonal[s0]", "diagonal[s1]"]
    assert [record.gap for record in report.equalities] == [1.0, 4.0]


def test_simple_config_rejects_a_double_point() -> None:
    report = check_simple_config(fixed_measure_moments(DiscreteMeasure((2,)), 4), 1)
    assert report.verdict == Verdict.FAIL
    assert report.equalities[0].lhs == 4.0
    assert report.equalities[0].rhs == 2.0


@pytest.mark.parametrize(("r", "n_max", "truncation"), [(1, 2, 4), (1, 3, 5), (2, 2, 6)])
def test_corr_multi_passes_on_poisson(r: int, n_max: int, truncation: int) -> None:
    report = check_corr_multi(poisson_correlations((1, 2), truncation), r, n_max)
    assert report.verdict == Verdict.PASS
    assert report.conditions[0].label == "factorial[n=0]"
    assert {record.label for record in report.conditions if record.label.startswith("shift[n=1,")} == {
        "shift[n=1,1{s0}]", "shift[n=1,1{s1}]"
    }
    assert report.determinacy is not None
    assert report.determinacy.almost_increasing is not None


def test_corr_multi_rejects_negative_pair_correlations(poisson_rho: CorrelationSequence) -> None:
    corrupted = poisson_rho.replace_component(-poisson_rho.component(2))
    report = check_corr_multi(corrupted, 1, 2)
    assert report.verdict == Verdict.FAIL
    assert "factorial[n=0]" in report.failing_labels()
    assert not psd_verdict(hankel_matrix(corr_to_moment(corrupted), 1), 1e-9).passed


def test_corr_simple_on_bernoulli(bernoulli_rho: CorrelationSequence) -> None:
    report = check_corr_simple(bernoulli_rho, 1)
    assert report.verdict == Verdict.PASS
    assert report.determinacy is not None
    assert report.determinacy.almost_increasing is None


def test_almost_increasing_follows_the_horizon(bernoulli_rho: CorrelationSequence) -> None:
    report = check_corr_simple(bernoulli_rho, 1, horizon=1)
    assert report.determinacy is not None
    assert report.determinacy.horizon == 1
    assert report.determinacy.almost_increasing == pytest.approx((0.6 / 0.09) ** 0.5)


def test_corr_simple_rejects_poisson(poisson_rho: CorrelationSequence) -> None:
    report = check_corr_simple(poisson_rho, 1)
    assert report.verdict == Verdict.FAIL
    assert report.failing_labels() == ["diagonal[s0]", "diagonal[s1]"]


def test_corr_simple_accepts_the_empty_configuration(two_site_grid: GridSpec) -> None:
    rho = CorrelationSequence(two_site_grid, (SymTensor.scalar(1), *(SymTensor.zero(n) for n in range(1, 5))))
    assert check_corr_simple(rho, 1).verdict == Verdict.PASS


def test_thm_suff_passes_on_poisson(poisson_rho: CorrelationSequence) -> None:
    report = check_thm_suff(poisson_rho, GridSpec.indexed(2, sigma=(1, 2)), 2, 1)
    assert report.verdict == Verdict.PASS
    labels = [record.label for record in report.conditions]
    assert labels == [
        "density[x=()]",
        "density[x=(s0)]",
        "density[x=(s1)]",
        "density[x=(s0,s0)]",
        "density[x=(s0,s1)]",
        "density[x=(s1,s1)]",
    ]
    reference = check_corr_multi(poisson_rho, 1, 2).conditions[0]
    assert report.conditions[0].min_eigenvalue == reference.min_eigenvalue


def test_thm_suff_passes_on_bernoulli_with_an_empty_site() -> None:
    assert check_thm_suff(bernoulli_correlations((0.5, 0), 4), None, 2, 1).verdict == Verdict.PASS


def test_thm_suff_needs_positive_reference_weights(poisson_rho: CorrelationSequence) -> None:
    with pytest.raises(ZeroReferenceWeightError) as raised:
        check_thm_suff(poisson_rho, GridSpec.indexed(2, sigma=(1, 0)), 2, 1)
    assert raised.value.site == "s1"


def test_stieltjes_diagnostic_flags_fast_growth() -> None:
    values = [math.factorial(order) ** 4 if order % 2 == 0 else 1 for order in range(17)]
    diagnostic = stieltjes_diagnostic(one_site_sequence(values), 8)
    assert diagnostic.xi[0] == pytest.approx(4.0)
    assert diagnostic.growth_slope is not None
    assert diagnostic.growth_slope > GROWTH_SLOPE_TOLERANCE
    assert not diagnostic.consistent


def test_stieltjes_diagnostic_on_bounded_poisson() -> None:
    diagnostic = stieltjes_diagnostic(poisson_correlations((0.5, 1.0), 8), 4)
    assert diagnostic.xi == (1.0, 1.0, 1.0, 1.0)
    assert diagnostic.carleman_partial_sums == (1.0, 2.0, 3.0, 4.0)
    assert diagnostic.consistent
    with pytest.raises(DegreeOverflowError):
        stieltjes_diagnostic(poisson_correlations((0.5, 1.0), 8), 5)


def test_stieltjes_diagnostic_with_vanishing_components(two_site_grid: GridSpec) -> None:
    rho = CorrelationSequence(two_site_grid, (SymTensor.scalar(1), *(SymTensor.zero(n) for n in range(1, 7))))
    diagnostic = stieltjes_diagnostic(rho, 3)
    assert diagnostic.growth_exponents == (None, None)
    assert diagnostic.carleman_partial_sums == (math.inf, math.inf, math.inf)
    assert diagnostic.growth_slope is None
    assert diagnostic.consistent


def test_almost_increasing() -> None:
    factorials = one_site_sequence([math.factorial(order) for order in range(6)])
    assert almost_increasing(factorials, 5) == pytest.approx(1.0)
    assert almost_increasing(one_site_sequence([1, 1, 2, 0]), 3) is None
    with pytest.raises(DegreeOverflowError):
        almost_increasing(factorials, 6)


def _corrupt_subprob(m: TruncatedSequence) -> TruncatedSequence:
    return with_entry(m, (0, 0), -2)


type Corruption = tuple[Callable[[], TruncatedSequence], Callable[[TruncatedSequence], TruncatedSequence]]

CORRUPTIONS: dict[CheckKind, Corruption] = {
    CheckKind.SUBPROB: (lambda: fixed_measure_moments(DiscreteMeasure((0.3, 0.4)), 4), _corrupt_subprob),
    CheckKind.SUBPROB_ALT: (lambda: fixed_measure_moments(DiscreteMeasure((0.3, 0.4)), 4), _corrupt_subprob),
    CheckKind.PROB: (
        lambda: fixed_measure_moments(PROBABILITY, 4),
        lambda m: m.replace_component(SymTensor(1, {(0,): 0.5, (1,): 0.75})),
    ),
    CheckKind.MULTI_CONFIG: (lambda: corr_to_moment(poisson_correlations((1, 2), 4)), _corrupt_subprob),
    CheckKind.SIMPLE_CONFIG: (
        lambda: corr_to_moment(bernoulli_correlations((0.3, 0.6), 4)),
        lambda m: with_entry(m, (0, 0), 0.4),
    ),
    CheckKind.CORR_MULTI: (
        lambda: poisson_correlations((1, 2), 4),
        lambda rho: rho.replace_component(-rho.component(2)),
    ),
    CheckKind.CORR_SIMPLE: (
        lambda: bernoulli_correlations((0.3, 0.6), 4),
        lambda rho: with_entry(rho, (0, 0), 0.05),
    ),
    CheckKind.THM_SUFF: (
        lambda: poisson_correlations((1, 2), 4),
        lambda rho: rho.replace_component(-rho.component(2)),
    ),
}


@pytest.mark.parametrize(("factor", "passed"), [(0.9, True), (1.1, False)])
def test_hankel_condition_at_the_tolerance_boundary(
        subprob_moments: MomentSequence,
        factor: float,
        passed: bool,
) -> None:
    tol = 1e-9
    epsilon = factor * tol * 2.0
    shifted = subprob_moments
    for index in [(), (0, 0), (1, 1)]:
        shifted = with_entry(shifted, index, shifted.component(len(index)).value(index) - epsilon)
    expected = hankel_matrix(subprob_moments, 1) - epsilon * np.eye(3)
    np.testing.assert_allclose(hankel_matrix(shifted, 1), expected, rtol=0.0, atol=1e-18)
    record = check_subprob(shifted, 1, tol).conditions[0]
    assert record.label == "hankel"
    assert record.passed is passed


@pytest.mark.parametrize("kind", list(CheckKind))
def test_run_check_tells_realizable_from_corrupted(kind: CheckKind) -> None:
    build, corrupt = CORRUPTIONS[kind]
    sequence = build()
    config = CheckConfig(degree=1, kmax=2, nmax=2)
    assert run_check(kind, sequence, config).verdict == Verdict.PASS
    assert run_check(kind, corrupt(sequence), config).verdict == Verdict.FAIL


def test_run_check_is_deterministic(poisson_rho: CorrelationSequence) -> None:
    config = CheckConfig(test_set=TestSetPolicy(random_count=3, seed=11))
    first = run_check(CheckKind.CORR_MULTI, poisson_rho, config)
    second = run_check(CheckKind.CORR_MULTI, poisson_rho, config)
    assert to_json_bytes(first) == to_json_bytes(second)


def test_run_check_rejects_the_wrong_basis(poisson_moments: MomentSequence, poisson_rho: CorrelationSequence) -> None:
    with pytest.raises(BasisMismatchError):
        run_check(CheckKind.CORR_MULTI, poisson_moments, CheckConfig())
    with pytest.raises(BasisMismatchError):
        run_check(CheckKind.SUBPROB, poisson_rho, CheckConfig())


def test_run_check_caps_the_basis(poisson_moments: MomentSequence) -> None:
    with pytest.raises(GridLimitError):
        run_check(CheckKind.MULTI_CONFIG, poisson_moments, CheckConfig(max_entries=1))


def test_sampled_sub_probability_passes_at_monte_carlo_tolerance() -> None:
    spec = ModelSpec(
        kind=ModelKind.DIRICHLET_SUBPROB,
        truncation=4,
        values=(1.0, 2.0),
        mass_law=MassLaw.UNIFORM,
        seed=21,
        samples=2000,
    )
    m = generate(spec)
    assert isinstance(m, MomentSequence)
    assert check_subprob(m, 1, DEFAULT_MC_TOL).verdict == Verdict.PASS
