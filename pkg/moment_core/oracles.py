"""
Ground-truth sequences: closed-form models with known correlation or moment functions and Monte Carlo estimators.

Sampled models draw from a PCG64 generator seeded by the caller, so equal seeds give equal sequences.
"""
import logging
from collections.abc import Sequence
from itertools import combinations
from math import prod

import numpy as np
import numpy.typing as npt
import scipy.special

from moment_common.errors import EmptySampleError, ModelParameterError
from moment_common.model import GridSpec, MassLaw, ModelKind, ModelSpec
from moment_common.tensor import (
    CorrelationSequence,
    DiscreteMeasure,
    Index,
    MomentSequence,
    PointConfiguration,
    Scalar,
    SymTensor,
    TruncatedSequence,
)
from moment_core.factorial import falling_factorial
from moment_core.grid import canonical_indices, site_counts, tensor_power

logger = logging.getLogger(__name__)


def _grid_for(values: Sequence[Scalar], grid: GridSpec | None) -> GridSpec:
    if grid is None:
        return GridSpec.indexed(len(values))
    if grid.num_sites != len(values):
        raise ModelParameterError(f"Model has {len(values)} site parameters for a grid of {grid.num_sites} sites")
    return grid


def _require_nonnegative(values: Sequence[Scalar], what: str) -> None:
    for value in values:
        if value < 0:
            raise ModelParameterError(f"{what} must be nonnegative, got {value}")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def poisson_correlations(sigma: Sequence[Scalar], truncation: int, grid: GridSpec | None = None) -> CorrelationSequence:
    """rho^(n) = sigma^{⊗n}, the correlation functions of the Poisson process with intensity sigma."""
    _require_nonnegative(sigma, "Poisson intensities")
    return CorrelationSequence(
        _grid_for(sigma, grid), tuple(tensor_power(sigma, n) for n in range(truncation + 1)), nonneg=True
    )


def bernoulli_correlations(p: Sequence[Scalar], truncation: int, grid: GridSpec | None = None) -> CorrelationSequence:
    """Independent occupancy with probability p_s: rho^(n) is prod p over distinct sites and 0 on every diagonal."""
    _require_nonnegative(p, "Occupancy probabilities")
    if any(value > 1 for value in p):
        raise ModelParameterError("Occupancy probabilities must not exceed 1")
    support = [site for site, value in enumerate(p) if value != 0]
    components = [
        SymTensor(n, {alpha: prod((p[site] for site in alpha), start=1) for alpha in combinations(support, n)})
        for n in range(truncation + 1)
    ]
    return CorrelationSequence(_grid_for(p, grid), tuple(components), nonneg=True)


def fixed_measure_moments(eta: DiscreteMeasure, truncation: int, grid: GridSpec | None = None) -> MomentSequence:
    """Moments of the point mass at eta: m^(n) = eta^{⊗n}."""
    return MomentSequence(
        _grid_for(eta.masses, grid), tuple(tensor_power(eta.masses, n) for n in range(truncation + 1)), nonneg=True
    )


def fixed_config_correlations(
        gamma: PointConfiguration,
        truncation: int,
        grid: GridSpec | None = None,
) -> CorrelationSequence:
    """Factorial moments of the point mass at an integer configuration, prod_s falling(gamma_s, k_s) at alpha."""
    components: list[SymTensor] = []
    for n in range(truncation + 1):
        entries: dict[Index, Scalar] = {}
        for alpha in canonical_indices(gamma.num_sites, n):
            value = prod(
                (falling_factorial(gamma.counts[site], count) for site, count in site_counts(alpha).items()), start=1
            )
            if value:
                entries[alpha] = value
        components.append(SymTensor(n, entries))
    return CorrelationSequence(_grid_for(gamma.counts, grid), tuple(components), nonneg=True)


def sample_poisson(sigma: Sequence[Scalar], rng: np.random.Generator) -> PointConfiguration:
    _require_nonnegative(sigma, "Poisson intensities")
    return PointConfiguration(tuple(int(count) for count in rng.poisson(np.asarray(sigma, dtype=np.float64))))


def sample_bernoulli(p: Sequence[Scalar], rng: np.random.Generator) -> PointConfiguration:
    _require_nonnegative(p, "Occupancy probabilities")
    draws = rng.random(len(p)) < np.asarray(p, dtype=np.float64)
    return PointConfiguration(tuple(int(draw) for draw in draws))


def mc_correlations(
        samples: Sequence[PointConfiguration],
        truncation: int,
        grid: GridSpec | None = None,
) -> tuple[CorrelationSequence, tuple[SymTensor, ...]]:
    """
    Empirical correlation functions of a sample of configurations.

    Each sample contributes its own factorial moments prod_s falling(gamma_s, k_s) at alpha; the estimate is their
    mean, with standard error std(ddof=1) / sqrt(N), or 0 for a single sample.

    Returns:
        The estimated sequence and one standard-error tensor per order

    Raises:
        EmptySampleError: If there are no samples
    """
    if not samples:
        raise EmptySampleError("Correlation estimation needs at least one sample")
    counts = np.asarray([sample.counts for sample in samples], dtype=np.float64)
    size, num_sites = counts.shape
    falling = [scipy.special.perm(counts, k) for k in range(truncation + 1)]
    means: list[SymTensor] = []
    errors: list[SymTensor] = []
    for n in range(truncation + 1):
        mean_entries: dict[Index, Scalar] = {}
        error_entries: dict[Index, Scalar] = {}
        for alpha in canonical_indices(num_sites, n):
            values: npt.NDArray[np.float64] = np.ones(size, dtype=np.float64)
            for site, count in site_counts(alpha).items():
                values = values * falling[count][:, site]
            mean = float(values.mean())
            if mean != 0:
                mean_entries[alpha] = mean
            error = float(values.std(ddof=1) / np.sqrt(size)) if size > 1 else 0.0
            if error != 0:
                error_entries[alpha] = error
        means.append(SymTensor(n, mean_entries))
        errors.append(SymTensor(n, error_entries))
    logger.debug("Estimated correlations of order <= %d from %d samples", truncation, size)
    return CorrelationSequence(_grid_for([0] * num_sites, grid), tuple(means), nonneg=True), tuple(errors)


def _sample_masses(spec: ModelSpec, rng: np.random.Generator, size: int) -> npt.NDArray[np.float64]:
    match spec.mass_law:
        case MassLaw.CONSTANT:
            return np.full(size, spec.mass_value, dtype=np.float64)
        case MassLaw.UNIFORM:
            return rng.uniform(0.0, 1.0, size=size)
        case MassLaw.BETA:
            return rng.beta(spec.beta_a, spec.beta_b, size=size)


def dirichlet_subprob_moments(
        spec: ModelSpec,
        rng: np.random.Generator,
        grid: GridSpec | None = None,
) -> MomentSequence:
    """
    Monte Carlo moments of a random sub-probability: total mass from the mass law, allocated over the sites by a
    Dirichlet draw with the model values as concentration.

    Raises:
        ModelParameterError: If the model is not a sampled dirichlet-subprob model
    """
    if spec.kind != ModelKind.DIRICHLET_SUBPROB or spec.samples is None:
        raise ModelParameterError(f"Expected a sampled dirichlet-subprob model, got {spec.kind}")
    masses = _sample_masses(spec, rng, spec.samples)
    allocations = rng.dirichlet(np.asarray(spec.values, dtype=np.float64), size=spec.samples)
    etas = allocations * masses[:, np.newaxis]
    components: list[SymTensor] = []
    for n in range(spec.truncation + 1):
        entries: dict[Index, Scalar] = {}
        for alpha in canonical_indices(len(spec.values), n):
            value = float(np.prod(etas[:, list(alpha)], axis=1).mean())
            if value != 0:
                entries[alpha] = value
        components.append(SymTensor(n, entries))
    return MomentSequence(_grid_for(spec.values, grid), tuple(components), nonneg=True)


def generate(spec: ModelSpec, grid: GridSpec | None = None) -> TruncatedSequence:
    """
    Produce the sequence a model spec describes.

    Poisson and Bernoulli specs with a sample count are estimated from that many draws instead of computed in
    closed form.
    """
    values = spec.values
    sequence: TruncatedSequence
    match spec.kind:
        case ModelKind.POISSON | ModelKind.BERNOULLI if spec.samples is not None and spec.seed is not None:
            rng = make_rng(spec.seed)
            draw = sample_poisson if spec.kind == ModelKind.POISSON else sample_bernoulli
            sequence, _ = mc_correlations([draw(values, rng) for _ in range(spec.samples)], spec.truncation, grid)
        case ModelKind.POISSON:
            sequence = poisson_correlations(values, spec.truncation, grid)
        case ModelKind.BERNOULLI:
            sequence = bernoulli_correlations(values, spec.truncation, grid)
        case ModelKind.FIXED_MEASURE:
            sequence = fixed_measure_moments(DiscreteMeasure(values), spec.truncation, grid)
        case ModelKind.FIXED_CONFIG:
            configuration = PointConfiguration(tuple(int(value) for value in values))
            sequence = fixed_config_correlations(configuration, spec.truncation, grid)
        case ModelKind.DIRICHLET_SUBPROB:
            if spec.seed is None:
                raise ModelParameterError("dirichlet-subprob needs a seed")
            sequence = dirichlet_subprob_moments(spec, make_rng(spec.seed), grid)
    logger.info("Generated %s sequence on %d sites up to order %d", spec.kind, sequence.num_sites, spec.truncation)
    return sequence
