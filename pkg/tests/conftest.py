import pytest

from moment_common.model import GridSpec
from moment_common.tensor import CorrelationSequence, DiscreteMeasure, MomentSequence
from moment_core.correlation import corr_to_moment
from moment_core.oracles import bernoulli_correlations, fixed_measure_moments, poisson_correlations

POISSON_SIGMA = (1, 2)
BERNOULLI_P = (0.3, 0.6)


@pytest.fixture
def two_site_grid() -> GridSpec:
    return GridSpec.indexed(2)


@pytest.fixture
def poisson_rho() -> CorrelationSequence:
    return poisson_correlations(POISSON_SIGMA, 4)


@pytest.fixture
def poisson_moments(poisson_rho: CorrelationSequence) -> MomentSequence:
    return corr_to_moment(poisson_rho)


@pytest.fixture
def bernoulli_rho() -> CorrelationSequence:
    return bernoulli_correlations(BERNOULLI_P, 4)


@pytest.fixture
def bernoulli_moments(bernoulli_rho: CorrelationSequence) -> MomentSequence:
    return corr_to_moment(bernoulli_rho)


@pytest.fixture
def subprob_moments() -> MomentSequence:
    """Moments of the point mass at a measure of total mass 0.7."""
    return fixed_measure_moments(DiscreteMeasure((0.3, 0.4)), 4)


@pytest.fixture(autouse=True)
def _no_thread_override(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("RMM_THREADS", raising=False)
