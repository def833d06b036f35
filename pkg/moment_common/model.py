import math
from collections.abc import Sequence
from enum import StrEnum
from typing import Final, Self, final

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from moment_common.errors import MomentError

SCHEMA_VERSION: Final[int] = 1
DEFAULT_MAX_ENTRIES: Final[int] = 2_000_000


@final
class Basis(StrEnum):
    MOMENT = "moment"
    CORRELATION = "correlation"


@final
class Verdict(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@final
class CheckKind(StrEnum):
    SUBPROB = "subprob"
    SUBPROB_ALT = "subprob-alt"
    PROB = "prob"
    MULTI_CONFIG = "multi-config"
    SIMPLE_CONFIG = "simple-config"
    CORR_MULTI = "corr-multi"
    CORR_SIMPLE = "corr-simple"
    THM_SUFF = "thm-suff"

    @property
    def basis(self) -> Basis:
        if self in (CheckKind.CORR_MULTI, CheckKind.CORR_SIMPLE, CheckKind.THM_SUFF):
            return Basis.CORRELATION
        return Basis.MOMENT


@final
class GridSpec(BaseModel):
    """
    The finite site set on which every sequence lives.

    Attributes:
        sites: Unique site identifiers, in storage order
        coords: One coordinate vector per site, all of the same dimension d >= 1
        sigma: Nonnegative reference weight per site
    """
    model_config = ConfigDict(frozen=True)

    sites: Final[tuple[str, ...]] # type: ignore[misc]
    coords: Final[tuple[tuple[float, ...], ...]] # type: ignore[misc]
    sigma: Final[tuple[int | float, ...]] # type: ignore[misc]

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if not self.sites:
            raise ValueError("A grid needs at least one site")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("Site identifiers must be unique")
        if len(self.coords) != len(self.sites) or len(self.sigma) != len(self.sites):
            raise ValueError("coords and sigma must have one entry per site")
        dimensions = {len(coord) for coord in self.coords}
        if len(dimensions) != 1 or 0 in dimensions:
            raise ValueError("All coordinates must share one dimension d >= 1")
        for weight in self.sigma:
            if not math.isfinite(weight) or weight < 0:
                raise ValueError(f"sigma entries must be finite and nonnegative, got {weight}")
        return self

    @classmethod
    def indexed(cls, num_sites: int, sigma: Sequence[int | float] | None = None) -> "GridSpec":
        """
        Build a one-dimensional grid with sites named s0, s1, ... placed at 0, 1, ...

        Args:
            num_sites: Number of sites
            sigma: Reference weights, defaulting to 1 at every site

        Returns:
            The grid
        """
        return cls(
            sites=tuple(f"s{i}" for i in range(num_sites)),
            coords=tuple((float(i),) for i in range(num_sites)),
            sigma=tuple(sigma) if sigma is not None else (1,) * num_sites,
        )

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def dimension(self) -> int:
        return len(self.coords[0])

    def label(self, index: Sequence[int]) -> str:
        return "(" + ",".join(self.sites[i] for i in index) + ")"


@final
class TestSetPolicy(BaseModel):
    """
    Finite family of nonnegative site functions standing in for "all capped test functions".

    Attributes:
        indicator_cap: Largest site subset whose indicator is included
        random_count: Number of random capped vectors added to the indicators
        seed: Seed of the generator drawing the random vectors
    """
    model_config = ConfigDict(frozen=True)
    __test__ = False

    indicator_cap: int = Field(default=8, ge=1)
    random_count: int = Field(default=0, ge=0)
    seed: int = 0

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "TestSetPolicy":
        if text == "indicators":
            return cls(seed=seed)
        prefix = "indicators+random:"
        if text.startswith(prefix) and text[len(prefix):].isdigit():
            return cls(random_count=int(text[len(prefix):]), seed=seed)
        raise MomentError(f"Unknown test-set policy {text!r}, expected 'indicators' or 'indicators+random:K'")

    def describe(self) -> str:
        if self.random_count == 0:
            return "indicators"
        return f"indicators+random:{self.random_count}"


@final
class CheckConfig(BaseModel):
    """
    Everything a check needs besides the input sequence; echoed in every report.
    """
    model_config = ConfigDict(frozen=True)

    degree: int = Field(default=1, ge=0)
    tol: float = Field(default=1e-9, ge=0)
    tol_eq: float = Field(default=1e-9, ge=0)
    kmax: int = Field(default=2, ge=1)
    nmax: int = Field(default=2, ge=0)
    horizon: int | None = Field(default=None, ge=1)
    test_set: TestSetPolicy = TestSetPolicy()
    max_entries: int = Field(default=DEFAULT_MAX_ENTRIES, ge=1)


@final
class ConditionRecord(BaseModel):
    """
    Outcome of one positive semidefiniteness condition.

    Attributes:
        label: Which matrix was checked, e.g. "hankel" or "upsilon[1(s0,s1)]"
        dimension: Matrix dimension
        min_eigenvalue: Smallest eigenvalue of the symmetrized matrix
        threshold: The matrix passes iff min_eigenvalue >= threshold
        passed: Verdict of this record
        scope: "exact" or "passed on test set" for conditions that quantify over all test functions
    """
    model_config = ConfigDict(frozen=True)

    label: Final[str] # type: ignore[misc]
    dimension: Final[int] # type: ignore[misc]
    min_eigenvalue: Final[float] # type: ignore[misc]
    threshold: Final[float] # type: ignore[misc]
    passed: Final[bool] # type: ignore[misc]
    scope: str = "exact"


@final
class EqualityRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: Final[str] # type: ignore[misc]
    lhs: Final[float] # type: ignore[misc]
    rhs: Final[float] # type: ignore[misc]
    gap: Final[float] # type: ignore[misc]
    passed: Final[bool] # type: ignore[misc]


@final
class DiagnosticRecord(BaseModel):
    """
    An advisory inequality; failing it makes a report inconclusive, never failed.
    """
    model_config = ConfigDict(frozen=True)

    label: Final[str] # type: ignore[misc]
    value: Final[float] # type: ignore[misc]
    bound: Final[float] # type: ignore[misc]
    passed: Final[bool] # type: ignore[misc]


@final
class DeterminacyDiagnostic(BaseModel):
    """
    Finite-horizon view of the Stieltjes growth condition.

    Attributes:
        horizon: Largest n inspected
        xi: xi_n for n = 1..horizon
        carleman_partial_sums: Partial sums of xi_n^(-1/(2n)), infinite once some xi_n vanishes
        growth_exponents: log(xi_n) / (n log n) for n = 2..horizon, None where xi_n = 0
        growth_slope: Fitted slope of log(xi_n^(1/n) / (n^2 ln n)) over n, None without enough points
        consistent: Whether the sequence looks like it grows no faster than B (C n^2 ln n)^n
        almost_increasing: Minimal constant of the almost-increasing bound, when it was evaluated and exists
    """
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    horizon: Final[int] # type: ignore[misc]
    xi: Final[tuple[float, ...]] # type: ignore[misc]
    carleman_partial_sums: Final[tuple[float, ...]] # type: ignore[misc]
    growth_exponents: Final[tuple[float | None, ...]] # type: ignore[misc]
    growth_slope: Final[float | None] # type: ignore[misc]
    consistent: Final[bool] # type: ignore[misc]
    almost_increasing: float | None = None

    @model_validator(mode="after")
    def _check_monotone(self) -> Self:
        if any(value < 0 for value in self.xi):
            raise ValueError("xi entries must be nonnegative")
        sums = self.carleman_partial_sums
        if any(later < earlier for earlier, later in zip(sums, sums[1:])):
            raise ValueError("Carleman partial sums must be nondecreasing")
        return self


@final
class CheckReport(BaseModel):
    """
    All records produced by one realizability check together with the overall verdict.

    The verdict is derived from the records: any failing condition or equality fails the report,
    a failing diagnostic or a clear determinacy flag alone makes it inconclusive.
    """
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    kind: Final[CheckKind] # type: ignore[misc]
    conditions: Final[tuple[ConditionRecord, ...]] # type: ignore[misc]
    equalities: tuple[EqualityRecord, ...] = ()
    diagnostics: tuple[DiagnosticRecord, ...] = ()
    determinacy: DeterminacyDiagnostic | None = None
    test_set: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    verdict: Final[Verdict] # type: ignore[misc]

    @staticmethod
    def derive_verdict(
            conditions: Sequence[ConditionRecord],
            equalities: Sequence[EqualityRecord],
            diagnostics: Sequence[DiagnosticRecord],
            determinacy: DeterminacyDiagnostic | None,
    ) -> Verdict:
        if not all(record.passed for record in conditions) or not all(record.passed for record in equalities):
            return Verdict.FAIL
        if not all(record.passed for record in diagnostics):
            return Verdict.INCONCLUSIVE
        if determinacy is not None and not determinacy.consistent:
            return Verdict.INCONCLUSIVE
        return Verdict.PASS

    @model_validator(mode="after")
    def _check_verdict(self) -> Self:
        expected = self.derive_verdict(self.conditions, self.equalities, self.diagnostics, self.determinacy)
        if expected != self.verdict:
            raise ValueError(f"Verdict {self.verdict} does not follow from the records, expected {expected}")
        return self

    @classmethod
    def assemble(
            cls,
            kind: CheckKind,
            conditions: Sequence[ConditionRecord],
            equalities: Sequence[EqualityRecord] = (),
            diagnostics: Sequence[DiagnosticRecord] = (),
            determinacy: DeterminacyDiagnostic | None = None,
            test_set: Sequence[str] = (),
            notes: Sequence[str] = (),
    ) -> "CheckReport":
        return cls(
            kind=kind,
            conditions=tuple(conditions),
            equalities=tuple(equalities),
            diagnostics=tuple(diagnostics),
            determinacy=determinacy,
            test_set=tuple(test_set),
            notes=tuple(notes),
            verdict=cls.derive_verdict(conditions, equalities, diagnostics, determinacy),
        )

    def failing_labels(self) -> list[str]:
        records: list[ConditionRecord | EqualityRecord | DiagnosticRecord] = [
            *self.conditions, *self.equalities, *self.diagnostics
        ]
        return [record.label for record in records if not record.passed]


@final
class ModelKind(StrEnum):
    POISSON = "poisson"
    BERNOULLI = "bernoulli"
    FIXED_MEASURE = "fixed-measure"
    FIXED_CONFIG = "fixed-config"
    DIRICHLET_SUBPROB = "dirichlet-subprob"


@final
class MassLaw(StrEnum):
    CONSTANT = "constant"
    UNIFORM = "uniform"
    BETA = "beta"


@final
class ModelSpec(BaseModel):
    """
    Parameters of a ground-truth model.

    Attributes:
        kind: Which model to generate
        truncation: Truncation degree D of the produced sequence
        values: Per-site parameter vector: sigma (poisson), occupancy probabilities (bernoulli),
            masses (fixed-measure) or counts (fixed-config); dirichlet-subprob uses it as concentration
        mass_law: Law of the total mass of a sampled sub-probability
        mass_value: The constant mass for the constant law
        beta_a: First shape parameter of the beta mass law
        beta_b: Second shape parameter of the beta mass law
        seed: Seed of the PCG64 generator, mandatory for sampled kinds
        samples: Monte Carlo sample count; poisson and bernoulli switch to estimation when set
    """
    model_config = ConfigDict(frozen=True)

    kind: Final[ModelKind] # type: ignore[misc]
    truncation: int = Field(ge=0)
    values: Final[tuple[int | float, ...]] # type: ignore[misc]
    mass_law: MassLaw = MassLaw.CONSTANT
    mass_value: float = Field(default=1.0, ge=0.0, le=1.0)
    beta_a: float = Field(default=2.0, gt=0.0)
    beta_b: float = Field(default=2.0, gt=0.0)
    seed: int | None = None
    samples: int | None = Field(default=None, ge=1)

    @field_validator("values")
    @classmethod
    def _check_finite(cls, values: tuple[int | float, ...]) -> tuple[int | float, ...]:
        if not values:
            raise ValueError("values must list one parameter per site")
        for value in values:
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"Model parameters must be finite and nonnegative, got {value}")
        return values

    @model_validator(mode="after")
    def _check_kind(self) -> Self:
        if self.kind == ModelKind.BERNOULLI and any(value > 1 for value in self.values):
            raise ValueError("Occupancy probabilities must lie in [0, 1]")
        if self.kind == ModelKind.FIXED_CONFIG and any(not float(value).is_integer() for value in self.values):
            raise ValueError("Configuration counts must be integers")
        if self.kind == ModelKind.DIRICHLET_SUBPROB and any(value <= 0 for value in self.values):
            raise ValueError("Dirichlet concentrations must be positive")
        if self.is_sampled and self.seed is None:
            raise ValueError(f"Model {self.kind} with sampling needs a seed")
        if self.kind == ModelKind.DIRICHLET_SUBPROB and self.samples is None:
            raise ValueError("dirichlet-subprob needs a sample count")
        return self

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None or self.kind == ModelKind.DIRICHLET_SUBPROB


@final
class SparseEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: Final[tuple[str, ...]] # type: ignore[misc]
    value: Final[int | float] # type: ignore[misc]

    @field_validator("value")
    @classmethod
    def _check_finite(cls, value: int | float) -> int | float:
        if not math.isfinite(value):
            raise ValueError("Component values must be finite")
        return value


@final
class ComponentBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    order: int = Field(ge=0)
    entries: Final[tuple[SparseEntry, ...]] # type: ignore[misc]


@final
class ConversionStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    direction: Final[str] # type: ignore[misc]
    source_digest: Final[str] # type: ignore[misc]


@final
class Provenance(BaseModel):
    """
    Where a sequence file came from.

    Attributes:
        model: The model it was generated from, if any
        seed: Generator seed of a sampled model
        samples: Monte Carlo sample count of a sampled model
        conversions: Basis conversions applied since generation, oldest first
    """
    model_config = ConfigDict(frozen=True)

    model: ModelSpec | None = None
    seed: int | None = None
    samples: int | None = None
    conversions: tuple[ConversionStep, ...] = ()

    def converted(self, direction: str, source_digest: str) -> "Provenance":
        step = ConversionStep(direction=direction, source_digest=source_digest)
        return self.model_copy(update={"conversions": (*self.conversions, step)})


@final
class SequenceFile(BaseModel):
    """
    On-disk form of a moment or correlation sequence.

    Components are sparse lists of (sorted site tuple, value); tuples are sorted by the grid's site order.
    """
    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    grid: Final[GridSpec] # type: ignore[misc]
    basis: Final[Basis] # type: ignore[misc]
    truncation: int = Field(ge=0)
    components: Final[tuple[ComponentBlock, ...]] # type: ignore[misc]
    provenance: Provenance | None = None

    @model_validator(mode="after")
    def _check_components(self) -> Self:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema version {self.schema_version}, expected {SCHEMA_VERSION}")
        position = {site: i for i, site in enumerate(self.grid.sites)}
        seen_orders: set[int] = set()
        for block in self.components:
            if block.order > self.truncation:
                raise ValueError(f"Component of order {block.order} exceeds truncation {self.truncation}")
            if block.order in seen_orders:
                raise ValueError(f"Component of order {block.order} listed twice")
            seen_orders.add(block.order)
            seen_indices: set[tuple[str, ...]] = set()
            for entry in block.entries:
                if len(entry.index) != block.order:
                    raise ValueError(f"Index {entry.index} does not have {block.order} sites")
                unknown = [site for site in entry.index if site not in position]
                if unknown:
                    raise ValueError(f"Unknown sites {unknown} in index {entry.index}")
                positions = [position[site] for site in entry.index]
                if positions != sorted(positions):
                    raise ValueError(f"Index {entry.index} is not sorted by grid order")
                if tuple(entry.index) in seen_indices:
                    raise ValueError(f"Index {entry.index} listed twice in the component of order {block.order}")
                seen_indices.add(tuple(entry.index))
        return self


@final
class Timing(BaseModel):
    model_config = ConfigDict(frozen=True)

    seconds: Final[float] # type: ignore[misc]


@final
class ReportFile(BaseModel):
    """
    On-disk form of a check result; everything except timing is a function of input bytes and flags.
    """
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    schema_version: int = SCHEMA_VERSION
    input_digest: Final[str] # type: ignore[misc]
    config: Final[CheckConfig] # type: ignore[misc]
    report: Final[CheckReport] # type: ignore[misc]
    timing: Final[Timing] # type: ignore[misc]


@final
class IdentityResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Final[str] # type: ignore[misc]
    cases: Final[int] # type: ignore[misc]
    max_error: Final[float] # type: ignore[misc]
    threshold: Final[float] # type: ignore[misc]
    passed: Final[bool] # type: ignore[misc]
