import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Self, final

from moment_common.errors import DegreeOverflowError, MomentError, OrderMismatchError
from moment_common.model import GridSpec

type Scalar = int | float | Fraction
type Index = tuple[int, ...]


def _is_finite(value: Scalar) -> bool:
    return not isinstance(value, float) or math.isfinite(value)


@final
@dataclass(frozen=True)
class DiscreteMeasure:
    masses: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        for mass in self.masses:
            if mass < 0 or not _is_finite(mass):
                raise MomentError(f"Measure masses must be finite and nonnegative, got {mass}")

    @property
    def num_sites(self) -> int:
        return len(self.masses)

    def total(self) -> Scalar:
        return sum(self.masses, start=0)


@final
@dataclass(frozen=True)
class PointConfiguration:
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        for count in self.counts:
            if not isinstance(count, int) or count < 0:
                raise MomentError(f"Configuration counts must be nonnegative integers, got {count!r}")

    @property
    def num_sites(self) -> int:
        return len(self.counts)

    @property
    def is_simple(self) -> bool:
        return all(count <= 1 for count in self.counts)

    def as_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.counts)


@final
@dataclass(frozen=True)
class SiteFunction:
    values: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        if not all(_is_finite(value) for value in self.values):
            raise MomentError("Site function values must be finite")

    @property
    def num_sites(self) -> int:
        return len(self.values)

    @property
    def is_nonnegative(self) -> bool:
        return all(value >= 0 for value in self.values)

    @property
    def is_capped(self) -> bool:
        """Nonnegative with sup norm at most 1."""
        return self.is_nonnegative and all(value <= 1 for value in self.values)

    @classmethod
    def indicator(cls, num_sites: int, sites: Iterable[int]) -> "SiteFunction":
        chosen = set(sites)
        return cls(tuple(1 if site in chosen else 0 for site in range(num_sites)))


@final
@dataclass(frozen=True)
class SymTensor:
    """
    Symmetric order-n array stored sparsely by canonical (sorted) multi-index.

    Zero entries are omitted. The value at an ordered tuple is the value at its sorted form.
    """
    order: int
    entries: Mapping[Index, Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.order < 0:
            raise MomentError(f"Tensor order must be nonnegative, got {self.order}")
        for index, value in self.entries.items():
            if len(index) != self.order:
                raise OrderMismatchError(len(index), self.order)
            if any(left > right for left, right in zip(index, index[1:])):
                raise MomentError(f"Tensor index {index} is not sorted")
            if not _is_finite(value):
                raise MomentError(f"Tensor entry at {index} is not finite")

    @classmethod
    def from_entries(cls, order: int, entries: Iterable[tuple[Sequence[int], Scalar]]) -> "SymTensor":
        """
        Build a tensor from (index, value) pairs in any index order, dropping zeros.

        Args:
            order: Tensor order
            entries: Pairs whose indices are sorted on the way in; later pairs overwrite earlier ones

        Returns:
            The canonical tensor
        """
        canonical: dict[Index, Scalar] = {}
        for index, value in entries:
            key = tuple(sorted(index))
            if value == 0:
                canonical.pop(key, None)
            else:
                canonical[key] = value
        return cls(order, canonical)

    @classmethod
    def scalar(cls, value: Scalar) -> "SymTensor":
        return cls(0, {(): value} if value != 0 else {})

    @classmethod
    def zero(cls, order: int) -> "SymTensor":
        return cls(order, {})

    @classmethod
    def delta(cls, index: Sequence[int]) -> "SymTensor":
        return cls(len(index), {tuple(sorted(index)): 1})

    def value(self, index: Sequence[int]) -> Scalar:
        return self.entries.get(tuple(sorted(index)), 0)

    def scalar_value(self) -> Scalar:
        if self.order != 0:
            raise OrderMismatchError(self.order, 0)
        return self.entries.get((), 0)

    @property
    def is_zero(self) -> bool:
        return not self.entries

    def scale(self, factor: Scalar) -> "SymTensor":
        if factor == 0:
            return SymTensor.zero(self.order)
        return SymTensor(self.order, {index: value * factor for index, value in self.entries.items()})

    def __add__(self, other: "SymTensor") -> "SymTensor":
        if other.order != self.order:
            raise OrderMismatchError(self.order, other.order)
        return SymTensor(self.order, accumulate(self.entries, other.entries.items()))

    def pointwise_product(self, other: "SymTensor") -> "SymTensor":
        """Entrywise product of two tensors of the same order."""
        if other.order != self.order:
            raise OrderMismatchError(self.order, other.order)
        return SymTensor.from_entries(
            self.order,
            ((index, value * other.entries[index]) for index, value in self.entries.items() if index in other.entries),
        )

    def __neg__(self) -> "SymTensor":
        return self.scale(-1)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        return self + (-other)

    def max_abs(self) -> float:
        return max((abs(float(value)) for value in self.entries.values()), default=0.0)


def accumulate(base: Mapping[Index, Scalar], additions: Iterable[tuple[Index, Scalar]]) -> dict[Index, Scalar]:
    """Add (index, value) pairs onto a copy of base, dropping entries that cancel to zero."""
    result: dict[Index, Scalar] = dict(base)
    for index, value in additions:
        total = result.get(index, 0) + value
        if total == 0:
            result.pop(index, None)
        else:
            result[index] = total
    return result


@final
@dataclass(frozen=True)
class CoeffSequence:
    """
    Finitely supported coefficient sequence (g^(0), g^(1), ...) with an explicit truncation degree.

    Attributes:
        components: Order -> tensor of that order; missing orders are zero
        degree: Truncation degree; no component above it is stored
        overflow: Set when a producing operation discarded nonzero components above the degree
    """
    components: Mapping[int, SymTensor]
    degree: int
    overflow: bool = False

    def __post_init__(self) -> None:
        for order, tensor in self.components.items():
            if tensor.order != order:
                raise OrderMismatchError(tensor.order, order)
            if order > self.degree:
                raise DegreeOverflowError(order, self.degree, "coefficient sequence component")

    @classmethod
    def unit(cls) -> "CoeffSequence":
        return cls({0: SymTensor.scalar(1)}, 0)

    @classmethod
    def of(cls, tensors: Iterable[SymTensor], degree: int | None = None) -> "CoeffSequence":
        components: dict[int, SymTensor] = {}
        for tensor in tensors:
            components[tensor.order] = components[tensor.order] + tensor if tensor.order in components else tensor
        top = max(components, default=0)
        return cls(
            {order: tensor for order, tensor in components.items() if not tensor.is_zero},
            top if degree is None else degree,
        )

    def component(self, order: int) -> SymTensor:
        return self.components.get(order, SymTensor.zero(order))

    def items(self) -> Iterator[tuple[int, SymTensor]]:
        for order in sorted(self.components):
            yield order, self.components[order]

    @property
    def support_degree(self) -> int:
        """Largest order carrying a nonzero component, -1 for the zero sequence."""
        return max((order for order, tensor in self.components.items() if not tensor.is_zero), default=-1)


@dataclass(frozen=True)
class TruncatedSequence:
    """
    Components (t^(0), ..., t^(D)) on a grid, one symmetric tensor per order.

    Attributes:
        grid: The grid the components live on
        components: One tensor per order 0..D
        nonneg: When set, every stored entry must be nonnegative
    """
    grid: GridSpec
    components: tuple[SymTensor, ...]
    nonneg: bool = False

    def __post_init__(self) -> None:
        if not self.components:
            raise MomentError("A sequence needs at least its order-0 component")
        for order, tensor in enumerate(self.components):
            if tensor.order != order:
                raise OrderMismatchError(tensor.order, order)
            for index, value in tensor.entries.items():
                if index and index[-1] >= self.grid.num_sites:
                    raise MomentError(f"Index {index} refers to a site outside the grid")
                if self.nonneg and value < 0:
                    raise MomentError(f"Entry {value} at {index} is negative in a nonnegative sequence")

    @property
    def truncation(self) -> int:
        return len(self.components) - 1

    @property
    def num_sites(self) -> int:
        return self.grid.num_sites

    def component(self, order: int) -> SymTensor:
        if order > self.truncation:
            raise DegreeOverflowError(order, self.truncation, "component lookup")
        return self.components[order]

    def truncate(self, degree: int) -> Self:
        if degree > self.truncation:
            raise DegreeOverflowError(degree, self.truncation, "truncation")
        return type(self)(self.grid, self.components[:degree + 1], self.nonneg)

    def replace_component(self, tensor: SymTensor) -> Self:
        components = list(self.components)
        components[tensor.order] = tensor
        return type(self)(self.grid, tuple(components), False)

    @classmethod
    def from_tensors(cls, grid: GridSpec, tensors: Iterable[SymTensor], truncation: int, nonneg: bool = False) -> Self:
        components: list[SymTensor] = [SymTensor.zero(order) for order in range(truncation + 1)]
        for tensor in tensors:
            if tensor.order > truncation:
                raise DegreeOverflowError(tensor.order, truncation, "sequence construction")
            components[tensor.order] = components[tensor.order] + tensor
        return cls(grid, tuple(components), nonneg)


@final
@dataclass(frozen=True)
class MomentSequence(TruncatedSequence):
    pass


@final
@dataclass(frozen=True)
class CorrelationSequence(TruncatedSequence):
    pass


@final
@dataclass(frozen=True)
class Composition:
    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.parts or any(part < 1 for part in self.parts):
            raise MomentError(f"Composition parts must be positive, got {self.parts}")

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def k(self) -> int:
        return len(self.parts)


@final
@dataclass(frozen=True)
class SetPartition:
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        covered = sorted(element for block in self.blocks for element in block)
        if not all(self.blocks) or covered != list(range(1, len(covered) + 1)):
            raise MomentError(f"Blocks {self.blocks} are not a set partition of 1..n")

    @property
    def n(self) -> int:
        return sum(len(block) for block in self.blocks)

