"""
Conversion between in-memory sequences and their versioned file form.
"""
import hashlib
from fractions import Fraction

from pydantic import BaseModel

from moment_common.errors import BasisMismatchError
from moment_common.model import Basis, ComponentBlock, Provenance, SequenceFile, SparseEntry
from moment_common.tensor import CorrelationSequence, MomentSequence, Scalar, SymTensor, TruncatedSequence


def _file_value(value: Scalar) -> int | float:
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else float(value)
    return value


def basis_of(sequence: TruncatedSequence) -> Basis:
    return Basis.CORRELATION if isinstance(sequence, CorrelationSequence) else Basis.MOMENT


def encode(sequence: TruncatedSequence, provenance: Provenance | None = None) -> SequenceFile:
    """Sparse file form of a sequence; rational entries are written as floats unless they are integers."""
    sites = sequence.grid.sites
    blocks = [
        ComponentBlock(
            order=order,
            entries=tuple(
                SparseEntry(index=tuple(sites[site] for site in index), value=_file_value(value))
                for index, value in sorted(tensor.entries.items())
            ),
        )
        for order, tensor in enumerate(sequence.components)
    ]
    return SequenceFile(
        grid=sequence.grid,
        basis=basis_of(sequence),
        truncation=sequence.truncation,
        components=tuple(blocks),
        provenance=provenance,
    )


def decode(file: SequenceFile) -> MomentSequence | CorrelationSequence:
    position = {site: i for i, site in enumerate(file.grid.sites)}
    tensors = [
        SymTensor.from_entries(
            block.order, ((tuple(position[site] for site in entry.index), entry.value) for entry in block.entries)
        )
        for block in file.components
    ]
    match file.basis:
        case Basis.MOMENT:
            return MomentSequence.from_tensors(file.grid, tensors, file.truncation)
        case Basis.CORRELATION:
            return CorrelationSequence.from_tensors(file.grid, tensors, file.truncation)


def decode_as(file: SequenceFile, basis: Basis) -> MomentSequence | CorrelationSequence:
    """
    Raises:
        BasisMismatchError: If the file carries the other basis tag
    """
    if file.basis != basis:
        raise BasisMismatchError(f"Expected a {basis} sequence, the file is tagged {file.basis}")
    return decode(file)


def to_json_bytes(model: BaseModel) -> bytes:
    """UTF-8 JSON, two-space indent, fields in declaration order, trailing newline."""
    return (model.model_dump_json(indent=2) + "\n").encode("utf-8")


def digest(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def decode_moments(file: SequenceFile) -> MomentSequence:
    sequence = decode_as(file, Basis.MOMENT)
    if not isinstance(sequence, MomentSequence):
        raise BasisMismatchError(f"Expected a moment sequence, got {type(sequence).__name__}")
    return sequence


def decode_correlations(file: SequenceFile) -> CorrelationSequence:
    sequence = decode_as(file, Basis.CORRELATION)
    if not isinstance(sequence, CorrelationSequence):
        raise BasisMismatchError(f"Expected a correlation sequence, got {type(sequence).__name__}")
    return sequence
