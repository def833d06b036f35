from collections.abc import Mapping, MutableMapping
from typing import Final, final, override

from moment_common.convention import SequenceRepository
from moment_common.errors import MissingInputError
from moment_common.model import ReportFile, SequenceFile
from moment_core.codec import digest, to_json_bytes


@final
class InMemorySequenceRepository(SequenceRepository):
    """
    In-memory implementation of the SequenceRepository interface.

    Keeps the encoded bytes of every file, so digests match what a file-backed repository would report.
    Suitable for testing.

    Attributes:
        _delegate: Encoded files by name
    """
    _delegate: Final[MutableMapping[str, bytes]]

    def __init__(self, delegate: Mapping[str, SequenceFile] | None = None):
        """
        Initialize the repository.

        Args:
            delegate: Optional initial files by name
        """
        self._delegate = {}
        for name, file in (delegate or {}).items():
            self._delegate[name] = to_json_bytes(file)

    def raw(self, name: str) -> bytes:
        """
        Raises:
            MissingInputError: If nothing is stored under the name
        """
        if name not in self._delegate:
            raise MissingInputError(name)
        return self._delegate[name]

    @override
    async def load_sequence(self, name: str) -> SequenceFile:
        """
        Retrieve a sequence file by name.

        Raises:
            MissingInputError: If nothing is stored under the name
            pydantic.ValidationError: If the stored bytes are not a valid sequence file
        """
        return SequenceFile.model_validate_json(self.raw(name))

    @override
    async def save_sequence(self, name: str, file: SequenceFile) -> None:
        self._delegate[name] = to_json_bytes(file)

    @override
    async def save_report(self, name: str, report: ReportFile) -> None:
        self._delegate[name] = to_json_bytes(report)

    @override
    async def digest(self, name: str) -> str:
        return digest(self.raw(name))

    @override
    async def exists(self, name: str) -> bool:
        return name in self._delegate
