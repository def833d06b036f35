import logging
from asyncio import to_thread
from pathlib import Path
from typing import Final, final, override

from pydantic import BaseModel

from moment_common.convention import SequenceRepository
from moment_common.errors import MissingInputError
from moment_common.model import ReportFile, SequenceFile
from moment_core.codec import digest, to_json_bytes

logger = logging.getLogger(__name__)


@final
class FileSequenceRepository(SequenceRepository):
    """
    Sequence and report files on the local file system.

    Names are paths relative to the root; absolute paths are used as given.
    """
    _root: Final[Path]

    def __init__(self, root: Path | None = None):
        self._root = Path.cwd() if root is None else root

    def _path(self, name: str) -> Path:
        return self._root / name

    async def _read(self, name: str) -> bytes:
        path = self._path(name)
        try:
            return await to_thread(path.read_bytes)
        except FileNotFoundError as e:
            raise MissingInputError(str(path)) from e

    async def _write(self, name: str, model: BaseModel) -> None:
        path = self._path(name)
        await to_thread(path.write_bytes, to_json_bytes(model))
        logger.debug("Wrote %s", path)

    @override
    async def load_sequence(self, name: str) -> SequenceFile:
        return SequenceFile.model_validate_json(await self._read(name))

    @override
    async def save_sequence(self, name: str, file: SequenceFile) -> None:
        await self._write(name, file)

    @override
    async def save_report(self, name: str, report: ReportFile) -> None:
        await self._write(name, report)

    @override
    async def digest(self, name: str) -> str:
        return digest(await self._read(name))

    @override
    async def exists(self, name: str) -> bool:
        return await to_thread(self._path(name).is_file)
